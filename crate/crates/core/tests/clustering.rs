use std::collections::{HashMap, HashSet};

use panoptic_pillars::affinity::{generate_affinity_labels, TraversalOrder};
use panoptic_pillars::clustering::{
    propagate_global, propagate_global_iterative, propagate_local, thing_ids, ClusteringParams,
};
use panoptic_pillars::model::{ClassTable, Grid, GridSpec, PanopticLabel};
use panoptic_pillars::pillarizer::semantic_of;
use proptest::prelude::*;

fn cart(h: usize, w: usize) -> GridSpec {
    GridSpec::cartesian((0.0, w as f64), (0.0, h as f64), h, w, ClassTable::nuscenes()).unwrap()
}

fn polar(h: usize, w: usize) -> GridSpec {
    GridSpec::polar((0.0, h as f64), h, w, ClassTable::nuscenes()).unwrap()
}

fn dist(p: (usize, usize), q: (usize, usize), w: usize, wrap: bool) -> usize {
    let db = p.1.abs_diff(q.1);
    p.0.abs_diff(q.0) + if wrap { db.min(w - db) } else { db }
}

fn visit_order(h: usize, w: usize, order: TraversalOrder) -> Vec<(usize, usize)> {
    (0..h)
        .flat_map(|a| {
            let cols: Vec<usize> = match order {
                TraversalOrder::Alternating if a % 2 == 1 => (0..w).rev().collect(),
                _ => (0..w).collect(),
            };
            cols.into_iter().map(move |b| (a, b))
        })
        .collect()
}

/// Local clustering with an unbounded list and an explicit row filter.
fn naive_local(sem: &Grid<u16>, aff: &Grid<u8>, spec: &GridSpec, p: &ClusteringParams) -> (Vec<u32>, usize) {
    let (h, w) = (sem.h(), sem.w());
    let mut out = vec![0u32; h * w];
    let mut stored: Vec<(usize, (usize, usize), u16, u32)> = Vec::new();
    let mut counter: HashMap<u16, u32> = HashMap::new();
    let mut fallbacks = 0;
    for (t, (a, b)) in visit_order(h, w, p.order).into_iter().enumerate() {
        let s = sem.get(a, b);
        if s == 0 {
            continue;
        }
        if !spec.classes().is_thing(s) {
            out[a * w + b] = s as u32 * 1000;
            continue;
        }
        let found = stored
            .iter()
            .filter(|e| e.2 == s && e.1 .0 + p.k >= a)
            .min_by_key(|e| (dist(e.1, (a, b), w, p.wrap), e.0))
            .map(|e| e.3);
        let label = match (aff.get(a, b), found) {
            (1, Some(l)) => l,
            (flag, _) => {
                fallbacks += flag as usize;
                let c = counter.entry(s).or_default();
                *c += 1;
                s as u32 * 1000 + *c
            }
        };
        out[a * w + b] = label;
        stored.push((t, (a, b), s, label));
    }
    (out, fallbacks)
}

/// Nearest-seed assignment written directly from the definition.
fn naive_global(sem: &Grid<u16>, aff: &Grid<u8>, spec: &GridSpec, p: &ClusteringParams) -> Vec<u32> {
    let (h, w) = (sem.h(), sem.w());
    let mut out = vec![0u32; h * w];
    let mut seeds: Vec<((usize, usize), u16, u32)> = Vec::new();
    let mut counter: HashMap<u16, u32> = HashMap::new();
    let cells = visit_order(h, w, p.order);
    let mut next = |s: u16| {
        let c = counter.entry(s).or_default();
        *c += 1;
        s as u32 * 1000 + *c
    };
    for &(a, b) in &cells {
        let s = sem.get(a, b);
        if s != 0 && !spec.classes().is_thing(s) {
            out[a * w + b] = s as u32 * 1000;
        } else if spec.classes().is_thing(s) && aff.get(a, b) == 0 {
            let l = next(s);
            out[a * w + b] = l;
            seeds.push(((a, b), s, l));
        }
    }
    for &(a, b) in &cells {
        let s = sem.get(a, b);
        if !spec.classes().is_thing(s) || aff.get(a, b) == 0 {
            continue;
        }
        let l = match seeds.iter().filter(|e| e.1 == s).min_by_key(|e| dist(e.0, (a, b), w, p.wrap)) {
            Some(e) => e.2,
            None => {
                let l = next(s);
                seeds.push(((a, b), s, l));
                l
            }
        };
        out[a * w + b] = l;
    }
    out
}

fn rasters() -> impl Strategy<Value = (Grid<u16>, Grid<u8>, bool, bool, usize)> {
    (1usize..=10, 1usize..=10).prop_flat_map(|(h, w)| {
        let cell = prop_oneof![Just(0u16), Just(11), Just(4), Just(4), Just(7), Just(7)];
        (
            prop::collection::vec(cell, h * w),
            prop::collection::vec(prop::bool::weighted(0.7), h * w),
            any::<bool>(),
            any::<bool>(),
            1usize..=12,
        )
            .prop_map(move |(s, a, periodic, alt, k)| {
                (
                    Grid::from_vec(h, w, s).unwrap(),
                    Grid::from_vec(h, w, a.into_iter().map(u8::from).collect()).unwrap(),
                    periodic,
                    alt,
                    k,
                )
            })
    })
}

fn setup(sem: &Grid<u16>, periodic: bool, alt: bool, k: usize) -> (GridSpec, ClusteringParams) {
    let spec = if periodic { polar(sem.h(), sem.w()) } else { cart(sem.h(), sem.w()) };
    let mut params = ClusteringParams::for_grid(&spec).with_k(k);
    if alt {
        params.order = TraversalOrder::Alternating;
    }
    (spec, params)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn local_matches_naive((sem, aff, periodic, alt, k) in rasters()) {
        let (spec, params) = setup(&sem, periodic, alt, k);
        let got = propagate_local(&sem, &aff, &spec, &params).unwrap();
        let (want, fallbacks) = naive_local(&sem, &aff, &spec, &params);
        let raw: Vec<u32> = got.panoptic.as_slice().iter().map(|l| l.0).collect();
        prop_assert_eq!(raw, want);
        prop_assert_eq!(got.fallbacks, fallbacks);
    }

    #[test]
    fn global_matches_naive((sem, aff, periodic, alt, k) in rasters()) {
        let (spec, params) = setup(&sem, periodic, alt, k);
        let got = propagate_global(&sem, &aff, &spec, &params).unwrap();
        let raw: Vec<u32> = got.panoptic.as_slice().iter().map(|l| l.0).collect();
        prop_assert_eq!(raw, naive_global(&sem, &aff, &spec, &params));
    }

    #[test]
    fn class_consistency_and_seed_count((sem, aff, periodic, alt, k) in rasters()) {
        let (spec, params) = setup(&sem, periodic, alt, k);
        for out in [
            propagate_local(&sem, &aff, &spec, &params).unwrap(),
            propagate_global(&sem, &aff, &spec, &params).unwrap(),
            propagate_global_iterative(&sem, &aff, &spec, &params).unwrap(),
        ] {
            prop_assert_eq!(&semantic_of(&out.panoptic), &sem);
            let zeros = sem.as_slice().iter().zip(aff.as_slice())
                .filter(|(&s, &a)| spec.classes().is_thing(s) && a == 0).count();
            prop_assert_eq!(out.seeds, zeros);
            prop_assert_eq!(thing_ids(&out.panoptic, spec.classes()).len(), out.seeds + out.fallbacks);
        }
    }

    #[test]
    fn identical_inputs_identical_outputs((sem, aff, periodic, alt, k) in rasters()) {
        let (spec, params) = setup(&sem, periodic, alt, k);
        let a = propagate_global_iterative(&sem, &aff, &spec, &params).unwrap();
        let b = propagate_global_iterative(&sem, &aff, &spec, &params).unwrap();
        prop_assert_eq!(a.panoptic, b.panoptic);
    }
}

/// Instance A: column 0, rows 0..=4. Instance B: row 4, columns 3..=5.
/// Pillar (4,0) is 4 from A's seed and 3 from B's.
fn adversarial() -> (GridSpec, Grid<PanopticLabel>) {
    let spec = cart(6, 7);
    let mut g = Grid::filled(6, 7, PanopticLabel(11000));
    for a in 0..5 {
        g.set(a, 0, PanopticLabel(4001));
    }
    for b in 3..6 {
        g.set(4, b, PanopticLabel(4002));
    }
    (spec, g)
}

#[test]
fn adversarial_pair_splits_the_clusterers() {
    let (spec, truth) = adversarial();
    let params = ClusteringParams::for_grid(&spec);
    let aff = generate_affinity_labels(&truth, &spec, params.order).unwrap();
    let sem = semantic_of(&truth);
    let local = propagate_local(&sem, &aff, &spec, &params).unwrap();
    assert_eq!(local.panoptic, truth);
    let global = propagate_global(&sem, &aff, &spec, &params).unwrap();
    assert_eq!(global.panoptic.get(4, 0), PanopticLabel(4002));
    let iterative = propagate_global_iterative(&sem, &aff, &spec, &params).unwrap();
    assert_eq!(iterative.panoptic, truth);
}

#[test]
fn single_iteration_is_one_reassignment() {
    let (spec, truth) = adversarial();
    let mut params = ClusteringParams::for_grid(&spec);
    params.max_iters = 1;
    let aff = generate_affinity_labels(&truth, &spec, params.order).unwrap();
    let out = propagate_global_iterative(&semantic_of(&truth), &aff, &spec, &params).unwrap();
    assert_eq!(out.panoptic, truth);
}

#[test]
fn stable_assignment_is_a_fixed_point() {
    let spec = cart(4, 8);
    let mut g = Grid::filled(4, 8, PanopticLabel(0));
    for a in 0..4 {
        g.set(a, 0, PanopticLabel(4001));
        g.set(a, 7, PanopticLabel(4002));
    }
    let params = ClusteringParams::for_grid(&spec);
    let aff = generate_affinity_labels(&g, &spec, params.order).unwrap();
    let sem = semantic_of(&g);
    let global = propagate_global(&sem, &aff, &spec, &params).unwrap();
    let iterative = propagate_global_iterative(&sem, &aff, &spec, &params).unwrap();
    assert_eq!(global.panoptic, g);
    assert_eq!(iterative.panoptic, g);
}

/// Tall thin instances with gaps: a short window splits them where a long
/// one does not.
#[test]
fn longer_memory_never_creates_more_instances() {
    let spec = cart(40, 30);
    let mut g = Grid::filled(40, 30, PanopticLabel(0));
    for (i, b) in [2usize, 9, 16, 23].into_iter().enumerate() {
        for a in 0..40 {
            if a % 4 != 3 {
                g.set(a, b, PanopticLabel(4001 + i as u32));
            }
        }
    }
    let aff = generate_affinity_labels(&g, &spec, TraversalOrder::Raster).unwrap();
    let sem = semantic_of(&g);
    let count = |k: usize| {
        let params = ClusteringParams::for_grid(&spec).with_k(k);
        let out = propagate_local(&sem, &aff, &spec, &params).unwrap();
        thing_ids(&out.panoptic, spec.classes()).len()
    };
    assert_eq!(count(15), 4);
    assert_eq!(count(40), 4);
    // k = 1 cannot bridge a gap row: the first bar reached after each gap
    // restarts and the other bars of that row chain onto it
    assert_eq!(count(1), 4 + 9);
    let counts: Vec<usize> = (1..=6).map(count).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
}

#[test]
fn full_memory_matches_global_on_single_column_instances() {
    let spec = cart(12, 12);
    let mut g = Grid::filled(12, 12, PanopticLabel(0));
    for a in 0..5 {
        g.set(a, 1, PanopticLabel(4001));
        g.set(a + 6, 8, PanopticLabel(4002));
    }
    let params = ClusteringParams::for_grid(&spec).with_k(12);
    let aff = generate_affinity_labels(&g, &spec, params.order).unwrap();
    let sem = semantic_of(&g);
    let local = propagate_local(&sem, &aff, &spec, &params).unwrap();
    let global = propagate_global(&sem, &aff, &spec, &params).unwrap();
    let partition = |grid: &Grid<PanopticLabel>| {
        let mut groups: HashMap<u32, Vec<usize>> = HashMap::new();
        for (i, l) in grid.as_slice().iter().enumerate() {
            groups.entry(l.0).or_default().push(i);
        }
        groups.into_values().collect::<HashSet<_>>()
    };
    assert_eq!(partition(&local.panoptic), partition(&global.panoptic));
}
