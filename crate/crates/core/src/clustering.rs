//! Instance-id propagation from a semantic raster and a binary affinity raster.
//!
//! [`propagate_local`] sweeps the grid once in traversal order. Thing pillars
//! with affinity 0 open a new instance; thing pillars with affinity 1 join the
//! same-class instance whose stored pillar is nearest (Manhattan distance in
//! pillar units), searching only the last `k` rows of the sweep. Every visited
//! thing pillar is remembered, so elongated instances chain row by row.
//!
//! [`propagate_global`] and [`propagate_global_iterative`] are the ablation
//! baselines: nearest seed over the whole grid, optionally refined by moving
//! each cluster centre to the mean of its members.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::affinity::TraversalOrder;
use crate::error::{Error, Result};
use crate::model::{ClassId, ClassTable, Grid, GridSpec, PanopticLabel, PillarIndex, MAX_INSTANCE};

pub const DEFAULT_K: usize = 15;
pub const DEFAULT_MAX_ITERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clusterer {
    #[default]
    Local,
    Global,
    GlobalIter,
}

/// What to do with an affinity-1 pillar that finds no same-class instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    #[default]
    NewInstance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringParams {
    /// Rows of memory kept behind the current one.
    pub k: usize,
    /// Treat the b axis as periodic when measuring distances.
    pub wrap: bool,
    pub fallback: Fallback,
    pub order: TraversalOrder,
    /// Iteration budget for [`propagate_global_iterative`].
    pub max_iters: usize,
}

impl ClusteringParams {
    pub fn for_grid(spec: &GridSpec) -> Self {
        ClusteringParams {
            k: DEFAULT_K,
            wrap: spec.is_periodic(),
            fallback: Fallback::NewInstance,
            order: TraversalOrder::Raster,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[inline]
fn axis_b_distance(bp: u32, bq: u32, w: u32, wrap: bool) -> u32 {
    let d = bp.abs_diff(bq);
    if wrap {
        d.min(w - d)
    } else {
        d
    }
}

/// Manhattan distance in pillar units; the b axis wraps when `wrap` is set.
#[inline]
pub fn manhattan(p: PillarIndex, q: PillarIndex, w: usize, wrap: bool) -> u32 {
    p.a.abs_diff(q.a) + axis_b_distance(p.b, q.b, w as u32, wrap)
}

pub fn pillar_distance(p: PillarIndex, q: PillarIndex, spec: &GridSpec, params: &ClusteringParams) -> u32 {
    manhattan(p, q, spec.w(), params.wrap)
}

/// One remembered pillar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryEntry {
    pub label: PanopticLabel,
    pub class_id: ClassId,
    pub pillar: PillarIndex,
    /// Traversal position; breaks distance ties.
    pub t: u32,
}

/// Visited thing pillars of the last `k` rows plus the current one, bucketed
/// by class. Buckets stay in traversal order.
#[derive(Debug, Clone)]
pub struct ColumnMemory {
    k: usize,
    buckets: Vec<VecDeque<MemoryEntry>>,
}

impl ColumnMemory {
    pub fn new(k: usize, num_classes: u16) -> Self {
        ColumnMemory {
            k,
            buckets: vec![VecDeque::new(); num_classes as usize + 1],
        }
    }

    pub fn store(&mut self, entry: MemoryEntry) {
        self.buckets[entry.class_id as usize].push_back(entry);
    }

    /// Nearest same-class entry; ties go to the earliest traversal position.
    pub fn nearest(&self, class_id: ClassId, p: PillarIndex, w: usize, wrap: bool) -> Option<&MemoryEntry> {
        let mut best: Option<(&MemoryEntry, u32)> = None;
        for e in &self.buckets[class_id as usize] {
            let d = manhattan(p, e.pillar, w, wrap);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((e, d));
                // nothing can beat an adjacent pillar reached first
                if d <= 1 {
                    break;
                }
            }
        }
        best.map(|(e, _)| e)
    }

    /// Called after row `a` is complete: keeps rows `a - k + 1 ..= a`.
    pub fn finish_row(&mut self, a: usize) {
        let cutoff = (a + 1).saturating_sub(self.k) as u32;
        for bucket in &mut self.buckets {
            while bucket.front().is_some_and(|e| e.pillar.a < cutoff) {
                bucket.pop_front();
            }
        }
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn oldest_row(&self) -> Option<u32> {
        self.buckets.iter().filter_map(|b| b.front()).map(|e| e.pillar.a).min()
    }
}

/// Per-class instance counters.
#[derive(Debug, Clone)]
pub struct InstanceCounters {
    counts: Vec<u32>,
}

impl InstanceCounters {
    pub fn new(num_classes: u16) -> Self {
        InstanceCounters {
            counts: vec![0; num_classes as usize + 1],
        }
    }

    pub fn next(&mut self, class_id: ClassId) -> Result<PanopticLabel> {
        let c = &mut self.counts[class_id as usize];
        if *c >= MAX_INSTANCE {
            return Err(Error::InstanceCapacity {
                class_id,
                index: *c + 1,
            });
        }
        *c += 1;
        PanopticLabel::new(class_id, *c)
    }

    pub fn count(&self, class_id: ClassId) -> u32 {
        self.counts[class_id as usize]
    }
}

/// Output panoptic raster plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Propagation {
    pub panoptic: Grid<PanopticLabel>,
    /// Thing pillars with affinity 0.
    pub seeds: usize,
    /// Affinity-1 pillars that found no same-class instance and started one.
    pub fallbacks: usize,
}

fn check_inputs(sem: &Grid<ClassId>, aff: &Grid<u8>, spec: &GridSpec, params: &ClusteringParams) -> Result<()> {
    params.validate()?;
    sem.check_shape(spec.h(), spec.w())?;
    aff.check_shape(spec.h(), spec.w())?;
    let classes = spec.classes();
    for &c in sem.as_slice() {
        classes.check_class(c as u32)?;
    }
    if let Some(&v) = aff.as_slice().iter().find(|&&v| v > 1) {
        return Err(Error::InvalidInput(format!("affinity value {v} is not binary")));
    }
    Ok(())
}

pub fn propagate_local(
    sem: &Grid<ClassId>,
    aff: &Grid<u8>,
    spec: &GridSpec,
    params: &ClusteringParams,
) -> Result<Propagation> {
    check_inputs(sem, aff, spec, params)?;
    let (h, w) = (spec.h(), spec.w());
    let classes = spec.classes();
    let mut out = Grid::filled(h, w, PanopticLabel::IGNORE);
    let mut counters = InstanceCounters::new(classes.num_classes());
    let mut memory = ColumnMemory::new(params.k, classes.num_classes());
    let (mut seeds, mut fallbacks) = (0, 0);
    let sem_cells = sem.as_slice();
    let aff_cells = aff.as_slice();

    for a in 0..h {
        for i in 0..w {
            let b = params.order.column(a, i, w);
            let s = sem_cells[a * w + b];
            if s == 0 {
                continue;
            }
            if !classes.is_thing(s) {
                out.set(a, b, PanopticLabel::stuff(s));
                continue;
            }
            let pillar = PillarIndex::new(a, b);
            let label = if aff_cells[a * w + b] == 0 {
                seeds += 1;
                counters.next(s)?
            } else {
                match memory.nearest(s, pillar, w, params.wrap) {
                    Some(e) => e.label,
                    None => {
                        fallbacks += 1;
                        counters.next(s)?
                    }
                }
            };
            out.set(a, b, label);
            memory.store(MemoryEntry {
                label,
                class_id: s,
                pillar,
                t: (a * w + i) as u32,
            });
        }
        memory.finish_row(a);
    }
    Ok(Propagation {
        panoptic: out,
        seeds,
        fallbacks,
    })
}

struct Cluster {
    label: PanopticLabel,
    class_id: ClassId,
    seed: PillarIndex,
}

struct GlobalState {
    prop: Propagation,
    clusters: Vec<Cluster>,
    /// Affinity-1 thing pillars in traversal order.
    members: Vec<PillarIndex>,
    /// Set on pillars that founded a cluster (seeds and fallbacks).
    founders: Vec<bool>,
}

fn global_pass(sem: &Grid<ClassId>, aff: &Grid<u8>, spec: &GridSpec, params: &ClusteringParams) -> Result<GlobalState> {
    check_inputs(sem, aff, spec, params)?;
    let (h, w) = (spec.h(), spec.w());
    let classes = spec.classes();
    let mut out = Grid::filled(h, w, PanopticLabel::IGNORE);
    let mut counters = InstanceCounters::new(classes.num_classes());
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes.num_classes() as usize + 1];
    let mut members = Vec::new();
    let mut founders = vec![false; h * w];

    let visit = |f: &mut dyn FnMut(usize, usize) -> Result<()>| -> Result<()> {
        for a in 0..h {
            for i in 0..w {
                f(a, params.order.column(a, i, w))?;
            }
        }
        Ok(())
    };

    let mut seeds = 0;
    visit(&mut |a, b| {
        let s = sem.get(a, b);
        if s == 0 {
            return Ok(());
        }
        if !classes.is_thing(s) {
            out.set(a, b, PanopticLabel::stuff(s));
        } else if aff.get(a, b) == 0 {
            let label = counters.next(s)?;
            out.set(a, b, label);
            by_class[s as usize].push(clusters.len());
            clusters.push(Cluster {
                label,
                class_id: s,
                seed: PillarIndex::new(a, b),
            });
            founders[a * w + b] = true;
            seeds += 1;
        } else {
            members.push(PillarIndex::new(a, b));
        }
        Ok(())
    })?;

    let mut fallbacks = 0;
    for &p in &members {
        let s = sem.at(p);
        let nearest = by_class[s as usize]
            .iter()
            .map(|&ci| (ci, manhattan(p, clusters[ci].seed, w, params.wrap)))
            .min_by_key(|&(ci, d)| (d, ci));
        let label = match nearest {
            Some((ci, _)) => clusters[ci].label,
            None => {
                let label = counters.next(s)?;
                by_class[s as usize].push(clusters.len());
                clusters.push(Cluster {
                    label,
                    class_id: s,
                    seed: p,
                });
                founders[p.a as usize * w + p.b as usize] = true;
                fallbacks += 1;
                label
            }
        };
        out.set(p.a as usize, p.b as usize, label);
    }
    Ok(GlobalState {
        prop: Propagation {
            panoptic: out,
            seeds,
            fallbacks,
        },
        clusters,
        members,
        founders,
    })
}

/// Every affinity-1 thing pillar joins the nearest same-class seed anywhere
/// in the grid.
pub fn propagate_global(
    sem: &Grid<ClassId>,
    aff: &Grid<u8>,
    spec: &GridSpec,
    params: &ClusteringParams,
) -> Result<Propagation> {
    global_pass(sem, aff, spec, params).map(|g| g.prop)
}

/// [`propagate_global`], then alternately recompute cluster centres (circular
/// mean along a periodic b axis) and reassign affinity-1 pillars until nothing
/// moves or `max_iters` reassignments have run.
pub fn propagate_global_iterative(
    sem: &Grid<ClassId>,
    aff: &Grid<u8>,
    spec: &GridSpec,
    params: &ClusteringParams,
) -> Result<Propagation> {
    let GlobalState {
        mut prop,
        clusters,
        members,
        founders,
    } = global_pass(sem, aff, spec, params)?;
    let w = spec.w();
    let num_classes = spec.classes().num_classes() as usize;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes + 1];
    for (ci, c) in clusters.iter().enumerate() {
        by_class[c.class_id as usize].push(ci);
    }
    let slot_of = |label: PanopticLabel| clusters.iter().position(|c| c.label == label);
    let mut assignment: Vec<usize> = members
        .iter()
        .map(|&p| slot_of(prop.panoptic.at(p)).expect("member label belongs to a cluster"))
        .collect();

    for _ in 0..params.max_iters {
        let mut acc = vec![CenterAcc::default(); clusters.len()];
        for (ci, c) in clusters.iter().enumerate() {
            acc[ci].add(c.seed, w);
        }
        for (&p, &ci) in members.iter().zip(&assignment) {
            if !founders[p.a as usize * w + p.b as usize] {
                acc[ci].add(p, w);
            }
        }
        let centers: Vec<(f64, f64)> = acc.iter().map(|a| a.center(w, params.wrap)).collect();

        let mut changed = false;
        for (&p, slot) in members.iter().zip(assignment.iter_mut()) {
            if founders[p.a as usize * w + p.b as usize] {
                continue;
            }
            let s = sem.at(p);
            let best = by_class[s as usize]
                .iter()
                .copied()
                .map(|ci| (ci, center_distance(p, centers[ci], w, params.wrap)))
                .fold(None::<(usize, f64)>, |best, (ci, d)| match best {
                    Some((_, bd)) if bd <= d => best,
                    _ => Some((ci, d)),
                })
                .map(|(ci, _)| ci)
                .expect("class has at least one cluster");
            if best != *slot {
                *slot = best;
                changed = true;
            }
        }
        for (&p, &ci) in members.iter().zip(&assignment) {
            prop.panoptic.set(p.a as usize, p.b as usize, clusters[ci].label);
        }
        if !changed {
            break;
        }
    }
    Ok(prop)
}

#[derive(Debug, Clone, Copy, Default)]
struct CenterAcc {
    n: f64,
    sum_a: f64,
    sum_b: f64,
    sum_cos: f64,
    sum_sin: f64,
}

impl CenterAcc {
    fn add(&mut self, p: PillarIndex, w: usize) {
        let phi = p.b as f64 * TAU / w as f64;
        self.n += 1.0;
        self.sum_a += p.a as f64;
        self.sum_b += p.b as f64;
        self.sum_cos += phi.cos();
        self.sum_sin += phi.sin();
    }

    fn center(&self, w: usize, wrap: bool) -> (f64, f64) {
        let ca = self.sum_a / self.n;
        let arith = self.sum_b / self.n;
        if !wrap || self.sum_cos.hypot(self.sum_sin) < 1e-9 * self.n {
            return (ca, arith);
        }
        let phi = crate::model::normalize_angle(self.sum_sin.atan2(self.sum_cos));
        (ca, phi * w as f64 / TAU)
    }
}

fn center_distance(p: PillarIndex, (ca, cb): (f64, f64), w: usize, wrap: bool) -> f64 {
    let da = (p.a as f64 - ca).abs();
    let mut db = (p.b as f64 - cb).abs();
    if wrap {
        db = db.min(w as f64 - db);
    }
    da + db
}

/// Dispatches on the clusterer choice.
pub fn propagate(
    clusterer: Clusterer,
    sem: &Grid<ClassId>,
    aff: &Grid<u8>,
    spec: &GridSpec,
    params: &ClusteringParams,
) -> Result<Propagation> {
    match clusterer {
        Clusterer::Local => propagate_local(sem, aff, spec, params),
        Clusterer::Global => propagate_global(sem, aff, spec, params),
        Clusterer::GlobalIter => propagate_global_iterative(sem, aff, spec, params),
    }
}

/// Thing instance ids present in a raster, in first-seen row-major order.
pub fn thing_ids(panoptic: &Grid<PanopticLabel>, classes: &ClassTable) -> Vec<PanopticLabel> {
    let mut seen = std::collections::HashSet::new();
    panoptic
        .as_slice()
        .iter()
        .copied()
        .filter(|l| !l.is_ignore() && classes.is_thing(l.class_id()) && seen.insert(*l))
        .collect()
}
