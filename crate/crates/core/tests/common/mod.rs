//! Brute-force oracles shared by the integration tests. Nothing here calls the
//! library's binning, voting or matching code.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;

use panoptic_pillars::model::{ClassTable, GridMode, GridSpec, PanopticLabel, Point};

/// Pillar key of a point by direct arithmetic on the grid bounds.
pub fn oracle_pillar(p: &Point, spec: &GridSpec) -> (usize, usize) {
    let (h, w) = (spec.h() as f64, spec.w() as f64);
    let (a_min, a_max) = spec.a_bounds();
    let (pa, pb, b_min, b_max) = match spec.mode() {
        GridMode::Cartesian => {
            let (b_min, b_max) = spec.b_bounds();
            (p.y as f64, p.x as f64, b_min, b_max)
        }
        GridMode::Polar => {
            let (x, y) = (p.x as f64, p.y as f64);
            let mut t = y.atan2(x);
            if t < 0.0 {
                t += TAU;
            }
            if t >= TAU {
                t -= TAU;
            }
            ((x * x + y * y).sqrt(), t, 0.0, TAU)
        }
    };
    let clamp = |v: f64, n: f64| v.floor().max(0.0).min(n - 1.0) as usize;
    (
        clamp((pa - a_min) / (a_max - a_min) * h, h),
        clamp((pb - b_min) / (b_max - b_min) * w, w),
    )
}

/// Per-pillar label counts.
pub fn recount(points: &[Point], labels: &[PanopticLabel], spec: &GridSpec) -> HashMap<(usize, usize), BTreeMap<u32, usize>> {
    let mut m: HashMap<(usize, usize), BTreeMap<u32, usize>> = HashMap::new();
    for (p, l) in points.iter().zip(labels) {
        *m.entry(oracle_pillar(p, spec)).or_default().entry(l.0).or_default() += 1;
    }
    m
}

/// Winner of one pillar's vote: most frequent non-zero label, smallest on ties.
pub fn winner(counts: &BTreeMap<u32, usize>) -> u32 {
    let mut best = (0u32, 0usize);
    for (&l, &n) in counts {
        if l != 0 && n > best.1 {
            best = (l, n);
        }
    }
    best.0
}

/// Per-point labels after majority quantization, plus the number of points
/// that lose their label (the quantization loss).
pub fn quantized_labels(points: &[Point], labels: &[PanopticLabel], spec: &GridSpec) -> (Vec<PanopticLabel>, usize) {
    let counts = recount(points, labels, spec);
    let winners: HashMap<_, _> = counts.iter().map(|(k, c)| (*k, winner(c))).collect();
    let out: Vec<PanopticLabel> = points
        .iter()
        .map(|p| PanopticLabel(winners[&oracle_pillar(p, spec)]))
        .collect();
    let loss = out.iter().zip(labels).filter(|(a, b)| a != b).count();
    (out, loss)
}

/// Maps predicted ids onto ground-truth ids if the two labelings induce the
/// same partition with the same classes. Returns the mapping or `None`.
pub fn bijection(gt: &[PanopticLabel], pred: &[PanopticLabel]) -> Option<HashMap<u32, u32>> {
    let mut fwd: HashMap<u32, u32> = HashMap::new();
    let mut back: HashMap<u32, u32> = HashMap::new();
    for (g, p) in gt.iter().zip(pred) {
        if g.0 / 1000 != p.0 / 1000 {
            return None;
        }
        if *fwd.entry(p.0).or_insert(g.0) != g.0 || *back.entry(g.0).or_insert(p.0) != p.0 {
            return None;
        }
    }
    Some(fwd)
}

/// Brute-force panoptic matcher: every same-class (gt segment, pred segment)
/// pair, IoU by scanning all points.
pub struct BruteMatch {
    pub tp: Vec<(u32, u32)>,
    pub fp: Vec<u32>,
    pub fn_: Vec<u32>,
    pub iou: Vec<f64>,
}

pub fn brute_match(gt: &[PanopticLabel], pred: &[PanopticLabel], classes: &ClassTable) -> BruteMatch {
    let key = |l: PanopticLabel| {
        let c = (l.0 / 1000) as u16;
        if classes.is_thing(c) {
            l.0
        } else {
            c as u32 * 1000
        }
    };
    let valid: Vec<usize> = (0..gt.len()).filter(|&i| gt[i].0 != 0).collect();
    let mut gsegs: Vec<u32> = valid.iter().map(|&i| key(gt[i])).collect();
    gsegs.sort();
    gsegs.dedup();
    let mut psegs: Vec<u32> = valid.iter().filter(|&&i| pred[i].0 != 0).map(|&i| key(pred[i])).collect();
    psegs.sort();
    psegs.dedup();
    let mut tp = Vec::new();
    let mut iou = Vec::new();
    for &g in &gsegs {
        for &p in &psegs {
            if g / 1000 != p / 1000 {
                continue;
            }
            let (mut inter, mut union) = (0usize, 0usize);
            for &i in &valid {
                let ig = key(gt[i]) == g;
                let ip = pred[i].0 != 0 && key(pred[i]) == p;
                inter += (ig && ip) as usize;
                union += (ig || ip) as usize;
            }
            let v = inter as f64 / union as f64;
            if v > 0.5 {
                tp.push((g, p));
                iou.push(v);
            }
        }
    }
    let fn_ = gsegs.iter().copied().filter(|g| !tp.iter().any(|t| t.0 == *g)).collect();
    let fp = psegs.iter().copied().filter(|p| !tp.iter().any(|t| t.1 == *p)).collect();
    BruteMatch { tp, fp, fn_, iou }
}

/// Unweighted class-mean PQ from a brute-force match, over classes present.
pub fn brute_pq(gt: &[PanopticLabel], pred: &[PanopticLabel], classes: &ClassTable) -> f64 {
    let m = brute_match(gt, pred, classes);
    let mut per: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for ((g, _), v) in m.tp.iter().zip(&m.iou) {
        let e = per.entry(g / 1000).or_default();
        e.0 += v;
        e.1 += 1.0;
    }
    for f in m.fp.iter().chain(&m.fn_) {
        per.entry(f / 1000).or_default().1 += 0.5;
    }
    per.values().map(|(s, d)| 100.0 * s / d).sum::<f64>() / per.len() as f64
}
