//! Panoptic quality (PQ = SQ x RQ) and semantic mIoU over per-point labels.
//!
//! Points whose ground truth is 0 are dropped from every count. A ground-truth
//! segment and a predicted segment of the same class match when their point IoU
//! is strictly above 0.5, which makes the matching unique. Stuff segments are
//! keyed by class alone; thing segments by the full packed label.
//!
//! Scores are accumulated in [`PanopticAccumulator`], whose `merge` is
//! associative, so corpora can be evaluated scene by scene in any grouping.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassId, ClassKind, ClassTable, PanopticLabel, LABEL_OFFSET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Thing segments with fewer points are left out of matching and of the
    /// FP/FN counts. 0 disables the filter.
    pub min_segment_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct ClassStats {
    tp: u64,
    fp: u64,
    fn_: u64,
    iou_sum: f64,
    // semantic confusion over points
    sem_tp: u64,
    sem_fp: u64,
    sem_fn: u64,
    gt_points: u64,
}

impl ClassStats {
    fn merge(&mut self, o: &ClassStats) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.iou_sum += o.iou_sum;
        self.sem_tp += o.sem_tp;
        self.sem_fp += o.sem_fp;
        self.sem_fn += o.sem_fn;
        self.gt_points += o.gt_points;
    }
}

/// Segment-level matching of one scene.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentMatching {
    /// `(gt segment, predicted segment, IoU)`, sorted by gt segment.
    pub tp: Vec<(PanopticLabel, PanopticLabel, f64)>,
    pub fp: Vec<PanopticLabel>,
    pub fn_: Vec<PanopticLabel>,
}

fn segment_key(label: PanopticLabel, classes: &ClassTable) -> PanopticLabel {
    if classes.is_thing(label.class_id()) {
        label
    } else {
        PanopticLabel(label.class_id() as u32 * LABEL_OFFSET)
    }
}

fn check_labels(gt: &[PanopticLabel], pred: &[PanopticLabel], mask: Option<&[bool]>, classes: &ClassTable) -> Result<()> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what: "predicted labels",
            expected: gt.len(),
            found: pred.len(),
        });
    }
    if let Some(m) = mask {
        if m.len() != gt.len() {
            return Err(Error::LengthMismatch {
                what: "point mask",
                expected: gt.len(),
                found: m.len(),
            });
        }
    }
    for l in gt.iter().chain(pred) {
        classes.check_class(l.class_id() as u32)?;
    }
    Ok(())
}

struct SceneCounts {
    gt_sizes: HashMap<PanopticLabel, u64>,
    pred_sizes: HashMap<PanopticLabel, u64>,
    inter: HashMap<(PanopticLabel, PanopticLabel), u64>,
}

fn count_scene(
    gt: &[PanopticLabel],
    pred: &[PanopticLabel],
    mask: Option<&[bool]>,
    classes: &ClassTable,
    stats: &mut [ClassStats],
) -> SceneCounts {
    let mut c = SceneCounts {
        gt_sizes: HashMap::new(),
        pred_sizes: HashMap::new(),
        inter: HashMap::new(),
    };
    for (i, (&g, &p)) in gt.iter().zip(pred).enumerate() {
        if g.is_ignore() || mask.is_some_and(|m| !m[i]) {
            continue;
        }
        let (gc, pc) = (g.class_id(), p.class_id());
        stats[gc as usize].gt_points += 1;
        if gc == pc {
            stats[gc as usize].sem_tp += 1;
        } else {
            stats[gc as usize].sem_fn += 1;
            if pc != 0 {
                stats[pc as usize].sem_fp += 1;
            }
        }
        let gk = segment_key(g, classes);
        *c.gt_sizes.entry(gk).or_default() += 1;
        if p.is_ignore() {
            continue;
        }
        let pk = segment_key(p, classes);
        *c.pred_sizes.entry(pk).or_default() += 1;
        if gc == pc {
            *c.inter.entry((gk, pk)).or_default() += 1;
        }
    }
    c
}

fn too_small(key: PanopticLabel, size: u64, classes: &ClassTable, opts: &EvalOptions) -> bool {
    classes.is_thing(key.class_id()) && (size as usize) < opts.min_segment_points
}

fn match_counts(c: &SceneCounts, classes: &ClassTable, opts: &EvalOptions) -> SegmentMatching {
    let mut m = SegmentMatching::default();
    let mut gt_hit = HashMap::new();
    let mut pred_hit = HashMap::new();
    for (&(gk, pk), &n) in &c.inter {
        let (gs, ps) = (c.gt_sizes[&gk], c.pred_sizes[&pk]);
        if too_small(gk, gs, classes, opts) || too_small(pk, ps, classes, opts) {
            continue;
        }
        let union = gs + ps - n;
        let iou = n as f64 / union as f64;
        if iou > 0.5 {
            m.tp.push((gk, pk, iou));
            gt_hit.insert(gk, ());
            pred_hit.insert(pk, ());
        }
    }
    m.fn_ = c
        .gt_sizes
        .iter()
        .filter(|&(k, &n)| !gt_hit.contains_key(k) && !too_small(*k, n, classes, opts))
        .map(|(&k, _)| k)
        .collect();
    m.fp = c
        .pred_sizes
        .iter()
        .filter(|&(k, &n)| !pred_hit.contains_key(k) && !too_small(*k, n, classes, opts))
        .map(|(&k, _)| k)
        .collect();
    m.tp.sort_by_key(|t| (t.0, t.1));
    m.fp.sort_unstable();
    m.fn_.sort_unstable();
    m
}

/// Matches ground-truth and predicted segments of one scene.
pub fn match_segments(
    gt: &[PanopticLabel],
    pred: &[PanopticLabel],
    classes: &ClassTable,
    opts: &EvalOptions,
    mask: Option<&[bool]>,
) -> Result<SegmentMatching> {
    check_labels(gt, pred, mask, classes)?;
    let mut scratch = vec![ClassStats::default(); classes.num_classes() as usize + 1];
    let counts = count_scene(gt, pred, mask, classes, &mut scratch);
    Ok(match_counts(&counts, classes, opts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanopticAccumulator {
    classes: ClassTable,
    opts: EvalOptions,
    stats: Vec<ClassStats>,
    points: u64,
    ignored: u64,
    scenes: u64,
}

impl PanopticAccumulator {
    pub fn new(classes: ClassTable, opts: EvalOptions) -> Self {
        let n = classes.num_classes() as usize + 1;
        PanopticAccumulator {
            classes,
            opts,
            stats: vec![ClassStats::default(); n],
            points: 0,
            ignored: 0,
            scenes: 0,
        }
    }

    pub fn add_scene(&mut self, gt: &[PanopticLabel], pred: &[PanopticLabel], mask: Option<&[bool]>) -> Result<()> {
        check_labels(gt, pred, mask, &self.classes)?;
        let counts = count_scene(gt, pred, mask, &self.classes, &mut self.stats);
        let m = match_counts(&counts, &self.classes, &self.opts);
        for &(gk, _, iou) in &m.tp {
            let s = &mut self.stats[gk.class_id() as usize];
            s.tp += 1;
            s.iou_sum += iou;
        }
        for k in &m.fp {
            self.stats[k.class_id() as usize].fp += 1;
        }
        for k in &m.fn_ {
            self.stats[k.class_id() as usize].fn_ += 1;
        }
        let ignored = gt
            .iter()
            .enumerate()
            .filter(|&(i, g)| g.is_ignore() || mask.is_some_and(|m| !m[i]))
            .count() as u64;
        self.points += gt.len() as u64 - ignored;
        self.ignored += ignored;
        self.scenes += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &PanopticAccumulator) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::InvalidInput("cannot merge reports over different class tables".into()));
        }
        for (a, b) in self.stats.iter_mut().zip(&other.stats) {
            a.merge(b);
        }
        self.points += other.points;
        self.ignored += other.ignored;
        self.scenes += other.scenes;
        Ok(())
    }

    pub fn report(&self) -> PqReport {
        let mut per_class = Vec::new();
        let mut notes = Vec::new();
        for c in 1..=self.classes.num_classes() {
            let s = &self.stats[c as usize];
            let kind = self.classes.kind(c);
            let present = s.tp + s.fp + s.fn_ > 0;
            let denom = s.tp as f64 + 0.5 * s.fp as f64 + 0.5 * s.fn_ as f64;
            let (pq, sq, rq) = if present {
                let sq = if s.tp > 0 { 100.0 * s.iou_sum / s.tp as f64 } else { 0.0 };
                (Some(100.0 * s.iou_sum / denom), Some(sq), Some(100.0 * s.tp as f64 / denom))
            } else {
                (None, None, None)
            };
            let sem_union = s.sem_tp + s.sem_fp + s.sem_fn;
            let iou = (sem_union > 0).then(|| 100.0 * s.sem_tp as f64 / sem_union as f64);
            per_class.push(ClassReport {
                class_id: c,
                name: self.classes.name(c),
                kind: if kind == ClassKind::Thing { "thing" } else { "stuff" }.to_string(),
                pq,
                sq,
                rq,
                iou,
                tp: s.tp,
                fp: s.fp,
                fn_: s.fn_,
                gt_points: s.gt_points,
            });
        }

        let mean = |f: &dyn Fn(&ClassReport) -> Option<f64>, keep: &dyn Fn(&ClassReport) -> bool| {
            let v: Vec<f64> = per_class.iter().filter(|r| keep(r)).filter_map(f).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let all = |_: &ClassReport| true;
        let th = |r: &ClassReport| r.kind == "thing";
        let st = |r: &ClassReport| r.kind == "stuff";
        let miou = mean(&|r| r.iou, &|r| r.gt_points > 0);
        if miou.is_none() {
            notes.push("no class is present in the ground truth; means are undefined".to_string());
        }
        let aggregates = Aggregates {
            pq: mean(&|r| r.pq, &all),
            sq: mean(&|r| r.sq, &all),
            rq: mean(&|r| r.rq, &all),
            pq_th: mean(&|r| r.pq, &th),
            sq_th: mean(&|r| r.sq, &th),
            rq_th: mean(&|r| r.rq, &th),
            pq_st: mean(&|r| r.pq, &st),
            sq_st: mean(&|r| r.sq, &st),
            rq_st: mean(&|r| r.rq, &st),
            miou,
        };
        let counts = Counts {
            tp: per_class.iter().map(|r| r.tp).sum(),
            fp: per_class.iter().map(|r| r.fp).sum(),
            fn_: per_class.iter().map(|r| r.fn_).sum(),
            points: self.points,
            ignored_points: self.ignored,
            scenes: self.scenes,
        };
        PqReport {
            per_class,
            aggregates,
            counts,
            options: self.opts,
            notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: ClassId,
    pub name: String,
    pub kind: String,
    pub pq: Option<f64>,
    pub sq: Option<f64>,
    pub rq: Option<f64>,
    pub iou: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub gt_points: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub pq: Option<f64>,
    pub sq: Option<f64>,
    pub rq: Option<f64>,
    pub pq_th: Option<f64>,
    pub sq_th: Option<f64>,
    pub rq_th: Option<f64>,
    pub pq_st: Option<f64>,
    pub sq_st: Option<f64>,
    pub rq_st: Option<f64>,
    pub miou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub points: u64,
    pub ignored_points: u64,
    pub scenes: u64,
}

/// All values are percentages in `[0, 100]`; `None` (JSON `null`) marks a
/// class absent from both ground truth and prediction, or an empty mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqReport {
    pub per_class: Vec<ClassReport>,
    pub aggregates: Aggregates,
    pub counts: Counts,
    pub options: EvalOptions,
    pub notes: Vec<String>,
}

impl PqReport {
    pub fn class(&self, class_id: ClassId) -> Option<&ClassReport> {
        self.per_class.iter().find(|r| r.class_id == class_id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}

pub fn compute_panoptic(gt: &[PanopticLabel], pred: &[PanopticLabel], classes: &ClassTable) -> Result<PqReport> {
    compute_panoptic_with(gt, pred, classes, &EvalOptions::default(), None)
}

/// `mask[i] == false` drops point `i` from the evaluation.
pub fn compute_panoptic_with(
    gt: &[PanopticLabel],
    pred: &[PanopticLabel],
    classes: &ClassTable,
    opts: &EvalOptions,
    mask: Option<&[bool]>,
) -> Result<PqReport> {
    let mut acc = PanopticAccumulator::new(classes.clone(), *opts);
    acc.add_scene(gt, pred, mask)?;
    Ok(acc.report())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiouReport {
    /// Indexed by class id - 1. `None` when the class appears in neither input.
    pub per_class: Vec<Option<f64>>,
    /// Mean over classes present in the ground truth.
    pub mean: Option<f64>,
    pub note: Option<String>,
}

pub fn compute_miou(gt: &[ClassId], pred: &[ClassId], classes: &ClassTable) -> Result<MiouReport> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what: "predicted classes",
            expected: gt.len(),
            found: pred.len(),
        });
    }
    let k = classes.num_classes() as usize;
    let (mut tp, mut fp, mut fn_, mut in_gt) = (vec![0u64; k + 1], vec![0u64; k + 1], vec![0u64; k + 1], vec![false; k + 1]);
    for (&g, &p) in gt.iter().zip(pred) {
        classes.check_class(g as u32)?;
        classes.check_class(p as u32)?;
        if g == 0 {
            continue;
        }
        in_gt[g as usize] = true;
        if g == p {
            tp[g as usize] += 1;
        } else {
            fn_[g as usize] += 1;
            fp[p as usize] += 1;
        }
    }
    let per_class: Vec<Option<f64>> = (1..=k)
        .map(|c| {
            let u = tp[c] + fp[c] + fn_[c];
            (u > 0).then(|| 100.0 * tp[c] as f64 / u as f64)
        })
        .collect();
    let present: Vec<f64> = (1..=k).filter(|&c| in_gt[c]).filter_map(|c| per_class[c - 1]).collect();
    let mean = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
    Ok(MiouReport {
        per_class,
        note: mean.is_none().then(|| "no class is present in the ground truth".to_string()),
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(v: u32) -> PanopticLabel {
        PanopticLabel(v)
    }

    fn t() -> ClassTable {
        ClassTable::nuscenes()
    }

    #[test]
    fn perfect_prediction() {
        let gt: Vec<_> = [4001, 4001, 4002, 11000, 11000, 7001, 0].map(l).to_vec();
        let r = compute_panoptic(&gt, &gt, &t()).unwrap();
        for c in [4, 7, 11] {
            let cr = r.class(c).unwrap();
            assert_eq!((cr.pq, cr.sq, cr.rq), (Some(100.0), Some(100.0), Some(100.0)));
        }
        assert_eq!(r.class(1).unwrap().pq, None);
        assert_eq!(r.aggregates.pq, Some(100.0));
        assert_eq!(r.aggregates.miou, Some(100.0));
        assert_eq!(r.counts.ignored_points, 1);
    }

    #[test]
    fn iou_sixty_percent_is_a_match() {
        // 10 gt points of one car; prediction covers 6 of them, rest predicted as ignore
        let gt = vec![l(4001); 10];
        let mut pred = vec![l(0); 10];
        pred[..6].fill(l(4001));
        let r = compute_panoptic(&gt, &pred, &t()).unwrap();
        let c = r.class(4).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (1, 0, 0));
        assert!((c.pq.unwrap() - 60.0).abs() < 1e-12);
        assert!((c.sq.unwrap() - 60.0).abs() < 1e-12);
        assert!((c.rq.unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn iou_half_is_not_a_match() {
        let gt = vec![l(4001); 10];
        let mut pred = vec![l(0); 10];
        pred[..5].fill(l(4001));
        let r = compute_panoptic(&gt, &pred, &t()).unwrap();
        let c = r.class(4).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (0, 1, 1));
        assert_eq!(c.pq, Some(0.0));
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            compute_panoptic(&[l(4001)], &[], &t()),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(compute_miou(&[4], &[4, 4], &t()).is_err());
    }

    #[test]
    fn miou_examples() {
        let gt = [4, 4, 4, 4, 7, 7, 7, 7];
        let r = compute_miou(&gt, &gt, &t()).unwrap();
        assert_eq!(r.mean, Some(100.0));
        let r = compute_miou(&gt, &[4; 8], &t()).unwrap();
        assert_eq!(r.per_class[3], Some(50.0));
        assert_eq!(r.per_class[6], Some(0.0));
        assert_eq!(r.mean, Some(25.0));
        let r = compute_miou(&[0, 0], &[4, 4], &t()).unwrap();
        assert_eq!(r.mean, None);
        assert!(r.note.is_some());
    }

    #[test]
    fn all_ignore_ground_truth_reports_note() {
        let r = compute_panoptic(&[l(0); 4], &[l(4001); 4], &t()).unwrap();
        assert_eq!(r.aggregates.pq, None);
        assert_eq!(r.aggregates.miou, None);
        assert!(!r.notes.is_empty());
        assert_eq!(r.counts.points, 0);
    }

    #[test]
    fn swapping_inputs_swaps_fp_and_fn() {
        let gt: Vec<_> = [4001, 4001, 4001, 4002, 4002, 11000, 11000, 13000].map(l).to_vec();
        let pred: Vec<_> = [4001, 4001, 4003, 4003, 4003, 11000, 13000, 13000].map(l).to_vec();
        let a = match_segments(&gt, &pred, &t(), &EvalOptions::default(), None).unwrap();
        let b = match_segments(&pred, &gt, &t(), &EvalOptions::default(), None).unwrap();
        assert_eq!(a.tp.len(), b.tp.len());
        assert_eq!(a.fp, b.fn_);
        assert_eq!(a.fn_, b.fp);
    }

    #[test]
    fn merging_two_matched_instances_lowers_pq() {
        let gt: Vec<_> = [[4001; 5], [4002; 5]].concat().into_iter().map(l).collect();
        let split = compute_panoptic(&gt, &gt, &t()).unwrap();
        let merged = compute_panoptic(&gt, &vec![l(4001); 10], &t()).unwrap();
        assert!(merged.class(4).unwrap().pq.unwrap() < split.class(4).unwrap().pq.unwrap());
    }

    #[test]
    fn min_segment_filter() {
        let gt: Vec<_> = [4001, 4001, 4001, 4002].map(l).to_vec();
        let pred: Vec<_> = [4001, 4001, 4001, 0].map(l).to_vec();
        let opts = EvalOptions { min_segment_points: 2 };
        let r = compute_panoptic_with(&gt, &pred, &t(), &opts, None).unwrap();
        assert_eq!((r.class(4).unwrap().tp, r.class(4).unwrap().fn_), (1, 0));
        let r = compute_panoptic(&gt, &pred, &t()).unwrap();
        assert_eq!(r.class(4).unwrap().fn_, 1);
    }

    #[test]
    fn mask_excludes_points() {
        let gt = vec![l(4001); 4];
        let pred: Vec<_> = [4001, 4001, 4002, 4002].map(l).to_vec();
        let mask = [true, true, false, false];
        let r = compute_panoptic_with(&gt, &pred, &t(), &EvalOptions::default(), Some(&mask)).unwrap();
        assert_eq!(r.class(4).unwrap().pq, Some(100.0));
        assert_eq!(r.counts.ignored_points, 2);
    }

    #[test]
    fn accumulator_merge_matches_single_pass() {
        let s1: Vec<_> = [4001, 4001, 11000, 7001].map(l).to_vec();
        let p1: Vec<_> = [4001, 4002, 11000, 7001].map(l).to_vec();
        let s2: Vec<_> = [4001, 4001, 4001, 13000].map(l).to_vec();
        let p2: Vec<_> = [4005, 4005, 4001, 11000].map(l).to_vec();
        let opts = EvalOptions::default();
        let mut whole = PanopticAccumulator::new(t(), opts);
        whole.add_scene(&s1, &p1, None).unwrap();
        whole.add_scene(&s2, &p2, None).unwrap();
        let mut a = PanopticAccumulator::new(t(), opts);
        a.add_scene(&s1, &p1, None).unwrap();
        let mut b = PanopticAccumulator::new(t(), opts);
        b.add_scene(&s2, &p2, None).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.report(), whole.report());
    }

    #[test]
    fn report_json_keys() {
        let gt = vec![l(4001); 3];
        let r = compute_panoptic(&gt, &gt, &t()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["per_class", "aggregates", "counts"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["per_class"][3]["fn"].is_u64());
        assert!(v["aggregates"]["pq_th"].is_f64());
    }
}
