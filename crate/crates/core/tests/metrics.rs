mod common;

use common::{brute_match, brute_pq};
use panoptic_pillars::metrics::{compute_panoptic, match_segments, EvalOptions, PanopticAccumulator};
use panoptic_pillars::model::{ClassTable, PanopticLabel};
use proptest::prelude::*;

fn scene() -> impl Strategy<Value = (Vec<PanopticLabel>, Vec<PanopticLabel>)> {
    let label = prop_oneof![
        Just(0u32),
        Just(11000),
        Just(13000),
        Just(4001),
        Just(4002),
        Just(4003),
        Just(7001),
        Just(7002),
    ];
    prop::collection::vec((label.clone(), label), 1..=200)
        .prop_map(|v| v.into_iter().map(|(g, p)| (PanopticLabel(g), PanopticLabel(p))).unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matching_equals_all_pairs((gt, pred) in scene()) {
        let classes = ClassTable::nuscenes();
        let m = match_segments(&gt, &pred, &classes, &EvalOptions::default(), None).unwrap();
        let b = brute_match(&gt, &pred, &classes);
        let mut tp: Vec<(u32, u32)> = m.tp.iter().map(|t| (t.0 .0, t.1 .0)).collect();
        let mut btp = b.tp.clone();
        tp.sort();
        btp.sort();
        prop_assert_eq!(tp, btp);
        let mut fp: Vec<u32> = m.fp.iter().map(|l| l.0).collect();
        let mut fn_: Vec<u32> = m.fn_.iter().map(|l| l.0).collect();
        fp.sort();
        fn_.sort();
        prop_assert_eq!(fp, b.fp);
        prop_assert_eq!(fn_, b.fn_);
    }

    #[test]
    fn pq_is_sq_times_rq((gt, pred) in scene()) {
        let classes = ClassTable::nuscenes();
        let r = compute_panoptic(&gt, &pred, &classes).unwrap();
        for c in &r.per_class {
            if let (Some(pq), Some(sq), Some(rq)) = (c.pq, c.sq, c.rq) {
                let prod = sq * rq / 100.0;
                prop_assert!((pq - prod).abs() <= 1e-9 * pq.abs().max(1e-12), "class {} {pq} vs {prod}", c.class_id);
            }
        }
        let pq = r.aggregates.pq.unwrap_or(0.0);
        let want = if r.per_class.iter().any(|c| c.pq.is_some()) { brute_pq(&gt, &pred, &classes) } else { 0.0 };
        prop_assert!((pq - want).abs() < 1e-9, "{pq} vs {want}");
    }

    #[test]
    fn merging_scenes_equals_one_pass(a in scene(), b in scene()) {
        let classes = ClassTable::nuscenes();
        let mut left = PanopticAccumulator::new(classes.clone(), EvalOptions::default());
        left.add_scene(&a.0, &a.1, None).unwrap();
        let mut right = PanopticAccumulator::new(classes.clone(), EvalOptions::default());
        right.add_scene(&b.0, &b.1, None).unwrap();
        let mut both = PanopticAccumulator::new(classes, EvalOptions::default());
        both.add_scene(&a.0, &a.1, None).unwrap();
        both.add_scene(&b.0, &b.1, None).unwrap();
        left.merge(&right).unwrap();
        prop_assert_eq!(left.report().to_json(), both.report().to_json());
    }

    #[test]
    fn self_evaluation_is_perfect((gt, _) in scene()) {
        let r = compute_panoptic(&gt, &gt, &ClassTable::nuscenes()).unwrap();
        if let Some(pq) = r.aggregates.pq {
            prop_assert_eq!(pq, 100.0);
        }
    }
}
