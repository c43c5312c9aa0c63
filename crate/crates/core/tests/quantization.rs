mod common;

use common::{oracle_pillar, quantized_labels};
use panoptic_pillars::affinity::TraversalOrder;
use panoptic_pillars::model::{ClassTable, GridSpec, PanopticLabel, Point};
use panoptic_pillars::pillarizer::{decode_to_points, pillarize, LabelGrid};
use proptest::prelude::*;

fn small_cartesian() -> GridSpec {
    GridSpec::cartesian((0.0, 4.0), (0.0, 4.0), 4, 4, ClassTable::nuscenes()).unwrap()
}

#[test]
fn minority_point_takes_the_majority_label() {
    let spec = small_cartesian();
    let points = vec![Point::new(0.1, 0.1, 0.0), Point::new(0.5, 0.5, 0.0), Point::new(0.9, 0.2, 0.0)];
    let labels = [4001, 4001, 7001].map(PanopticLabel).to_vec();
    let asg = pillarize(&points, &spec).unwrap();
    let enc = LabelGrid::encode(&labels, &asg, &spec, TraversalOrder::Raster).unwrap();
    let back = decode_to_points(&enc.panoptic, &asg);
    assert_eq!(back, [4001, 4001, 4001].map(PanopticLabel).to_vec());
    assert_eq!(quantized_labels(&points, &labels, &spec).1, 1);
}

fn cloud(spec: GridSpec) -> impl Strategy<Value = (GridSpec, Vec<Point>, Vec<PanopticLabel>)> {
    let label = prop_oneof![Just(0u32), Just(11000), Just(4001), Just(4002), Just(7001)];
    prop::collection::vec((-60.0f32..60.0, -60.0f32..60.0, -6.0f32..4.0, label), 1..300).prop_map(move |v| {
        let points = v.iter().map(|&(x, y, z, _)| Point::new(x, y, z)).collect();
        let labels = v.iter().map(|&(.., l)| PanopticLabel(l)).collect();
        (spec.clone(), points, labels)
    })
}

fn either_grid() -> impl Strategy<Value = (GridSpec, Vec<Point>, Vec<PanopticLabel>)> {
    let cart = GridSpec::cartesian((-50.0, 50.0), (-50.0, 50.0), 20, 24, ClassTable::nuscenes()).unwrap();
    let polar = GridSpec::polar((0.3, 50.3), 16, 30, ClassTable::nuscenes()).unwrap();
    prop_oneof![cloud(cart), cloud(polar)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn binning_matches_direct_arithmetic((spec, points, _) in either_grid()) {
        let asg = pillarize(&points, &spec).unwrap();
        for (i, p) in points.iter().enumerate() {
            let q = asg.pillar(i);
            prop_assert_eq!((q.a as usize, q.b as usize), oracle_pillar(p, &spec));
        }
    }

    #[test]
    fn decode_loss_equals_minority_recount((spec, points, labels) in either_grid()) {
        let asg = pillarize(&points, &spec).unwrap();
        let enc = LabelGrid::encode(&labels, &asg, &spec, TraversalOrder::Raster).unwrap();
        let back = decode_to_points(&enc.panoptic, &asg);
        let (expected, loss) = quantized_labels(&points, &labels, &spec);
        prop_assert_eq!(&back, &expected);
        prop_assert_eq!(back.iter().zip(&labels).filter(|(a, b)| a != b).count(), loss);
        let sem: Vec<u16> = back.iter().map(|l| l.class_id()).collect();
        prop_assert_eq!(decode_to_points(&enc.semantic, &asg), sem);
    }
}
