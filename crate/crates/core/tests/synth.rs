use panoptic_pillars::model::{ClassTable, GridSpec, PanopticLabel};
use panoptic_pillars::synth::{generate_scene, BarrierConfig, CarConfig, PedestrianConfig, SceneConfig, CAR};
use panoptic_pillars::Error;

fn one_car() -> SceneConfig {
    SceneConfig {
        seed: 5,
        grid: GridSpec::cartesian((-20.0, 20.0), (-20.0, 20.0), 100, 100, ClassTable::nuscenes()).unwrap(),
        cars: CarConfig { count: 1, ..CarConfig::default() },
        pedestrians: PedestrianConfig { count: 0, ..PedestrianConfig::default() },
        barriers: BarrierConfig { chains: 0, ..BarrierConfig::default() },
        sidewalk: None,
        ..SceneConfig::default()
    }
}

#[test]
fn car_of_nine_square_meters_gets_450_points() {
    let scene = generate_scene(&one_car()).unwrap();
    let car = scene.labels.iter().filter(|l| l.class_id() == CAR).count();
    assert_eq!(car, 450);
    assert!(scene.labels.iter().filter(|l| l.class_id() == CAR).all(|l| *l == PanopticLabel(4001)));
    let o = &scene.objects[0];
    for (p, l) in scene.points.iter().zip(&scene.labels) {
        let inside = o.footprint.contains(p.x as f64, p.y as f64);
        assert_eq!(*l == PanopticLabel(4001), inside || o.footprint.distance_to(p.x as f64, p.y as f64) < 1e-6);
    }
}

#[test]
fn same_seed_same_scene() {
    let cfg = SceneConfig::default().with_seed(42);
    assert_eq!(generate_scene(&cfg).unwrap(), generate_scene(&cfg).unwrap());
    assert_ne!(generate_scene(&cfg).unwrap(), generate_scene(&cfg.clone().with_seed(43)).unwrap());
}

#[test]
fn objects_keep_their_distance() {
    for seed in 0..20 {
        let cfg = SceneConfig::default().with_seed(seed);
        let scene = generate_scene(&cfg).unwrap();
        for (i, a) in scene.objects.iter().enumerate() {
            for b in &scene.objects[i + 1..] {
                assert!(a.footprint.distance(&b.footprint) >= cfg.barriers.gap.min(cfg.min_separation) - 1e-9);
            }
        }
    }
}

#[test]
fn config_errors_name_the_key() {
    let err = SceneConfig::from_json(r#"{"thing_density": -1}"#).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig { ref path, .. } if path == "thing_density"), "{err}");
    let err = SceneConfig::from_json(r#"{"cars": {"count": "six"}}"#).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig { ref path, .. } if path == "cars.count"), "{err}");
    let err = SceneConfig::from_json(r#"{"carz": {}}"#).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig { .. }), "{err}");
}

#[test]
fn recovery_validator_rejects_tight_spacing() {
    let mut cfg = one_car();
    cfg.enforce_recovery = true;
    cfg.min_separation = 1.0;
    assert!(generate_scene(&cfg).is_err());
    cfg.min_separation = 2.0;
    cfg.barriers.gap = 2.0;
    assert!(generate_scene(&cfg).is_ok());
    cfg.barriers = BarrierConfig { gap: 0.0, ..BarrierConfig::default() };
    assert!(generate_scene(&cfg).is_err());
}
