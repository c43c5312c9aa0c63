//! Deterministic synthetic scenes with ground-truth panoptic labels, and a
//! label-noise model for ablation runs.
//!
//! All randomness comes from [`SplitMix64`]. Scene geometry uses only IEEE
//! basic operations (`+ - * /`, `sqrt`), so a given config produces the same
//! bytes on every platform. Gaussian jitter is the Irwin-Hall approximation
//! (sum of 12 uniforms minus 6) for the same reason.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassId, ClassTable, Grid, GridMode, GridSpec, PanopticLabel, Point};

pub const CAR: ClassId = 4;
pub const PEDESTRIAN: ClassId = 7;
pub const BARRIER: ClassId = 1;
pub const DRIVABLE: ClassId = 11;
pub const SIDEWALK: ClassId = 13;

const MAX_PLACEMENT_ATTEMPTS: usize = 2000;

/// SplitMix64 (Steele, Lea and Flood), constants as in the reference
/// implementation.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)` by multiply-shift.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Approximately standard normal.
    pub fn gaussian(&mut self) -> f64 {
        let mut s = 0.0;
        for _ in 0..12 {
            s += self.next_f64();
        }
        s - 6.0
    }

    /// Uniform direction as `(cos, sin)`.
    pub fn direction(&mut self) -> (f64, f64) {
        loop {
            let (u, v) = (self.uniform(-1.0, 1.0), self.uniform(-1.0, 1.0));
            let n2 = u * u + v * v;
            if n2 > 1e-4 && n2 <= 1.0 {
                let n = n2.sqrt();
                return (u / n, v / n);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarConfig {
    pub count: usize,
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for CarConfig {
    fn default() -> Self {
        CarConfig {
            count: 6,
            length: 4.5,
            width: 2.0,
            height: 1.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PedestrianConfig {
    pub count: usize,
    pub radius: f64,
    pub height: f64,
}

impl Default for PedestrianConfig {
    fn default() -> Self {
        PedestrianConfig {
            count: 6,
            radius: 0.5,
            height: 1.7,
        }
    }
}

/// Chains of collinear barrier segments; every segment is its own instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    pub chains: usize,
    pub min_length: f64,
    pub max_length: f64,
    pub segment_length: f64,
    pub width: f64,
    pub height: f64,
    /// Spacing between consecutive segments of a chain; 0 makes them touch.
    pub gap: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig {
            chains: 2,
            min_length: 2.0,
            max_length: 20.0,
            segment_length: 2.0,
            width: 0.5,
            height: 1.0,
            gap: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SidewalkConfig {
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl Default for SidewalkConfig {
    fn default() -> Self {
        SidewalkConfig {
            inner_radius: 18.0,
            outer_radius: 22.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    /// Number of scenes; scene `i` uses seed `seed + i`.
    pub scenes: usize,
    pub grid: GridSpec,
    pub cars: CarConfig,
    pub pedestrians: PedestrianConfig,
    pub barriers: BarrierConfig,
    pub sidewalk: Option<SidewalkConfig>,
    /// Points per m² on object footprints.
    pub thing_density: f64,
    /// Points per m² on the ground outside objects.
    pub stuff_density: f64,
    pub ground_z: f64,
    pub z_sigma: f64,
    /// Minimum gap between footprints of different objects (meters).
    pub min_separation: f64,
    /// Minimum distance between footprints and the grid boundary (meters).
    pub margin: f64,
    /// Reject configs whose spacing cannot guarantee exact instance recovery.
    pub enforce_recovery: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            seed: 0,
            scenes: 1,
            grid: GridSpec::default_polar(),
            cars: CarConfig::default(),
            pedestrians: PedestrianConfig::default(),
            barriers: BarrierConfig::default(),
            sidewalk: Some(SidewalkConfig::default()),
            thing_density: 50.0,
            stuff_density: 2.0,
            ground_z: -1.8,
            z_sigma: 0.05,
            min_separation: 1.5,
            margin: 1.0,
            enforce_recovery: false,
        }
    }
}

fn cfg_err(path: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        path: path.to_string(),
        reason: reason.into(),
    }
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: SceneConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::InvalidConfig {
            path: e.path().to_string(),
            reason: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |path: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(cfg_err(path, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |path: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(cfg_err(path, format!("must be non-negative, got {v}")))
            }
        };
        positive("thing_density", self.thing_density)?;
        positive("stuff_density", self.stuff_density)?;
        positive("cars.length", self.cars.length)?;
        positive("cars.width", self.cars.width)?;
        non_negative("cars.height", self.cars.height)?;
        positive("pedestrians.radius", self.pedestrians.radius)?;
        non_negative("pedestrians.height", self.pedestrians.height)?;
        positive("barriers.min_length", self.barriers.min_length)?;
        positive("barriers.segment_length", self.barriers.segment_length)?;
        positive("barriers.width", self.barriers.width)?;
        non_negative("barriers.height", self.barriers.height)?;
        non_negative("barriers.gap", self.barriers.gap)?;
        if self.barriers.max_length < self.barriers.min_length {
            return Err(cfg_err("barriers.max_length", "smaller than min_length"));
        }
        non_negative("z_sigma", self.z_sigma)?;
        non_negative("min_separation", self.min_separation)?;
        non_negative("margin", self.margin)?;
        if !self.ground_z.is_finite() {
            return Err(cfg_err("ground_z", "must be finite"));
        }
        if let Some(s) = &self.sidewalk {
            non_negative("sidewalk.inner_radius", s.inner_radius)?;
            if !(s.outer_radius > s.inner_radius) {
                return Err(cfg_err("sidewalk.outer_radius", "must exceed inner_radius"));
            }
        }
        if self.scenes == 0 {
            return Err(cfg_err("scenes", "must be at least 1"));
        }
        let classes = self.grid.classes();
        for (id, name) in [(CAR, "car"), (PEDESTRIAN, "pedestrian"), (BARRIER, "barrier")] {
            if !classes.is_thing(id) {
                return Err(cfg_err("grid.classes", format!("class {id} ({name}) must be a thing class")));
            }
        }
        for id in [DRIVABLE, SIDEWALK] {
            if !classes.is_stuff(id) {
                return Err(cfg_err("grid.classes", format!("class {id} must be a stuff class")));
            }
        }
        if self.enforce_recovery {
            self.check_recovery()?;
        }
        Ok(())
    }

    /// Spacing needed for instances to stay pairwise at least 3 pillars apart
    /// after binning: five times the largest pillar side.
    pub fn required_separation(&self) -> f64 {
        5.0 * self.grid.max_pillar_extent()
    }

    pub fn check_recovery(&self) -> Result<()> {
        let need = self.required_separation();
        if self.min_separation < need {
            return Err(cfg_err(
                "min_separation",
                format!("{} m is below the {need:.3} m needed for a 3-pillar gap", self.min_separation),
            ));
        }
        if self.barriers.chains > 0 && self.barriers.gap < self.min_separation {
            return Err(cfg_err("barriers.gap", "touching barrier segments cannot be separated"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Footprint {
    /// Oriented rectangle: centre, unit axis `(ux, uy)`, half length, half width.
    Rect {
        cx: f64,
        cy: f64,
        ux: f64,
        uy: f64,
        hl: f64,
        hw: f64,
    },
    Disc {
        cx: f64,
        cy: f64,
        r: f64,
    },
}

impl Footprint {
    pub fn area(&self) -> f64 {
        match *self {
            Footprint::Rect { hl, hw, .. } => 4.0 * hl * hw,
            Footprint::Disc { r, .. } => std::f64::consts::PI * r * r,
        }
    }

    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Footprint::Rect { cx, cy, ux, uy, .. } => {
                let (dx, dy) = (x - cx, y - cy);
                (dx * ux + dy * uy, -dx * uy + dy * ux)
            }
            Footprint::Disc { cx, cy, .. } => (x - cx, y - cy),
        }
    }

    /// Euclidean distance from `(x, y)` to the footprint; 0 inside.
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let (u, v) = self.local(x, y);
        match *self {
            Footprint::Rect { hl, hw, .. } => {
                let du = (u.abs() - hl).max(0.0);
                let dv = (v.abs() - hw).max(0.0);
                (du * du + dv * dv).sqrt()
            }
            Footprint::Disc { r, .. } => ((u * u + v * v).sqrt() - r).max(0.0),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = self.local(x, y);
        match *self {
            Footprint::Rect { hl, hw, .. } => u.abs() <= hl && v.abs() <= hw,
            Footprint::Disc { r, .. } => u * u + v * v <= r * r,
        }
    }

    fn corners(&self) -> Option<[(f64, f64); 4]> {
        match *self {
            Footprint::Rect { cx, cy, ux, uy, hl, hw } => {
                let c = |su: f64, sv: f64| (cx + su * hl * ux - sv * hw * uy, cy + su * hl * uy + sv * hw * ux);
                Some([c(1.0, 1.0), c(-1.0, 1.0), c(-1.0, -1.0), c(1.0, -1.0)])
            }
            Footprint::Disc { .. } => None,
        }
    }

    fn axes(&self) -> [(f64, f64); 2] {
        match *self {
            Footprint::Rect { ux, uy, .. } => [(ux, uy), (-uy, ux)],
            Footprint::Disc { .. } => [(1.0, 0.0), (0.0, 1.0)],
        }
    }

    fn rects_overlap(a: &Footprint, b: &Footprint) -> bool {
        let (ca, cb) = (a.corners().unwrap(), b.corners().unwrap());
        for (ax, ay) in a.axes().into_iter().chain(b.axes()) {
            let proj = |cs: &[(f64, f64); 4]| {
                cs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, y)| {
                    let d = x * ax + y * ay;
                    (lo.min(d), hi.max(d))
                })
            };
            let ((alo, ahi), (blo, bhi)) = (proj(&ca), proj(&cb));
            if ahi < blo || bhi < alo {
                return false;
            }
        }
        true
    }

    /// Gap between two footprints; 0 when they overlap.
    pub fn distance(&self, other: &Footprint) -> f64 {
        match (*self, *other) {
            (Footprint::Disc { cx, cy, r }, o) | (o, Footprint::Disc { cx, cy, r }) => {
                (o.distance_to(cx, cy) - r).max(0.0)
            }
            (a, b) => {
                if Footprint::rects_overlap(&a, &b) {
                    return 0.0;
                }
                // for disjoint convex polygons the closest pair involves a vertex
                let ab = a.corners().unwrap().iter().map(|&(x, y)| b.distance_to(x, y)).fold(f64::INFINITY, f64::min);
                let ba = b.corners().unwrap().iter().map(|&(x, y)| a.distance_to(x, y)).fold(f64::INFINITY, f64::min);
                ab.min(ba)
            }
        }
    }

    fn sample(&self, rng: &mut SplitMix64) -> (f64, f64) {
        match *self {
            Footprint::Rect { cx, cy, ux, uy, hl, hw } => {
                let u = rng.uniform(-hl, hl);
                let v = rng.uniform(-hw, hw);
                (cx + u * ux - v * uy, cy + u * uy + v * ux)
            }
            Footprint::Disc { cx, cy, r } => loop {
                let (u, v) = (rng.uniform(-r, r), rng.uniform(-r, r));
                if u * u + v * v <= r * r {
                    return (cx + u, cy + v);
                }
            },
        }
    }

    fn within(&self, spec: &GridSpec, margin: f64) -> bool {
        let (a_min, a_max) = spec.a_bounds();
        match spec.mode() {
            GridMode::Cartesian => {
                let (b_min, b_max) = spec.b_bounds();
                let pts: Vec<(f64, f64)> = match (self.corners(), *self) {
                    (Some(cs), _) => cs.to_vec(),
                    (None, Footprint::Disc { cx, cy, r }) => vec![(cx - r, cy - r), (cx + r, cy + r)],
                    _ => unreachable!(),
                };
                pts.iter().all(|&(x, y)| {
                    x >= b_min + margin && x <= b_max - margin && y >= a_min + margin && y <= a_max - margin
                })
            }
            GridMode::Polar => {
                let far = match (self.corners(), *self) {
                    (Some(cs), _) => cs.iter().map(|&(x, y)| (x * x + y * y).sqrt()).fold(0.0, f64::max),
                    (None, Footprint::Disc { cx, cy, r }) => (cx * cx + cy * cy).sqrt() + r,
                    _ => unreachable!(),
                };
                far <= a_max - margin && self.distance_to(0.0, 0.0) >= a_min + margin
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub label: PanopticLabel,
    pub footprint: Footprint,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub points: Vec<Point>,
    pub labels: Vec<PanopticLabel>,
    pub objects: Vec<SceneObject>,
}

fn sample_in_extent(spec: &GridSpec, rng: &mut SplitMix64) -> (f64, f64) {
    let (a_min, a_max) = spec.a_bounds();
    match spec.mode() {
        GridMode::Cartesian => {
            let (b_min, b_max) = spec.b_bounds();
            (rng.uniform(b_min, b_max), rng.uniform(a_min, a_max))
        }
        GridMode::Polar => loop {
            let (x, y) = (rng.uniform(-a_max, a_max), rng.uniform(-a_max, a_max));
            let r2 = x * x + y * y;
            if r2 <= a_max * a_max && r2 >= a_min * a_min {
                return (x, y);
            }
        },
    }
}

fn extent_area(spec: &GridSpec) -> f64 {
    let (a_min, a_max) = spec.a_bounds();
    match spec.mode() {
        GridMode::Cartesian => {
            let (b_min, b_max) = spec.b_bounds();
            (a_max - a_min) * (b_max - b_min)
        }
        GridMode::Polar => std::f64::consts::PI * (a_max * a_max - a_min * a_min),
    }
}

struct Placer<'a> {
    cfg: &'a SceneConfig,
    placed: Vec<SceneObject>,
    counters: [u32; 3],
}

impl Placer<'_> {
    fn fits(&self, fp: &Footprint, exempt_from: usize) -> bool {
        fp.within(&self.cfg.grid, self.cfg.margin)
            && self.placed[..exempt_from]
                .iter()
                .all(|o| fp.distance(&o.footprint) >= self.cfg.min_separation)
    }

    fn next_label(&mut self, class_id: ClassId) -> Result<PanopticLabel> {
        let slot = match class_id {
            CAR => 0,
            PEDESTRIAN => 1,
            _ => 2,
        };
        self.counters[slot] += 1;
        PanopticLabel::new(class_id, self.counters[slot])
    }

    fn place_single(
        &mut self,
        rng: &mut SplitMix64,
        archetype: &'static str,
        class_id: ClassId,
        height: f64,
        make: impl Fn(f64, f64, &mut SplitMix64) -> Footprint,
    ) -> Result<()> {
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let (cx, cy) = sample_in_extent(&self.cfg.grid, rng);
            let fp = make(cx, cy, rng);
            if self.fits(&fp, self.placed.len()) {
                let label = self.next_label(class_id)?;
                self.placed.push(SceneObject {
                    label,
                    footprint: fp,
                    height,
                });
                return Ok(());
            }
        }
        Err(Error::Placement {
            archetype,
            attempts: MAX_PLACEMENT_ATTEMPTS,
        })
    }

    fn place_chain(&mut self, rng: &mut SplitMix64) -> Result<()> {
        let b = &self.cfg.barriers;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let total = rng.uniform(b.min_length, b.max_length);
            let n = ((total / b.segment_length) + 0.5).floor().max(1.0) as usize;
            let seg = total / n as f64;
            let (ux, uy) = rng.direction();
            let (cx, cy) = sample_in_extent(&self.cfg.grid, rng);
            let span = n as f64 * seg + (n - 1) as f64 * b.gap;
            let before = self.placed.len();
            let segments: Vec<Footprint> = (0..n)
                .map(|i| {
                    let off = -span / 2.0 + seg / 2.0 + i as f64 * (seg + b.gap);
                    Footprint::Rect {
                        cx: cx + off * ux,
                        cy: cy + off * uy,
                        ux,
                        uy,
                        hl: seg / 2.0,
                        hw: b.width / 2.0,
                    }
                })
                .collect();
            // segments of one chain may sit closer than min_separation
            if segments.iter().all(|fp| self.fits(fp, before)) {
                for fp in segments {
                    let label = self.next_label(BARRIER)?;
                    self.placed.push(SceneObject {
                        label,
                        footprint: fp,
                        height: b.height,
                    });
                }
                return Ok(());
            }
        }
        Err(Error::Placement {
            archetype: "barrier",
            attempts: MAX_PLACEMENT_ATTEMPTS,
        })
    }
}

fn count_for(area: f64, density: f64) -> usize {
    (area * density + 0.5).floor() as usize
}

/// Generates scene `cfg.seed`. Objects are placed largest first (cars,
/// barrier chains, pedestrians); instance indices count up from 1 per class
/// in placement order.
pub fn generate_scene(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = SplitMix64::new(cfg.seed);
    let mut placer = Placer {
        cfg,
        placed: Vec::new(),
        counters: [0; 3],
    };
    let (cl, cw) = (cfg.cars.length / 2.0, cfg.cars.width / 2.0);
    for _ in 0..cfg.cars.count {
        placer.place_single(&mut rng, "car", CAR, cfg.cars.height, |cx, cy, rng| {
            let (ux, uy) = rng.direction();
            Footprint::Rect { cx, cy, ux, uy, hl: cl, hw: cw }
        })?;
    }
    for _ in 0..cfg.barriers.chains {
        placer.place_chain(&mut rng)?;
    }
    let r = cfg.pedestrians.radius;
    for _ in 0..cfg.pedestrians.count {
        placer.place_single(&mut rng, "pedestrian", PEDESTRIAN, cfg.pedestrians.height, |cx, cy, _| {
            Footprint::Disc { cx, cy, r }
        })?;
    }
    let objects = placer.placed;

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut push = |x: f64, y: f64, z: f64, label: PanopticLabel| {
        points.push(Point {
            x: x as f32,
            y: y as f32,
            z: z as f32,
            intensity: 1.0,
            timestamp: 0.0,
        });
        labels.push(label);
    };
    for o in &objects {
        let n = count_for(o.footprint.area(), cfg.thing_density);
        let base = cfg.ground_z + o.height / 2.0;
        for _ in 0..n {
            let (x, y) = o.footprint.sample(&mut rng);
            let z = base + cfg.z_sigma * rng.gaussian();
            push(x, y, z, o.label);
        }
    }
    let n_ground = count_for(extent_area(&cfg.grid), cfg.stuff_density);
    for _ in 0..n_ground {
        let (x, y) = sample_in_extent(&cfg.grid, &mut rng);
        let z = cfg.ground_z + cfg.z_sigma * rng.gaussian();
        // objects occlude the ground beneath them
        if objects.iter().any(|o| o.footprint.contains(x, y)) {
            continue;
        }
        let r = (x * x + y * y).sqrt();
        let class_id = match &cfg.sidewalk {
            Some(s) if r >= s.inner_radius && r < s.outer_radius => SIDEWALK,
            _ => DRIVABLE,
        };
        push(x, y, z, PanopticLabel::stuff(class_id));
    }
    Ok(Scene {
        points,
        labels,
        objects,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Per occupied pillar probability of resampling the class.
    pub p_sem: f64,
    /// Per thing pillar probability of flipping the affinity bit.
    pub p_aff: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (path, p) in [("p_sem", self.p_sem), ("p_aff", self.p_aff)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(cfg_err(path, format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Visits pillars in row-major order. For each occupied pillar one uniform
/// decides a class flip (the replacement is uniform over the other K-1
/// classes); for each pillar that is a thing in the input raster one uniform
/// decides an affinity flip.
pub fn corrupt(
    sem: &Grid<ClassId>,
    aff: &Grid<u8>,
    noise: &NoiseConfig,
    classes: &ClassTable,
) -> Result<(Grid<ClassId>, Grid<u8>)> {
    noise.validate()?;
    aff.check_shape(sem.h(), sem.w())?;
    let k = classes.num_classes() as u64;
    let mut rng = SplitMix64::new(noise.seed);
    let mut sem_out = sem.clone();
    let mut aff_out = aff.clone();
    for (i, &s) in sem.as_slice().iter().enumerate() {
        if s == 0 {
            continue;
        }
        if rng.next_f64() < noise.p_sem && k > 1 {
            let mut c = rng.below(k - 1) as ClassId + 1;
            if c >= s {
                c += 1;
            }
            sem_out.as_mut_slice()[i] = c;
        }
        if classes.is_thing(s) && rng.next_f64() < noise.p_aff {
            aff_out.as_mut_slice()[i] ^= 1;
        }
    }
    Ok((sem_out, aff_out))
}

/// Random panoptic raster for benchmarks: drivable background with
/// `instances` non-overlapping rectangular thing blobs of 3..=30 pillars a side.
pub fn random_instance_raster(
    h: usize,
    w: usize,
    instances: usize,
    seed: u64,
    classes: &ClassTable,
) -> Result<Grid<PanopticLabel>> {
    let things = classes.thing_ids();
    let background = classes.stuff_ids().first().copied().unwrap_or(0);
    let mut grid = Grid::filled(h, w, PanopticLabel::stuff(background));
    if things.is_empty() {
        return Ok(grid);
    }
    let mut rng = SplitMix64::new(seed);
    let mut counters = vec![0u32; classes.num_classes() as usize + 1];
    let mut boxes: Vec<(usize, usize, usize, usize)> = Vec::new();
    for _ in 0..instances {
        let placed = (0..MAX_PLACEMENT_ATTEMPTS).find_map(|_| {
            let bh = (3 + rng.below(28) as usize).min(h);
            let bw = (3 + rng.below(28) as usize).min(w);
            let a0 = rng.below((h - bh + 1) as u64) as usize;
            let b0 = rng.below((w - bw + 1) as u64) as usize;
            let clear = boxes
                .iter()
                .all(|&(a, b, hh, ww)| a0 >= a + hh + 1 || a >= a0 + bh + 1 || b0 >= b + ww + 1 || b >= b0 + bw + 1);
            clear.then_some((a0, b0, bh, bw))
        });
        let Some((a0, b0, bh, bw)) = placed else {
            return Err(Error::Placement {
                archetype: "raster blob",
                attempts: MAX_PLACEMENT_ATTEMPTS,
            });
        };
        boxes.push((a0, b0, bh, bw));
        let class_id = things[rng.below(things.len() as u64) as usize];
        counters[class_id as usize] += 1;
        let label = PanopticLabel::new(class_id, counters[class_id as usize])?;
        for a in a0..a0 + bh {
            for b in b0..b0 + bw {
                grid.set(a, b, label);
            }
        }
    }
    Ok(grid)
}
