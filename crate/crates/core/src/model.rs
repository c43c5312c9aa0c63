//! Shared domain types: points, grid geometry, class taxonomy and the packed
//! panoptic label encoding.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiplier between the semantic class and the instance index in a packed label.
pub const LABEL_OFFSET: u32 = 1000;
/// Largest instance index representable under [`LABEL_OFFSET`].
pub const MAX_INSTANCE: u32 = LABEL_OFFSET - 1;

pub type ClassId = u16;

/// A single lidar return.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
    pub timestamp: f32,
}

impl Point {
    pub fn new(x: f32, y: f32, z: f32) -> Self {
        Point {
            x,
            y,
            z,
            intensity: 0.0,
            timestamp: 0.0,
        }
    }

    pub fn range(&self) -> f64 {
        (self.x as f64).hypot(self.y as f64)
    }

    /// Azimuth in `[0, 2π)`, measured counter-clockwise from +x.
    pub fn azimuth(&self) -> f64 {
        normalize_angle((self.y as f64).atan2(self.x as f64))
    }
}

/// Maps any finite angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid rounds tiny negatives up to exactly 2π
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Inverse of `(range, azimuth)`.
pub fn polar_to_cartesian(r: f64, theta: f64) -> (f64, f64) {
    (r * theta.cos(), r * theta.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    Cartesian,
    Polar,
}

impl fmt::Display for GridMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridMode::Cartesian => f.write_str("cartesian"),
            GridMode::Polar => f.write_str("polar"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    Ignore,
    Thing,
    Stuff,
}

/// Semantic taxonomy. Id 0 is reserved for ignore/noise; every id in `1..=K`
/// is either a thing or a stuff class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClassTableDoc", into = "ClassTableDoc")]
pub struct ClassTable {
    num_classes: u16,
    thing_ids: Vec<ClassId>,
    stuff_ids: Vec<ClassId>,
    names: Vec<String>,
    kinds: Vec<ClassKind>,
}

#[derive(Serialize, Deserialize)]
struct ClassTableDoc {
    num_classes: u16,
    thing_ids: Vec<ClassId>,
    stuff_ids: Vec<ClassId>,
    #[serde(default)]
    names: Vec<String>,
}

impl TryFrom<ClassTableDoc> for ClassTable {
    type Error = Error;

    fn try_from(doc: ClassTableDoc) -> Result<Self> {
        ClassTable::new(doc.num_classes, doc.thing_ids, doc.stuff_ids, doc.names)
    }
}

impl From<ClassTable> for ClassTableDoc {
    fn from(t: ClassTable) -> Self {
        ClassTableDoc {
            num_classes: t.num_classes,
            thing_ids: t.thing_ids,
            stuff_ids: t.stuff_ids,
            names: t.names,
        }
    }
}

const NUSCENES_NAMES: [&str; 16] = [
    "barrier",
    "bicycle",
    "bus",
    "car",
    "construction_vehicle",
    "motorcycle",
    "pedestrian",
    "traffic_cone",
    "trailer",
    "truck",
    "driveable_surface",
    "other_flat",
    "sidewalk",
    "terrain",
    "manmade",
    "vegetation",
];

impl ClassTable {
    pub fn new(
        num_classes: u16,
        mut thing_ids: Vec<ClassId>,
        mut stuff_ids: Vec<ClassId>,
        names: Vec<String>,
    ) -> Result<Self> {
        let bad = |reason: String| Error::InvalidConfig {
            path: "classes".into(),
            reason,
        };
        if num_classes == 0 {
            return Err(bad("num_classes must be positive".into()));
        }
        if num_classes as u32 * LABEL_OFFSET > u32::MAX - LABEL_OFFSET {
            return Err(bad(format!("num_classes {num_classes} overflows packed labels")));
        }
        thing_ids.sort_unstable();
        stuff_ids.sort_unstable();
        let mut kinds = vec![ClassKind::Ignore; num_classes as usize + 1];
        for (ids, kind) in [(&thing_ids, ClassKind::Thing), (&stuff_ids, ClassKind::Stuff)] {
            for &id in ids.iter() {
                if id == 0 || id > num_classes {
                    return Err(bad(format!("class id {id} outside 1..={num_classes}")));
                }
                if kinds[id as usize] != ClassKind::Ignore {
                    return Err(bad(format!("class id {id} listed twice")));
                }
                kinds[id as usize] = kind;
            }
        }
        if let Some(missing) = (1..=num_classes).find(|&c| kinds[c as usize] == ClassKind::Ignore) {
            return Err(bad(format!("class id {missing} is neither thing nor stuff")));
        }
        if !names.is_empty() && names.len() != num_classes as usize {
            return Err(bad(format!(
                "{} names given for {num_classes} classes",
                names.len()
            )));
        }
        Ok(ClassTable {
            num_classes,
            thing_ids,
            stuff_ids,
            names,
            kinds,
        })
    }

    /// The 16-class nuScenes coarse taxonomy: things 1..=10, stuff 11..=16.
    pub fn nuscenes() -> Self {
        ClassTable::new(
            16,
            (1..=10).collect(),
            (11..=16).collect(),
            NUSCENES_NAMES.iter().map(|s| s.to_string()).collect(),
        )
        .expect("static taxonomy is valid")
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn thing_ids(&self) -> &[ClassId] {
        &self.thing_ids
    }

    pub fn stuff_ids(&self) -> &[ClassId] {
        &self.stuff_ids
    }

    pub fn kind(&self, class_id: ClassId) -> ClassKind {
        self.kinds
            .get(class_id as usize)
            .copied()
            .unwrap_or(ClassKind::Ignore)
    }

    #[inline]
    pub fn is_thing(&self, class_id: ClassId) -> bool {
        self.kind(class_id) == ClassKind::Thing
    }

    #[inline]
    pub fn is_stuff(&self, class_id: ClassId) -> bool {
        self.kind(class_id) == ClassKind::Stuff
    }

    pub fn name(&self, class_id: ClassId) -> String {
        match class_id {
            0 => "ignore".to_string(),
            c => self
                .names
                .get(c as usize - 1)
                .cloned()
                .unwrap_or_else(|| format!("class_{c}")),
        }
    }

    pub fn check_class(&self, class_id: u32) -> Result<ClassId> {
        if class_id > self.num_classes as u32 {
            return Err(Error::InvalidClass {
                class_id,
                num_classes: self.num_classes,
            });
        }
        Ok(class_id as ClassId)
    }
}

impl Default for ClassTable {
    fn default() -> Self {
        ClassTable::nuscenes()
    }
}

/// `class_id * 1000 + instance_index`; zero means ignore.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[repr(transparent)]
#[serde(transparent)]
pub struct PanopticLabel(pub u32);

impl PanopticLabel {
    pub const IGNORE: PanopticLabel = PanopticLabel(0);

    /// Packs without consulting a class table. Only the instance capacity is checked.
    pub fn new(class_id: ClassId, instance: u32) -> Result<Self> {
        if instance > MAX_INSTANCE {
            return Err(Error::InstanceCapacity {
                class_id,
                index: instance,
            });
        }
        Ok(PanopticLabel(class_id as u32 * LABEL_OFFSET + instance))
    }

    pub fn stuff(class_id: ClassId) -> Self {
        PanopticLabel(class_id as u32 * LABEL_OFFSET)
    }

    #[inline]
    pub fn class_id(self) -> ClassId {
        (self.0 / LABEL_OFFSET) as ClassId
    }

    #[inline]
    pub fn instance(self) -> u32 {
        self.0 % LABEL_OFFSET
    }

    #[inline]
    pub fn is_ignore(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for PanopticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Packs a class and instance index, validating both against `classes`.
pub fn pack_label(class_id: ClassId, instance: u32, classes: &ClassTable) -> Result<PanopticLabel> {
    classes.check_class(class_id as u32)?;
    let label = PanopticLabel::new(class_id, instance)?;
    if instance != 0 && !classes.is_thing(class_id) {
        return Err(Error::InvalidLabel {
            packed: label.0,
            reason: "only thing classes carry an instance index",
        });
    }
    Ok(label)
}

pub fn unpack_label(label: PanopticLabel, classes: &ClassTable) -> Result<(ClassId, u32)> {
    if label.0 >= (classes.num_classes() as u32 + 1) * LABEL_OFFSET {
        return Err(Error::InvalidLabel {
            packed: label.0,
            reason: "class part exceeds the class table",
        });
    }
    let (class_id, instance) = (label.class_id(), label.instance());
    if instance != 0 && !classes.is_thing(class_id) {
        return Err(Error::InvalidLabel {
            packed: label.0,
            reason: "stuff or ignore label with nonzero instance index",
        });
    }
    Ok((class_id, instance))
}

/// Row `a`, column-within-row `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PillarIndex {
    pub a: u32,
    pub b: u32,
}

impl PillarIndex {
    pub fn new(a: usize, b: usize) -> Self {
        PillarIndex {
            a: a as u32,
            b: b as u32,
        }
    }
}

/// BEV grid geometry. Cartesian grids bin `(a, b) = (y, x)`; polar grids bin
/// `(a, b) = (range, azimuth)` with the azimuth axis spanning `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpecDoc", into = "GridSpecDoc")]
pub struct GridSpec {
    mode: GridMode,
    a_min: f64,
    a_max: f64,
    b_min: f64,
    b_max: f64,
    z_min: f64,
    z_max: f64,
    h: usize,
    w: usize,
    classes: ClassTable,
}

#[derive(Serialize, Deserialize)]
struct GridSpecDoc {
    mode: GridMode,
    a_min: f64,
    a_max: f64,
    #[serde(default)]
    b_min: Option<f64>,
    #[serde(default)]
    b_max: Option<f64>,
    #[serde(default = "default_z_min")]
    z_min: f64,
    #[serde(default = "default_z_max")]
    z_max: f64,
    h: usize,
    w: usize,
    #[serde(default)]
    classes: ClassTable,
}

fn default_z_min() -> f64 {
    -5.0
}

fn default_z_max() -> f64 {
    3.0
}

impl TryFrom<GridSpecDoc> for GridSpec {
    type Error = Error;

    fn try_from(d: GridSpecDoc) -> Result<Self> {
        let (b_min, b_max) = match d.mode {
            GridMode::Polar => (d.b_min.unwrap_or(0.0), d.b_max.unwrap_or(TAU)),
            GridMode::Cartesian => match (d.b_min, d.b_max) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => {
                    return Err(Error::InvalidConfig {
                        path: "grid.b_min/b_max".into(),
                        reason: "cartesian grids need explicit b bounds".into(),
                    })
                }
            },
        };
        GridSpec::new(
            d.mode, (d.a_min, d.a_max), (b_min, b_max), (d.z_min, d.z_max), d.h, d.w, d.classes,
        )
    }
}

impl From<GridSpec> for GridSpecDoc {
    fn from(g: GridSpec) -> Self {
        GridSpecDoc {
            mode: g.mode,
            a_min: g.a_min,
            a_max: g.a_max,
            b_min: Some(g.b_min),
            b_max: Some(g.b_max),
            z_min: g.z_min,
            z_max: g.z_max,
            h: g.h,
            w: g.w,
            classes: g.classes,
        }
    }
}

/// Result of binning one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Binned {
    pub pillar: PillarIndex,
    /// The point fell outside the a/b bounds and was moved to the nearest cell.
    pub clamped: bool,
    /// The point's z lies outside `[z_min, z_max]` (binned regardless).
    pub z_outside: bool,
}

impl GridSpec {
    pub fn new(
        mode: GridMode,
        (a_min, a_max): (f64, f64),
        (b_min, b_max): (f64, f64),
        (z_min, z_max): (f64, f64),
        h: usize,
        w: usize,
        classes: ClassTable,
    ) -> Result<Self> {
        let bad = |s: String| Err(Error::InvalidGrid(s));
        if h == 0 || w == 0 {
            return bad(format!("grid must be non-empty, got {h}x{w}"));
        }
        if h > u32::MAX as usize / 2 || w > u32::MAX as usize / 2 || h.checked_mul(w).is_none() {
            return bad(format!("grid {h}x{w} is too large"));
        }
        for (name, lo, hi) in [("a", a_min, a_max), ("b", b_min, b_max), ("z", z_min, z_max)] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return bad(format!("{name} bounds [{lo}, {hi}] are not increasing"));
            }
        }
        if mode == GridMode::Polar {
            if a_min < 0.0 {
                return bad(format!("polar range lower bound {a_min} is negative"));
            }
            if b_min != 0.0 || (b_max - TAU).abs() > 1e-12 {
                return bad(format!("polar azimuth must span [0, 2π), got [{b_min}, {b_max}]"));
            }
        }
        let b_max = if mode == GridMode::Polar { TAU } else { b_max };
        Ok(GridSpec {
            mode,
            a_min,
            a_max,
            b_min,
            b_max,
            z_min,
            z_max,
            h,
            w,
            classes,
        })
    }

    pub fn cartesian(
        x: (f64, f64),
        y: (f64, f64),
        h: usize,
        w: usize,
        classes: ClassTable,
    ) -> Result<Self> {
        GridSpec::new(GridMode::Cartesian, y, x, (-5.0, 3.0), h, w, classes)
    }

    pub fn polar(r: (f64, f64), h: usize, w: usize, classes: ClassTable) -> Result<Self> {
        GridSpec::new(GridMode::Polar, r, (0.0, TAU), (-5.0, 3.0), h, w, classes)
    }

    /// 512x512 polar pillars over r in [0.3, 50.3] m, z in [-5, 3] m.
    pub fn default_polar() -> Self {
        GridSpec::polar((0.3, 50.3), 512, 512, ClassTable::nuscenes()).expect("valid")
    }

    /// 512x512 cartesian pillars of 0.2 m over x, y in [-51.2, 51.2] m.
    pub fn default_cartesian() -> Self {
        GridSpec::cartesian((-51.2, 51.2), (-51.2, 51.2), 512, 512, ClassTable::nuscenes())
            .expect("valid")
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn len(&self) -> usize {
        self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classes(&self) -> &ClassTable {
        &self.classes
    }

    pub fn with_classes(mut self, classes: ClassTable) -> Self {
        self.classes = classes;
        self
    }

    pub fn a_bounds(&self) -> (f64, f64) {
        (self.a_min, self.a_max)
    }

    pub fn b_bounds(&self) -> (f64, f64) {
        (self.b_min, self.b_max)
    }

    pub fn z_bounds(&self) -> (f64, f64) {
        (self.z_min, self.z_max)
    }

    pub fn is_periodic(&self) -> bool {
        self.mode == GridMode::Polar
    }

    /// Pillar size along a and b. For polar grids the b extent is angular (radians).
    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.a_max - self.a_min) / self.h as f64,
            (self.b_max - self.b_min) / self.w as f64,
        )
    }

    /// Largest metric side of any pillar in the grid.
    pub fn max_pillar_extent(&self) -> f64 {
        let (da, db) = self.cell_size();
        match self.mode {
            GridMode::Cartesian => da.max(db),
            GridMode::Polar => da.max(self.a_max * db),
        }
    }

    /// The `(a, b)` grid coordinates of a point: `(y, x)` or `(r, θ)`.
    pub fn grid_coords(&self, p: &Point) -> (f64, f64) {
        match self.mode {
            GridMode::Cartesian => (p.y as f64, p.x as f64),
            GridMode::Polar => (p.range(), p.azimuth()),
        }
    }

    /// Bins grid coordinates. Polar azimuths may be any finite angle.
    pub fn bin(&self, pa: f64, pb: f64) -> Result<(PillarIndex, bool)> {
        if !(pa.is_finite() && pb.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite grid coordinates ({pa}, {pb})"
            )));
        }
        let (ia, ca) = bin_axis(pa, self.a_min, self.a_max, self.h);
        let (ib, cb) = match self.mode {
            GridMode::Cartesian => bin_axis(pb, self.b_min, self.b_max, self.w),
            GridMode::Polar => {
                let t = normalize_angle(pb);
                let ib = ((t * self.w as f64 / TAU).floor() as usize).min(self.w - 1);
                (ib, false)
            }
        };
        Ok((PillarIndex::new(ia, ib), ca || cb))
    }

    pub fn locate(&self, p: &Point) -> Result<Binned> {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite point ({}, {}, {})",
                p.x, p.y, p.z
            )));
        }
        let (pa, pb) = self.grid_coords(p);
        let (pillar, clamped) = self.bin(pa, pb)?;
        let z = p.z as f64;
        Ok(Binned {
            pillar,
            clamped,
            z_outside: z < self.z_min || z > self.z_max,
        })
    }

    pub fn check_index(&self, a: usize, b: usize) -> Result<()> {
        if a >= self.h || b >= self.w {
            return Err(Error::IndexOutOfBounds {
                a,
                b,
                h: self.h,
                w: self.w,
            });
        }
        Ok(())
    }
}

/// Index along one axis, clamped into `[0, n)`. The upper bound itself is in range.
fn bin_axis(p: f64, lo: f64, hi: f64, n: usize) -> (usize, bool) {
    let clamped = p < lo || p > hi;
    let raw = ((p - lo) * n as f64 / (hi - lo)).floor();
    let idx = if raw < 0.0 {
        0
    } else if raw >= n as f64 {
        n - 1
    } else {
        raw as usize
    };
    (idx, clamped)
}

/// Row-major `h x w` raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid<T> {
    h: usize,
    w: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn filled(h: usize, w: usize, value: T) -> Self {
        Grid {
            h,
            w,
            data: vec![value; h * w],
        }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::LengthMismatch {
                what: "raster payload",
                expected: h * w,
                found: data.len(),
            });
        }
        Ok(Grid { h, w, data })
    }

    #[inline]
    pub fn h(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn w(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> T {
        self.data[a * self.w + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, v: T) {
        self.data[a * self.w + b] = v;
    }

    #[inline]
    pub fn at(&self, p: PillarIndex) -> T {
        self.get(p.a as usize, p.b as usize)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Grid<U> {
        Grid {
            h: self.h,
            w: self.w,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.h == other.h && self.w == other.w
    }

    pub fn check_shape(&self, h: usize, w: usize) -> Result<()> {
        if self.h != h || self.w != w {
            return Err(Error::ShapeMismatch {
                expected_h: h,
                expected_w: w,
                found_h: self.h,
                found_w: self.w,
            });
        }
        Ok(())
    }
}
