//! Point-to-pillar assignment, majority-vote encoding of point labels into
//! pillar rasters, and decoding of rasters back onto points.

use crate::affinity::{self, TraversalOrder};
use crate::error::{Error, Result};
use crate::model::{ClassId, ClassTable, Grid, GridSpec, PanopticLabel, PillarIndex, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PointFlags {
    /// Outside the a/b bounds; binned into the nearest boundary cell.
    pub clamped: bool,
    /// Outside `[z_min, z_max]`; binned regardless.
    pub z_outside: bool,
}

/// Which pillar every point falls in, plus the inverse per-pillar point lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    h: usize,
    w: usize,
    pillar_of: Vec<u32>,
    flags: Vec<PointFlags>,
    // CSR layout: members[offsets[p]..offsets[p + 1]] are the points of pillar p
    offsets: Vec<u32>,
    members: Vec<u32>,
}

impl Assignment {
    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn num_points(&self) -> usize {
        self.pillar_of.len()
    }

    pub fn pillar(&self, point: usize) -> PillarIndex {
        let p = self.pillar_of[point] as usize;
        PillarIndex::new(p / self.w, p % self.w)
    }

    /// Linear (row-major) pillar index of every point.
    pub fn linear_indices(&self) -> &[u32] {
        &self.pillar_of
    }

    pub fn flags(&self) -> &[PointFlags] {
        &self.flags
    }

    pub fn clamped_mask(&self) -> Vec<bool> {
        self.flags.iter().map(|f| f.clamped).collect()
    }

    pub fn points_in(&self, a: usize, b: usize) -> &[u32] {
        let p = a * self.w + b;
        &self.members[self.offsets[p] as usize..self.offsets[p + 1] as usize]
    }

    pub fn occupancy(&self) -> Grid<u32> {
        let counts = self.offsets.windows(2).map(|w| w[1] - w[0]).collect();
        Grid::from_vec(self.h, self.w, counts).expect("offsets cover the grid")
    }

    fn check_len(&self, what: &'static str, n: usize) -> Result<()> {
        if n != self.num_points() {
            return Err(Error::LengthMismatch {
                what,
                expected: self.num_points(),
                found: n,
            });
        }
        Ok(())
    }
}

pub fn pillarize(points: &[Point], spec: &GridSpec) -> Result<Assignment> {
    let (h, w) = (spec.h(), spec.w());
    let mut pillar_of = Vec::with_capacity(points.len());
    let mut flags = Vec::with_capacity(points.len());
    let mut counts = vec![0u32; h * w + 1];
    for p in points {
        let binned = spec.locate(p)?;
        let lin = binned.pillar.a as usize * w + binned.pillar.b as usize;
        pillar_of.push(lin as u32);
        flags.push(PointFlags {
            clamped: binned.clamped,
            z_outside: binned.z_outside,
        });
        counts[lin + 1] += 1;
    }
    for i in 1..counts.len() {
        counts[i] += counts[i - 1];
    }
    let offsets = counts;
    let mut cursor = offsets.clone();
    let mut members = vec![0u32; points.len()];
    for (i, &lin) in pillar_of.iter().enumerate() {
        let slot = &mut cursor[lin as usize];
        members[*slot as usize] = i as u32;
        *slot += 1;
    }
    Ok(Assignment {
        h,
        w,
        pillar_of,
        flags,
        offsets,
        members,
    })
}

/// Modal value of `values`, skipping `ignore`; ties go to the smaller value.
/// Returns `ignore` when nothing else is present.
fn vote<T: Ord + Copy>(values: &mut [T], ignore: T) -> T {
    values.sort_unstable();
    let mut best = ignore;
    let mut best_count = 0usize;
    let mut i = 0;
    while i < values.len() {
        let v = values[i];
        let mut j = i + 1;
        while j < values.len() && values[j] == v {
            j += 1;
        }
        if v != ignore && j - i > best_count {
            best = v;
            best_count = j - i;
        }
        i = j;
    }
    best
}

fn encode_by_vote<T: Ord + Copy>(labels: &[T], asg: &Assignment, ignore: T) -> Grid<T> {
    let mut grid = Grid::filled(asg.h, asg.w, ignore);
    let mut scratch = Vec::new();
    for (p, cell) in grid.as_mut_slice().iter_mut().enumerate() {
        let members = &asg.members[asg.offsets[p] as usize..asg.offsets[p + 1] as usize];
        if members.is_empty() {
            continue;
        }
        scratch.clear();
        scratch.extend(members.iter().map(|&i| labels[i as usize]));
        *cell = vote(&mut scratch, ignore);
    }
    grid
}

/// Majority-vote semantic raster. Class 0 only wins a pillar whose points are all 0.
pub fn encode_semantic(labels: &[ClassId], asg: &Assignment, classes: &ClassTable) -> Result<Grid<ClassId>> {
    asg.check_len("semantic labels", labels.len())?;
    for &c in labels {
        classes.check_class(c as u32)?;
    }
    Ok(encode_by_vote(labels, asg, 0))
}

/// Majority vote over packed labels; ties go to the smaller packed value.
pub fn encode_panoptic(
    labels: &[PanopticLabel],
    asg: &Assignment,
    classes: &ClassTable,
) -> Result<Grid<PanopticLabel>> {
    asg.check_len("panoptic labels", labels.len())?;
    for &l in labels {
        crate::model::unpack_label(l, classes)?;
    }
    Ok(encode_by_vote(labels, asg, PanopticLabel::IGNORE))
}

pub fn semantic_of(panoptic: &Grid<PanopticLabel>) -> Grid<ClassId> {
    panoptic.map(PanopticLabel::class_id)
}

/// Every point (clamped ones included) takes its pillar's value.
pub fn decode_to_points<T: Copy>(grid: &Grid<T>, asg: &Assignment) -> Vec<T> {
    debug_assert!(grid.h() == asg.h && grid.w() == asg.w);
    let cells = grid.as_slice();
    asg.pillar_of.iter().map(|&p| cells[p as usize]).collect()
}

/// The pillar-level rasters of one labelled scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub semantic: Grid<ClassId>,
    pub panoptic: Grid<PanopticLabel>,
    pub affinity: Grid<u8>,
    pub occupancy: Grid<u32>,
}

impl LabelGrid {
    /// Encodes per-point panoptic labels; the semantic raster is derived from
    /// the panoptic vote and the affinity raster from the traversal order.
    pub fn encode(
        labels: &[PanopticLabel],
        asg: &Assignment,
        spec: &GridSpec,
        order: TraversalOrder,
    ) -> Result<Self> {
        let panoptic = encode_panoptic(labels, asg, spec.classes())?;
        let affinity = affinity::generate_affinity_labels(&panoptic, spec, order)?;
        Ok(LabelGrid {
            semantic: semantic_of(&panoptic),
            panoptic,
            affinity,
            occupancy: asg.occupancy(),
        })
    }
}
