//! Traversal order over the pillar grid and binary affinity labels.
//!
//! A thing pillar's affinity is 1 when some pillar earlier in the traversal
//! order carries the same instance id, and 0 when it is the first pillar of
//! its instance. [`holistic_matrix`] and [`reduce_holistic`] compute the same
//! quantity the long way, through the full pairwise matrix, and exist to
//! cross-check [`generate_affinity_labels`].

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassTable, Grid, GridSpec, PanopticLabel, PillarIndex};

/// How rows are swept. `Raster` visits `b` ascending in every row; `Alternating`
/// reverses `b` on odd rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraversalOrder {
    #[default]
    Raster,
    Alternating,
}

impl TraversalOrder {
    /// Position of `(a, b)` in the traversal.
    pub fn index(self, a: usize, b: usize, h: usize, w: usize) -> Result<usize> {
        if a >= h || b >= w {
            return Err(Error::IndexOutOfBounds { a, b, h, w });
        }
        Ok(self.index_unchecked(a, b, w))
    }

    #[inline]
    pub(crate) fn index_unchecked(self, a: usize, b: usize, w: usize) -> usize {
        match self {
            TraversalOrder::Raster => a * w + b,
            TraversalOrder::Alternating if a % 2 == 1 => a * w + (w - 1 - b),
            TraversalOrder::Alternating => a * w + b,
        }
    }

    /// Inverse of [`TraversalOrder::index`].
    pub fn pillar_at(self, t: usize, w: usize) -> PillarIndex {
        let (a, r) = (t / w, t % w);
        let b = match self {
            TraversalOrder::Alternating if a % 2 == 1 => w - 1 - r,
            _ => r,
        };
        PillarIndex::new(a, b)
    }

    /// Column `b` visited at step `i` of row `a`.
    #[inline]
    pub(crate) fn column(self, a: usize, i: usize, w: usize) -> usize {
        match self {
            TraversalOrder::Alternating if a % 2 == 1 => w - 1 - i,
            _ => i,
        }
    }
}

/// `a * W + b` under the default order.
pub fn traversal_index(a: usize, b: usize, spec: &GridSpec) -> Result<usize> {
    TraversalOrder::Raster.index(a, b, spec.h(), spec.w())
}

fn is_thing(label: PanopticLabel, classes: &ClassTable) -> bool {
    !label.is_ignore() && classes.is_thing(label.class_id())
}

/// Ground-truth affinity: 0 on the first pillar of each thing instance in
/// traversal order, 1 on every later pillar of it, 0 on stuff/ignore.
pub fn generate_affinity_labels(
    panoptic: &Grid<PanopticLabel>,
    spec: &GridSpec,
    order: TraversalOrder,
) -> Result<Grid<u8>> {
    panoptic.check_shape(spec.h(), spec.w())?;
    let (h, w) = (spec.h(), spec.w());
    let classes = spec.classes();
    let mut out = Grid::filled(h, w, 0u8);
    let mut seen: HashSet<PanopticLabel> = HashSet::new();
    for a in 0..h {
        for i in 0..w {
            let b = order.column(a, i, w);
            let label = panoptic.get(a, b);
            if is_thing(label, classes) && !seen.insert(label) {
                out.set(a, b, 1);
            }
        }
    }
    Ok(out)
}

/// Pairwise same-instance matrix over all pillars (test oracle scale only).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HolisticAffinity {
    h: usize,
    w: usize,
    bits: Vec<bool>,
}

pub const HOLISTIC_LIMIT: usize = 4096;

impl HolisticAffinity {
    pub fn len(&self) -> usize {
        self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        let n = self.len();
        self.bits[i * n + j] = v;
    }

    pub fn from_fn(h: usize, w: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let n = h * w;
        if n > HOLISTIC_LIMIT {
            return Err(Error::OracleScale {
                pillars: n,
                limit: HOLISTIC_LIMIT,
            });
        }
        let mut bits = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                bits[i * n + j] = f(i, j);
            }
        }
        Ok(HolisticAffinity { h, w, bits })
    }
}

/// Entry `(i, j)` is set iff pillars `i` and `j` (row-major) carry the same
/// thing instance id.
pub fn holistic_matrix(panoptic: &Grid<PanopticLabel>, classes: &ClassTable) -> Result<HolisticAffinity> {
    let cells = panoptic.as_slice();
    HolisticAffinity::from_fn(panoptic.h(), panoptic.w(), |i, j| {
        is_thing(cells[i], classes) && cells[i] == cells[j]
    })
}

/// `a'_i = max_{j before i} M[i][j]`, evaluated on thing pillars (those with a
/// set diagonal entry).
pub fn reduce_holistic(m: &HolisticAffinity, order: TraversalOrder) -> Grid<u8> {
    let (h, w) = (m.h, m.w);
    let mut out = Grid::filled(h, w, 0u8);
    for t in 0..m.len() {
        let p = order.pillar_at(t, w);
        let i = p.a as usize * w + p.b as usize;
        if !m.get(i, i) {
            continue;
        }
        let earlier = (0..t).any(|s| {
            let q = order.pillar_at(s, w);
            m.get(i, q.a as usize * w + q.b as usize)
        });
        out.set(p.a as usize, p.b as usize, earlier as u8);
    }
    out
}
