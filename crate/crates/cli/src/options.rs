//! Flag groups shared by several subcommands.

use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use panoptic_pillars::affinity::TraversalOrder;
use panoptic_pillars::clustering::{Clusterer, ClusteringParams, DEFAULT_K, DEFAULT_MAX_ITERS};
use panoptic_pillars::metrics::EvalOptions;
use panoptic_pillars::{ClassTable, Error, GridMode, GridSpec, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum GridKind {
    Cartesian,
    #[default]
    Polar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClustererArg {
    Local,
    Global,
    GlobalIter,
}

impl From<ClustererArg> for Clusterer {
    fn from(c: ClustererArg) -> Self {
        match c {
            ClustererArg::Local => Clusterer::Local,
            ClustererArg::Global => Clusterer::Global,
            ClustererArg::GlobalIter => Clusterer::GlobalIter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Raster,
    Alternating,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridOpts {
    /// Grid geometry; ignored when --grid-config is given.
    #[arg(long, value_enum, default_value = "polar")]
    pub grid: GridKind,
    /// JSON grid document (mode, a_min, a_max, b_min, b_max, z_min, z_max, h, w, classes).
    #[arg(long)]
    pub grid_config: Option<PathBuf>,
    /// Rows (range bins for polar grids).
    #[arg(long)]
    pub h: Option<usize>,
    /// Columns (angle bins for polar grids).
    #[arg(long)]
    pub w: Option<usize>,
    /// "a_min,a_max" or "a_min,a_max,b_min,b_max" in meters. Cartesian a is y, b is x.
    #[arg(long)]
    pub bounds: Option<String>,
    /// JSON class table (num_classes, thing_ids, stuff_ids, names).
    #[arg(long)]
    pub classes: Option<PathBuf>,
}

fn parse_bounds(s: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidInput(format!("--bounds {s:?}: {e}")))?;
    if v.len() != 2 && v.len() != 4 {
        return Err(Error::InvalidInput(format!("--bounds takes 2 or 4 numbers, got {}", v.len())));
    }
    Ok(v)
}

pub fn read_classes(path: &PathBuf) -> Result<ClassTable> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

impl GridOpts {
    /// Builds the grid. `shape` fills in H and W when the flags leave them
    /// open (e.g. from an input raster); otherwise they default to 512.
    pub fn spec(&self, shape: Option<(usize, usize)>) -> Result<GridSpec> {
        let classes = match &self.classes {
            Some(p) => Some(read_classes(p)?),
            None => None,
        };
        if let Some(path) = &self.grid_config {
            let spec: GridSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
            return Ok(match classes {
                Some(c) => spec.with_classes(c),
                None => spec,
            });
        }
        let classes = classes.unwrap_or_default();
        let (dh, dw) = shape.unwrap_or((512, 512));
        let (h, w) = (self.h.unwrap_or(dh), self.w.unwrap_or(dw));
        let bounds = self.bounds.as_deref().map(parse_bounds).transpose()?;
        match self.grid {
            GridKind::Polar => {
                let (r0, r1) = match bounds.as_deref() {
                    Some([r0, r1]) => (*r0, *r1),
                    Some(_) => return Err(Error::InvalidInput("polar --bounds takes r_min,r_max".into())),
                    None => GridSpec::default_polar().a_bounds(),
                };
                GridSpec::polar((r0, r1), h, w, classes)
            }
            GridKind::Cartesian => {
                let (a, b) = match bounds.as_deref() {
                    Some([lo, hi]) => ((*lo, *hi), (*lo, *hi)),
                    Some([a0, a1, b0, b1]) => ((*a0, *a1), (*b0, *b1)),
                    _ => {
                        let d = GridSpec::default_cartesian();
                        (d.a_bounds(), d.b_bounds())
                    }
                };
                GridSpec::new(GridMode::Cartesian, a, b, GridSpec::default_cartesian().z_bounds(), h, w, classes)
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClusterOpts {
    /// Rows of memory for local clustering.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "local")]
    pub clusterer: ClustererArg,
    /// Iteration budget for global-iter.
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Pillar visiting order.
    #[arg(long, value_enum, default_value = "raster")]
    pub order: OrderArg,
}

impl Default for ClusterOpts {
    fn default() -> Self {
        ClusterOpts {
            k: DEFAULT_K,
            clusterer: ClustererArg::Local,
            max_iters: DEFAULT_MAX_ITERS,
            order: OrderArg::Raster,
        }
    }
}

impl ClusterOpts {
    pub fn params(&self, spec: &GridSpec) -> Result<ClusteringParams> {
        let mut p = ClusteringParams::for_grid(spec).with_k(self.k);
        p.max_iters = self.max_iters;
        p.order = match self.order {
            OrderArg::Raster => TraversalOrder::Raster,
            OrderArg::Alternating => TraversalOrder::Alternating,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalOpts {
    /// Thing segments with fewer points are left out of matching.
    #[arg(long, default_value_t = 0)]
    pub min_seg_points: usize,
    /// Leave points that fell outside the grid bounds out of the metrics.
    #[arg(long)]
    pub exclude_clamped: bool,
}

impl EvalOpts {
    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            min_segment_points: self.min_seg_points,
        }
    }
}
