//! Non-neural pipeline for pillar-level-affinity lidar panoptic segmentation:
//! pillarization, affinity label generation, instance-id propagation,
//! panoptic metrics, synthetic scenes and binary file formats.

pub mod affinity;
pub mod clustering;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pillarizer;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use model::{ClassId, ClassTable, Grid, GridMode, GridSpec, PanopticLabel, PillarIndex, Point};
