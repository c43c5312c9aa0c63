//! Ground truth in, panoptic prediction out: encode per-point labels into
//! pillar rasters, regenerate instance ids from semantic + affinity rasters,
//! and decode back onto the points.

use crate::clustering::{propagate, Clusterer, ClusteringParams, Propagation};
use crate::error::Result;
use crate::model::{GridSpec, PanopticLabel, Point};
use crate::pillarizer::{decode_to_points, pillarize, Assignment, LabelGrid};
use crate::synth::{corrupt, NoiseConfig};

#[derive(Debug, Clone)]
pub struct RoundTrip {
    pub assignment: Assignment,
    pub encoded: LabelGrid,
    pub propagation: Propagation,
    /// Per-point labels decoded from the propagated raster.
    pub predicted: Vec<PanopticLabel>,
}

/// Optionally corrupts the semantic/affinity rasters with `noise` before
/// propagation.
pub fn round_trip(
    points: &[Point],
    labels: &[PanopticLabel],
    spec: &GridSpec,
    clusterer: Clusterer,
    params: &ClusteringParams,
    noise: Option<&NoiseConfig>,
) -> Result<RoundTrip> {
    crate::io::check_pair(points.len(), labels.len())?;
    let assignment = pillarize(points, spec)?;
    let encoded = LabelGrid::encode(labels, &assignment, spec, params.order)?;
    let propagation = match noise {
        Some(n) => {
            let (sem, aff) = corrupt(&encoded.semantic, &encoded.affinity, n, spec.classes())?;
            propagate(clusterer, &sem, &aff, spec, params)?
        }
        None => propagate(clusterer, &encoded.semantic, &encoded.affinity, spec, params)?,
    };
    let predicted = decode_to_points(&propagation.panoptic, &assignment);
    Ok(RoundTrip {
        assignment,
        encoded,
        propagation,
        predicted,
    })
}
