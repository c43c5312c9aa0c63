//! Subcommands of the `pillars` tool as plain functions.

pub mod options;
pub mod render;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use panoptic_pillars::affinity::generate_affinity_labels;
use panoptic_pillars::clustering::{propagate, propagate_local, Clusterer, ClusteringParams};
use panoptic_pillars::io::{self, Raster};
use panoptic_pillars::metrics::{EvalOptions, PanopticAccumulator, PqReport};
use panoptic_pillars::pillarizer::{decode_to_points, pillarize, semantic_of, LabelGrid};
use panoptic_pillars::pipeline::round_trip;
use panoptic_pillars::synth::{generate_scene, random_instance_raster, NoiseConfig, SceneConfig};
use panoptic_pillars::{ClassId, ClassTable, Error, Grid, GridSpec, PanopticLabel, Point, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub fn scene_paths(dir: &Path, index: usize) -> (PathBuf, PathBuf) {
    let stem = format!("scene_{index:04}");
    (dir.join(format!("{stem}.points")), dir.join(format!("{stem}.labels")))
}

/// Runs `f` on a pool of `jobs` threads (0 picks the rayon default).
fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Writes `cfg.scenes` scenes to `out_dir`; scene `i` uses seed `cfg.seed + i`.
pub fn cmd_synth(cfg: &SceneConfig, out_dir: &Path, jobs: usize) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let written = with_jobs(jobs, || {
        (0..cfg.scenes)
            .into_par_iter()
            .map(|i| {
                let scene = generate_scene(&cfg.clone().with_seed(cfg.seed.wrapping_add(i as u64)))?;
                let (p, l) = scene_paths(out_dir, i);
                io::write_points(&p, &scene.points)?;
                io::write_labels(&l, &scene.labels)?;
                Ok([p, l])
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(written.into_iter().flatten().collect())
}

/// Finds the `scene_NNNN.points` / `.labels` pairs in a directory.
pub fn scenes_in(dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let mut stems: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_suffix(".points").map(str::to_string)
        })
        .collect();
    stems.sort();
    let pairs: Vec<_> = stems
        .into_iter()
        .map(|s| (dir.join(format!("{s}.points")), dir.join(format!("{s}.labels"))))
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidInput(format!("no .points files in {}", dir.display())));
    }
    Ok(pairs)
}

pub fn read_scene(points: &Path, labels: &Path) -> Result<(Vec<Point>, Vec<PanopticLabel>)> {
    let p = io::read_points(points)?;
    let l = io::read_labels(labels)?;
    io::check_pair(p.len(), l.len())?;
    Ok((p, l))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    pub clusterer: Clusterer,
    pub params: ClusteringParams,
    pub eval: EvalOptions,
    pub exclude_clamped: bool,
    /// Corrupts the encoded rasters of scene `i` with seed `noise.seed + i`.
    pub noise: Option<NoiseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub scenes: usize,
    pub settings: OracleSettings,
    /// Predicted labels against the ground truth.
    pub panoptic: PqReport,
    /// Ground truth encoded and decoded without propagation: the best any
    /// clusterer can reach on this grid.
    pub ceiling: PqReport,
    /// Points whose label changes under the majority vote.
    pub quantization_loss: u64,
    pub clamped_points: u64,
    pub fallbacks: u64,
}

struct SceneOutcome {
    predicted: PanopticAccumulator,
    ceiling: PanopticAccumulator,
    loss: u64,
    clamped: u64,
    fallbacks: u64,
}

fn oracle_one(
    index: usize,
    points: &[Point],
    labels: &[PanopticLabel],
    spec: &GridSpec,
    s: &OracleSettings,
) -> Result<SceneOutcome> {
    let noise = s.noise.map(|n| NoiseConfig {
        seed: n.seed.wrapping_add(index as u64),
        ..n
    });
    let rt = round_trip(points, labels, spec, s.clusterer, &s.params, noise.as_ref())?;
    let quantized = decode_to_points(&rt.encoded.panoptic, &rt.assignment);
    let clamped = rt.assignment.clamped_mask();
    let keep: Option<Vec<bool>> = s.exclude_clamped.then(|| clamped.iter().map(|c| !c).collect());
    let mut predicted = PanopticAccumulator::new(spec.classes().clone(), s.eval);
    predicted.add_scene(labels, &rt.predicted, keep.as_deref())?;
    let mut ceiling = PanopticAccumulator::new(spec.classes().clone(), s.eval);
    ceiling.add_scene(labels, &quantized, keep.as_deref())?;
    Ok(SceneOutcome {
        predicted,
        ceiling,
        loss: quantized.iter().zip(labels).filter(|(q, l)| q != l).count() as u64,
        clamped: clamped.iter().filter(|&&c| c).count() as u64,
        fallbacks: rt.propagation.fallbacks as u64,
    })
}

/// Encode, label, propagate, decode and score every scene. Scenes run in
/// parallel; results are combined in input order.
pub fn oracle_scenes(
    scenes: &[(Vec<Point>, Vec<PanopticLabel>)],
    spec: &GridSpec,
    settings: &OracleSettings,
    jobs: usize,
) -> Result<OracleReport> {
    settings.params.validate()?;
    if let Some(n) = &settings.noise {
        n.validate()?;
    }
    let outcomes = with_jobs(jobs, || {
        scenes
            .par_iter()
            .enumerate()
            .map(|(i, (p, l))| oracle_one(i, p, l, spec, settings))
            .collect::<Result<Vec<_>>>()
    })??;
    let classes = spec.classes();
    let mut predicted = PanopticAccumulator::new(classes.clone(), settings.eval);
    let mut ceiling = PanopticAccumulator::new(classes.clone(), settings.eval);
    let (mut loss, mut clamped, mut fallbacks) = (0, 0, 0);
    for o in outcomes {
        predicted.merge(&o.predicted)?;
        ceiling.merge(&o.ceiling)?;
        loss += o.loss;
        clamped += o.clamped;
        fallbacks += o.fallbacks;
    }
    Ok(OracleReport {
        scenes: scenes.len(),
        settings: *settings,
        panoptic: predicted.report(),
        ceiling: ceiling.report(),
        quantization_loss: loss,
        clamped_points: clamped,
        fallbacks,
    })
}

pub fn cmd_oracle(
    inputs: &[(PathBuf, PathBuf)],
    spec: &GridSpec,
    settings: &OracleSettings,
    jobs: usize,
) -> Result<OracleReport> {
    let scenes = inputs
        .iter()
        .map(|(p, l)| read_scene(p, l))
        .collect::<Result<Vec<_>>>()?;
    oracle_scenes(&scenes, spec, settings, jobs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenes: usize,
    pub panoptic: PqReport,
}

/// Scores predicted label files against ground-truth label files, pairwise.
pub fn cmd_eval(pairs: &[(PathBuf, PathBuf)], classes: &ClassTable, opts: EvalOptions) -> Result<EvalReport> {
    let mut acc = PanopticAccumulator::new(classes.clone(), opts);
    for (gt_path, pred_path) in pairs {
        let gt = io::read_labels(gt_path)?;
        let pred = io::read_labels(pred_path)?;
        acc.add_scene(&gt, &pred, None)?;
    }
    Ok(EvalReport {
        scenes: pairs.len(),
        panoptic: acc.report(),
    })
}

/// Propagates instance ids over a semantic and an affinity raster.
pub fn cmd_cluster(
    sem: &Grid<ClassId>,
    aff: &Grid<u8>,
    spec: &GridSpec,
    clusterer: Clusterer,
    params: &ClusteringParams,
) -> Result<Grid<PanopticLabel>> {
    if !sem.same_shape(aff) {
        return Err(Error::ShapeMismatch {
            expected_h: sem.h(),
            expected_w: sem.w(),
            found_h: aff.h(),
            found_w: aff.w(),
        });
    }
    Ok(propagate(clusterer, sem, aff, spec, params)?.panoptic)
}

/// Renders a raster file, or a labelled point cloud binned on `spec`.
pub enum RenderSource<'a> {
    Raster(Raster),
    Points { points: &'a [Point], labels: &'a [PanopticLabel], spec: &'a GridSpec },
}

pub fn cmd_render(source: RenderSource<'_>, classes: &ClassTable, scale: usize) -> Result<Vec<u8>> {
    let raster = match source {
        RenderSource::Raster(r) => r,
        RenderSource::Points { points, labels, spec } => {
            io::check_pair(points.len(), labels.len())?;
            let asg = pillarize(points, spec)?;
            let enc = LabelGrid::encode(labels, &asg, spec, Default::default())?;
            Raster::Panoptic(enc.panoptic)
        }
    };
    render::render_ppm(&raster, classes, scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub h: usize,
    pub w: usize,
    pub instances: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    /// Thing instances recovered per trial.
    pub recovered: Vec<usize>,
}

/// Times `propagate_local` on random rasters; trial `t` uses seed `seed + t`.
/// Raster generation and affinity labelling are not timed.
pub fn cmd_bench(spec: &GridSpec, instances: usize, trials: usize, seed: u64, params: &ClusteringParams) -> Result<BenchReport> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    let mut times = Vec::with_capacity(trials);
    let mut recovered = Vec::with_capacity(trials);
    for t in 0..trials {
        let truth = random_instance_raster(spec.h(), spec.w(), instances, seed.wrapping_add(t as u64), spec.classes())?;
        let sem = semantic_of(&truth);
        let aff = generate_affinity_labels(&truth, spec, params.order)?;
        let start = Instant::now();
        let out = propagate_local(&sem, &aff, spec, params)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        recovered.push(out.seeds + out.fallbacks);
    }
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.95 * trials as f64).ceil() as usize).clamp(1, trials) - 1;
    Ok(BenchReport {
        h: spec.h(),
        w: spec.w(),
        instances,
        trials,
        seed,
        mean_ms: times.iter().sum::<f64>() / trials as f64,
        p95_ms: sorted[rank],
        min_ms: sorted[0],
        max_ms: sorted[trials - 1],
        recovered,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

/// Plain-text per-class table followed by the aggregates.
pub fn summary_table(report: &PqReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<22} {:>7} {:>7} {:>7} {:>7} {:>6} {:>6} {:>6}", "class", "PQ", "SQ", "RQ", "IoU", "TP", "FP", "FN");
    for c in &report.per_class {
        if c.tp + c.fp + c.fn_ == 0 && c.gt_points == 0 {
            continue;
        }
        let _ = writeln!(
            s,
            "{:<22} {:>7} {:>7} {:>7} {:>7} {:>6} {:>6} {:>6}",
            c.name,
            cell(c.pq),
            cell(c.sq),
            cell(c.rq),
            cell(c.iou),
            c.tp,
            c.fp,
            c.fn_
        );
    }
    let a = &report.aggregates;
    let _ = writeln!(s, "PQ {}  SQ {}  RQ {}", cell(a.pq), cell(a.sq), cell(a.rq));
    let _ = writeln!(s, "PQ_th {}  PQ_st {}  mIoU {}", cell(a.pq_th), cell(a.pq_st), cell(a.miou));
    for n in &report.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}
