use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use panoptic_pillars::io::{self, Raster};
use panoptic_pillars::synth::{NoiseConfig, SceneConfig};
use panoptic_pillars::{ClassTable, Error, Result};
use panoptic_pillars_cli::options::{read_classes, ClusterOpts, EvalOpts, GridOpts};
use panoptic_pillars_cli::{
    cmd_bench, cmd_cluster, cmd_eval, cmd_oracle, cmd_render, cmd_synth, read_scene, scenes_in, summary_table,
    OracleSettings, RenderSource,
};

#[derive(Parser)]
#[command(name = "pillars", version, about = "Pillar-level panoptic labels: encode, propagate, score")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic labelled scenes.
    Synth {
        /// Scene config JSON; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config scene count.
        #[arg(long)]
        scenes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Encode ground truth into pillars, regenerate instances and score the result.
    Oracle {
        #[arg(long)]
        points: Vec<PathBuf>,
        #[arg(long)]
        labels: Vec<PathBuf>,
        /// Use every scene_NNNN pair in this directory.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[command(flatten)]
        grid: GridOpts,
        #[command(flatten)]
        cluster: ClusterOpts,
        #[command(flatten)]
        eval: EvalOpts,
        /// Affinity flip probability applied before propagation.
        #[arg(long, default_value_t = 0.0)]
        p_aff: f64,
        /// Semantic flip probability applied before propagation.
        #[arg(long, default_value_t = 0.0)]
        p_sem: f64,
        /// Noise seed; scene i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Score predicted label files against ground truth.
    Eval {
        #[arg(long)]
        gt: Vec<PathBuf>,
        #[arg(long)]
        pred: Vec<PathBuf>,
        #[arg(long)]
        classes: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        min_seg_points: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Propagate instance ids over semantic and affinity rasters.
    Cluster {
        #[arg(long)]
        sem: PathBuf,
        #[arg(long)]
        aff: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        grid: GridOpts,
        #[command(flatten)]
        cluster: ClusterOpts,
    },
    /// Draw a raster, or labelled points binned on a grid, as a PPM image.
    Render {
        #[arg(long, conflicts_with_all = ["points", "labels"])]
        raster: Option<PathBuf>,
        #[arg(long, requires = "labels")]
        points: Option<PathBuf>,
        #[arg(long, requires = "points")]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        scale: usize,
        #[command(flatten)]
        grid: GridOpts,
    },
    /// Time local clustering on random rasters.
    Bench {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        grid: GridOpts,
        #[command(flatten)]
        cluster: ClusterOpts,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn pairs(points: Vec<PathBuf>, labels: Vec<PathBuf>, dir: Option<PathBuf>) -> Result<Vec<(PathBuf, PathBuf)>> {
    if let Some(d) = dir {
        return scenes_in(&d);
    }
    if points.len() != labels.len() || points.is_empty() {
        return Err(Error::InvalidInput(format!(
            "need matching --points/--labels pairs, got {} and {}",
            points.len(),
            labels.len()
        )));
    }
    Ok(points.into_iter().zip(labels).collect())
}

fn write_json(path: Option<PathBuf>, json: String) -> Result<()> {
    if let Some(p) = path {
        fs::write(p, json + "\n")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            config,
            out,
            seed,
            scenes,
            jobs,
        } => {
            let mut cfg = match config {
                Some(p) => SceneConfig::from_json(&fs::read_to_string(p)?)?,
                None => SceneConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = scenes {
                cfg.scenes = n;
            }
            let files = cmd_synth(&cfg, &out, jobs)?;
            println!("wrote {} files to {}", files.len(), out.display());
        }
        Command::Oracle {
            points,
            labels,
            dir,
            grid,
            cluster,
            eval,
            p_aff,
            p_sem,
            seed,
            report,
            jobs,
        } => {
            let inputs = pairs(points, labels, dir)?;
            let spec = grid.spec(None)?;
            let settings = OracleSettings {
                clusterer: cluster.clusterer.into(),
                params: cluster.params(&spec)?,
                eval: eval.options(),
                exclude_clamped: eval.exclude_clamped,
                noise: (p_aff > 0.0 || p_sem > 0.0).then_some(NoiseConfig { p_sem, p_aff, seed }),
            };
            let r = cmd_oracle(&inputs, &spec, &settings, jobs)?;
            print!("{}", summary_table(&r.panoptic));
            println!(
                "ceiling PQ {:.2}  quantization loss {} points  clamped {}  fallbacks {}",
                r.ceiling.aggregates.pq.unwrap_or(f64::NAN),
                r.quantization_loss,
                r.clamped_points,
                r.fallbacks
            );
            write_json(report, serde_json::to_string_pretty(&r)?)?;
        }
        Command::Eval {
            gt,
            pred,
            classes,
            min_seg_points,
            report,
        } => {
            let inputs = pairs(gt, pred, None)?;
            let classes = match classes {
                Some(p) => read_classes(&p)?,
                None => ClassTable::default(),
            };
            let opts = panoptic_pillars::metrics::EvalOptions {
                min_segment_points: min_seg_points,
            };
            let r = cmd_eval(&inputs, &classes, opts)?;
            print!("{}", summary_table(&r.panoptic));
            write_json(report, serde_json::to_string_pretty(&r)?)?;
        }
        Command::Cluster {
            sem,
            aff,
            out,
            grid,
            cluster,
        } => {
            let sem = io::read_raster(sem)?.into_semantic()?;
            let aff = io::read_raster(aff)?.into_affinity()?;
            let spec = grid.spec(Some((sem.h(), sem.w())))?;
            sem.check_shape(spec.h(), spec.w())?;
            let panoptic = cmd_cluster(&sem, &aff, &spec, cluster.clusterer.into(), &cluster.params(&spec)?)?;
            io::write_raster(out, &Raster::Panoptic(panoptic))?;
        }
        Command::Render {
            raster,
            points,
            labels,
            out,
            scale,
            grid,
        } => {
            let image = match (raster, points, labels) {
                (Some(r), ..) => {
                    let classes = match &grid.classes {
                        Some(p) => read_classes(p)?,
                        None => ClassTable::default(),
                    };
                    cmd_render(RenderSource::Raster(io::read_raster(r)?), &classes, scale)?
                }
                (None, Some(p), Some(l)) => {
                    let (points, labels) = read_scene(&p, &l)?;
                    let spec = grid.spec(None)?;
                    let source = RenderSource::Points {
                        points: &points,
                        labels: &labels,
                        spec: &spec,
                    };
                    cmd_render(source, spec.classes(), scale)?
                }
                _ => return Err(Error::InvalidInput("render needs --raster or --points with --labels".into())),
            };
            fs::write(out, image)?;
        }
        Command::Bench {
            trials,
            instances,
            seed,
            grid,
            cluster,
            json,
        } => {
            let spec = grid.spec(None)?;
            let r = cmd_bench(&spec, instances, trials, seed, &cluster.params(&spec)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!("propagate_local {}x{}, {} instances, {} trials", r.h, r.w, r.instances, r.trials);
                println!("{:>10} {:>10} {:>10} {:>10}", "mean_ms", "p95_ms", "min_ms", "max_ms");
                println!("{:>10.3} {:>10.3} {:>10.3} {:>10.3}", r.mean_ms, r.p95_ms, r.min_ms, r.max_ms);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
