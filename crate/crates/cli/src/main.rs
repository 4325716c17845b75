use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use heightproj::io::{
    project_rows, read_csv, read_heightmap, read_points, read_voxels, reference_rows, write_csv, write_csv_to,
    write_heightmap, write_points, write_voxels, ReferenceRow,
};
use heightproj::metrics::{confusion, miou, ray_fan, rayiou, RayQuery, DEFAULT_THRESHOLDS};
use heightproj::phc::{mix, schedule_rho, MixConfig, MixMode, ScheduleKind, ScheduleParams};
use heightproj::projection::{sample_height_guided, CameraModel, ReferencePointSet, SamplingConfig};
use heightproj::sim::{self, canonical, LidarSpec, SamplingMode, SceneSpec};
use heightproj::{heightmap_from_points, heightmap_from_semantic, VoxelGridSpec, DEFAULT_NUM_CLASSES};
use nalgebra::Point3;

/// Bad flags or flag combinations; exits with status 1.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "heightproj", version, about = "Height-guided BEV projection pipelines")]
struct Cli {
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct GridArg {
    /// Grid JSON; the Occ3D grid when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
}

impl GridArg {
    fn load(&self) -> Result<VoxelGridSpec> {
        match &self.spec {
            Some(p) => Ok(VoxelGridSpec::load(p)?),
            None => Ok(VoxelGridSpec::occ3d()),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleMode {
    Uniform,
    Guided,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Miou,
    Rayiou,
}

#[derive(Subcommand)]
enum Cmd {
    /// LiDAR point cloud (.hprp) to height map (.hprh).
    Heightmap {
        #[arg(long)]
        points: PathBuf,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Semantic voxels (.hprv) to ground-truth height map (.hprh).
    Gtheight {
        #[arg(long)]
        voxels: PathBuf,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long, default_value_t = DEFAULT_NUM_CLASSES)]
        classes: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Training-time mix of LiDAR and ground-truth height maps.
    Mix {
        #[arg(long)]
        lidar: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long)]
        epoch: u32,
        #[arg(long)]
        epochs: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "replace")]
        mode: String,
        #[arg(long, default_value = "cosine")]
        schedule: String,
        /// Share of training at rho = 1 under the step schedule.
        #[arg(long, default_value_t = 0.5)]
        step_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reference point heights per pillar as CSV.
    Sample {
        /// Height map bounding guided pillars.
        #[arg(long)]
        heights: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long, default_value_t = 4)]
        nz: usize,
        #[arg(long, value_enum, default_value_t = SampleMode::Guided)]
        mode: SampleMode,
        /// CSV path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Projects reference points (CSV from `sample`) into one or more cameras.
    Project {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long = "calib", required = true)]
        calib: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scores a predicted voxel grid against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long, value_enum)]
        metric: Metric,
        #[arg(long, default_value_t = DEFAULT_NUM_CLASSES)]
        classes: u8,
        /// Score the free label as a class (mIoU only).
        #[arg(long)]
        include_free: bool,
        /// JSON list of {"origin": [x,y,z], "direction": [dx,dy,dz]}.
        #[arg(long)]
        rays: Option<PathBuf>,
        /// Depth tolerances in metres.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_THRESHOLDS)]
        thresholds: Vec<f64>,
    },
    /// Simulated LiDAR points and rasterized ground truth for a scene.
    Sim {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        lidar: PathBuf,
        #[command(flatten)]
        grid: GridArg,
        /// Overrides the seed in the LiDAR file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_points: PathBuf,
        #[arg(long)]
        out_gt: PathBuf,
    },
    /// Fraction of reference points landing on the object in the image.
    ExpHitrate {
        /// Scene JSON; the built-in scene when omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Camera JSON; the built-in overhead camera when omitted.
        #[arg(long)]
        calib: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long, default_value_t = 4)]
        nz: usize,
        #[arg(long, value_enum, default_value_t = SampleMode::Guided)]
        mode: SampleMode,
        /// Height map for guided pillars; heights of the rasterized scene when omitted.
        #[arg(long)]
        heights: Option<PathBuf>,
        /// Per-point CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// LiDAR height error against rasterized ground truth.
    ExpHeighterr {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        lidar: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArg,
        /// Overrides the LiDAR z noise.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Writes the built-in scene, camera, LiDAR and grid as JSON files.
    Canonical {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn write_text(path: &Path, s: &str) -> Result<()> {
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn emit_csv<T: serde::Serialize>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    match out {
        Some(p) => write_csv(p, rows)?,
        None => write_csv_to(std::io::stdout().lock(), rows)?,
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string(v)?)?;
    Ok(())
}

fn default_rays(spec: &VoxelGridSpec) -> Vec<RayQuery> {
    // sensor height of 1 m when the grid spans it
    let z = if spec.z_min() < 1.0 && spec.z_max() > 1.0 {
        1.0
    } else {
        0.5 * (spec.z_min() + spec.z_max())
    };
    let elevations: Vec<f64> = [-20.0f64, -10.0, -5.0, -2.0, 0.0, 2.0, 5.0]
        .iter()
        .map(|d| d.to_radians())
        .collect();
    let (cx, cy) = (
        0.5 * (spec.x_axis().min + spec.x_axis().max),
        0.5 * (spec.y_axis().min + spec.y_axis().max),
    );
    ray_fan(Point3::new(cx, cy, z), 360, &elevations)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Heightmap { points, grid, out } => {
            let spec = grid.load()?;
            let cloud = read_points(&points)?;
            write_heightmap(&out, &heightmap_from_points(&cloud, &spec))?;
        }
        Cmd::Gtheight {
            voxels,
            grid,
            classes,
            out,
        } => {
            let spec = grid.load()?;
            let g = read_voxels(&voxels, &spec, classes)?;
            write_heightmap(&out, &heightmap_from_semantic(&g))?;
        }
        Cmd::Mix {
            lidar,
            gt,
            grid,
            epoch,
            epochs,
            seed,
            mode,
            schedule,
            step_fraction,
            out,
        } => {
            let mode: MixMode = mode.parse().map_err(|e| usage(format!("{e}")))?;
            let kind: ScheduleKind = schedule.parse().map_err(|e| usage(format!("{e}")))?;
            let params = ScheduleParams {
                total_epochs: epochs,
                kind,
                step_fraction,
            };
            let rho = schedule_rho(epoch, &params).map_err(|e| usage(format!("{e}")))?;
            let spec = grid.load()?;
            let (hl, hg) = (read_heightmap(&lidar, &spec)?, read_heightmap(&gt, &spec)?);
            write_heightmap(&out, &mix(&hl, &hg, rho, &MixConfig { mode, seed })?)?;
            print_json(&serde_json::json!({ "epoch": epoch, "rho": rho }))?;
        }
        Cmd::Sample {
            heights,
            grid,
            nz,
            mode,
            out,
        } => {
            let spec = grid.load()?;
            let cfg = SamplingConfig::new(nz).map_err(|e| usage(format!("{e}")))?;
            let refs = match (mode, heights) {
                (SampleMode::Uniform, _) => ReferencePointSet::uniform(&spec, &cfg)?,
                (SampleMode::Guided, Some(h)) => sample_height_guided(&read_heightmap(&h, &spec)?, &cfg)?,
                (SampleMode::Guided, None) => return Err(usage("--mode guided needs --heights")),
            };
            emit_csv(out.as_deref(), &reference_rows(&refs))?;
        }
        Cmd::Project { refs, calib, out } => {
            let rows: Vec<ReferenceRow> = read_csv(&refs)?;
            let cams = calib
                .iter()
                .map(|p| CameraModel::load(p).map_err(anyhow::Error::from))
                .collect::<Result<Vec<_>>>()?;
            emit_csv(out.as_deref(), &project_rows(&rows, &cams))?;
        }
        Cmd::Eval {
            pred,
            gt,
            grid,
            metric,
            classes,
            include_free,
            rays,
            thresholds,
        } => {
            let spec = grid.load()?;
            let (p, g) = (read_voxels(&pred, &spec, classes)?, read_voxels(&gt, &spec, classes)?);
            match metric {
                Metric::Miou => {
                    let r = miou(&confusion(&p, &g, !include_free)?)?;
                    for (c, v) in &r.per_class {
                        match v {
                            Some(v) => println!("class {c:>3}  IoU {v}"),
                            None => println!("class {c:>3}  IoU -"),
                        }
                    }
                    println!("mIoU {}", r.miou);
                    print_json(&serde_json::json!({ "metric": "miou", "value": r.miou, "per_class": r.per_class }))?;
                }
                Metric::Rayiou => {
                    let queries = match rays {
                        Some(path) => {
                            let s = std::fs::read_to_string(&path)
                                .with_context(|| format!("reading {}", path.display()))?;
                            serde_json::from_str::<Vec<RayQuery>>(&s)
                                .with_context(|| format!("parsing {}", path.display()))?
                        }
                        None => default_rays(&spec),
                    };
                    let r = rayiou(&p, &g, &queries, &thresholds)?;
                    for (t, v) in r.thresholds.iter().zip(&r.per_threshold) {
                        println!("RayIoU@{t}  {v}");
                    }
                    println!("RayIoU {}", r.mean);
                    print_json(&serde_json::json!({
                        "metric": "rayiou",
                        "value": r.mean,
                        "thresholds": r.thresholds,
                        "per_threshold": r.per_threshold,
                        "rays": queries.len(),
                    }))?;
                }
            }
        }
        Cmd::Sim {
            scene,
            lidar,
            grid,
            seed,
            out_points,
            out_gt,
        } => {
            let spec = grid.load()?;
            let scene = SceneSpec::load(&scene)?;
            let mut lidar = LidarSpec::load(&lidar)?;
            if let Some(s) = seed {
                lidar.seed = s;
            }
            let cloud = sim::simulate_lidar(&scene, &lidar)?;
            write_points(&out_points, &cloud)?;
            write_voxels(&out_gt, &sim::rasterize_gt(&scene, &spec)?)?;
            print_json(&serde_json::json!({ "points": cloud.len(), "classes": scene.num_classes() }))?;
        }
        Cmd::ExpHitrate {
            scene,
            calib,
            grid,
            nz,
            mode,
            heights,
            out,
        } => {
            let spec = grid.load()?;
            let scene = match scene {
                Some(p) => SceneSpec::load(p)?,
                None => canonical::scene(),
            };
            let camera = match calib {
                Some(p) => CameraModel::load(p)?,
                None => canonical::camera(),
            };
            let cfg = SamplingConfig::new(nz).map_err(|e| usage(format!("{e}")))?;
            let h = match (mode, heights) {
                (SampleMode::Uniform, _) => None,
                (SampleMode::Guided, Some(p)) => Some(read_heightmap(p, &spec)?),
                (SampleMode::Guided, None) => Some(heightmap_from_semantic(&sim::rasterize_gt(&scene, &spec)?)),
            };
            let sampling = h.as_ref().map_or(SamplingMode::Uniform, SamplingMode::HeightGuided);
            let r = sim::hitrate_experiment(&scene, &camera, &spec, &cfg, sampling)?;
            if let Some(p) = out {
                write_csv(p, &r.records)?;
            }
            print_json(&serde_json::json!({ "hits": r.hits, "total": r.total, "hit_rate": r.hit_rate }))?;
        }
        Cmd::ExpHeighterr {
            scene,
            lidar,
            grid,
            noise,
            seed,
        } => {
            let spec = grid.load()?;
            let scene = match scene {
                Some(p) => SceneSpec::load(p)?,
                None => canonical::scene(),
            };
            let mut lidar = match lidar {
                Some(p) => LidarSpec::load(p)?,
                None => canonical::lidar(0.0, 0),
            };
            if let Some(n) = noise {
                lidar.noise_sigma_z = n;
            }
            if let Some(s) = seed {
                lidar.seed = s;
            }
            print_json(&sim::height_error_experiment(&scene, &lidar, &spec)?)?;
        }
        Cmd::Canonical { out_dir } => {
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            write_text(&out_dir.join("scene.json"), &canonical::scene().to_json())?;
            write_text(&out_dir.join("camera.json"), &canonical::camera().to_json())?;
            write_text(&out_dir.join("lidar.json"), &canonical::lidar(0.05, 0).to_json())?;
            write_text(&out_dir.join("grid.json"), &canonical::grid().to_json())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
