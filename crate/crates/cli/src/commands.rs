//! Command-line surface.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use glassnav_core::pgm::{auto_scale, write_mask_pgm, write_pgm};
use glassnav_core::{frame_io, Outcome, Perception, PointCloudFrame};
use glassnav_sim::{ground_truth_grid, scan, Scene};
use rayon::prelude::*;

use crate::bench::bench;
use crate::config::PipelineConfig;
use crate::detect::{csv_row, detect_frames, detect_map, DetectOptions, Region, FRAME_CSV_HEADER};
use crate::error::{CliError, CliResult};
use crate::run::{effective_config, run_scenario, runs_csv_row, write_run_artifacts, RunOptions, RUNS_CSV_HEADER};

#[derive(Debug, Parser)]
#[command(name = "glassnav", version, about = "Transparent-obstacle detection and avoidance from lidar intensity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ConfigArgs {
    /// Built-in profile: default or compact.
    #[arg(long, default_value = "default")]
    pub profile: String,
    /// JSON file merged over the profile (its own "profile" key wins).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn load(&self) -> CliResult<PipelineConfig> {
        match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                let patch: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let name = patch.get("profile").and_then(|p| p.as_str()).unwrap_or(&self.profile);
                PipelineConfig::profile(name)?.merged(&patch)
            }
            None => {
                let cfg = PipelineConfig::profile(&self.profile)?;
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Granularity {
    Frame,
    Map,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scenes in closed loop, once per seed.
    Run {
        #[arg(required = true)]
        scenes: Vec<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Replace the seeds listed in the scene.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Write per-cycle nav-map and TON-mask PGMs.
        #[arg(long)]
        dump_grids: bool,
        /// Save the sensor frames for `replay` and `map`.
        #[arg(long)]
        record_frames: bool,
        /// Exit with status 3 unless every run reaches its goal.
        #[arg(long)]
        strict: bool,
        /// Runs in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score detection on recorded frames against a scene's ground truth.
    Replay {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Score the history-accumulated mask.
        #[arg(long)]
        accumulate: bool,
        #[arg(long, value_enum, default_value = "swept")]
        region: Region,
        #[arg(long, value_enum, default_value = "both")]
        granularity: Granularity,
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
    },
    /// Accumulate a frame log and write the final mapping grid.
    Map {
        #[arg(long)]
        frames: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "map")]
        out: PathBuf,
    },
    /// Time perception and planning on synthetic sweeps.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 200)]
        frames: usize,
        #[arg(long)]
        json: bool,
    },
    /// Write ground truth and one sweep's grids for a scene as PGM.
    Render {
        scene: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "render")]
        out: PathBuf,
    },
}

fn load_frames(path: &Path) -> CliResult<Vec<PointCloudFrame>> {
    Ok(frame_io::read_frames(BufReader::new(fs::File::open(path)?))?)
}

fn write_grid(path: &Path, grid: &glassnav_core::IntensityGrid) -> CliResult<()> {
    write_pgm(BufWriter::new(fs::File::create(path)?), grid, auto_scale(grid))?;
    Ok(())
}

fn write_mask(path: &Path, grid: &glassnav_core::BinaryGrid) -> CliResult<()> {
    write_mask_pgm(BufWriter::new(fs::File::create(path)?), grid)?;
    Ok(())
}

/// Executes a parsed command and returns the process exit status.
pub fn execute(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Run {
            scenes,
            config,
            out,
            seeds,
            dump_grids,
            record_frames,
            strict,
            jobs,
        } => {
            let base = config.load()?;
            let mut jobs_list = Vec::new();
            for path in &scenes {
                let scene = Scene::load(path)?;
                let cfg = effective_config(&scene, &base)?;
                for &seed in seeds.as_deref().unwrap_or(&scene.seeds) {
                    jobs_list.push((scene.clone(), cfg.clone(), seed));
                }
            }
            fs::create_dir_all(&out)?;
            let execute_one = |(scene, cfg, seed): &(Scene, PipelineConfig, u64)| -> CliResult<Vec<String>> {
                let dir = out.join(&scene.name).join(format!("seed_{seed}"));
                let opts = RunOptions {
                    dump_grids: dump_grids.then(|| dir.join("grids")),
                    record_frames,
                };
                let result = run_scenario(scene, cfg, *seed, &opts)?;
                write_run_artifacts(&dir, scene, cfg, &result)?;
                log::info!("{} seed {}: {}", scene.name, seed, result.record.outcome);
                Ok(runs_csv_row(&scene.name, &result).to_vec())
            };
            let rows: Vec<CliResult<Vec<String>>> = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?
                .install(|| jobs_list.par_iter().map(execute_one).collect());
            let mut w = csv::Writer::from_path(out.join("runs.csv"))?;
            w.write_record(RUNS_CSV_HEADER)?;
            let mut all_success = true;
            let mut by_scene: std::collections::BTreeMap<String, Vec<bool>> = Default::default();
            for row in rows {
                let row = row?;
                let ok = row[2] == Outcome::Success.as_str();
                all_success &= ok;
                by_scene.entry(row[0].clone()).or_default().push(ok);
                w.write_record(&row)?;
            }
            w.flush()?;
            for (name, oks) in by_scene {
                let rate = 100.0 * oks.iter().filter(|o| **o).count() as f64 / oks.len() as f64;
                println!("{name}: success rate {rate:.0}% over {} runs", oks.len());
            }
            Ok(if strict && !all_success { 3 } else { 0 })
        }
        Command::Replay {
            frames,
            scene,
            config,
            accumulate,
            region,
            granularity,
            out,
        } => {
            let scene = Scene::load(&scene)?;
            let cfg = effective_config(&scene, &config.load()?)?;
            let world = scene.world()?;
            let frames = load_frames(&frames)?;
            let mut w = csv::Writer::from_path(&out)?;
            w.write_record(FRAME_CSV_HEADER)?;
            if granularity != Granularity::Map {
                let report = detect_frames(&frames, &world, &cfg, DetectOptions { accumulate, region })?;
                let label = if accumulate { "frame_accumulated" } else { "frame" };
                for f in &report.frames {
                    w.write_record(csv_row(&f.frame.to_string(), &format!("{:.3}", f.timestamp), label, &f.counts, &f.scores))?;
                }
                if let Some(s) = report.overall() {
                    w.write_record(csv_row("all", "", label, &report.total, &s))?;
                    println!("{label}: f1 {:.4} mae {:.4} miou {:.4}", s.f1, s.mae, s.miou);
                }
            }
            if granularity != Granularity::Frame {
                if let Some((c, s)) = detect_map(&frames, &world, &cfg)? {
                    w.write_record(csv_row("map", "", "map", &c, &s))?;
                    println!("map: f1 {:.4} mae {:.4} miou {:.4}", s.f1, s.mae, s.miou);
                }
            }
            w.flush()?;
            Ok(0)
        }
        Command::Map { frames, config, out } => {
            let cfg = config.load()?;
            let frames = load_frames(&frames)?;
            let mut perception = Perception::new(cfg.perception)?;
            fs::create_dir_all(&out)?;
            let mut last = None;
            for f in &frames {
                let (layers, ..) = perception.detect(f)?;
                let mapping = perception.mapping(&layers, f)?;
                let out = perception.process(f)?;
                last = Some((mapping, out.transparent));
            }
            if let Some((mapping, transparent)) = last {
                write_grid(&out.join("mapping.pgm"), &mapping)?;
                write_mask(&out.join("transparent.pgm"), &transparent)?;
                println!("{} transparent cells in the final map", transparent.count_ones());
            }
            Ok(0)
        }
        Command::Bench { config, frames, json } => {
            let report = bench(&config.load()?, frames)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                print!("{report}");
            }
            Ok(0)
        }
        Command::Render { scene, config, seed, out } => {
            let scene = Scene::load(&scene)?;
            let cfg = effective_config(&scene, &config.load()?)?;
            let world = scene.world()?;
            let pose = scene.start_pose(seed);
            fs::create_dir_all(&out)?;
            let gt = ground_truth_grid(&world, &cfg.grid(), &pose, 0.0);
            write_mask(&out.join("truth_transparent.pgm"), &gt.transparent)?;
            write_mask(&out.join("truth_other.pgm"), &gt.other)?;
            let mut frame = scan(&pose, &cfg.lidar, &world, 0.0);
            frame.pose = pose;
            let mut perception = Perception::new(cfg.perception)?;
            let o = perception.process(&frame)?;
            write_grid(&out.join("low.pgm"), &o.layers.low)?;
            write_grid(&out.join("mid.pgm"), &o.layers.mid)?;
            write_grid(&out.join("high.pgm"), &o.layers.high)?;
            write_grid(&out.join("nav.pgm"), &o.nav.grid)?;
            write_mask(&out.join("ton.pgm"), &o.mask.grid)?;
            write_mask(&out.join("extrap.pgm"), &o.extrap.mask)?;
            println!("{} points, {} TONs", frame.points.len(), o.tons.len());
            Ok(0)
        }
    }
}
