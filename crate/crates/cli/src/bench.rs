//! Perception and planning throughput on synthetic sweeps.

use std::time::Instant;

use glassnav_core::{build_layers, dynamic_window, select_velocity, Perception, PointCloudFrame, Pose2D, Vec2, VelocityPair};
use glassnav_sim::{scan, LidarModel, MaterialModel, Primitive, Shape, World};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub mean_ms: f64,
    pub p99_ms: f64,
    pub hz: f64,
}

impl Timing {
    fn from_samples(mut ms: Vec<f64>) -> Self {
        ms.sort_by(f64::total_cmp);
        let mean = ms.iter().sum::<f64>() / ms.len() as f64;
        let idx = ((0.99 * ms.len() as f64).ceil() as usize).clamp(1, ms.len()) - 1;
        Self {
            mean_ms: mean,
            p99_ms: ms[idx],
            hz: 1000.0 / mean,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub frames: usize,
    pub points_per_frame: usize,
    /// `build_layers` alone.
    pub binning: Timing,
    /// Layers through the composed nav map, including history upkeep.
    pub perception: Timing,
    /// Perception plus velocity selection.
    pub cycle: Timing,
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "frames {} points_per_frame {}", self.frames, self.points_per_frame)?;
        for (name, t) in [("binning", self.binning), ("perception", self.perception), ("cycle", self.cycle)] {
            writeln!(f, "{name} mean_ms {:.3} p99_ms {:.3} hz {:.1}", t.mean_ms, t.p99_ms, t.hz)?;
        }
        Ok(())
    }
}

/// A closed circular room of radius 1.8 m with a glass pane and a box, so
/// that every beam of a 16-channel lidar returns.
pub fn bench_world() -> World {
    let wall = |shape| Primitive {
        shape,
        z_min: -1.0,
        z_max: 3.0,
        material: MaterialModel::opaque(),
    };
    World {
        primitives: vec![
            wall(Shape::Arc {
                center: [0.0, 0.0],
                radius: 1.8,
                start_deg: 0.0,
                end_deg: 360.0,
            }),
            Primitive {
                shape: Shape::Polyline {
                    points: vec![[1.0, -0.6], [1.0, 0.6]],
                },
                z_min: 0.0,
                z_max: 2.0,
                material: MaterialModel::glass(),
            },
            wall(Shape::Polyline {
                points: vec![[-1.0, 0.5], [-1.0, 1.0], [-0.5, 1.0]],
            }),
        ],
        discs: vec![],
    }
}

/// Sweeps of [`bench_world`] from slowly advancing poses.
pub fn bench_frames(lidar: &LidarModel, count: usize) -> Vec<PointCloudFrame> {
    let world = bench_world();
    let distinct = 10;
    let sweeps: Vec<PointCloudFrame> = (0..distinct)
        .map(|k| scan(&Pose2D::new(0.01 * k as f64, 0.0, 0.0), lidar, &world, 0.0))
        .collect();
    (0..count)
        .map(|k| {
            let mut f = sweeps[k % distinct].clone();
            f.timestamp = k as f64 * 0.1;
            f
        })
        .collect()
}

pub fn bench(cfg: &PipelineConfig, n_frames: usize) -> CliResult<BenchReport> {
    if n_frames < 100 {
        return Err(CliError::Config("bench needs at least 100 frames".into()));
    }
    let frames = bench_frames(&cfg.lidar, n_frames);
    let points_per_frame = frames[0].points.len();
    let spec = cfg.grid();

    let mut binning = Vec::with_capacity(n_frames);
    for f in &frames {
        let t0 = Instant::now();
        std::hint::black_box(build_layers(f, &spec, &cfg.perception.layers));
        binning.push(t0.elapsed().as_secs_f64() * 1e3);
    }

    let mut perception = Perception::new(cfg.perception)?;
    let mut perc = Vec::with_capacity(n_frames);
    for f in &frames {
        let t0 = Instant::now();
        std::hint::black_box(perception.process(f)?);
        perc.push(t0.elapsed().as_secs_f64() * 1e3);
    }

    perception.reset();
    let mut cycle = Vec::with_capacity(n_frames);
    let goal = Vec2::new(5.0, 0.5);
    let mut current = VelocityPair::new(0.3, 0.0);
    for f in &frames {
        let t0 = Instant::now();
        let out = perception.process(f)?;
        let candidates = dynamic_window(current, &cfg.robot, cfg.planner.window_dt, (cfg.planner.n_v, cfg.planner.n_w));
        let plan = select_velocity(&candidates, &out.nav, goal, &cfg.robot, &cfg.planner);
        current = std::hint::black_box(plan.command());
        cycle.push(t0.elapsed().as_secs_f64() * 1e3);
    }

    Ok(BenchReport {
        frames: n_frames,
        points_per_frame,
        binning: Timing::from_samples(binning),
        perception: Timing::from_samples(perc),
        cycle: Timing::from_samples(cycle),
    })
}
