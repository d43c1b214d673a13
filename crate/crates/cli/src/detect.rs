//! Detection scoring against simulator ground truth.

use glassnav_core::layers::roi_offset;
use glassnav_core::metrics::confusion_where;
use glassnav_core::{
    grid_to_world, scores, world_to_grid, BinaryGrid, Cell, ConfusionCounts, GridSpec, Perception, PointCloudFrame, Pose2D,
    Scores, Vec2,
};
use glassnav_sim::{ground_truth_grid, World};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::CliResult;

/// Which cells a frame is scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Region {
    /// The whole ROI.
    Roi,
    /// ROI cells beside the path driven over the accumulation window.
    Swept,
}

#[derive(Debug, Clone, Copy)]
pub struct DetectOptions {
    /// Score the frame mask united with the transferred history instead of
    /// the frame mask alone.
    pub accumulate: bool,
    pub region: Region,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameScore {
    pub frame: usize,
    pub timestamp: f64,
    pub region_cells: u64,
    pub counts: ConfusionCounts,
    pub scores: Scores,
}

#[derive(Debug, Clone)]
pub struct DetectReport {
    pub frames: Vec<FrameScore>,
    /// Counts summed over every scored frame.
    pub total: ConfusionCounts,
    /// Predicted transparent cells over all frames, whether or not they fell
    /// in the scored region.
    pub predicted_cells: u64,
}

impl DetectReport {
    pub fn overall(&self) -> Option<Scores> {
        scores(&self.total).ok()
    }
}

/// Cells of the centered `m` window whose closest point on the `path`
/// polyline (meters, grid frame) lies strictly inside the path and at most
/// half the window side away.
pub fn swept_region(path: &[Vec2], spec: &GridSpec, m: usize) -> CliResult<BinaryGrid> {
    let offset = roi_offset(spec.n, m)? as i32;
    let mut region = BinaryGrid::new(m);
    let length: f64 = path.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    if path.len() < 2 || length <= 1e-9 {
        return Ok(region);
    }
    let reach = 0.5 * m as f64 * spec.cell_size;
    let tol = 1e-9;
    for r in 0..m as i32 {
        for c in 0..m as i32 {
            let q = grid_to_world(Cell::new(r + offset, c + offset), spec);
            let mut best = (f64::INFINITY, 0.0);
            let mut along = 0.0;
            for w in path.windows(2) {
                let d = w[1] - w[0];
                let len = d.norm();
                if len <= 0.0 {
                    continue;
                }
                let t = ((q - w[0]).dot(d) / (len * len)).clamp(0.0, 1.0);
                let dist = (q - (w[0] + d * t)).norm();
                if dist < best.0 - tol {
                    best = (dist, along + t * len);
                }
                along += len;
            }
            let (dist, at) = best;
            if dist <= reach && at > tol && at < length - tol {
                region.set(Cell::new(r, c), 1);
            }
        }
    }
    Ok(region)
}

/// Transparent ground truth for the ROI of a robot at `pose` at `time`.
pub fn roi_truth(world: &World, spec: &GridSpec, m: usize, pose: &Pose2D, time: f64) -> CliResult<BinaryGrid> {
    let full = ground_truth_grid(world, spec, pose, time).transparent;
    let offset = roi_offset(spec.n, m)?;
    let mut roi = BinaryGrid::new(m);
    for r in 0..m {
        for c in 0..m {
            *roi.at_mut(r, c) = full.at(r + offset, c + offset);
        }
    }
    Ok(roi)
}

/// Runs perception over `frames` and scores every frame against the
/// transparent ground truth of `world` at the frame pose. Frames whose
/// region is empty are skipped.
pub fn detect_frames(
    frames: &[PointCloudFrame],
    world: &World,
    cfg: &PipelineConfig,
    opts: DetectOptions,
) -> CliResult<DetectReport> {
    let spec = cfg.grid();
    let m = cfg.perception.roi;
    let mut perception = Perception::new(cfg.perception)?;
    let mut rows = Vec::new();
    let mut total = ConfusionCounts::default();
    let mut predicted_cells = 0;
    let window = cfg.perception.t_past;
    for (k, frame) in frames.iter().enumerate() {
        let out = perception.process(frame)?;
        let pred = if opts.accumulate { out.transparent } else { out.mask.grid };
        predicted_cells += pred.count_ones() as u64;
        let gt = roi_truth(world, &spec, m, &frame.pose, frame.timestamp)?;
        let region = match opts.region {
            Region::Roi => None,
            Region::Swept => {
                let first = k.saturating_sub(window);
                let to_robot = frame.pose.inverse();
                let path: Vec<Vec2> = frames[first..=k]
                    .iter()
                    .map(|f| to_robot.apply(Vec2::new(f.pose.x(), f.pose.y())))
                    .collect();
                Some(swept_region(&path, &spec, m)?)
            }
        };
        let counts = confusion_where(&pred, &gt, region.as_ref())?;
        if counts.total() == 0 {
            continue;
        }
        total = total + counts;
        rows.push(FrameScore {
            frame: k,
            timestamp: frame.timestamp,
            region_cells: counts.total(),
            counts,
            scores: scores(&counts)?,
        });
    }
    Ok(DetectReport {
        frames: rows,
        total,
        predicted_cells,
    })
}

/// One world-anchored map of every frame's TON cells, scored against the
/// ground truth over the region beside the whole path.
pub fn detect_map(frames: &[PointCloudFrame], world: &World, cfg: &PipelineConfig) -> CliResult<Option<(ConfusionCounts, Scores)>> {
    if frames.is_empty() {
        return Ok(None);
    }
    let spec = cfg.grid();
    let m = cfg.perception.roi;
    let offset = roi_offset(spec.n, m)? as i32;
    // The map grid is aligned with the first pose, so a robot driving
    // straight keeps its cells aligned with the map cells.
    let first = frames[0].pose;
    let to_first = first.inverse();
    let pts: Vec<Vec2> = frames.iter().map(|f| to_first.apply(Vec2::new(f.pose.x(), f.pose.y()))).collect();
    let (lo, hi) = pts.iter().fold(
        (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), p| (Vec2::new(lo.x.min(p.x), lo.y.min(p.y)), Vec2::new(hi.x.max(p.x), hi.y.max(p.y))),
    );
    let reach = 0.5 * m as f64 * spec.cell_size;
    let span = (hi.x - lo.x).max(hi.y - lo.y) + 2.0 * reach + 4.0 * spec.cell_size;
    let n = (((span / spec.cell_size).ceil() as usize) + 1) & !1;
    let map_spec = GridSpec::new(n, spec.cell_size)?;
    let snap = |v: f64| (v / spec.cell_size).round() * spec.cell_size;
    let anchor = first.compose(&Pose2D::new(snap(0.5 * (lo.x + hi.x)), snap(0.5 * (lo.y + hi.y)), 0.0));
    let to_map = anchor.inverse();
    let mut perception = Perception::new(cfg.perception)?;
    let mut pred = BinaryGrid::new(n);
    for frame in frames {
        let out = perception.process(frame)?;
        for cell in out.mask.grid.ones() {
            let local = grid_to_world(cell.offset(offset, offset), &spec);
            let global = frame.pose.apply(local);
            if let Some(c) = world_to_grid(to_map.apply(global), &map_spec) {
                pred.set(c, 1);
            }
        }
    }
    let last = frames.last().expect("non-empty");
    let gt = ground_truth_grid(world, &map_spec, &anchor, last.timestamp).transparent;
    let path: Vec<Vec2> = frames.iter().map(|f| to_map.apply(Vec2::new(f.pose.x(), f.pose.y()))).collect();
    let region = swept_region(&path, &map_spec, n - 2)?;
    let mut full_region = BinaryGrid::new(n);
    for c in region.ones() {
        full_region.set(c.offset(1, 1), 1);
    }
    let counts = confusion_where(&pred, &gt, Some(&full_region))?;
    if counts.total() == 0 {
        return Ok(None);
    }
    Ok(Some((counts, scores(&counts)?)))
}

pub const FRAME_CSV_HEADER: [&str; 14] = [
    "frame",
    "timestamp",
    "granularity",
    "region_cells",
    "tp",
    "fp",
    "fn",
    "tn",
    "miou",
    "pa",
    "precision",
    "recall",
    "f1",
    "mae",
];

pub fn csv_row(frame: &str, timestamp: &str, granularity: &str, c: &ConfusionCounts, s: &Scores) -> Vec<String> {
    vec![
        frame.to_string(),
        timestamp.to_string(),
        granularity.to_string(),
        c.total().to_string(),
        c.tp.to_string(),
        c.fp.to_string(),
        c.fn_.to_string(),
        c.tn.to_string(),
        format!("{:.6}", s.miou),
        format!("{:.6}", s.pa),
        format!("{:.6}", s.precision),
        format!("{:.6}", s.recall),
        format!("{:.6}", s.f1),
        format!("{:.6}", s.mae),
    ]
}
