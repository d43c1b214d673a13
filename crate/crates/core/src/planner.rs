//! Dynamic-window velocity selection over a [`NavMap`].
//!
//! Everything here lives in the robot frame: rollouts start at the origin
//! facing +x and the goal is given relative to the robot.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{normalize_angle, world_to_grid, world_to_index, Cell, GridSpec, Vec2};
use crate::nav::{NavMap, NavSegment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub radius: f64,
    pub height: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub a_v: f64,
    pub a_w: f64,
    /// Defaults to `2 * radius + 0.5` when absent.
    #[serde(default)]
    pub d_thresh: Option<f64>,
    /// Extra clearance beyond `radius` required along a trajectory.
    #[serde(default = "default_margin")]
    pub safety_margin: f64,
}

fn default_margin() -> f64 {
    0.1
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            radius: 0.3,
            height: 0.6,
            v_max: 0.6,
            w_max: 1.2,
            a_v: 0.5,
            a_w: 1.0,
            d_thresh: None,
            safety_margin: default_margin(),
        }
    }
}

impl RobotConfig {
    pub fn d_thresh(&self) -> f64 {
        self.d_thresh.unwrap_or(2.0 * self.radius + 0.5)
    }

    pub fn footprint(&self) -> f64 {
        self.radius + self.safety_margin
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.radius, self.height, self.v_max, self.w_max, self.a_v, self.a_w, self.d_thresh()];
        if positive.iter().all(|v| v.is_finite() && *v > 0.0) && self.safety_margin >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid robot config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityPair {
    pub v: f64,
    pub w: f64,
}

impl VelocityPair {
    pub const ZERO: VelocityPair = VelocityPair { v: 0.0, w: 0.0 };

    pub const fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerWeights {
    pub heading: f64,
    pub obstacle: f64,
    pub velocity: f64,
}

impl Default for PlannerWeights {
    fn default() -> Self {
        Self {
            heading: 1.0,
            obstacle: 1.0,
            velocity: 1.0,
        }
    }
}

impl PlannerWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.heading, self.obstacle, self.velocity];
        if w.iter().all(|v| v.is_finite() && *v >= 0.0) && w.iter().any(|v| *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid planner weights {self:?}")))
        }
    }

    fn normalized(&self) -> [f64; 3] {
        let sum = self.heading + self.obstacle + self.velocity;
        [self.heading / sum, self.obstacle / sum, self.velocity / sum]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub weights: PlannerWeights,
    pub n_v: usize,
    pub n_w: usize,
    /// Time over which the acceleration limits bound the window.
    pub window_dt: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            weights: PlannerWeights::default(),
            n_v: 11,
            n_w: 21,
            window_dt: 0.2,
            horizon: 2.0,
            dt: 0.1,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        let ok = self.n_v >= 1
            && self.n_w >= 1
            && self.window_dt > 0.0
            && self.dt > 0.0
            && self.horizon >= self.dt
            && self.horizon.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid planner config {self:?}")))
        }
    }
}

fn linspace(lo: f64, hi: f64, k: usize) -> impl Iterator<Item = f64> {
    (0..k).map(move |i| {
        if k == 1 {
            0.5 * (lo + hi)
        } else if i == k - 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (k - 1) as f64
        }
    })
}

/// Uniform `n_v x n_w` grid over the reachable velocities clamped to the
/// robot limits. Ordered by `v` then `w`, both ascending.
pub fn dynamic_window(current: VelocityPair, cfg: &RobotConfig, window_dt: f64, samples: (usize, usize)) -> Vec<VelocityPair> {
    let v_lo = (current.v - cfg.a_v * window_dt).clamp(0.0, cfg.v_max);
    let v_hi = (current.v + cfg.a_v * window_dt).clamp(0.0, cfg.v_max);
    let w_lo = (current.w - cfg.a_w * window_dt).clamp(-cfg.w_max, cfg.w_max);
    let w_hi = (current.w + cfg.a_w * window_dt).clamp(-cfg.w_max, cfg.w_max);
    let ws: Vec<f64> = linspace(w_lo, w_hi, samples.1).collect();
    linspace(v_lo, v_hi, samples.0)
        .flat_map(|v| ws.iter().map(move |&w| VelocityPair::new(v, w)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(x, y, theta)` from the origin pose onwards.
    pub states: Vec<(f64, f64, f64)>,
    /// Distinct in-bounds cells visited, in order.
    pub cells: Vec<Cell>,
    pub horizon: f64,
}

impl Trajectory {
    pub fn end(&self) -> (f64, f64, f64) {
        *self.states.last().expect("trajectory has the origin state")
    }
}

/// Constant-velocity unicycle integration from the origin.
pub fn rollout(vw: VelocityPair, horizon: f64, dt: f64, spec: &GridSpec) -> Trajectory {
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let mut states = Vec::with_capacity(steps + 1);
    let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
    states.push((x, y, th));
    for _ in 0..steps {
        th += vw.w * dt;
        x += vw.v * th.cos() * dt;
        y += vw.v * th.sin() * dt;
        states.push((x, y, th));
    }
    let mut seen = HashSet::new();
    let cells = states
        .iter()
        .filter_map(|&(x, y, _)| world_to_grid(Vec2::new(x, y), spec))
        .filter(|c| seen.insert(*c))
        .collect();
    Trajectory { states, cells, horizon }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObstacleCost {
    Collision,
    /// `clearance` is the minimum distance in cells to an obstacle cell along
    /// the trajectory; `cost = 1 / clearance`.
    Clear { clearance: f64, cost: f64 },
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment intersection, touching and collinear overlap included.
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Whether the trajectory polyline, in index space, meets any segment.
pub fn crosses_segments(traj: &Trajectory, segments: &[NavSegment], spec: &GridSpec) -> bool {
    if segments.is_empty() {
        return false;
    }
    let pts: Vec<Vec2> = traj
        .states
        .iter()
        .map(|&(x, y, _)| world_to_index(Vec2::new(x, y), spec))
        .collect();
    let hit = |a: Vec2, b: Vec2| segments.iter().any(|s| segments_intersect(a, b, s.a, s.b));
    if pts.len() == 1 {
        return hit(pts[0], pts[0]);
    }
    pts.windows(2).any(|w| hit(w[0], w[1]))
}

pub fn obstacle_cost(traj: &Trajectory, nav: &NavMap) -> ObstacleCost {
    let d = traj
        .cells
        .iter()
        .filter_map(|&c| nav.clearance(c))
        .fold(f64::INFINITY, f64::min);
    if d == 0.0 || crosses_segments(traj, &nav.segments, &nav.spec) {
        return ObstacleCost::Collision;
    }
    ObstacleCost::Clear { clearance: d, cost: 1.0 / d }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub pair: VelocityPair,
    pub index: usize,
    pub score: f64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanResult {
    Move(Selection),
    Frozen,
}

impl PlanResult {
    /// Command to execute: the selected pair, or zero when frozen.
    pub fn command(&self) -> VelocityPair {
        match self {
            PlanResult::Move(s) => s.pair,
            PlanResult::Frozen => VelocityPair::ZERO,
        }
    }

    pub fn is_frozen(&self) -> bool {
        matches!(self, PlanResult::Frozen)
    }
}

struct Scored {
    index: usize,
    traj: Trajectory,
    head: f64,
    obs: f64,
    vel: f64,
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn normalize(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// Scores every safe candidate and returns the minimizer of the weighted,
/// per-term min-max normalized cost (lowest index on ties).
///
/// A candidate is dropped when it collides, crosses an extrapolated segment,
/// comes closer than the robot footprint to an obstacle (unless it moves
/// away from the obstacles around the start), or could not stop within its
/// clearance.
pub fn select_velocity(
    candidates: &[VelocityPair],
    nav: &NavMap,
    goal: Vec2,
    robot: &RobotConfig,
    planner: &PlannerConfig,
) -> PlanResult {
    let s = nav.spec.cell_size;
    let footprint = robot.footprint() / s;
    // Interpolated clearance, so that moving away is judged by the motion
    // rather than by which cell boundary a short step happens to cross.
    let smooth = |x: f64, y: f64| nav.clearance_at(world_to_index(Vec2::new(x, y), &nav.spec));
    let start = smooth(0.0, 0.0).unwrap_or(f64::INFINITY);
    let mut scored = Vec::with_capacity(candidates.len());
    for (index, &pair) in candidates.iter().enumerate() {
        let traj = rollout(pair, planner.horizon, planner.dt, &nav.spec);
        let (clearance, cost) = match obstacle_cost(&traj, nav) {
            ObstacleCost::Collision => continue,
            ObstacleCost::Clear { clearance, cost } => (clearance, cost),
        };
        // A trajectory that never gets closer than the start and ends farther
        // away is always allowed, so a robot that ended up too close can back
        // away. Anything else must keep the footprint clear and be able to
        // stop in time.
        if pair.v > 0.0 {
            let along: Option<Vec<f64>> = traj.states.iter().map(|&(x, y, _)| smooth(x, y)).collect();
            let leaves = along.is_some_and(|d| {
                d.iter().all(|&v| v >= start) && d.last().is_some_and(|&v| v > start)
            });
            let room = (clearance * s - robot.footprint()).max(0.0);
            if !leaves && (clearance <= footprint || pair.v > (2.0 * robot.a_v * room).sqrt()) {
                continue;
            }
        }
        let (x, y, th) = traj.end();
        let bearing = (goal.y - y).atan2(goal.x - x);
        let head = normalize_angle(bearing - th).abs() / std::f64::consts::PI;
        let vel = (robot.v_max - pair.v) / robot.v_max;
        scored.push(Scored {
            index,
            traj,
            head,
            obs: cost,
            vel,
        });
    }
    if scored.is_empty() {
        return PlanResult::Frozen;
    }
    let ranges = [
        min_max(scored.iter().map(|c| c.head)),
        min_max(scored.iter().map(|c| c.obs)),
        min_max(scored.iter().map(|c| c.vel)),
    ];
    let g = planner.weights.normalized();
    let mut best: Option<(f64, usize)> = None;
    for (k, c) in scored.iter().enumerate() {
        let q = g[0] * normalize(c.head, ranges[0]) + g[1] * normalize(c.obs, ranges[1]) + g[2] * normalize(c.vel, ranges[2]);
        if best.is_none_or(|(bq, _)| q < bq) {
            best = Some((q, k));
        }
    }
    let (score, k) = best.expect("non-empty");
    let chosen = scored.swap_remove(k);
    PlanResult::Move(Selection {
        pair: candidates[chosen.index],
        index: chosen.index,
        score,
        trajectory: chosen.traj,
    })
}
