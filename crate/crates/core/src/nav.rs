//! Navigation cost grid and short-horizon transparent-obstacle mapping.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::extrap::ExtrapolationSet;
use crate::grid::{
    apply_transform, index_to_world, rasterize_segment, world_to_index, BinaryGrid, Cell, GridSpec, IntensityGrid, Pose2D, RigidTransform2D, Vec2,
};
use crate::layers::{roi_offset, MultiLayerIntensityMap};
use crate::ton::TonMask;

/// An extrapolated segment in full-grid index coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavSegment {
    pub a: Vec2,
    pub b: Vec2,
}

impl NavSegment {
    /// The same segment seen from robot pose `to`, given it was observed
    /// from `from`.
    pub fn transferred(&self, from: &Pose2D, to: &Pose2D, spec: &GridSpec) -> NavSegment {
        let t = RigidTransform2D::between(from, to);
        let move_point = |u: Vec2| world_to_index(t.apply(index_to_world(u, spec)), spec);
        NavSegment {
            a: move_point(self.a),
            b: move_point(self.b),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NavMap {
    pub grid: IntensityGrid,
    pub obstacles: BinaryGrid,
    pub segments: Vec<NavSegment>,
    pub spec: GridSpec,
    /// Euclidean distance in cells from each cell to the nearest obstacle
    /// cell, `f64::INFINITY` when there is none.
    distance: Vec<f64>,
}

impl NavMap {
    pub fn new(grid: IntensityGrid, obstacles: BinaryGrid, segments: Vec<NavSegment>, spec: GridSpec) -> Self {
        let distance = distance_transform(&obstacles);
        Self {
            grid,
            obstacles,
            segments,
            spec,
            distance,
        }
    }

    pub fn obstacle_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.obstacles.ones()
    }

    pub fn has_obstacles(&self) -> bool {
        self.distance.first().is_some_and(|d| d.is_finite())
    }

    /// Adds segments as barriers: each is rasterized into the obstacles with
    /// `weight` added to the grid, and kept for crossing checks.
    pub fn add_segments(&mut self, segments: impl IntoIterator<Item = NavSegment>, weight: f64) {
        let round = |p: Vec2| Cell::new(p.x.round() as i32, p.y.round() as i32);
        let mut added = false;
        for s in segments {
            for cell in rasterize_segment(round(s.a), round(s.b)) {
                if self.obstacles.contains(cell) {
                    self.obstacles.set(cell, 1);
                    *self.grid.at_mut(cell.r as usize, cell.c as usize) += weight;
                }
            }
            self.segments.push(s);
            added = true;
        }
        if added {
            self.distance = distance_transform(&self.obstacles);
        }
    }

    /// Clearance bilinearly interpolated between cell centers at a point in
    /// index coordinates. `None` unless all four neighboring cells exist.
    pub fn clearance_at(&self, u: Vec2) -> Option<f64> {
        let (r0, c0) = (u.x.floor(), u.y.floor());
        let (fr, fc) = (u.x - r0, u.y - c0);
        let (r0, c0) = (r0 as i32, c0 as i32);
        let d = |dr: i32, dc: i32| self.clearance(Cell::new(r0 + dr, c0 + dc));
        let (a, b, c, e) = (d(0, 0)?, d(0, 1)?, d(1, 0)?, d(1, 1)?);
        // The transform is finite everywhere or nowhere.
        if !a.is_finite() {
            return Some(f64::INFINITY);
        }
        Some((1.0 - fr) * ((1.0 - fc) * a + fc * b) + fr * ((1.0 - fc) * c + fc * e))
    }

    /// Distance in cells to the nearest obstacle, `None` out of bounds.
    pub fn clearance(&self, cell: Cell) -> Option<f64> {
        self.obstacles
            .contains(cell)
            .then(|| self.distance[cell.r as usize * self.spec.n + cell.c as usize])
    }
}

/// `low + mid + high`, with each extrapolated cell adding `extrap_weight` in
/// the centered window. Obstacles are cells above `occupancy_threshold` plus
/// every extrapolated cell.
pub fn compose_nav_map(
    map: &MultiLayerIntensityMap,
    extrap: &ExtrapolationSet,
    occupancy_threshold: f64,
    extrap_weight: f64,
) -> Result<NavMap> {
    let n = map.spec.n;
    let offset = roi_offset(n, extrap.m())? as i32;
    let mut grid = map.layer_sum();
    let mut forced = BinaryGrid::new(n);
    for cell in extrap.mask.ones() {
        let full = cell.offset(offset, offset);
        *grid.at_mut(full.r as usize, full.c as usize) += extrap_weight;
        forced.set(full, 1);
    }
    let mut obstacles = BinaryGrid::new(n);
    for ((o, &v), &f) in obstacles
        .as_mut_slice()
        .iter_mut()
        .zip(grid.as_slice())
        .zip(forced.as_slice())
    {
        *o = u8::from(v > occupancy_threshold || f != 0);
    }
    let shift = Vec2::new(offset as f64, offset as f64);
    let segments = extrap
        .segments
        .iter()
        .map(|s| NavSegment {
            a: s.endpoints[0] + shift,
            b: s.endpoints[1] + shift,
        })
        .collect();
    Ok(NavMap::new(grid, obstacles, segments, map.spec))
}

/// Exact Euclidean distance transform (separable lower-envelope method).
fn distance_transform(obstacles: &BinaryGrid) -> Vec<f64> {
    let n = obstacles.size();
    let inf = f64::INFINITY;
    let mut f: Vec<f64> = obstacles
        .as_slice()
        .iter()
        .map(|&v| if v != 0 { 0.0 } else { inf })
        .collect();
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    // Columns, then rows.
    for c in 0..n {
        for r in 0..n {
            line[r] = f[r * n + c];
        }
        edt_1d(&line, &mut out, &mut v, &mut z);
        for r in 0..n {
            f[r * n + c] = out[r];
        }
    }
    for r in 0..n {
        line.copy_from_slice(&f[r * n..(r + 1) * n]);
        edt_1d(&line, &mut out, &mut v, &mut z);
        f[r * n..(r + 1) * n].copy_from_slice(&out);
    }
    f.iter_mut().for_each(|d| *d = d.sqrt());
    f
}

/// Squared 1D distance transform of sampled function `f`.
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let finite: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if finite.is_empty() {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    v[0] = finite[0];
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for &q in &finite[1..] {
        let qf = q as f64;
        loop {
            let p = v[k];
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere.
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut k = 0usize;
    for (q, out) in d.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *out = (qf - p) * (qf - p) + f[v[k]];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub mask: TonMask,
    pub pose: Pose2D,
    pub timestamp: f64,
}

/// The last `capacity` TON masks with the poses they were observed from.
#[derive(Debug, Clone)]
pub struct TonHistory {
    capacity: usize,
    entries: VecDeque<HistoryEntry>,
}

impl TonHistory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Most recent first.
    pub fn iter(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.entries.iter().rev()
    }

    pub fn push(&mut self, mask: TonMask, pose: Pose2D, timestamp: f64) -> Result<()> {
        if let Some(last) = self.entries.back() {
            if !(timestamp > last.timestamp) {
                return Err(Error::InvalidConfig(format!(
                    "history timestamps must increase ({} after {})",
                    timestamp, last.timestamp
                )));
            }
        }
        if self.capacity == 0 {
            return Ok(());
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(HistoryEntry { mask, pose, timestamp });
        Ok(())
    }
}

/// Moves the 1-cells of a past ROI mask into the current full grid, keeping
/// only those that land inside the current ROI window (full-grid indices).
fn transfer_mask(mask: &TonMask, from: &Pose2D, to: &Pose2D, spec: &GridSpec) -> Result<Vec<Cell>> {
    let m = mask.m();
    let offset = roi_offset(spec.n, m)? as i32;
    let t = RigidTransform2D::between(from, to);
    let window = offset..offset + m as i32;
    Ok(apply_transform(mask.grid.ones().map(|c| c.offset(offset, offset)), &t, spec)
        .into_iter()
        .filter(|c| window.contains(&c.r) && window.contains(&c.c))
        .collect())
}

/// Layer sum with every past TON mask transformed into the current frame and
/// added into the mid layer's window at `mapping_weight`.
pub fn accumulate_mapping(
    current: &MultiLayerIntensityMap,
    history: &TonHistory,
    current_pose: &Pose2D,
    mapping_weight: f64,
) -> Result<IntensityGrid> {
    let mut mid = current.mid.clone();
    for entry in history.iter() {
        for cell in transfer_mask(&entry.mask, &entry.pose, current_pose, &current.spec)? {
            *mid.at_mut(cell.r as usize, cell.c as usize) += mapping_weight;
        }
    }
    let mut out = current.low.clone();
    for ((o, m), h) in out
        .as_mut_slice()
        .iter_mut()
        .zip(mid.as_slice())
        .zip(current.high.as_slice())
    {
        *o += m + h;
    }
    Ok(out)
}

/// Binary ROI map of transparent cells: the current mask united with every
/// past mask moved into the current frame.
pub fn accumulate_transparent(
    current: &TonMask,
    history: &TonHistory,
    current_pose: &Pose2D,
    spec: &GridSpec,
) -> Result<BinaryGrid> {
    let m = current.m();
    let offset = roi_offset(spec.n, m)? as i32;
    let mut out = current.grid.clone();
    for entry in history.iter() {
        for cell in transfer_mask(&entry.mask, &entry.pose, current_pose, spec)? {
            out.set(cell.offset(-offset, -offset), 1);
        }
    }
    Ok(out)
}
