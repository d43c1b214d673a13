//! Transparent obstacle neighborhood (TON) isolation.
//!
//! A cell of the ROI is flagged when its mid-layer intensity falls in the
//! configured band while the low and high layers stay dim at the same cell:
//! the signature of near-normal returns from a transparent surface at lidar
//! height. Diffuse obstacles light up all three layers and are rejected.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryGrid, Cell, Vec2};
use crate::layers::RoiView;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TonCondition {
    pub range_low: f64,
    pub range_high: f64,
    /// The low and high layers must stay below `range_high / suppression_ratio`.
    pub suppression_ratio: f64,
    /// Components with fewer cells are treated as noise.
    pub min_contour_area: usize,
}

impl Default for TonCondition {
    fn default() -> Self {
        Self {
            range_low: 100.0,
            range_high: 130.0,
            suppression_ratio: 3.0,
            min_contour_area: 3,
        }
    }
}

impl TonCondition {
    pub fn validate(&self, max_intensity: f64) -> Result<()> {
        let ok = 0.0 <= self.range_low
            && self.range_low <= self.range_high
            && self.range_high <= max_intensity
            && self.suppression_ratio > 1.0
            && self.min_contour_area >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid TON condition {self:?}")))
        }
    }

    pub fn suppression_threshold(&self) -> f64 {
        self.range_high / self.suppression_ratio
    }

    /// Per-cell form of the condition.
    #[inline]
    pub fn holds(&self, low: f64, mid: f64, high: f64) -> bool {
        let t = self.suppression_threshold();
        mid >= self.range_low && mid <= self.range_high && low < t && high < t
    }
}

/// Binary `m x m` ROI grid of cells satisfying the TON condition.
#[derive(Debug, Clone, PartialEq)]
pub struct TonMask {
    pub grid: BinaryGrid,
}

impl TonMask {
    pub fn m(&self) -> usize {
        self.grid.size()
    }
}

pub fn apply_condition(roi: &RoiView<'_>, cond: &TonCondition) -> TonMask {
    let m = roi.m();
    let mut grid = BinaryGrid::new(m);
    for r in 0..m {
        for c in 0..m {
            if cond.holds(roi.low(r, c), roi.mid(r, c), roi.high(r, c)) {
                *grid.at_mut(r, c) = 1;
            }
        }
    }
    TonMask { grid }
}

const NEIGHBORS_8: [(i32, i32); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// 8-connected components of the 1-cells, each listed in BFS order, the
/// components themselves in row-major order of their first cell.
pub fn connected_components(grid: &BinaryGrid) -> Vec<Vec<Cell>> {
    let n = grid.size();
    let mut seen = vec![false; n * n];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for (start, v) in grid.iter() {
        let si = start.r as usize * n + start.c as usize;
        if v == 0 || seen[si] {
            continue;
        }
        seen[si] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(cell) = queue.pop_front() {
            comp.push(cell);
            for (dr, dc) in NEIGHBORS_8 {
                let nb = cell.offset(dr, dc);
                if let Some(1..) = grid.get(nb) {
                    let ni = nb.r as usize * n + nb.c as usize;
                    if !seen[ni] {
                        seen[ni] = true;
                        queue.push_back(nb);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Zeroes every component smaller than `min_contour_area`.
pub fn denoise(mask: &TonMask, cond: &TonCondition) -> TonMask {
    let mut grid = mask.grid.clone();
    for comp in connected_components(&mask.grid) {
        if comp.len() < cond.min_contour_area {
            for cell in comp {
                grid.set(cell, 0);
            }
        }
    }
    TonMask { grid }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ton {
    pub cells: Vec<Cell>,
    /// Mean `(r, c)` of the member cells.
    pub centroid: Vec2,
    /// Distance from the centroid to the farthest member cell, in cells.
    pub bound_radius: f64,
}

impl Ton {
    pub fn from_cells(mut cells: Vec<Cell>) -> Self {
        cells.sort();
        let k = cells.len() as f64;
        let (sr, sc) = cells
            .iter()
            .fold((0i64, 0i64), |(a, b), c| (a + c.r as i64, b + c.c as i64));
        let centroid = Vec2::new(sr as f64 / k, sc as f64 / k);
        let bound_radius = cells
            .iter()
            .map(|c| (c.as_vec() - centroid).norm())
            .fold(0.0, f64::max);
        Self {
            cells,
            centroid,
            bound_radius,
        }
    }

    pub fn size(&self) -> usize {
        self.cells.len()
    }
}

/// One [`Ton`] per 8-connected component, largest first; equal sizes are
/// ordered by the component's minimum row, then minimum column.
pub fn extract_tons(mask: &TonMask) -> Vec<Ton> {
    let mut tons: Vec<Ton> = connected_components(&mask.grid)
        .into_iter()
        .map(Ton::from_cells)
        .collect();
    let key = |t: &Ton| {
        let min_r = t.cells.iter().map(|c| c.r).min().unwrap_or(0);
        let min_c = t.cells.iter().map(|c| c.c).min().unwrap_or(0);
        (std::cmp::Reverse(t.size()), min_r, min_c)
    };
    tons.sort_by_key(key);
    tons
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridSpec};
    use crate::layers::{extract_roi, LayerConfig, MultiLayerIntensityMap};
    use proptest::prelude::*;

    fn map_with(n: usize, cells: &[(usize, usize, f64, f64, f64)]) -> MultiLayerIntensityMap {
        let mut low = Grid::new(n);
        let mut mid = Grid::new(n);
        let mut high = Grid::new(n);
        for &(r, c, l, m, h) in cells {
            *low.at_mut(r, c) = l;
            *mid.at_mut(r, c) = m;
            *high.at_mut(r, c) = h;
        }
        MultiLayerIntensityMap {
            low,
            mid,
            high,
            spec: GridSpec::new(n, 0.05).unwrap(),
            config: LayerConfig::default(),
            skipped: 0,
        }
    }

    fn mask_from(m: usize, ones: &[(i32, i32)]) -> TonMask {
        let mut grid = BinaryGrid::new(m);
        for &(r, c) in ones {
            grid.set(Cell::new(r, c), 1);
        }
        TonMask { grid }
    }

    #[test]
    fn condition_examples() {
        let cond = TonCondition::default();
        let map = map_with(8, &[(3, 3, 30.0, 115.0, 0.0), (3, 4, 50.0, 115.0, 0.0)]);
        let roi = extract_roi(&map, 4).unwrap();
        let mask = apply_condition(&roi, &cond);
        assert_eq!(mask.grid.get(Cell::new(1, 1)), Some(1));
        assert_eq!(mask.grid.get(Cell::new(1, 2)), Some(0));
        assert_eq!(mask.grid.count_ones(), 1);

        let empty = map_with(8, &[]);
        assert_eq!(apply_condition(&extract_roi(&empty, 4).unwrap(), &cond).grid.count_ones(), 0);
    }

    #[test]
    fn range_is_inclusive() {
        let cond = TonCondition::default();
        assert!(cond.holds(0.0, 100.0, 0.0));
        assert!(cond.holds(0.0, 130.0, 0.0));
        assert!(!cond.holds(0.0, 130.0001, 0.0));
        assert!(!cond.holds(0.0, 99.999, 0.0));
        assert!(!cond.holds(130.0 / 3.0, 115.0, 0.0));
    }

    #[test]
    fn denoise_examples() {
        let cond = TonCondition::default();
        assert_eq!(denoise(&mask_from(10, &[(4, 4)]), &cond).grid.count_ones(), 0);
        let block = mask_from(10, &[(4, 4), (4, 5), (5, 4), (5, 5)]);
        assert_eq!(denoise(&block, &cond), block);
        let zero = mask_from(10, &[]);
        assert_eq!(denoise(&zero, &cond), zero);
        // Diagonal contact joins components under 8-connectivity.
        let diag = mask_from(10, &[(1, 1), (2, 2), (3, 3)]);
        assert_eq!(denoise(&diag, &cond), diag);
    }

    #[test]
    fn extract_examples() {
        let mask = mask_from(80, &[(50, 60), (50, 61), (51, 60), (51, 61)]);
        let tons = extract_tons(&mask);
        assert_eq!(tons.len(), 1);
        assert_eq!(tons[0].centroid, Vec2::new(50.5, 60.5));
        approx::assert_abs_diff_eq!(tons[0].bound_radius, 0.5f64.sqrt(), epsilon = 1e-12);

        let single = extract_tons(&mask_from(80, &[(10, 10)]));
        assert_eq!(single[0].centroid, Vec2::new(10.0, 10.0));
        assert_eq!(single[0].bound_radius, 0.0);

        let two = mask_from(80, &[(1, 1), (1, 2), (1, 3), (10, 10), (10, 11), (11, 10), (11, 11), (12, 12)]);
        let tons = extract_tons(&two);
        assert_eq!(tons.iter().map(Ton::size).collect::<Vec<_>>(), vec![5, 3]);
    }

    #[test]
    fn equal_sizes_ordered_by_position() {
        let mask = mask_from(20, &[(9, 1), (9, 2), (2, 8), (2, 9)]);
        let tons = extract_tons(&mask);
        assert_eq!(tons[0].cells[0], Cell::new(2, 8));
        assert_eq!(tons[1].cells[0], Cell::new(9, 1));
    }

    #[test]
    fn diffuse_signature_rejected() {
        let cond = TonCondition::default();
        let t = cond.suppression_threshold();
        for &l in &[t, t + 1.0, 100.0, 255.0] {
            for &m in &[t, 100.0, 115.0, 130.0, 255.0] {
                for &h in &[t, 60.0, 200.0, 255.0] {
                    assert!(!cond.holds(l, m, h), "({l}, {m}, {h})");
                }
            }
        }
    }

    fn arb_mask(m: usize) -> impl Strategy<Value = TonMask> {
        prop::collection::vec(prop::bool::weighted(0.3), m * m).prop_map(move |bits| TonMask {
            grid: BinaryGrid::from_vec(m, bits.into_iter().map(u8::from).collect()).unwrap(),
        })
    }

    proptest! {
        #[test]
        fn components_partition_ones(mask in arb_mask(16)) {
            let tons = extract_tons(&mask);
            let total: usize = tons.iter().map(Ton::size).sum();
            prop_assert_eq!(total, mask.grid.count_ones());
            let mut all: Vec<Cell> = tons.iter().flat_map(|t| t.cells.iter().copied()).collect();
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), total);
            for t in &tons {
                for c in &t.cells {
                    prop_assert!((c.as_vec() - t.centroid).norm() <= t.bound_radius + 1e-12);
                }
            }
        }

        #[test]
        fn denoise_idempotent(mask in arb_mask(16), area in 1usize..6) {
            let cond = TonCondition { min_contour_area: area, ..Default::default() };
            let once = denoise(&mask, &cond);
            prop_assert_eq!(denoise(&once, &cond), once);
        }

        #[test]
        fn suppression_monotone(l in 0.0f64..255.0, m in 0.0f64..255.0, h in 0.0f64..255.0,
                                dl in 0.0f64..100.0, dh in 0.0f64..100.0) {
            let cond = TonCondition::default();
            if !cond.holds(l, m, h) {
                prop_assert!(!cond.holds(l + dl, m, h + dh));
            }
        }
    }
}
