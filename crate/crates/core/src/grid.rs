//! Robot-centric grid geometry.
//!
//! An `n x n` grid covers a square of side `n * s` meters centered on the
//! lidar. Rows follow the forward `x` axis and columns the leftward `y` axis;
//! cell `(n/2, n/2)` holds the lidar origin, so each axis is binned as
//! `r = n/2 + floor(x / s)`.

use std::collections::BTreeSet;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values closer than this (in cells) below a bin edge are snapped onto it.
const BIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0).then(|| self * (1.0 / n))
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Integer grid index. Signed so that rasterization can run past the grid
/// edge before clipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub r: i32,
    pub c: i32,
}

impl Cell {
    pub const fn new(r: i32, c: i32) -> Self {
        Self { r, c }
    }

    pub fn offset(self, dr: i32, dc: i32) -> Cell {
        Cell::new(self.r + dr, self.c + dc)
    }

    /// True when the two cells touch by edge or corner (and differ).
    pub fn is_8_adjacent(self, o: Cell) -> bool {
        let (dr, dc) = ((self.r - o.r).abs(), (self.c - o.c).abs());
        dr <= 1 && dc <= 1 && (dr, dc) != (0, 0)
    }

    /// Real-valued coordinates of this cell in index space.
    pub fn as_vec(self) -> Vec2 {
        Vec2::new(self.r as f64, self.c as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Side length in cells.
    pub n: usize,
    /// Cell side length in meters.
    pub cell_size: f64,
}

impl GridSpec {
    pub fn new(n: usize, cell_size: f64) -> Result<Self> {
        let spec = Self { n, cell_size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("side {} must be positive and even", self.n)));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::InvalidGrid(format!("cell size {} must be positive", self.cell_size)));
        }
        if self.n > i32::MAX as usize / 2 {
            return Err(Error::InvalidGrid(format!("side {} too large", self.n)));
        }
        Ok(())
    }

    pub fn half(&self) -> i32 {
        (self.n / 2) as i32
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.r >= 0 && cell.c >= 0 && (cell.r as usize) < self.n && (cell.c as usize) < self.n
    }

    /// Side length of the covered square in meters.
    pub fn extent(&self) -> f64 {
        self.n as f64 * self.cell_size
    }
}

fn bin(v: f64, s: f64) -> f64 {
    (v / s + BIN_EPS).floor()
}

/// Cell containing the world point, or `None` when it falls outside the grid.
pub fn world_to_grid(p: Vec2, spec: &GridSpec) -> Option<Cell> {
    if !p.is_finite() {
        return None;
    }
    let h = spec.half() as f64;
    let r = h + bin(p.x, spec.cell_size);
    let c = h + bin(p.y, spec.cell_size);
    let n = spec.n as f64;
    if r < 0.0 || c < 0.0 || r >= n || c >= n {
        return None;
    }
    Some(Cell::new(r as i32, c as i32))
}

/// World coordinates of the cell center.
pub fn grid_to_world(cell: Cell, spec: &GridSpec) -> Vec2 {
    let h = spec.half();
    let s = spec.cell_size;
    Vec2::new(
        ((cell.r - h) as f64 + 0.5) * s,
        ((cell.c - h) as f64 + 0.5) * s,
    )
}

/// Continuous index-space coordinates of a world point, with cell centers
/// at integer values (the convention used for centroids and segments).
pub fn world_to_index(p: Vec2, spec: &GridSpec) -> Vec2 {
    let h = spec.half() as f64;
    Vec2::new(h + p.x / spec.cell_size - 0.5, h + p.y / spec.cell_size - 0.5)
}

/// Inverse of [`world_to_index`].
pub fn index_to_world(u: Vec2, spec: &GridSpec) -> Vec2 {
    let h = spec.half() as f64;
    Vec2::new((u.x - h + 0.5) * spec.cell_size, (u.y - h + 0.5) * spec.cell_size)
}

/// 8-connected integer line from `a` to `b`, both inclusive.
///
/// The cell sequence only depends on the unordered endpoint pair, so
/// `rasterize_segment(b, a)` is the reverse of `rasterize_segment(a, b)`.
pub fn rasterize_segment(a: Cell, b: Cell) -> Vec<Cell> {
    if b < a {
        let mut cells = bresenham(b, a);
        cells.reverse();
        cells
    } else {
        bresenham(a, b)
    }
}

fn bresenham(a: Cell, b: Cell) -> Vec<Cell> {
    let dr = (b.r - a.r).abs();
    let dc = -(b.c - a.c).abs();
    let sr = (b.r - a.r).signum();
    let sc = (b.c - a.c).signum();
    let mut err = dr + dc;
    let (mut r, mut c) = (a.r, a.c);
    let mut cells = Vec::with_capacity(dr.max(-dc) as usize + 1);
    loop {
        cells.push(Cell::new(r, c));
        if r == b.r && c == b.c {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dc {
            err += dc;
            r += sr;
        }
        if e2 <= dr {
            err += dr;
            c += sc;
        }
    }
    cells
}

/// Planar rigid motion `p -> R(rotation) p + translation`.
///
/// A robot pose is the transform taking robot-frame coordinates to the world.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidTransform2D {
    pub rotation: f64,
    pub translation: Vec2,
}

pub type Pose2D = RigidTransform2D;

impl RigidTransform2D {
    pub const IDENTITY: RigidTransform2D = RigidTransform2D {
        rotation: 0.0,
        translation: Vec2::ZERO,
    };

    pub fn new(x: f64, y: f64, rotation: f64) -> Self {
        Self {
            rotation,
            translation: Vec2::new(x, y),
        }
    }

    pub fn x(&self) -> f64 {
        self.translation.x
    }

    pub fn y(&self) -> f64 {
        self.translation.y
    }

    pub fn heading(&self) -> f64 {
        self.rotation
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotated(self.rotation) + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform2D) -> RigidTransform2D {
        RigidTransform2D {
            rotation: normalize_angle(self.rotation + other.rotation),
            translation: self.apply(other.translation),
        }
    }

    pub fn inverse(&self) -> RigidTransform2D {
        RigidTransform2D {
            rotation: normalize_angle(-self.rotation),
            translation: (-self.translation).rotated(-self.rotation),
        }
    }

    /// Transform taking coordinates in the frame of `from` to the frame of
    /// `to`, both poses expressed in a common world frame.
    pub fn between(from: &Pose2D, to: &Pose2D) -> RigidTransform2D {
        to.inverse().compose(from)
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.is_finite() && self.translation.is_finite()
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Moves each cell center by `t` and re-bins it. Cells leaving the grid are
/// dropped; coincident results collapse.
pub fn apply_transform<I>(cells: I, t: &RigidTransform2D, spec: &GridSpec) -> BTreeSet<Cell>
where
    I: IntoIterator<Item = Cell>,
{
    cells
        .into_iter()
        .filter_map(|cell| world_to_grid(t.apply(grid_to_world(cell, spec)), spec))
        .collect()
}

/// Square row-major grid of values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    size: usize,
    cells: Vec<T>,
}

pub type IntensityGrid = Grid<f64>;
pub type BinaryGrid = Grid<u8>;

impl<T: Copy + Default> Grid<T> {
    pub fn new(size: usize) -> Self {
        Self::filled(size, T::default())
    }
}

impl<T: Copy> Grid<T> {
    pub fn filled(size: usize, value: T) -> Self {
        Self {
            size,
            cells: vec![value; size * size],
        }
    }

    pub fn from_vec(size: usize, cells: Vec<T>) -> Result<Self> {
        if cells.len() != size * size {
            return Err(Error::DimensionMismatch(cells.len(), size * size));
        }
        Ok(Self { size, cells })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.r >= 0 && cell.c >= 0 && (cell.r as usize) < self.size && (cell.c as usize) < self.size
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.cells[r * self.size + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.cells[r * self.size + c]
    }

    pub fn get(&self, cell: Cell) -> Option<T> {
        self.contains(cell).then(|| self.at(cell.r as usize, cell.c as usize))
    }

    pub fn set(&mut self, cell: Cell, value: T) -> bool {
        if self.contains(cell) {
            *self.at_mut(cell.r as usize, cell.c as usize) = value;
            true
        } else {
            false
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.cells
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.cells
    }

    /// Cells in row-major order with their values.
    pub fn iter(&self) -> impl Iterator<Item = (Cell, T)> + '_ {
        let n = self.size;
        self.cells
            .iter()
            .enumerate()
            .map(move |(i, &v)| (Cell::new((i / n) as i32, (i % n) as i32), v))
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            size: self.size,
            cells: self.cells.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl BinaryGrid {
    pub fn ones(&self) -> impl Iterator<Item = Cell> + '_ {
        self.iter().filter(|&(_, v)| v != 0).map(|(c, _)| c)
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&v| v != 0).count()
    }
}

impl IntensityGrid {
    pub fn sum(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.cells.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn spec200() -> GridSpec {
        GridSpec::new(200, 0.05).unwrap()
    }

    #[test]
    fn world_to_grid_examples() {
        let spec = spec200();
        assert_eq!(world_to_grid(Vec2::new(1.02, -0.30), &spec), Some(Cell::new(120, 94)));
        assert_eq!(world_to_grid(Vec2::new(0.0, 0.0), &spec), Some(Cell::new(100, 100)));
        assert_eq!(world_to_grid(Vec2::new(5.1, 0.0), &spec), None);
        assert_eq!(world_to_grid(Vec2::new(-5.0, -5.0), &spec), Some(Cell::new(0, 0)));
        assert_eq!(world_to_grid(Vec2::new(f64::NAN, 0.0), &spec), None);
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(0, 0.05).is_err());
        assert!(GridSpec::new(201, 0.05).is_err());
        assert!(GridSpec::new(200, 0.0).is_err());
        assert!(GridSpec::new(200, -1.0).is_err());
    }

    #[test]
    fn rasterize_examples() {
        assert_eq!(rasterize_segment(Cell::new(0, 0), Cell::new(0, 0)), vec![Cell::new(0, 0)]);
        assert_eq!(
            rasterize_segment(Cell::new(0, 0), Cell::new(3, 0)),
            (0..=3).map(|r| Cell::new(r, 0)).collect::<Vec<_>>()
        );
        let line = rasterize_segment(Cell::new(0, 0), Cell::new(2, 5));
        assert_eq!(line.len(), 6);
        assert_eq!(line[0], Cell::new(0, 0));
        assert_eq!(line[5], Cell::new(2, 5));
        assert!(line.windows(2).all(|w| w[0].is_8_adjacent(w[1])));
    }

    #[test]
    fn transform_examples() {
        let spec = spec200();
        let cells: Vec<Cell> = vec![Cell::new(110, 100), Cell::new(50, 60), Cell::new(120, 94)];

        let same = apply_transform(cells.iter().copied(), &RigidTransform2D::IDENTITY, &spec);
        assert_eq!(same, cells.iter().copied().collect());

        // Oracle: world_to_grid(grid_to_world(cell) + delta).
        let t = RigidTransform2D::new(0.5, 0.0, 0.0);
        let moved = apply_transform(cells.iter().copied(), &t, &spec);
        let expected: BTreeSet<Cell> = cells.iter().map(|c| c.offset(10, 0)).collect();
        assert_eq!(moved, expected);
        for c in &cells {
            let oracle = world_to_grid(grid_to_world(*c, &spec) + Vec2::new(0.5, 0.0), &spec).unwrap();
            assert_eq!(oracle, c.offset(10, 0));
        }

        // Cell centers sit half a cell off the lidar origin, so a half-turn
        // sends the center (0.525, 0.025) of (110, 100) into cell (89, 99).
        let half_turn = RigidTransform2D::new(0.0, 0.0, PI);
        let out = apply_transform([Cell::new(110, 100)], &half_turn, &spec);
        assert_eq!(out.into_iter().collect::<Vec<_>>(), vec![Cell::new(89, 99)]);
    }

    #[test]
    fn transform_drops_out_of_bounds() {
        let spec = spec200();
        let t = RigidTransform2D::new(0.5, 0.0, 0.0);
        let out = apply_transform([Cell::new(195, 3), Cell::new(199, 199)], &t, &spec);
        assert!(out.is_empty());
    }

    #[test]
    fn compose_and_between() {
        let a = RigidTransform2D::new(1.0, 2.0, 0.3);
        let b = RigidTransform2D::new(-0.5, 0.7, -1.2);
        let p = Vec2::new(0.3, -0.4);
        let lhs = a.compose(&b).apply(p);
        let rhs = a.apply(b.apply(p));
        assert!((lhs - rhs).norm() < 1e-12);
        // A point fixed in the world keeps its world position when moved
        // between frames.
        let q_in_b = Vec2::new(0.9, 0.1);
        let q_in_a = RigidTransform2D::between(&b, &a).apply(q_in_b);
        assert!((a.apply(q_in_a) - b.apply(q_in_b)).norm() < 1e-12);
    }

    #[test]
    fn grid_accessors() {
        let mut g: BinaryGrid = Grid::new(4);
        assert!(g.set(Cell::new(1, 2), 1));
        assert!(!g.set(Cell::new(4, 0), 1));
        assert_eq!(g.get(Cell::new(1, 2)), Some(1));
        assert_eq!(g.get(Cell::new(-1, 2)), None);
        assert_eq!(g.ones().collect::<Vec<_>>(), vec![Cell::new(1, 2)]);
        assert!(Grid::<u8>::from_vec(3, vec![0; 8]).is_err());
    }

    fn arb_cell(n: i32) -> impl Strategy<Value = Cell> {
        (0..n, 0..n).prop_map(|(r, c)| Cell::new(r, c))
    }

    proptest! {
        #[test]
        fn cell_round_trip(cell in arb_cell(200)) {
            let spec = spec200();
            prop_assert_eq!(world_to_grid(grid_to_world(cell, &spec), &spec), Some(cell));
        }

        #[test]
        fn point_round_trip_within_half_cell(x in -4.99f64..4.99, y in -4.99f64..4.99) {
            let spec = spec200();
            let cell = world_to_grid(Vec2::new(x, y), &spec).unwrap();
            let back = grid_to_world(cell, &spec);
            prop_assert!((back.x - x).abs() <= 0.025 + 1e-9);
            prop_assert!((back.y - y).abs() <= 0.025 + 1e-9);
        }

        #[test]
        fn raster_properties(a in arb_cell(60), b in arb_cell(60)) {
            let line = rasterize_segment(a, b);
            let bound = (a.r - b.r).abs().max((a.c - b.c).abs()) as usize + 1;
            prop_assert!(line.len() <= bound);
            prop_assert_eq!(line[0], a);
            prop_assert_eq!(*line.last().unwrap(), b);
            prop_assert!(line.windows(2).all(|w| w[0].is_8_adjacent(w[1])));
            let mut rev = rasterize_segment(b, a);
            rev.reverse();
            prop_assert_eq!(line, rev);
        }

        #[test]
        fn inverse_is_identity(x in -10.0f64..10.0, y in -10.0f64..10.0, th in -PI..PI) {
            let t = RigidTransform2D::new(x, y, th);
            let id = t.compose(&t.inverse());
            prop_assert!(normalize_angle(id.rotation).abs() < 1e-9);
            prop_assert!(id.translation.norm() < 1e-9);
            let id2 = t.inverse().compose(&t);
            prop_assert!(normalize_angle(id2.rotation).abs() < 1e-9);
            prop_assert!(id2.translation.norm() < 1e-9);
        }

        #[test]
        fn composition_associative(
            a in (-5.0f64..5.0, -5.0f64..5.0, -PI..PI),
            b in (-5.0f64..5.0, -5.0f64..5.0, -PI..PI),
            c in (-5.0f64..5.0, -5.0f64..5.0, -PI..PI),
        ) {
            let (a, b, c) = (
                RigidTransform2D::new(a.0, a.1, a.2),
                RigidTransform2D::new(b.0, b.1, b.2),
                RigidTransform2D::new(c.0, c.1, c.2),
            );
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!(normalize_angle(l.rotation - r.rotation).abs() < 1e-9);
            prop_assert!((l.translation - r.translation).norm() < 1e-9);
        }
    }

    /// Transforming forward then back recovers >= 99% of the cells that stay
    /// in bounds, for translations up to 1 m and arbitrary rotations.
    #[test]
    fn transform_round_trip_recovery() {
        use rand::{Rng, SeedableRng};
        let spec = spec200();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut recovered = 0usize;
        let mut eligible = 0usize;
        for _ in 0..200 {
            let len: f64 = rng.random_range(0.0..1.0);
            let dir: f64 = rng.random_range(-PI..PI);
            let t = RigidTransform2D::new(len * dir.cos(), len * dir.sin(), rng.random_range(-PI..PI));
            let cells: Vec<Cell> = (0..200)
                .map(|_| Cell::new(rng.random_range(0..200), rng.random_range(0..200)))
                .collect();
            let fwd = apply_transform(cells.iter().copied(), &t, &spec);
            let back = apply_transform(fwd.iter().copied(), &t.inverse(), &spec);
            for c in cells {
                if world_to_grid(t.apply(grid_to_world(c, &spec)), &spec).is_none() {
                    continue;
                }
                eligible += 1;
                // Up to one cell of quantization either way.
                let near = (-1..=1).any(|dr| (-1..=1).any(|dc| back.contains(&c.offset(dr, dc))));
                if near {
                    recovered += 1;
                }
            }
        }
        assert!(recovered as f64 >= 0.99 * eligible as f64, "{recovered}/{eligible}");
    }
}
