//! Ground-truth occupancy on the robot-centric grid.

use glassnav_core::{BinaryGrid, Cell, GridSpec, Pose2D, Vec2};

use crate::material::MaterialKind;
use crate::world::{Shape, World};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Cells crossed by a transparent primitive.
    pub transparent: BinaryGrid,
    /// Cells crossed by opaque or mirror primitives and dynamic discs.
    pub other: BinaryGrid,
}

/// Visits every cell whose square the segment passes through (grid
/// traversal in continuous index coordinates, cell `k` spanning `[k, k+1)`).
pub fn traverse(a: Vec2, b: Vec2, mut visit: impl FnMut(i64, i64)) {
    let (mut r, mut c) = (a.x.floor() as i64, a.y.floor() as i64);
    let (er, ec) = (b.x.floor() as i64, b.y.floor() as i64);
    let d = b - a;
    let axis = |p: f64, dp: f64, cell: i64| -> (i64, f64, f64) {
        if dp > 0.0 {
            (1, ((cell + 1) as f64 - p) / dp, 1.0 / dp)
        } else if dp < 0.0 {
            (-1, (p - cell as f64) / -dp, -1.0 / dp)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (sr, mut tr, dr) = axis(a.x, d.x, r);
    let (sc, mut tc, dc) = axis(a.y, d.y, c);
    let budget = (er - r).abs() + (ec - c).abs() + 2;
    visit(r, c);
    for _ in 0..budget {
        if r == er && c == ec {
            break;
        }
        if tr < tc {
            r += sr;
            tr += dr;
        } else {
            c += sc;
            tc += dc;
        }
        visit(r, c);
    }
}

/// Chord length used to approximate arcs, in cells.
const ARC_STEP: f64 = 0.125;

/// Marks every cell of the grid centered on `pose` that a primitive's
/// footprint passes through. Discs are taken at `time`.
pub fn ground_truth_grid(world: &World, spec: &GridSpec, pose: &Pose2D, time: f64) -> GroundTruth {
    let n = spec.n;
    let mut transparent = BinaryGrid::new(n);
    let mut other = BinaryGrid::new(n);
    let to_robot = pose.inverse();
    let h = spec.half() as f64;
    let index = |p: Vec2| {
        let q = to_robot.apply(p);
        Vec2::new(h + q.x / spec.cell_size, h + q.y / spec.cell_size)
    };
    let draw = |grid: &mut BinaryGrid, outline: &[Vec2]| {
        for w in outline.windows(2) {
            traverse(index(w[0]), index(w[1]), |r, c| {
                if r >= 0 && c >= 0 && (r as usize) < n && (c as usize) < n {
                    grid.set(Cell::new(r as i32, c as i32), 1);
                }
            });
        }
    };
    for prim in &world.primitives {
        let outline = match prim.shape {
            Shape::Polyline { ref points } => points.iter().map(|p| Vec2::new(p[0], p[1])).collect(),
            Shape::Arc { .. } => prim.sample_outline(ARC_STEP * spec.cell_size),
        };
        let target = if prim.material.kind == MaterialKind::Transparent {
            &mut transparent
        } else {
            &mut other
        };
        draw(target, &outline);
    }
    for disc in &world.discs {
        let c = disc.position(time);
        let k = ((std::f64::consts::TAU * disc.radius) / (ARC_STEP * spec.cell_size)).ceil().max(8.0) as usize;
        let outline: Vec<Vec2> = (0..=k)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / k as f64;
                c + Vec2::new(a.cos(), a.sin()) * disc.radius
            })
            .collect();
        draw(&mut other, &outline);
    }
    GroundTruth { transparent, other }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::MaterialModel;
    use crate::world::Primitive;
    use proptest::prelude::*;

    fn spec() -> GridSpec {
        GridSpec::new(200, 0.05).unwrap()
    }

    fn world_with(points: Vec<[f64; 2]>) -> World {
        World {
            primitives: vec![Primitive {
                shape: Shape::Polyline { points },
                z_min: 0.0,
                z_max: 2.0,
                material: MaterialModel::glass(),
            }],
            discs: vec![],
        }
    }

    #[test]
    fn empty_world_is_empty() {
        let gt = ground_truth_grid(&World::default(), &spec(), &Pose2D::IDENTITY, 0.0);
        assert_eq!(gt.transparent.count_ones() + gt.other.count_ones(), 0);
    }

    #[test]
    fn wall_outside_is_empty() {
        let gt = ground_truth_grid(&world_with(vec![[20.0, -1.0], [20.0, 1.0]]), &spec(), &Pose2D::IDENTITY, 0.0);
        assert_eq!(gt.transparent.count_ones(), 0);
    }

    #[test]
    fn axis_wall_is_one_row() {
        let gt = ground_truth_grid(&world_with(vec![[1.01, -0.99], [1.01, 0.99]]), &spec(), &Pose2D::IDENTITY, 0.0);
        let rows: std::collections::BTreeSet<i32> = gt.transparent.ones().map(|c| c.r).collect();
        assert_eq!(rows.into_iter().collect::<Vec<_>>(), vec![120]);
        assert_eq!(gt.transparent.count_ones(), 40);
    }

    /// Brute-force oracle: a cell is crossed iff the segment meets its square.
    fn crosses_square(a: Vec2, b: Vec2, r: i64, c: i64, slack: f64) -> bool {
        // Liang-Barsky clip against [r, r+1] x [c, c+1].
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (p, q) in [
            (-d.x, a.x - r as f64),
            (d.x, (r + 1) as f64 - a.x),
            (-d.y, a.y - c as f64),
            (d.y, (c + 1) as f64 - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
        t0 < t1 - slack
    }

    proptest! {
        #[test]
        fn traversal_matches_clipping_oracle(ax in 0.0f64..20.0, ay in 0.0f64..20.0, bx in 0.0f64..20.0, by in 0.0f64..20.0) {
            let (a, b) = (Vec2::new(ax, ay), Vec2::new(bx, by));
            let mut visited = std::collections::BTreeSet::new();
            traverse(a, b, |r, c| { visited.insert((r, c)); });
            for r in -1..21 {
                for c in -1..21 {
                    if crosses_square(a, b, r, c, 1e-9) {
                        prop_assert!(visited.contains(&(r, c)), "missed ({r}, {c})");
                    }
                }
            }
            // Every visited cell at least touches the segment.
            for &(r, c) in &visited {
                prop_assert!(crosses_square(a, b, r, c, -1e-9), "extra ({r}, {c})");
            }
        }

        #[test]
        fn wall_band_is_8_connected(x in 0.6f64..3.0, y0 in -2.0f64..0.0, slope in -2.0f64..2.0, th in -3.0f64..3.0) {
            let w = world_with(vec![[x, y0], [x + slope, y0 + 1.5]]);
            let gt = ground_truth_grid(&w, &spec(), &Pose2D::new(0.1, -0.2, th), 0.0);
            let cells: Vec<Cell> = gt.transparent.ones().collect();
            prop_assume!(!cells.is_empty());
            let comps = glassnav_core::ton::connected_components(&gt.transparent);
            prop_assert_eq!(comps.len(), 1);
        }
    }
}
