//! Linear extrapolation of transparent obstacles.
//!
//! The ray from the lidar to a TON centroid approximates a beam at normal
//! incidence, so the surface tangent there is perpendicular to it. Each TON
//! becomes a tangent segment of half-length `r_rob / s` cells placed where the
//! ray enters the TON's bounding circle. All coordinates are ROI index space.

use crate::error::{Error, Result};
use crate::grid::{rasterize_segment, BinaryGrid, Cell, Vec2};
use crate::ton::Ton;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolatedSegment {
    pub ton_index: usize,
    /// Light ray / bounding circle intersection.
    pub p_int: Vec2,
    pub endpoints: [Vec2; 2],
    /// Light direction, lidar towards the TON.
    pub light: Vec2,
    /// In-bounds cells of the integerized segment.
    pub raster: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationSet {
    pub segments: Vec<ExtrapolatedSegment>,
    pub mask: BinaryGrid,
    /// TONs centered on the lidar cell, which have no light direction.
    pub skipped_degenerate: usize,
}

impl ExtrapolationSet {
    pub fn empty(m: usize) -> Self {
        Self {
            segments: Vec::new(),
            mask: BinaryGrid::new(m),
            skipped_degenerate: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.mask.size()
    }
}

fn lidar_cell(m: usize) -> Vec2 {
    let h = (m / 2) as f64;
    Vec2::new(h, h)
}

/// Incident-light and tangent vectors for a TON.
pub fn light_and_tangent(ton: &Ton, m: usize) -> Result<(Vec2, Vec2)> {
    let light = ton.centroid - lidar_cell(m);
    if light.norm() == 0.0 {
        return Err(Error::DegenerateTon);
    }
    let tangent = Vec2::new(light.y, -light.x);
    Ok((light, tangent))
}

/// Lidar-side intersection of the light line with the TON's bounding circle.
pub fn intersect_ray_circle(ton: &Ton, m: usize) -> Vec2 {
    let origin = lidar_cell(m);
    let light = ton.centroid - origin;
    let dist = light.norm();
    if ton.bound_radius == 0.0 || dist == 0.0 {
        return ton.centroid;
    }
    origin + light * ((dist - ton.bound_radius) / dist)
}

fn integerize(p: Vec2) -> Cell {
    Cell::new(p.x.round() as i32, p.y.round() as i32)
}

/// Tangent segment through the intersection point, extended by
/// `robot_radius / cell_size` cells each way and rasterized onto the `m x m`
/// grid (out-of-bounds cells clipped).
pub fn extrapolate(ton: &Ton, m: usize, robot_radius: f64, cell_size: f64) -> Result<ExtrapolatedSegment> {
    let (light, tangent) = light_and_tangent(ton, m)?;
    let p_int = intersect_ray_circle(ton, m);
    let half = robot_radius / cell_size;
    let dir = tangent * (1.0 / tangent.norm());
    let endpoints = [p_int + dir * half, p_int - dir * half];
    let raster = rasterize_segment(integerize(endpoints[0]), integerize(endpoints[1]))
        .into_iter()
        .filter(|c| c.r >= 0 && c.c >= 0 && (c.r as usize) < m && (c.c as usize) < m)
        .collect();
    Ok(ExtrapolatedSegment {
        ton_index: 0,
        p_int,
        endpoints,
        light,
        raster,
    })
}

/// Extrapolates every TON and unions the rasters into one binary mask.
pub fn build_extrapolation_set(tons: &[Ton], m: usize, robot_radius: f64, cell_size: f64) -> ExtrapolationSet {
    let mut set = ExtrapolationSet::empty(m);
    for (i, ton) in tons.iter().enumerate() {
        match extrapolate(ton, m, robot_radius, cell_size) {
            Ok(mut seg) => {
                seg.ton_index = i;
                for &cell in &seg.raster {
                    set.mask.set(cell, 1);
                }
                set.segments.push(seg);
            }
            Err(_) => set.skipped_degenerate += 1,
        }
    }
    set
}
