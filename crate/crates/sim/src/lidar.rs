//! Multi-channel spinning lidar.

use glassnav_core::{LayerConfig, LidarPoint, PointCloudFrame, Pose2D, Vec2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::material::{MaterialKind, MIRROR_REFLECTANCE};
use crate::world::{Hit2D, ObjectId, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarModel {
    pub channels: usize,
    /// Lowest and highest beam elevation, degrees.
    pub vertical_fov: [f64; 2],
    /// Degrees, centered on `azimuth_center`.
    pub horizontal_fov: f64,
    pub azimuth_step: f64,
    /// Robot-frame direction the field of view is centered on, degrees.
    #[serde(default)]
    pub azimuth_center: f64,
    pub max_range: f64,
    /// Returns closer than this are dropped.
    pub min_range: f64,
    pub mount_height: f64,
    #[serde(default = "default_max_intensity")]
    pub max_intensity: f64,
}

fn default_max_intensity() -> f64 {
    255.0
}

impl Default for LidarModel {
    /// 16 channels over +/-15 degrees, 0.2 degree azimuth steps.
    fn default() -> Self {
        Self {
            channels: 16,
            vertical_fov: [-15.0, 15.0],
            horizontal_fov: 360.0,
            azimuth_step: 0.2,
            azimuth_center: 0.0,
            max_range: 100.0,
            min_range: 0.2,
            mount_height: 0.5,
            max_intensity: default_max_intensity(),
        }
    }
}

impl LidarModel {
    pub fn validate(&self) -> SimResult<()> {
        let [lo, hi] = self.vertical_fov;
        let ok = self.channels >= 1
            && lo > -90.0
            && hi < 90.0
            && lo <= hi
            && (self.channels == 1 || lo < hi)
            && self.horizontal_fov > 0.0
            && self.horizontal_fov <= 360.0
            && self.azimuth_step > 0.0
            && self.min_range >= 0.0
            && self.max_range > self.min_range
            && self.mount_height > 0.0
            && self.max_intensity > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::Invalid(format!("invalid lidar model {self:?}")))
        }
    }

    /// Beam elevations in radians, lowest first.
    pub fn elevations(&self) -> Vec<f64> {
        let [lo, hi] = self.vertical_fov;
        (0..self.channels)
            .map(|k| {
                let a = if self.channels == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * k as f64 / (self.channels - 1) as f64
                };
                a.to_radians()
            })
            .collect()
    }

    /// Robot-frame azimuths in radians. Azimuths sit on the fixed lattice
    /// `k * azimuth_step`, so a narrower field of view selects a subset of
    /// the beams of a wider one.
    pub fn azimuths(&self) -> Vec<f64> {
        let count = (360.0 / self.azimuth_step).round() as i64;
        let half = 0.5 * self.horizontal_fov;
        (0..count)
            .filter_map(|k| {
                let deg = k as f64 * self.azimuth_step;
                let rel = (deg - self.azimuth_center + 180.0).rem_euclid(360.0) - 180.0;
                (self.horizontal_fov >= 360.0 || (-half..half).contains(&rel)).then(|| deg.to_radians())
            })
            .collect()
    }

    /// Whether beams at horizontal distance `d` land in each of the three
    /// height layers.
    pub fn covers_layers(&self, layers: &LayerConfig, d: f64) -> bool {
        let (h, dz) = (layers.lidar_height, layers.half_height);
        let zs: Vec<f64> = self.elevations().iter().map(|e| self.mount_height + d * e.tan()).collect();
        let any = |lo: f64, hi: f64| zs.iter().any(|&z| z > lo && z <= hi);
        any(0.0, h - dz) && any(h - dz, h + dz) && any(h + dz, h + 2.0 * dz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamReturn {
    /// Path length from the origin, meters; the point is placed this far
    /// along the emitted direction.
    pub range: f64,
    pub intensity: f64,
    pub kind: MaterialKind,
    pub object: ObjectId,
}

/// A beam in horizontal terms: unit 2D heading plus elevation.
#[derive(Debug, Clone, Copy)]
struct Beam {
    origin: Vec2,
    z: f64,
    dir: Vec2,
    /// Horizontal fraction of the unit 3D direction.
    ch: f64,
    /// Vertical rise per horizontal meter.
    slope: f64,
}

struct Trace<'a> {
    world: &'a World,
    time: f64,
    max_range: f64,
    max_intensity: f64,
}

fn sorted_hits(world: &World, origin: Vec2, dir: Vec2, time: f64) -> Vec<Hit2D> {
    let mut hits = Vec::new();
    world.intersect(origin, dir, time, &mut hits);
    hits.sort_by(|a, b| a.t.total_cmp(&b.t));
    hits
}

impl Trace<'_> {
    fn resolve(&self, beam: Beam, hits: &[Hit2D], path: f64, scale: f64, bounced: bool) -> Option<BeamReturn> {
        let mut transmitted = 1.0;
        for hit in hits {
            let range = path + hit.t / beam.ch;
            if range > self.max_range {
                return None;
            }
            let z = beam.z + hit.t * beam.slope;
            let (z_min, z_max) = self.world.z_extent(hit.object);
            if z < z_min || z > z_max {
                continue;
            }
            let m = self.world.material(hit.object);
            let cos_inc = (beam.ch * beam.dir.dot(hit.normal).abs()).min(1.0);
            let inc = cos_inc.acos().to_degrees();
            let gain = transmitted * scale;
            let done = |intensity: f64, kind| {
                (intensity >= m.detection_floor).then(|| BeamReturn {
                    range,
                    intensity: intensity.clamp(0.0, self.max_intensity),
                    kind,
                    object: hit.object,
                })
            };
            match m.kind {
                MaterialKind::OpaqueDiffuse => return done(m.diffuse_intensity(inc, range) * gain, m.kind),
                MaterialKind::Transparent => {
                    let i = m.specular_intensity(inc, range) * gain;
                    if i >= m.detection_floor {
                        return done(i, m.kind);
                    }
                    transmitted *= m.transmittance;
                }
                MaterialKind::Mirror => {
                    let i = m.specular_intensity(inc, range) * gain;
                    if i >= m.detection_floor {
                        return done(i, m.kind);
                    }
                    if bounced {
                        return done(m.diffuse_intensity(inc, range) * gain, MaterialKind::OpaqueDiffuse);
                    }
                    let at = beam.origin + beam.dir * hit.t;
                    let n = hit.normal;
                    let dir = beam.dir - n * (2.0 * beam.dir.dot(n));
                    let next = Beam { origin: at, z, dir, ..beam };
                    let hits = sorted_hits(self.world, at, dir, self.time);
                    return self.resolve(next, &hits, range, gain * MIRROR_REFLECTANCE, true);
                }
            }
        }
        None
    }
}

/// Traces one beam from a world-frame origin. `direction` must be a unit
/// vector.
pub fn cast_beam(
    origin: [f64; 3],
    direction: [f64; 3],
    world: &World,
    max_range: f64,
    max_intensity: f64,
    time: f64,
) -> Option<BeamReturn> {
    let ch = direction[0].hypot(direction[1]);
    if ch < 1e-12 {
        return None;
    }
    let beam = Beam {
        origin: Vec2::new(origin[0], origin[1]),
        z: origin[2],
        dir: Vec2::new(direction[0] / ch, direction[1] / ch),
        ch,
        slope: direction[2] / ch,
    };
    let trace = Trace {
        world,
        time,
        max_range,
        max_intensity,
    };
    let hits = sorted_hits(world, beam.origin, beam.dir, time);
    trace.resolve(beam, &hits, 0.0, 1.0, false)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedPoint {
    pub point: LidarPoint,
    pub kind: MaterialKind,
    pub object: ObjectId,
}

/// Full sweep from `pose`; points are in the robot frame with `z` above the
/// ground. Beams sharing an azimuth share one horizontal intersection pass.
pub fn scan_tagged(pose: &Pose2D, lidar: &LidarModel, world: &World, time: f64) -> Vec<TaggedPoint> {
    let elevations: Vec<(f64, f64)> = lidar.elevations().iter().map(|e| (e.cos(), e.tan())).collect();
    let trace = Trace {
        world,
        time,
        max_range: lidar.max_range,
        max_intensity: lidar.max_intensity,
    };
    let origin = Vec2::new(pose.x(), pose.y());
    lidar
        .azimuths()
        .par_iter()
        .map(|&az| {
            let world_az = pose.heading() + az;
            let dir = Vec2::new(world_az.cos(), world_az.sin());
            let hits = sorted_hits(world, origin, dir, time);
            let mut out = Vec::new();
            if hits.is_empty() {
                return out;
            }
            for &(ch, slope) in &elevations {
                let beam = Beam {
                    origin,
                    z: lidar.mount_height,
                    dir,
                    ch,
                    slope,
                };
                let Some(ret) = trace.resolve(beam, &hits, 0.0, 1.0, false) else {
                    continue;
                };
                if ret.range < lidar.min_range {
                    continue;
                }
                let horiz = ret.range * ch;
                out.push(TaggedPoint {
                    point: LidarPoint::new(
                        horiz * az.cos(),
                        horiz * az.sin(),
                        lidar.mount_height + horiz * slope,
                        ret.intensity,
                    ),
                    kind: ret.kind,
                    object: ret.object,
                });
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn scan(pose: &Pose2D, lidar: &LidarModel, world: &World, time: f64) -> PointCloudFrame {
    PointCloudFrame {
        points: scan_tagged(pose, lidar, world, time).into_iter().map(|t| t.point).collect(),
        timestamp: time,
        pose: *pose,
    }
}
