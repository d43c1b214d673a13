//! Static primitives, scripted discs and their 2D geometry.
//!
//! Obstacles are vertical extrusions of a 2D footprint between `z_min` and
//! `z_max`, so every surface normal is horizontal.

use glassnav_core::Vec2;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::material::{MaterialKind, MaterialModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Polyline {
        points: Vec<[f64; 2]>,
    },
    /// Counter-clockwise from `start_deg` to `end_deg`.
    Arc {
        center: [f64; 2],
        radius: f64,
        start_deg: f64,
        end_deg: f64,
    },
}

impl Shape {
    pub fn validate(&self) -> SimResult<()> {
        match self {
            Shape::Polyline { points } => {
                if points.len() < 2 || points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(SimError::Invalid("polyline needs at least 2 finite vertices".into()));
                }
            }
            Shape::Arc {
                center,
                radius,
                start_deg,
                end_deg,
            } => {
                let finite = center.iter().chain([radius, start_deg, end_deg]).all(|v| v.is_finite());
                if !finite || *radius <= 0.0 {
                    return Err(SimError::Invalid("arc needs a positive radius".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub z_min: f64,
    pub z_max: f64,
    pub material: MaterialModel,
}

/// A ray-surface crossing in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit2D {
    /// Horizontal distance along the unit 2D ray.
    pub t: f64,
    /// Unit surface normal.
    pub normal: Vec2,
    pub object: ObjectId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectId {
    Primitive(usize),
    Disc(usize),
}

const RAY_EPS: f64 = 1e-9;

fn v(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

fn perp(e: Vec2) -> Vec2 {
    Vec2::new(-e.y, e.x)
}

pub fn ray_segment(o: Vec2, u: Vec2, a: Vec2, b: Vec2) -> Option<(f64, Vec2)> {
    let e = b - a;
    let denom = u.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = a - o;
    let t = w.cross(e) / denom;
    let s = w.cross(u) / denom;
    if t > RAY_EPS && (0.0..=1.0).contains(&s) {
        Some((t, perp(e).normalized()?))
    } else {
        None
    }
}

fn angle_in_span(angle: f64, start_deg: f64, end_deg: f64) -> bool {
    let span = (end_deg - start_deg).rem_euclid(360.0);
    let span = if span == 0.0 { 360.0 } else { span };
    (angle.to_degrees() - start_deg).rem_euclid(360.0) <= span
}

/// Crossings of the ray with the arc, nearest first.
pub fn ray_arc(o: Vec2, u: Vec2, c: Vec2, radius: f64, start_deg: f64, end_deg: f64) -> impl Iterator<Item = (f64, Vec2)> {
    let f = o - c;
    let b = f.dot(u);
    let disc = b * b - (f.dot(f) - radius * radius);
    let roots = if disc < 0.0 {
        [f64::NAN, f64::NAN]
    } else {
        let sq = disc.sqrt();
        [-b - sq, -b + sq]
    };
    roots.into_iter().filter_map(move |t| {
        if !(t > RAY_EPS) {
            return None;
        }
        let rel = o + u * t - c;
        angle_in_span(rel.y.atan2(rel.x), start_deg, end_deg).then(|| (t, rel * (1.0 / radius)))
    })
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let len2 = e.dot(e);
    let k = if len2 == 0.0 { 0.0 } else { ((p - a).dot(e) / len2).clamp(0.0, 1.0) };
    (p - (a + e * k)).norm()
}

pub fn point_arc_distance(p: Vec2, c: Vec2, radius: f64, start_deg: f64, end_deg: f64) -> f64 {
    let rel = p - c;
    let d = rel.norm();
    if d == 0.0 {
        return radius;
    }
    if angle_in_span(rel.y.atan2(rel.x), start_deg, end_deg) {
        return (d - radius).abs();
    }
    let end = |deg: f64| c + Vec2::new(deg.to_radians().cos(), deg.to_radians().sin()) * radius;
    (p - end(start_deg)).norm().min((p - end(end_deg)).norm())
}

impl Primitive {
    pub fn validate(&self) -> SimResult<()> {
        self.shape.validate()?;
        self.material.validate()?;
        if !(self.z_max > self.z_min) {
            return Err(SimError::Invalid(format!("z extent ({}, {}) is empty", self.z_min, self.z_max)));
        }
        Ok(())
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        match &self.shape {
            Shape::Polyline { points } => points
                .windows(2)
                .map(|w| point_segment_distance(p, v(w[0]), v(w[1])))
                .fold(f64::INFINITY, f64::min),
            Shape::Arc {
                center,
                radius,
                start_deg,
                end_deg,
            } => point_arc_distance(p, v(*center), *radius, *start_deg, *end_deg),
        }
    }

    pub fn intersect(&self, o: Vec2, u: Vec2, id: usize, out: &mut Vec<Hit2D>) {
        let object = ObjectId::Primitive(id);
        match &self.shape {
            Shape::Polyline { points } => {
                for w in points.windows(2) {
                    if let Some((t, normal)) = ray_segment(o, u, v(w[0]), v(w[1])) {
                        out.push(Hit2D { t, normal, object });
                    }
                }
            }
            Shape::Arc {
                center,
                radius,
                start_deg,
                end_deg,
            } => {
                for (t, normal) in ray_arc(o, u, v(*center), *radius, *start_deg, *end_deg) {
                    out.push(Hit2D { t, normal, object });
                }
            }
        }
    }

    /// Densely sampled points along the footprint, at most `step` apart.
    pub fn sample_outline(&self, step: f64) -> Vec<Vec2> {
        match &self.shape {
            Shape::Polyline { points } => {
                let mut out = vec![v(points[0])];
                for w in points.windows(2) {
                    let (a, b) = (v(w[0]), v(w[1]));
                    let k = ((b - a).norm() / step).ceil().max(1.0) as usize;
                    out.extend((1..=k).map(|i| a + (b - a) * (i as f64 / k as f64)));
                }
                out
            }
            Shape::Arc {
                center,
                radius,
                start_deg,
                end_deg,
            } => {
                let span = (end_deg - start_deg).rem_euclid(360.0);
                let span = if span == 0.0 { 360.0 } else { span };
                let k = (span.to_radians() * radius / step).ceil().max(1.0) as usize;
                (0..=k)
                    .map(|i| {
                        let a = (start_deg + span * i as f64 / k as f64).to_radians();
                        v(*center) + Vec2::new(a.cos(), a.sin()) * *radius
                    })
                    .collect()
            }
        }
    }
}

/// Opaque vertical cylinder moving along waypoints at constant speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicDisc {
    pub radius: f64,
    #[serde(default = "default_disc_height")]
    pub height: f64,
    pub speed: f64,
    pub waypoints: Vec<[f64; 2]>,
    /// Return to the first waypoint and repeat, otherwise stop at the last.
    #[serde(default = "default_true")]
    pub looping: bool,
    #[serde(default = "default_disc_material")]
    pub material: MaterialModel,
}

fn default_disc_height() -> f64 {
    1.8
}

fn default_true() -> bool {
    true
}

fn default_disc_material() -> MaterialModel {
    MaterialModel {
        peak_intensity: 200.0,
        ..MaterialModel::opaque()
    }
}

impl DynamicDisc {
    pub fn validate(&self) -> SimResult<()> {
        if self.radius <= 0.0 || self.height <= 0.0 || self.speed < 0.0 || self.waypoints.is_empty() {
            return Err(SimError::Invalid("dynamic obstacle needs radius, height, speed and waypoints".into()));
        }
        if self.material.kind != MaterialKind::OpaqueDiffuse {
            return Err(SimError::Invalid("dynamic obstacles must be opaque".into()));
        }
        self.material.validate()
    }

    pub fn position(&self, time: f64) -> Vec2 {
        let mut path: Vec<Vec2> = self.waypoints.iter().map(|&p| v(p)).collect();
        if self.looping && path.len() > 1 {
            path.push(path[0]);
        }
        let lengths: Vec<f64> = path.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let total: f64 = lengths.iter().sum();
        if total == 0.0 || self.speed == 0.0 {
            return path[0];
        }
        let mut d = self.speed * time.max(0.0);
        if self.looping {
            d = d.rem_euclid(total);
        } else if d >= total {
            return *path.last().expect("non-empty");
        }
        for (w, len) in path.windows(2).zip(&lengths) {
            if d <= *len {
                return w[0] + (w[1] - w[0]) * if *len > 0.0 { d / len } else { 0.0 };
            }
            d -= len;
        }
        *path.last().expect("non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct World {
    pub primitives: Vec<Primitive>,
    pub discs: Vec<DynamicDisc>,
}

impl World {
    pub fn validate(&self) -> SimResult<()> {
        for (i, p) in self.primitives.iter().enumerate() {
            p.validate().map_err(|e| SimError::Invalid(format!("primitive {i}: {e}")))?;
        }
        for (i, d) in self.discs.iter().enumerate() {
            d.validate().map_err(|e| SimError::Invalid(format!("dynamic obstacle {i}: {e}")))?;
        }
        Ok(())
    }

    /// All crossings of the horizontal ray, unsorted.
    pub fn intersect(&self, o: Vec2, u: Vec2, time: f64, out: &mut Vec<Hit2D>) {
        for (i, p) in self.primitives.iter().enumerate() {
            p.intersect(o, u, i, out);
        }
        for (i, d) in self.discs.iter().enumerate() {
            for (t, normal) in ray_arc(o, u, d.position(time), d.radius, 0.0, 360.0) {
                out.push(Hit2D {
                    t,
                    normal,
                    object: ObjectId::Disc(i),
                });
            }
        }
    }

    pub fn material(&self, id: ObjectId) -> &MaterialModel {
        match id {
            ObjectId::Primitive(i) => &self.primitives[i].material,
            ObjectId::Disc(i) => &self.discs[i].material,
        }
    }

    pub fn z_extent(&self, id: ObjectId) -> (f64, f64) {
        match id {
            ObjectId::Primitive(i) => (self.primitives[i].z_min, self.primitives[i].z_max),
            ObjectId::Disc(i) => (0.0, self.discs[i].height),
        }
    }

    /// Nearest obstacle to a point, as (distance to its footprint, object).
    pub fn nearest(&self, p: Vec2, time: f64) -> Option<(f64, ObjectId)> {
        let prims = self
            .primitives
            .iter()
            .enumerate()
            .map(|(i, prim)| (prim.distance(p), ObjectId::Primitive(i)));
        let discs = self
            .discs
            .iter()
            .enumerate()
            .map(|(i, d)| (((p - d.position(time)).norm() - d.radius).max(0.0), ObjectId::Disc(i)));
        prims
            .chain(discs)
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn wall(x: f64) -> Primitive {
        Primitive {
            shape: Shape::Polyline {
                points: vec![[x, -5.0], [x, 5.0]],
            },
            z_min: 0.0,
            z_max: 2.0,
            material: MaterialModel::glass(),
        }
    }

    #[test]
    fn ray_hits_wall() {
        let mut hits = Vec::new();
        wall(2.0).intersect(Vec2::ZERO, Vec2::new(1.0, 0.0), 0, &mut hits);
        assert_eq!(hits.len(), 1);
        assert_abs_diff_eq!(hits[0].t, 2.0);
        assert_abs_diff_eq!(hits[0].normal.x.abs(), 1.0);
        hits.clear();
        wall(2.0).intersect(Vec2::ZERO, Vec2::new(-1.0, 0.0), 0, &mut hits);
        assert!(hits.is_empty());
    }

    #[test]
    fn arc_span_filters_hits() {
        let c = Vec2::ZERO;
        let hits: Vec<_> = ray_arc(Vec2::new(-3.0, 0.0), Vec2::new(1.0, 0.0), c, 1.0, -90.0, 90.0).collect();
        assert_eq!(hits.len(), 1);
        assert_abs_diff_eq!(hits[0].0, 4.0);
        let full: Vec<_> = ray_arc(Vec2::new(-3.0, 0.0), Vec2::new(1.0, 0.0), c, 1.0, 0.0, 360.0).collect();
        assert_eq!(full.len(), 2);
        // Wrapping span through 180 degrees.
        assert_eq!(ray_arc(Vec2::new(-3.0, 0.0), Vec2::new(1.0, 0.0), c, 1.0, 170.0, 190.0).count(), 1);
    }

    #[test]
    fn distances() {
        assert_abs_diff_eq!(wall(2.0).distance(Vec2::new(1.7, 0.3)), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(point_arc_distance(Vec2::new(0.0, 0.0), Vec2::ZERO, 2.0, 0.0, 90.0), 2.0);
        assert_abs_diff_eq!(point_arc_distance(Vec2::new(-3.0, 0.0), Vec2::ZERO, 1.0, -90.0, 90.0), (9.0f64 + 1.0).sqrt());
        assert_abs_diff_eq!(point_arc_distance(Vec2::new(3.0, 0.0), Vec2::ZERO, 1.0, -90.0, 90.0), 2.0);
    }

    #[test]
    fn disc_motion() {
        let d = DynamicDisc {
            radius: 0.2,
            height: 1.8,
            speed: 1.0,
            waypoints: vec![[0.0, 0.0], [2.0, 0.0]],
            looping: true,
            material: default_disc_material(),
        };
        assert_eq!(d.position(0.5), Vec2::new(0.5, 0.0));
        assert_eq!(d.position(3.0), Vec2::new(1.0, 0.0));
        assert_eq!(d.position(4.0), Vec2::new(0.0, 0.0));
        let once = DynamicDisc { looping: false, ..d };
        assert_eq!(once.position(10.0), Vec2::new(2.0, 0.0));
    }

    proptest! {
        #[test]
        fn hit_point_lies_on_segment(ox in -3.0f64..3.0, oy in -3.0f64..3.0, a in 0.0f64..std::f64::consts::TAU) {
            let u = Vec2::new(a.cos(), a.sin());
            let (p, q) = (Vec2::new(-1.0, 2.0), Vec2::new(4.0, -1.5));
            if let Some((t, _)) = ray_segment(Vec2::new(ox, oy), u, p, q) {
                let hit = Vec2::new(ox, oy) + u * t;
                prop_assert!(point_segment_distance(hit, p, q) < 1e-9);
            }
        }
    }
}
