//! Versioned JSON scene files.
//!
//! ```json
//! {
//!   "scene_version": 1,
//!   "name": "pane",
//!   "materials": { "pane": { "kind": "transparent", "peak_intensity": 130, "angular_sigma": 12, "detection_floor": 90 } },
//!   "primitives": [
//!     { "shape": { "type": "polyline", "points": [[2, -1], [2, 1]] }, "z": [0, 2], "material": "pane" },
//!     { "shape": { "type": "arc", "center": [0, 0], "radius": 3, "start_deg": -30, "end_deg": 30 }, "material": "opaque" }
//!   ],
//!   "dynamic_obstacles": [ { "radius": 0.25, "speed": 0.5, "waypoints": [[3, -2], [3, 2]] } ],
//!   "start": { "x": 0, "y": 0, "theta_deg": 0 },
//!   "goal": [4, 0],
//!   "seeds": [1, 2, 3]
//! }
//! ```
//!
//! A primitive's `material` names an entry of `materials` or a built-in
//! preset (`opaque`, `transparent`, `glass`, `acrylic`, `glass_low_floor`,
//! `mirror`).

use std::collections::BTreeMap;
use std::path::Path;

use glassnav_core::{Pose2D, Vec2, VelocityPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::material::MaterialModel;
use crate::robot::OdometryNoise;
use crate::world::{DynamicDisc, Primitive, Shape, World};

pub const SCENE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveSpec {
    pub shape: Shape,
    #[serde(default = "default_z")]
    pub z: [f64; 2],
    pub material: String,
}

fn default_z() -> [f64; 2] {
    [0.0, 2.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta_deg: f64,
}

impl StartPose {
    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, self.theta_deg.to_radians())
    }
}

/// Uniform perturbation of the start pose, drawn per seed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartJitter {
    #[serde(default)]
    pub xy: f64,
    #[serde(default)]
    pub theta_deg: f64,
}

/// Open-loop command held for `duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveCommand {
    pub v: f64,
    pub w: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub scene_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub materials: BTreeMap<String, MaterialModel>,
    #[serde(default)]
    pub primitives: Vec<PrimitiveSpec>,
    #[serde(default)]
    pub dynamic_obstacles: Vec<DynamicDisc>,
    pub start: StartPose,
    pub goal: [f64; 2],
    /// Scripted commands replacing the planner, for detection runs.
    #[serde(default)]
    pub drive: Option<Vec<DriveCommand>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub start_jitter: StartJitter,
    #[serde(default)]
    pub odometry_noise: OdometryNoise,
    /// Simulated-time limit, seconds.
    #[serde(default = "default_max_time")]
    pub max_time: f64,
    /// Partial pipeline configuration merged over the active profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_max_time() -> f64 {
    60.0
}

impl Scene {
    pub fn from_json(text: &str) -> SimResult<Self> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> SimResult<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn validate(&self) -> SimResult<()> {
        if self.scene_version != SCENE_VERSION {
            return Err(SimError::Invalid(format!(
                "unsupported scene_version {} (expected {SCENE_VERSION})",
                self.scene_version
            )));
        }
        for (name, m) in &self.materials {
            m.validate().map_err(|e| SimError::Invalid(format!("material {name:?}: {e}")))?;
        }
        let finite = [self.start.x, self.start.y, self.start.theta_deg, self.goal[0], self.goal[1]]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.max_time > 0.0) || self.seeds.is_empty() {
            return Err(SimError::Invalid("start, goal, max_time and seeds must be set".into()));
        }
        if self.start_jitter.xy < 0.0 || self.start_jitter.theta_deg < 0.0 {
            return Err(SimError::Invalid("negative start jitter".into()));
        }
        if self.odometry_noise.xy < 0.0 || self.odometry_noise.theta_deg < 0.0 {
            return Err(SimError::Invalid("negative odometry noise".into()));
        }
        if let Some(drive) = &self.drive {
            if drive.iter().any(|d| !(d.duration >= 0.0) || !d.v.is_finite() || !d.w.is_finite()) {
                return Err(SimError::Invalid("drive commands need finite values".into()));
            }
        }
        self.world().map(|_| ())
    }

    pub fn material(&self, name: &str) -> SimResult<MaterialModel> {
        self.materials
            .get(name)
            .copied()
            .or_else(|| MaterialModel::preset(name))
            .ok_or_else(|| SimError::Invalid(format!("unknown material {name:?}")))
    }

    pub fn world(&self) -> SimResult<World> {
        let mut primitives = Vec::with_capacity(self.primitives.len());
        for (i, p) in self.primitives.iter().enumerate() {
            primitives.push(Primitive {
                shape: p.shape.clone(),
                z_min: p.z[0],
                z_max: p.z[1],
                material: self.material(&p.material).map_err(|e| SimError::Invalid(format!("primitive {i}: {e}")))?,
            });
        }
        let world = World {
            primitives,
            discs: self.dynamic_obstacles.clone(),
        };
        world.validate()?;
        Ok(world)
    }

    pub fn goal(&self) -> Vec2 {
        Vec2::new(self.goal[0], self.goal[1])
    }

    /// Start pose for a run, jittered deterministically by `seed`.
    pub fn start_pose(&self, seed: u64) -> Pose2D {
        let base = self.start.pose();
        let j = self.start_jitter;
        if j.xy == 0.0 && j.theta_deg == 0.0 {
            return base;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = |a: f64| if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 };
        let (dx, dy, dt) = (u(j.xy), u(j.xy), u(j.theta_deg));
        Pose2D::new(base.x() + dx, base.y() + dy, base.heading() + dt.to_radians())
    }

    /// Scripted command at time `t`, or `None` once the script has ended.
    pub fn drive_command(&self, t: f64) -> Option<VelocityPair> {
        let mut end = 0.0;
        for d in self.drive.as_ref()? {
            end += d.duration;
            if t < end - 1e-9 {
                return Some(VelocityPair::new(d.v, d.w));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::MaterialKind;

    const SAMPLE: &str = r#"{
  "scene_version": 1,
  "name": "pane",
  "materials": { "pane": { "kind": "transparent", "peak_intensity": 130, "angular_sigma": 12, "detection_floor": 90 } },
  "primitives": [
    { "shape": { "type": "polyline", "points": [[2, -1], [2, 1]] }, "z": [0, 2], "material": "pane" },
    { "shape": { "type": "arc", "center": [0, 0], "radius": 3, "start_deg": -30, "end_deg": 30 }, "material": "opaque" }
  ],
  "dynamic_obstacles": [ { "radius": 0.25, "speed": 0.5, "waypoints": [[3, -2], [3, 2]] } ],
  "start": { "x": 0, "y": 0, "theta_deg": 0 },
  "goal": [4, 0],
  "seeds": [1, 2, 3]
}"#;

    #[test]
    fn parses_documented_example() {
        let scene = Scene::from_json(SAMPLE).unwrap();
        let world = scene.world().unwrap();
        assert_eq!(world.primitives.len(), 2);
        assert_eq!(world.primitives[0].material.kind, MaterialKind::Transparent);
        assert_eq!(world.primitives[0].material.transmittance, 0.92);
        assert_eq!(world.discs.len(), 1);
        assert_eq!(scene.seeds, vec![1, 2, 3]);
        let again = Scene::from_json(&scene.to_json()).unwrap();
        assert_eq!(again, scene);
    }

    #[test]
    fn errors_point_at_the_problem() {
        let broken = SAMPLE.replace("\"goal\": [4, 0],", "\"goal\": [4, 0]");
        match Scene::from_json(&broken) {
            Err(SimError::Parse { line, .. }) => assert_eq!(line, 12),
            other => panic!("{other:?}"),
        }
        let unknown = SAMPLE.replace("\"material\": \"pane\"", "\"material\": \"unobtainium\"");
        assert!(matches!(Scene::from_json(&unknown), Err(SimError::Invalid(_))));
        let version = SAMPLE.replace("\"scene_version\": 1", "\"scene_version\": 2");
        assert!(matches!(Scene::from_json(&version), Err(SimError::Invalid(_))));
        let flat = SAMPLE.replace("\"z\": [0, 2]", "\"z\": [1, 1]");
        assert!(matches!(Scene::from_json(&flat), Err(SimError::Invalid(_))));
    }

    #[test]
    fn jitter_is_seeded() {
        let mut scene = Scene::from_json(SAMPLE).unwrap();
        assert_eq!(scene.start_pose(5), Pose2D::IDENTITY);
        scene.start_jitter = StartJitter { xy: 0.1, theta_deg: 5.0 };
        assert_eq!(scene.start_pose(5), scene.start_pose(5));
        assert_ne!(scene.start_pose(5), scene.start_pose(6));
        assert!(scene.start_pose(5).x().abs() <= 0.1);
    }

    #[test]
    fn drive_script() {
        let mut scene = Scene::from_json(SAMPLE).unwrap();
        assert_eq!(scene.drive_command(0.0), None);
        scene.drive = Some(vec![
            DriveCommand { v: 0.5, w: 0.0, duration: 1.0 },
            DriveCommand { v: 0.0, w: 0.3, duration: 0.5 },
        ]);
        assert_eq!(scene.drive_command(0.5), Some(VelocityPair::new(0.5, 0.0)));
        assert_eq!(scene.drive_command(1.2), Some(VelocityPair::new(0.0, 0.3)));
        assert_eq!(scene.drive_command(1.5), None);
    }
}
