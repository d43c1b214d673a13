//! Pipeline configuration profiles and JSON overrides.

use glassnav_core::{GridSpec, LayerConfig, PerceptionConfig, PlannerConfig, PlannerWeights, RobotConfig};
use glassnav_sim::LidarModel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub profile: String,
    /// `perception.robot_radius` is replaced by `robot.radius` on load.
    pub perception: PerceptionConfig,
    pub robot: RobotConfig,
    pub planner: PlannerConfig,
    pub lidar: LidarModel,
    /// Perception and planning cycles per simulated second.
    pub frame_rate: f64,
    /// A run fails once the planner has been frozen this long without a break.
    pub freeze_timeout: f64,
    /// Wall-clock budget per run, seconds.
    pub wall_clock_limit: f64,
    /// Keep the extrapolated segments of this many past frames, moved into
    /// the current frame, as planner barriers while they stay on the grid.
    /// 0 disables it.
    pub segment_memory: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::profile("default").expect("built-in profile")
    }
}

pub const PROFILES: [&str; 2] = ["default", "compact"];

impl PipelineConfig {
    /// Built-in profiles: `default` (n 200, m 80, lidar at 0.5 m, radius
    /// 0.3 m) and `compact` (m 100, lidar at 0.48 m, radius 0.25 m). Both
    /// plan over a 3 s horizon with the speed term weighted double.
    pub fn profile(name: &str) -> CliResult<Self> {
        let base = Self {
            profile: name.to_string(),
            perception: PerceptionConfig::default(),
            robot: RobotConfig::default(),
            planner: PlannerConfig {
                weights: PlannerWeights {
                    heading: 1.0,
                    obstacle: 1.0,
                    velocity: 2.0,
                },
                horizon: 3.0,
                ..PlannerConfig::default()
            },
            lidar: LidarModel::default(),
            frame_rate: 10.0,
            freeze_timeout: 10.0,
            wall_clock_limit: 30.0,
            segment_memory: 300,
        };
        let cfg = match name {
            "default" => base,
            "compact" => {
                let mut c = base;
                c.perception.roi = 100;
                c.perception.layers.lidar_height = 0.48;
                c.lidar.mount_height = 0.48;
                c.robot.radius = 0.25;
                c
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown profile {other:?} (expected one of {})",
                    PROFILES.join(", ")
                )))
            }
        };
        Ok(cfg.synced())
    }

    fn synced(mut self) -> Self {
        self.perception.robot_radius = self.robot.radius;
        self
    }

    /// Applies a JSON merge patch (objects merge recursively, `null`
    /// deletes, anything else replaces) and re-validates.
    pub fn merged(&self, patch: &serde_json::Value) -> CliResult<Self> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        merge_patch(&mut doc, patch);
        let cfg: Self = serde_json::from_value(doc).map_err(|e| CliError::Config(format!("config override: {e}")))?;
        let cfg = cfg.synced();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let patch: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        let name = patch.get("profile").and_then(|p| p.as_str()).unwrap_or("default");
        Self::profile(name)?.merged(&patch)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn grid(&self) -> GridSpec {
        self.perception.grid
    }

    pub fn layers(&self) -> LayerConfig {
        self.perception.layers
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    pub fn validate(&self) -> CliResult<()> {
        let invalid = |e: glassnav_core::Error| CliError::Config(e.to_string());
        self.perception.validate().map_err(invalid)?;
        self.robot.validate().map_err(invalid)?;
        self.planner.validate().map_err(invalid)?;
        self.lidar.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.frame_rate > 0.0 && self.freeze_timeout > 0.0 && self.wall_clock_limit > 0.0) {
            return Err(CliError::Config("frame_rate, freeze_timeout and wall_clock_limit must be positive".into()));
        }
        if (self.lidar.mount_height - self.perception.layers.lidar_height).abs() > 1e-9 {
            return Err(CliError::Config(format!(
                "lidar mount height {} differs from the layer lidar height {}",
                self.lidar.mount_height, self.perception.layers.lidar_height
            )));
        }
        let d = self.robot.d_thresh();
        if !self.lidar.covers_layers(&self.perception.layers, d) {
            return Err(CliError::Config(format!(
                "lidar channels do not reach all three height layers at d_thresh = {d} m"
            )));
        }
        if self.lidar.min_range >= self.robot.footprint() {
            return Err(CliError::Config(format!(
                "lidar min_range {} must be below the robot footprint {} or nearby obstacles go unseen",
                self.lidar.min_range,
                self.robot.footprint()
            )));
        }
        if self.robot.height < self.perception.layers.lidar_height {
            return Err(CliError::Config("the lidar must not sit above the robot".into()));
        }
        Ok(())
    }
}

fn merge_patch(target: &mut serde_json::Value, patch: &serde_json::Value) {
    use serde_json::Value;
    match patch {
        Value::Object(p) => {
            if !target.is_object() {
                *target = Value::Object(Default::default());
            }
            let t = target.as_object_mut().expect("object");
            for (k, v) in p {
                if v.is_null() {
                    t.remove(k);
                } else {
                    merge_patch(t.entry(k.clone()).or_insert(Value::Null), v);
                }
            }
        }
        other => *target = other.clone(),
    }
}
