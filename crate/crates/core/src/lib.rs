//! Transparent-obstacle perception and local planning from 3D lidar intensity.
//!
//! Points are binned into three height layers of a robot-centric grid.
//! Cells whose mid layer shows the near-normal intensity band of glass while
//! the layers above and below stay dark are grouped into neighborhoods, each
//! extrapolated to a tangent segment that the planner treats as a wall.

pub mod error;
pub mod extrap;
pub mod frame_io;
pub mod grid;
pub mod layers;
pub mod metrics;
pub mod nav;
pub mod pgm;
pub mod pipeline;
pub mod planner;
pub mod ton;

pub use error::{Error, Result};
pub use extrap::{build_extrapolation_set, extrapolate, ExtrapolatedSegment, ExtrapolationSet};
pub use grid::{
    apply_transform, grid_to_world, index_to_world, rasterize_segment, world_to_grid, world_to_index, BinaryGrid, Cell, Grid, GridSpec,
    IntensityGrid, Pose2D, RigidTransform2D, Vec2,
};
pub use layers::{build_layers, extract_roi, LayerConfig, LidarPoint, MultiLayerIntensityMap, Normalization, PointCloudFrame, RoiView};
pub use metrics::{aggregate_runs, confusion, scores, ConfusionCounts, Outcome, RunRecord, Scores};
pub use nav::{accumulate_mapping, compose_nav_map, NavMap, NavSegment, TonHistory};
pub use pipeline::{FrameOutput, Perception, PerceptionConfig};
pub use planner::{
    dynamic_window, obstacle_cost, rollout, select_velocity, ObstacleCost, PlanResult, PlannerConfig, PlannerWeights,
    RobotConfig, Trajectory, VelocityPair,
};
pub use ton::{apply_condition, denoise, extract_tons, Ton, TonCondition, TonMask};
