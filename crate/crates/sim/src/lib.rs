//! Deterministic 2.5D world for exercising transparent-obstacle perception.
//!
//! Obstacles are extruded polylines and arcs with a reflectance model each.
//! A multi-channel lidar casts beams against them and a differential-drive
//! robot moves through them with exact collision checks.

pub mod error;
pub mod lidar;
pub mod material;
pub mod robot;
pub mod scene;
pub mod truth;
pub mod world;

use glassnav_core::{GridSpec, PointCloudFrame, Pose2D, RobotConfig, VelocityPair};

pub use error::{SimError, SimResult};
pub use lidar::{cast_beam, scan, scan_tagged, BeamReturn, LidarModel, TaggedPoint};
pub use material::{MaterialKind, MaterialModel};
pub use robot::{step, Contact, Odometry, OdometryNoise, RobotState};
pub use scene::Scene;
pub use truth::{ground_truth_grid, GroundTruth};
pub use world::{DynamicDisc, ObjectId, Primitive, Shape, World};

/// One robot in one world, with its odometry.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub world: World,
    pub lidar: LidarModel,
    pub robot: RobotConfig,
    pub state: RobotState,
    odometry: Odometry,
}

impl Simulation {
    pub fn new(world: World, lidar: LidarModel, robot: RobotConfig, start: Pose2D, noise: OdometryNoise, seed: u64) -> SimResult<Self> {
        world.validate()?;
        lidar.validate()?;
        Ok(Self {
            world,
            lidar,
            robot,
            state: RobotState::at(start),
            odometry: Odometry::new(start, noise, seed),
        })
    }

    pub fn clock(&self) -> f64 {
        self.state.clock
    }

    pub fn odometry(&self) -> Pose2D {
        self.odometry.estimate()
    }

    /// Sweep from the true pose, stamped with the odometry estimate.
    pub fn scan(&self) -> PointCloudFrame {
        let mut frame = scan(&self.state.pose, &self.lidar, &self.world, self.state.clock);
        frame.pose = self.odometry.estimate();
        frame
    }

    pub fn scan_tagged(&self) -> Vec<TaggedPoint> {
        scan_tagged(&self.state.pose, &self.lidar, &self.world, self.state.clock)
    }

    pub fn step(&mut self, cmd: VelocityPair, dt: f64) -> Option<Contact> {
        let before = self.state.pose;
        let (next, contact) = step(&self.state, cmd, dt, &self.world, &self.robot);
        self.state = next;
        self.odometry.update(&before, &self.state.pose);
        contact
    }

    pub fn ground_truth(&self, spec: &GridSpec) -> GroundTruth {
        ground_truth_grid(&self.world, spec, &self.state.pose, self.state.clock)
    }

    /// Distance between the robot disc and the nearest obstacle surface.
    pub fn clearance(&self) -> f64 {
        let p = glassnav_core::Vec2::new(self.state.pose.x(), self.state.pose.y());
        self.world
            .nearest(p, self.state.clock)
            .map_or(f64::INFINITY, |(d, _)| d - self.robot.radius)
    }
}
