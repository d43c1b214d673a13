//! Differential-drive motion, collision detection and odometry.

use glassnav_core::grid::normalize_angle;
use glassnav_core::{Pose2D, RobotConfig, Vec2, VelocityPair};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::material::MaterialKind;
use crate::world::{ObjectId, World};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: Pose2D,
    pub velocity: VelocityPair,
    pub clock: f64,
}

impl RobotState {
    pub fn at(pose: Pose2D) -> Self {
        Self {
            pose,
            velocity: VelocityPair::ZERO,
            clock: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub object: ObjectId,
    pub kind: MaterialKind,
}

/// Integration substep, seconds.
const SUBSTEP: f64 = 0.01;

fn advance(pose: &Pose2D, cmd: VelocityPair, h: f64) -> Pose2D {
    let th = pose.heading();
    let (dx, dy) = if cmd.w.abs() < 1e-12 {
        (cmd.v * th.cos() * h, cmd.v * th.sin() * h)
    } else {
        let r = cmd.v / cmd.w;
        let th2 = th + cmd.w * h;
        (r * (th2.sin() - th.sin()), r * (th.cos() - th2.cos()))
    };
    Pose2D::new(pose.x() + dx, pose.y() + dy, normalize_angle(th + cmd.w * h))
}

fn touching(world: &World, p: Vec2, time: f64, radius: f64) -> Option<Contact> {
    world.nearest(p, time).and_then(|(d, object)| {
        (d <= radius).then(|| Contact {
            object,
            kind: world.material(object).kind,
        })
    })
}

fn position(p: &Pose2D) -> Vec2 {
    Vec2::new(p.x(), p.y())
}

/// Integrates `cmd` (clamped to the robot limits) for `dt` seconds. On
/// contact the robot stops at the first touching pose and the contact is
/// returned.
pub fn step(state: &RobotState, cmd: VelocityPair, dt: f64, world: &World, robot: &RobotConfig) -> (RobotState, Option<Contact>) {
    let cmd = VelocityPair::new(cmd.v.clamp(-robot.v_max, robot.v_max), cmd.w.clamp(-robot.w_max, robot.w_max));
    if let Some(c) = touching(world, position(&state.pose), state.clock, robot.radius) {
        return (
            RobotState {
                velocity: VelocityPair::ZERO,
                clock: state.clock + dt,
                ..*state
            },
            Some(c),
        );
    }
    let n = (dt / SUBSTEP).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let mut pose = state.pose;
    for k in 0..n {
        let t0 = state.clock + k as f64 * h;
        let next = advance(&pose, cmd, h);
        if touching(world, position(&next), t0 + h, robot.radius).is_some() {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if touching(world, position(&advance(&pose, cmd, mid)), t0 + mid, robot.radius).is_some() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let stop = advance(&pose, cmd, hi);
            let contact = touching(world, position(&stop), t0 + hi, robot.radius).expect("bisection keeps contact");
            return (
                RobotState {
                    pose: stop,
                    velocity: VelocityPair::ZERO,
                    clock: state.clock + dt,
                },
                Some(contact),
            );
        }
        pose = next;
    }
    (
        RobotState {
            pose,
            velocity: cmd,
            clock: state.clock + dt,
        },
        None,
    )
}

/// Per-step Gaussian odometry error standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdometryNoise {
    #[serde(default)]
    pub xy: f64,
    #[serde(default)]
    pub theta_deg: f64,
}

impl OdometryNoise {
    pub fn is_exact(&self) -> bool {
        self.xy == 0.0 && self.theta_deg == 0.0
    }
}

/// Dead-reckoned pose estimate. Exact when the noise is zero.
#[derive(Debug, Clone)]
pub struct Odometry {
    estimate: Pose2D,
    noise: OdometryNoise,
    rng: ChaCha8Rng,
}

impl Odometry {
    pub fn new(start: Pose2D, noise: OdometryNoise, seed: u64) -> Self {
        Self {
            estimate: start,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6f64_6f6d),
        }
    }

    pub fn estimate(&self) -> Pose2D {
        self.estimate
    }

    pub fn update(&mut self, before: &Pose2D, after: &Pose2D) {
        if self.noise.is_exact() {
            self.estimate = *after;
            return;
        }
        let delta = Pose2D::between(after, before);
        let moved = delta.translation.norm() > 0.0 || delta.rotation != 0.0;
        if !moved {
            return;
        }
        let mut draw = |std: f64| {
            if std > 0.0 {
                Normal::new(0.0, std).expect("finite std").sample(&mut self.rng)
            } else {
                0.0
            }
        };
        let (nx, ny, nt) = (draw(self.noise.xy), draw(self.noise.xy), draw(self.noise.theta_deg.to_radians()));
        let noisy = Pose2D::new(delta.x() + nx, delta.y() + ny, delta.heading() + nt);
        let e = self.estimate.compose(&noisy);
        self.estimate = Pose2D::new(e.x(), e.y(), normalize_angle(e.heading()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::MaterialModel;
    use crate::world::{Primitive, Shape};
    use approx::assert_abs_diff_eq;

    fn glass_wall() -> World {
        World {
            primitives: vec![Primitive {
                shape: Shape::Polyline {
                    points: vec![[2.0, -5.0], [2.0, 5.0]],
                },
                z_min: 0.0,
                z_max: 2.0,
                material: MaterialModel::glass(),
            }],
            discs: vec![],
        }
    }

    fn robot() -> RobotConfig {
        RobotConfig {
            v_max: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn zero_command_stays() {
        let s = RobotState::at(Pose2D::new(0.3, -0.2, 0.4));
        let (n, c) = step(&s, VelocityPair::ZERO, 0.2, &glass_wall(), &robot());
        assert_eq!(n.pose, s.pose);
        assert!(c.is_none());
        assert_abs_diff_eq!(n.clock, 0.2);
    }

    #[test]
    fn drives_into_glass_and_stops_at_contact() {
        let s = RobotState::at(Pose2D::new(1.6, 0.0, 0.0));
        let (n, c) = step(&s, VelocityPair::new(1.0, 0.0), 0.2, &glass_wall(), &robot());
        let c = c.expect("collision");
        assert_eq!(c.kind, MaterialKind::Transparent);
        assert_abs_diff_eq!(n.pose.x(), 1.7, epsilon = 1e-9);
        assert_abs_diff_eq!(n.pose.y(), 0.0);
    }

    #[test]
    fn rotation_only() {
        let s = RobotState::at(Pose2D::new(0.0, 0.0, 0.0));
        let (n, _) = step(&s, VelocityPair::new(0.0, 0.5), 0.2, &glass_wall(), &robot());
        assert_eq!((n.pose.x(), n.pose.y()), (0.0, 0.0));
        assert_abs_diff_eq!(n.pose.heading(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn arc_integration_is_exact() {
        // Quarter circle of radius 1.
        let s = RobotState::at(Pose2D::IDENTITY);
        let w = std::f64::consts::FRAC_PI_2;
        let (n, _) = step(&s, VelocityPair::new(w, w), 1.0, &World::default(), &RobotConfig { v_max: 2.0, w_max: 2.0, ..robot() });
        assert_abs_diff_eq!(n.pose.x(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(n.pose.y(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn noisy_odometry_is_seeded() {
        let noise = OdometryNoise { xy: 0.01, theta_deg: 0.5 };
        let run = |seed| {
            let mut o = Odometry::new(Pose2D::IDENTITY, noise, seed);
            o.update(&Pose2D::IDENTITY, &Pose2D::new(0.1, 0.0, 0.0));
            o.estimate()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
        let mut exact = Odometry::new(Pose2D::IDENTITY, OdometryNoise::default(), 0);
        exact.update(&Pose2D::IDENTITY, &Pose2D::new(0.1, 0.2, 0.3));
        assert_eq!(exact.estimate(), Pose2D::new(0.1, 0.2, 0.3));
    }
}
