use glassnav_core::planner::crosses_segments;
use glassnav_core::{
    dynamic_window, select_velocity, BinaryGrid, Grid, GridSpec, LidarPoint, NavMap, NavSegment, Perception, PerceptionConfig,
    PlanResult, PlannerConfig, PointCloudFrame, Pose2D, RobotConfig, Vec2, VelocityPair,
};
use proptest::prelude::*;

/// Mid-layer returns in the glass band from a short pane across x = 1 m,
/// with nothing above or below it.
fn pane_frame() -> PointCloudFrame {
    let mut points = Vec::new();
    for i in 0..9 {
        let y = -0.2 + 0.05 * i as f64 + 0.01;
        for z in [0.45, 0.5, 0.55] {
            points.push(LidarPoint::new(1.01, y, z, 115.0));
        }
    }
    PointCloudFrame {
        points,
        timestamp: 0.0,
        pose: Pose2D::new(0.0, 0.0, 0.0),
    }
}

#[test]
fn pane_becomes_a_wall_the_planner_respects() {
    let mut perception = Perception::new(PerceptionConfig::default()).unwrap();
    let out = perception.process(&pane_frame()).unwrap();
    assert_eq!(out.tons.len(), 1);
    assert_eq!(out.nav.segments.len(), 1);
    let seg = out.nav.segments[0];
    // Perpendicular to the ray straight ahead and in front of the robot.
    assert!((seg.a.x - seg.b.x).abs() < 1e-9);
    assert!(seg.a.x > 100.0 && seg.a.x < 120.0);
    assert!(out.transparent.count_ones() > 0);

    let robot = RobotConfig::default();
    let planner = PlannerConfig::default();
    let mut current = VelocityPair::new(0.5, 0.0);
    for _ in 0..5 {
        let cands = dynamic_window(current, &robot, planner.window_dt, (planner.n_v, planner.n_w));
        match select_velocity(&cands, &out.nav, Vec2::new(3.0, 0.0), &robot, &planner) {
            PlanResult::Move(sel) => {
                assert!(!crosses_segments(&sel.trajectory, &out.nav.segments, &out.nav.spec));
                current = sel.pair;
            }
            PlanResult::Frozen => current = VelocityPair::ZERO,
        }
    }
}

#[test]
fn perception_is_deterministic() {
    let run = || {
        let mut p = Perception::new(PerceptionConfig::default()).unwrap();
        (0..3)
            .map(|k| {
                let mut frame = pane_frame();
                frame.timestamp = 0.1 * k as f64;
                frame.pose = Pose2D::new(0.02 * k as f64, 0.0, 0.01 * k as f64);
                p.process(&frame).unwrap().transparent
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

fn empty_nav(segments: Vec<NavSegment>) -> NavMap {
    let spec = GridSpec::new(200, 0.05).unwrap();
    NavMap::new(Grid::new(200), BinaryGrid::new(200), segments, spec)
}

fn arb_segment() -> impl Strategy<Value = NavSegment> {
    (60.0f64..140.0, 60.0f64..140.0, 0.0f64..std::f64::consts::TAU, 2.0f64..30.0).prop_map(|(x, y, a, len)| NavSegment {
        a: Vec2::new(x, y),
        b: Vec2::new(x + len * a.cos(), y + len * a.sin()),
    })
}

proptest! {
    #[test]
    fn selected_motion_never_crosses_a_segment(
        segments in prop::collection::vec(arb_segment(), 1..6),
        gx in -4.0f64..4.0,
        gy in -4.0f64..4.0,
        v in 0.0f64..0.6,
        w in -1.0f64..1.0,
    ) {
        let nav = empty_nav(segments);
        let robot = RobotConfig::default();
        let planner = PlannerConfig::default();
        let cands = dynamic_window(VelocityPair::new(v, w), &robot, planner.window_dt, (planner.n_v, planner.n_w));
        let first = select_velocity(&cands, &nav, Vec2::new(gx, gy), &robot, &planner);
        if let PlanResult::Move(sel) = &first {
            prop_assert!(!crosses_segments(&sel.trajectory, &nav.segments, &nav.spec));
        }
        prop_assert_eq!(first, select_velocity(&cands, &nav, Vec2::new(gx, gy), &robot, &planner));
    }
}
