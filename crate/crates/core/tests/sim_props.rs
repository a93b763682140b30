//! Simulator invariants under random action sequences and constructed
//! wall-approach cases checked against closed-form blocked displacement.

use std::sync::Arc;

use proptest::prelude::*;

use embodinav_core::env::{generate_scene, GeneratorParams, SceneContext};
use embodinav_core::fixtures::{box_scene, context, episode_through};
use embodinav_core::geometry::WorldPoint;
use embodinav_core::sim::{
    parse_csv, Action, AgentBody, DoneReason, Mode, Pose, Primitive, SimConfig, SimError, Simulator,
};
use embodinav_core::tasks::{sample_path, PathConstraints, TaskType};

fn min_center_distance(ctx: &SceneContext, p: WorldPoint) -> f64 {
    let g = &ctx.occupancy;
    g.clearance(p, 1.0).unwrap_or(f64::INFINITY)
}

fn action_strategy() -> impl Strategy<Value = Action> {
    prop_oneof![
        4 => Just(Action::forward()),
        2 => Just(Action::Discrete { primitive: Primitive::TurnLeft }),
        2 => Just(Action::Discrete { primitive: Primitive::TurnRight }),
        3 => (-1.0f64..=1.0, -1.5f64..=1.5, 1usize..=20)
            .prop_map(|(v, omega, n)| Action::Continuous { v, omega, dt: n as f64 * 0.05 }),
        1 => (-2.0f64..12.0, -2.0f64..12.0).prop_map(|(x, y)| Action::WaypointHop { target: WorldPoint::new(x, y) }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_rollouts_respect_invariants(
        seed in 0u64..20,
        telhop in any::<bool>(),
        actions in proptest::collection::vec(action_strategy(), 1..60),
    ) {
        let params = GeneratorParams::default();
        let scene = generate_scene(&params, seed).unwrap();
        let ctx = Arc::new(SceneContext::new(scene, 0.05, 0.30, 1.50));
        let sp = sample_path(&ctx, &PathConstraints::default(), seed).unwrap();
        let ep = episode_through(&ctx, "ep", TaskType::Fine, sp.start, &[sp.goal]).unwrap();
        let mode = if telhop { Mode::TelHop } else { Mode::Strict };
        let config = SimConfig::with_mode(mode);
        let mut sim = Simulator::new(ctx.clone(), AgentBody::default(), config).unwrap();
        sim.reset(&ep).unwrap();
        let mut executed = 0;
        for a in actions {
            if sim.is_done() {
                prop_assert_eq!(sim.step(a), Err(SimError::EpisodeFinished));
                break;
            }
            match sim.step(a.clone()) {
                Ok(r) => {
                    executed += 1;
                    prop_assert_eq!(r.done, r.done_reason.is_some());
                    if r.done_reason == Some(DoneReason::Collision) {
                        prop_assert!(r.collided && mode == Mode::Strict);
                    }
                }
                Err(SimError::UnsupportedAction(_)) => {
                    let hop = matches!(a, Action::WaypointHop { .. });
                    prop_assert!(hop && mode == Mode::Strict);
                }
                Err(e) => prop_assert!(false, "unexpected error {:?}", e),
            }
        }
        let t = sim.trajectory().unwrap();
        prop_assert_eq!(t.actions.len(), executed);
        prop_assert_eq!(t.blocked_per_step.len(), executed);
        let events = t.blocked_per_step.iter().filter(|b| **b >= config.collision_thresh).count();
        prop_assert_eq!(events, t.collision_events.len());
        for (k, s) in t.samples.iter().enumerate() {
            prop_assert!(s.pose.is_finite());
            prop_assert!((s.t - k as f64 * 0.05).abs() < 1e-9);
            prop_assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&s.pose.yaw));
            let d = min_center_distance(&ctx, s.pose.position());
            prop_assert!(d >= 0.30 - 1e-9, "sample {} penetrates: {}", k, d);
        }
        let parsed = parse_csv(&t.to_csv()).unwrap();
        prop_assert_eq!(parsed.len(), t.samples.len());
        for (a, b) in parsed.iter().zip(&t.samples) {
            prop_assert!((a.pose.x - b.pose.x).abs() <= 5e-7 && (a.pose.y - b.pose.y).abs() <= 5e-7);
            prop_assert!((a.t - b.t).abs() <= 5e-7);
        }
    }
}

/// Agent facing +x on a cell-center row, `gap` meters short of contact with
/// the east wall.
fn approach(mode: Mode, gap: f64) -> (Simulator, f64) {
    let ctx = Arc::new(context(box_scene("walls", 6.0, 4.0)));
    let g = &ctx.occupancy;
    let y = g.cell_center(g.cell_of(WorldPoint::new(3.0, 2.0)).unwrap()).y;
    let wall_x = g
        .occupied_cells()
        .map(|c| g.cell_center(c))
        .filter(|p| (p.y - y).abs() < 1e-9 && p.x > 3.0)
        .map(|p| p.x)
        .fold(f64::INFINITY, f64::min);
    let start = Pose::new(wall_x - 0.30 - gap, y, 0.0);
    let ep = episode_through(&ctx, "ep", TaskType::Fine, Pose::new(3.0, 2.0, 0.0), &[WorldPoint::new(2.0, 2.0)]).unwrap();
    let ep = embodinav_core::tasks::Episode { start, ..ep };
    let mut sim = Simulator::new(ctx, AgentBody::default(), SimConfig::with_mode(mode)).unwrap();
    sim.reset(&ep).unwrap();
    (sim, wall_x)
}

#[test]
fn collision_fires_iff_blocked_reaches_threshold() {
    let commanded = 0.5;
    for (gap, expect_collision) in [(0.45, false), (0.41, false), (0.39, true), (0.30, true), (0.05, true)] {
        for mode in [Mode::Strict, Mode::TelHop] {
            let (mut sim, wall_x) = approach(mode, gap);
            let r = sim
                .step(Action::Continuous { v: commanded, omega: 0.0, dt: 1.0 })
                .unwrap();
            let t = sim.trajectory().unwrap();
            let blocked = t.blocked_per_step[0];
            let expect_blocked = (commanded - gap).max(0.0);
            assert!((blocked - expect_blocked).abs() < 1e-9, "gap {gap}: blocked {blocked}");
            assert_eq!(r.collided, expect_collision, "gap {gap} {mode:?}");
            assert_eq!(r.collided, blocked >= 0.10);
            let x = sim.pose().unwrap().x;
            assert!(x <= wall_x - 0.30 + 1e-9);
            match (mode, expect_collision) {
                (Mode::Strict, true) => assert_eq!(r.done_reason, Some(DoneReason::Collision)),
                _ => assert!(!r.done),
            }
            if expect_collision {
                let ev = t.collision_events[0];
                assert!((ev.contact_point.x - wall_x).abs() < 1e-9);
                assert!((ev.blocked_displacement - blocked).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn telhop_keeps_going_after_collisions() {
    let (mut sim, _) = approach(Mode::TelHop, 0.05);
    for _ in 0..5 {
        let r = sim.step(Action::forward()).unwrap();
        assert!(r.collided && !r.done);
    }
    assert_eq!(sim.trajectory().unwrap().collision_events.len(), 5);
}

#[test]
fn telhop_relocates_to_nearest_free_cell() {
    let mut scene = box_scene("hop", 6.0, 4.0);
    scene.objects.push(embodinav_core::fixtures::box_object(
        "table_0",
        "table",
        "room_0",
        embodinav_core::env::Rect::new(2.0, 1.0, 3.3, 2.7),
        0.8,
    ));
    let ctx = Arc::new(context(scene));
    let ep = episode_through(&ctx, "ep", TaskType::Fine, Pose::new(1.0, 1.0, 0.0), &[WorldPoint::new(5.0, 3.0)]).unwrap();
    let targets = [
        WorldPoint::new(2.6, 1.9),
        WorldPoint::new(2.01, 1.01),
        WorldPoint::new(-1.0, 2.0),
        WorldPoint::new(5.9, 3.9),
        WorldPoint::new(4.0, 2.0),
    ];
    let d = &ctx.dilated;
    for target in targets {
        let mut sim = Simulator::new(ctx.clone(), AgentBody::default(), SimConfig::with_mode(Mode::TelHop)).unwrap();
        sim.reset(&ep).unwrap();
        sim.step(Action::WaypointHop { target }).unwrap();
        let got = sim.pose().unwrap().position();
        let expect = if d.is_free_point(target) {
            target
        } else {
            let best = d
                .free_cells()
                .map(|c| (d.cell_center(c).distance(&target), c))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .unwrap();
            d.cell_center(best.1)
        };
        assert_eq!(got, expect, "target {target:?}");
    }
}

#[test]
fn strict_mode_rejects_hops_without_counting_them() {
    let (mut sim, _) = approach(Mode::Strict, 1.0);
    let err = sim.step(Action::WaypointHop { target: WorldPoint::new(1.0, 1.0) });
    assert!(matches!(err, Err(SimError::UnsupportedAction(_))));
    let bad_dt = sim.step(Action::Continuous { v: 0.1, omega: 0.0, dt: 0.07 });
    assert!(matches!(bad_dt, Err(SimError::InvalidAction(_))));
    assert!(sim.trajectory().unwrap().actions.is_empty());
    assert_eq!(sim.trajectory().unwrap().samples.len(), 1);
}
