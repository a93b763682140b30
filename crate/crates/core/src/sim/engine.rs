//! The stepping simulator.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::sensing::{sense, Observation};
use super::trajectory::{CollisionEvent, DoneReason, Sample, Trajectory};
use super::{Action, AgentBody, Mode, Pose, Primitive, SimConfig, SimError};
use crate::env::SceneContext;
use crate::geometry::{nearest_free_point, OccupancyGrid, WorldPoint};
use crate::tasks::Episode;

/// Tolerance when checking that `dt` is a whole number of substeps.
const CADENCE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub done: bool,
    pub done_reason: Option<DoneReason>,
    pub collided: bool,
}

#[derive(Debug, Clone)]
struct EpisodeState {
    oracle_enabled: bool,
    pose: Pose,
    steps: usize,
    trajectory: Trajectory,
    collided_last_step: bool,
}

/// One simulator instance owns one episode at a time.
///
/// The agent center is in contact with the world when it comes within the
/// agent radius of an occupied cell center of the undilated raster; free
/// cells of the dilated raster are exactly the contact-free cell centers.
#[derive(Debug, Clone)]
pub struct Simulator {
    ctx: Arc<SceneContext>,
    body: AgentBody,
    config: SimConfig,
    state: Option<EpisodeState>,
}

/// Earliest fraction `t` in `[0, 1]` of the displacement `d` from `p` at
/// which the agent center reaches distance `radius` of an occupied cell
/// center, together with that cell center. Only approaching contacts count,
/// so an agent resting against a wall may slide along or leave it.
pub fn first_contact(
    grid: &OccupancyGrid,
    radius: f64,
    p: WorldPoint,
    d: (f64, f64),
) -> Option<(f64, WorldPoint)> {
    let len = d.0.hypot(d.1);
    if len == 0.0 {
        return None;
    }
    let res = grid.resolution();
    let reach = radius + len + res;
    let (lo_r, lo_c) = grid.cell_coords(WorldPoint::new(p.x - reach, p.y - reach));
    let (hi_r, hi_c) = grid.cell_coords(WorldPoint::new(p.x + reach, p.y + reach));
    let a = d.0 * d.0 + d.1 * d.1;
    let r2 = radius * radius;
    let mut best: Option<(f64, WorldPoint)> = None;
    for row in lo_r.max(0)..=hi_r.min(grid.height() as i64 - 1) {
        for col in lo_c.max(0)..=hi_c.min(grid.width() as i64 - 1) {
            let cell = crate::geometry::Cell::new(row as usize, col as usize);
            if grid.is_free(cell) {
                continue;
            }
            let o = grid.cell_center(cell);
            let (px, py) = (p.x - o.x, p.y - o.y);
            let b = 2.0 * (px * d.0 + py * d.1);
            if b >= -1e-12 {
                continue; // not approaching
            }
            let c = px * px + py * py - r2;
            let t = if c <= 0.0 {
                0.0
            } else {
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    continue;
                }
                (-b - disc.sqrt()) / (2.0 * a)
            };
            if t <= 1.0 && best.map_or(true, |(bt, _)| t < bt) {
                best = Some((t.max(0.0), o));
            }
        }
    }
    best
}

impl Simulator {
    pub fn new(ctx: Arc<SceneContext>, body: AgentBody, config: SimConfig) -> Result<Self, SimError> {
        body.validate()?;
        config.validate()?;
        Ok(Self {
            ctx,
            body,
            config,
            state: None,
        })
    }

    pub fn context(&self) -> &Arc<SceneContext> {
        &self.ctx
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn body(&self) -> &AgentBody {
        &self.body
    }

    pub fn pose(&self) -> Option<Pose> {
        self.state.as_ref().map(|s| s.pose)
    }

    pub fn is_done(&self) -> bool {
        self.state
            .as_ref()
            .is_some_and(|s| s.trajectory.done_reason.is_some())
    }

    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.state.as_ref().map(|s| &s.trajectory)
    }

    pub fn reset(&mut self, episode: &Episode) -> Result<Observation, SimError> {
        if episode.scene_id != self.ctx.scene.scene_id {
            return Err(SimError::InvalidEpisode(format!(
                "episode {} belongs to scene {}, simulator holds {}",
                episode.episode_id, episode.scene_id, self.ctx.scene.scene_id
            )));
        }
        let start = episode.start;
        if !start.is_finite() || !self.ctx.dilated.is_free_point(start.position()) {
            return Err(SimError::InvalidEpisode(format!(
                "start pose ({}, {}) of {} is not free for the agent",
                start.x, start.y, episode.episode_id
            )));
        }
        let pose = Pose::new(start.x, start.y, start.yaw);
        self.state = Some(EpisodeState {
            oracle_enabled: episode.instruction_bundle.oracle_enabled,
            pose,
            steps: 0,
            trajectory: Trajectory {
                episode_id: episode.episode_id.clone(),
                samples: vec![Sample { t: 0.0, pose }],
                ..Trajectory::default()
            },
            collided_last_step: false,
        });
        self.sense()
    }

    pub fn sense(&self) -> Result<Observation, SimError> {
        let st = self.state.as_ref().ok_or(SimError::NoEpisode)?;
        Ok(sense(&self.ctx, st.pose, st.steps, st.collided_last_step))
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, SimError> {
        let st = self.state.as_ref().ok_or(SimError::NoEpisode)?;
        if st.trajectory.done_reason.is_some() {
            return Err(SimError::EpisodeFinished);
        }
        let plan = self.plan(&action, st.oracle_enabled)?;

        let mut blocked = 0.0;
        let mut contact = None;
        let mut stop = false;
        match plan {
            Plan::Stop => stop = true,
            Plan::Query => {}
            Plan::Motion { v, omega, substeps } => {
                for _ in 0..substeps {
                    let (b, c) = self.integrate(v, omega);
                    blocked += b;
                    contact = c.or(contact);
                }
            }
            Plan::Hop(target) => self.hop(target),
        }

        let thresh = self.config.collision_thresh;
        let strict = self.config.mode == Mode::Strict;
        let max_steps = self.config.max_steps;
        let st = self.state.as_mut().expect("checked above");
        st.steps += 1;
        st.trajectory.actions.push(action);
        st.trajectory.blocked_per_step.push(blocked);
        let collided = blocked >= thresh;
        if collided {
            st.trajectory.collision_events.push(CollisionEvent {
                t: st.trajectory.duration(),
                contact_point: contact.expect("blocked motion has a contact"),
                blocked_displacement: blocked,
            });
        }
        st.collided_last_step = collided;
        let reason = if stop {
            st.trajectory.stopped = true;
            st.trajectory.stop_pose = Some(st.pose);
            Some(DoneReason::Stopped)
        } else if collided && strict {
            Some(DoneReason::Collision)
        } else if st.steps >= max_steps {
            Some(DoneReason::StepLimit)
        } else {
            None
        };
        st.trajectory.done_reason = reason;
        Ok(StepResult {
            observation: self.sense()?,
            done: reason.is_some(),
            done_reason: reason,
            collided,
        })
    }

    fn plan(&self, action: &Action, oracle_enabled: bool) -> Result<Plan, SimError> {
        let h = self.config.substep;
        let b = &self.body;
        let prim = self.config.primitives;
        // Fewest whole substeps that keep the speed within its limit.
        let cadence = |amount: f64, limit: f64| ((amount / (limit * h)) - CADENCE_EPS).ceil().max(1.0);
        Ok(match action {
            Action::Discrete { primitive } => match primitive {
                Primitive::Stop => Plan::Stop,
                Primitive::Forward => {
                    let n = cadence(prim.forward_distance, b.max_linear_speed);
                    Plan::Motion {
                        v: prim.forward_distance / (n * h),
                        omega: 0.0,
                        substeps: n as usize,
                    }
                }
                Primitive::TurnLeft | Primitive::TurnRight => {
                    let n = cadence(prim.turn_angle, b.max_angular_speed);
                    let sign = if *primitive == Primitive::TurnLeft { 1.0 } else { -1.0 };
                    Plan::Motion {
                        v: 0.0,
                        omega: sign * prim.turn_angle / (n * h),
                        substeps: n as usize,
                    }
                }
            },
            Action::Continuous { v, omega, dt } => {
                let (v, omega, dt) = (*v, *omega, *dt);
                if ![v, omega, dt].iter().all(|x| x.is_finite()) {
                    return Err(SimError::InvalidAction("non-finite command".into()));
                }
                if v.abs() > b.max_linear_speed + 1e-12 {
                    return Err(SimError::InvalidAction(format!(
                        "|v| = {} exceeds {}",
                        v.abs(),
                        b.max_linear_speed
                    )));
                }
                if omega.abs() > b.max_angular_speed + 1e-12 {
                    return Err(SimError::InvalidAction(format!(
                        "|omega| = {} exceeds {}",
                        omega.abs(),
                        b.max_angular_speed
                    )));
                }
                if !(dt > 0.0 && dt <= 1.0 + 1e-12) {
                    return Err(SimError::InvalidAction(format!("dt = {dt} outside (0, 1]")));
                }
                let n = (dt / h).round();
                if n < 1.0 || (dt / h - n).abs() > CADENCE_EPS * n.max(1.0) {
                    return Err(SimError::InvalidAction(format!(
                        "dt = {dt} is not a whole number of {h} s substeps"
                    )));
                }
                Plan::Motion {
                    v,
                    omega,
                    substeps: n as usize,
                }
            }
            Action::WaypointHop { target } => {
                if self.config.mode == Mode::Strict {
                    return Err(SimError::UnsupportedAction(
                        "waypoint_hop is only available in telhop mode",
                    ));
                }
                if !target.is_finite() {
                    return Err(SimError::InvalidAction("non-finite hop target".into()));
                }
                Plan::Hop(*target)
            }
            Action::OracleQuery { .. } => {
                if !oracle_enabled {
                    return Err(SimError::UnsupportedAction(
                        "oracle queries need a dialogue episode",
                    ));
                }
                Plan::Query
            }
        })
    }

    /// Advance one substep; returns the blocked displacement and the contact.
    fn integrate(&mut self, v: f64, omega: f64) -> (f64, Option<WorldPoint>) {
        let h = self.config.substep;
        let st = self.state.as_mut().expect("active episode");
        let yaw_mid = st.pose.yaw + omega * h / 2.0;
        let d = (v * h * yaw_mid.cos(), v * h * yaw_mid.sin());
        let p = st.pose.position();
        let (moved, contact) = sweep(
            &self.ctx.occupancy,
            self.body.radius,
            self.config.allow_sliding,
            p,
            d,
        );
        let blocked = (d.0 - moved.0).hypot(d.1 - moved.1);
        let pose = Pose::new(p.x + moved.0, p.y + moved.1, st.pose.yaw + omega * h);
        push_sample(st, pose, h);
        (blocked, contact)
    }

    fn hop(&mut self, target: WorldPoint) {
        let h = self.config.substep;
        let grid = &self.ctx.dilated;
        let dest = if grid.is_free_point(target) {
            target
        } else {
            nearest_free_point(grid, target).expect("scene has free space")
        };
        let st = self.state.as_mut().expect("active episode");
        let p = st.pose.position();
        let yaw = if dest.distance(&p) > 0.0 {
            p.bearing_to(&dest)
        } else {
            st.pose.yaw
        };
        push_sample(st, Pose::new(dest.x, dest.y, yaw), h);
    }
}

enum Plan {
    Stop,
    Query,
    Motion { v: f64, omega: f64, substeps: usize },
    Hop(WorldPoint),
}

fn push_sample(st: &mut EpisodeState, pose: Pose, h: f64) {
    let k = st.trajectory.samples.len();
    st.pose = pose;
    st.trajectory.samples.push(Sample {
        t: k as f64 * h,
        pose,
    });
}

/// Move by `d` until contact, then optionally slide once along the contact
/// tangent. Returns the achieved displacement and the contact cell center.
fn sweep(
    grid: &OccupancyGrid,
    radius: f64,
    sliding: bool,
    p: WorldPoint,
    d: (f64, f64),
) -> ((f64, f64), Option<WorldPoint>) {
    let Some((t, o)) = first_contact(grid, radius, p, d) else {
        return (d, None);
    };
    let moved = (d.0 * t, d.1 * t);
    if !sliding {
        return (moved, Some(o));
    }
    let q = WorldPoint::new(p.x + moved.0, p.y + moved.1);
    let (nx, ny) = (q.x - o.x, q.y - o.y);
    let nlen = nx.hypot(ny);
    if nlen == 0.0 {
        return (moved, Some(o));
    }
    let (nx, ny) = (nx / nlen, ny / nlen);
    let rem = (d.0 * (1.0 - t), d.1 * (1.0 - t));
    let dot = rem.0 * nx + rem.1 * ny;
    let tangent = (rem.0 - dot * nx, rem.1 - dot * ny);
    let (t2, o2) = match first_contact(grid, radius, q, tangent) {
        Some((t2, o2)) => (t2, Some(o2)),
        None => (1.0, None),
    };
    (
        (moved.0 + tangent.0 * t2, moved.1 + tangent.1 * t2),
        o2.or(Some(o)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{box_scene, context, episode_through};
    use crate::geometry::ray_cast;
    use crate::tasks::TaskType;
    use std::f64::consts::PI;

    fn setup(mode: Mode, start: Pose) -> (Simulator, Episode) {
        let ctx = Arc::new(context(box_scene("scene_t", 10.0, 5.0)));
        let ep = episode_through(&ctx, "ep", TaskType::Coarse, start, &[WorldPoint::new(5.0, 2.5)])
            .unwrap();
        let sim = Simulator::new(ctx, AgentBody::default(), SimConfig::with_mode(mode))
            .unwrap();
        (sim, ep)
    }

    #[test]
    fn forward_primitive() {
        let (mut sim, ep) = setup(Mode::Strict, Pose::new(2.0, 2.5, 0.0));
        sim.reset(&ep).unwrap();
        let r = sim.step(Action::forward()).unwrap();
        assert!(!r.done && !r.collided);
        let p = sim.pose().unwrap();
        assert!((p.x - 2.25).abs() < 1e-9 && (p.y - 2.5).abs() < 1e-12);
        let t: Vec<f64> = sim.trajectory().unwrap().samples.iter().map(|s| s.t).collect();
        assert_eq!(t.len(), 6);
        for (k, tk) in t.iter().enumerate() {
            assert!((tk - k as f64 * 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn turn_primitive() {
        let (mut sim, ep) = setup(Mode::Strict, Pose::new(2.0, 2.5, 0.0));
        sim.reset(&ep).unwrap();
        sim.step(Action::Discrete { primitive: Primitive::TurnLeft }).unwrap();
        assert!((sim.pose().unwrap().yaw - PI / 12.0).abs() < 1e-9);
        assert_eq!(sim.trajectory().unwrap().samples.len(), 5);
        sim.step(Action::Discrete { primitive: Primitive::TurnRight }).unwrap();
        sim.step(Action::Discrete { primitive: Primitive::TurnRight }).unwrap();
        assert!((sim.pose().unwrap().yaw + PI / 12.0).abs() < 1e-9);
    }

    #[test]
    fn blocked_displacement_near_wall() {
        let ctx = context(box_scene("scene_t", 10.0, 5.0));
        let probe = WorldPoint::new(8.0, 2.5);
        let wall = probe.x + ray_cast(&ctx.occupancy, probe, 0.0, 10.0);
        // agent surface 0.2 m short of the wall surface
        let start = Pose::new(wall - 0.30 - 0.20, 2.5, 0.0);
        let (mut sim, ep) = setup(Mode::Strict, start);
        sim.reset(&ep).unwrap();
        let r = sim
            .step(Action::Continuous { v: 1.0, omega: 0.0, dt: 0.5 })
            .unwrap();
        assert!(r.collided && r.done);
        assert_eq!(r.done_reason, Some(DoneReason::Collision));
        let ev = &sim.trajectory().unwrap().collision_events[0];
        assert!((ev.blocked_displacement - 0.3).abs() <= 0.05, "{}", ev.blocked_displacement);
        assert!(matches!(sim.step(Action::stop()), Err(SimError::EpisodeFinished)));
    }

    #[test]
    fn telhop_keeps_running_after_contact() {
        let (mut sim, ep) = setup(Mode::TelHop, Pose::new(9.0, 2.5, 0.0));
        sim.reset(&ep).unwrap();
        let r = sim
            .step(Action::Continuous { v: 1.0, omega: 0.0, dt: 1.0 })
            .unwrap();
        assert!(r.collided && !r.done);
        let r = sim
            .step(Action::WaypointHop { target: WorldPoint::new(10.5, 2.5) })
            .unwrap();
        assert!(!r.done);
        let p = sim.pose().unwrap().position();
        assert!(sim.context().dilated.is_free_point(p));
        assert!(p.x > 9.0 && p.x < 10.0);
        sim.step(Action::WaypointHop { target: WorldPoint::new(3.0, 1.0) }).unwrap();
        let p = sim.pose().unwrap().position();
        assert_eq!(p, WorldPoint::new(3.0, 1.0));
    }

    #[test]
    fn rejected_actions_do_not_count() {
        let (mut sim, ep) = setup(Mode::Strict, Pose::new(2.0, 2.5, 0.0));
        sim.reset(&ep).unwrap();
        let bad = [
            Action::Continuous { v: 0.5, omega: 0.0, dt: 0.07 },
            Action::Continuous { v: 1.5, omega: 0.0, dt: 0.1 },
            Action::Continuous { v: 0.5, omega: 0.0, dt: 0.0 },
            Action::Continuous { v: f64::NAN, omega: 0.0, dt: 0.1 },
        ];
        for a in bad {
            assert!(matches!(sim.step(a), Err(SimError::InvalidAction(_))));
        }
        assert!(matches!(
            sim.step(Action::WaypointHop { target: WorldPoint::new(3.0, 2.0) }),
            Err(SimError::UnsupportedAction(_))
        ));
        assert!(matches!(
            sim.step(Action::OracleQuery { text: "where?".into() }),
            Err(SimError::UnsupportedAction(_))
        ));
        let t = sim.trajectory().unwrap();
        assert!(t.actions.is_empty() && t.samples.len() == 1);
    }

    #[test]
    fn step_limit_and_stop() {
        let ctx = Arc::new(context(box_scene("scene_t", 10.0, 5.0)));
        let ep = episode_through(&ctx, "ep", TaskType::Coarse, Pose::new(2.0, 2.5, 0.0), &[WorldPoint::new(5.0, 2.5)])
            .unwrap();
        let cfg = SimConfig { max_steps: 3, ..SimConfig::default() };
        let mut sim = Simulator::new(ctx, AgentBody::default(), cfg).unwrap();
        sim.reset(&ep).unwrap();
        let left = Action::Discrete { primitive: Primitive::TurnLeft };
        assert!(!sim.step(left.clone()).unwrap().done);
        assert!(!sim.step(left.clone()).unwrap().done);
        assert_eq!(sim.step(left).unwrap().done_reason, Some(DoneReason::StepLimit));

        sim.reset(&ep).unwrap();
        let r = sim.step(Action::stop()).unwrap();
        assert_eq!(r.done_reason, Some(DoneReason::Stopped));
        let t = sim.trajectory().unwrap();
        assert!(t.stopped && t.samples.len() == 1 && t.stop_pose == Some(ep.start));
    }
}
