//! Baseline agents used as harness test subjects.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use embodinav_core::env::SceneContext;
use embodinav_core::geometry::{normalize_angle, segment_clear, ClearanceMap, WorldPoint};
use embodinav_core::sim::{Action, AgentBody, Observation, Primitive, SimConfig};
use embodinav_core::tasks::{fnv1a64, Episode};

use crate::supervise::oracle_stop;

/// Extra clearance the follower keeps when shortcutting the reference path.
const FOLLOW_MARGIN: f64 = 0.01;
/// Longest command the follower issues, seconds.
const MAX_COMMAND: f64 = 1.0;

pub trait Agent: Send {
    fn reset(&mut self, ctx: &Arc<SceneContext>, episode: &Episode, config: &SimConfig, body: &AgentBody);
    fn act(&mut self, obs: &Observation) -> Action;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    OracleFollower,
    Random,
    Greedy,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::OracleFollower => "oracle_follower",
            AgentKind::Random => "random",
            AgentKind::Greedy => "greedy",
        }
    }

    /// A fresh agent. `seed` only matters for the random agent.
    pub fn build(self, seed: u64) -> Box<dyn Agent> {
        match self {
            AgentKind::OracleFollower => Box::new(OracleFollower::default()),
            AgentKind::Random => Box::new(RandomAgent::new(seed)),
            AgentKind::Greedy => Box::new(GreedyAgent::default()),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle_follower" => Ok(AgentKind::OracleFollower),
            "random" => Ok(AgentKind::Random),
            "greedy" => Ok(AgentKind::Greedy),
            other => Err(format!("unknown agent `{other}`")),
        }
    }
}

/// Shortcut `wps` greedily: from each kept point jump to the farthest
/// following point whose connecting segment keeps `radius` clearance,
/// stopping at the first blocked one.
pub fn string_pull(
    ctx: &SceneContext,
    map: &ClearanceMap,
    wps: &[WorldPoint],
    radius: f64,
) -> Vec<WorldPoint> {
    let Some(&first) = wps.first() else {
        return Vec::new();
    };
    let mut out = vec![first];
    let mut i = 0;
    while i + 1 < wps.len() {
        let mut k = i + 1;
        while k + 1 < wps.len() && segment_clear(&ctx.occupancy, map, wps[i], wps[k + 1], radius) {
            k += 1;
        }
        if wps[k] != wps[i] {
            out.push(wps[k]);
        }
        i = k;
    }
    out
}

/// Follows the episode reference path with exact rotate-then-translate
/// continuous commands and stops on the final goal. Goals are kept as
/// mandatory corners so multi-goal paths visit each one.
#[derive(Debug, Default)]
pub struct OracleFollower {
    plan: Vec<WorldPoint>,
    next: usize,
    vmax: f64,
    wmax: f64,
    h: f64,
    maps: Vec<(String, Arc<ClearanceMap>)>,
}

impl OracleFollower {
    fn clearance(&mut self, ctx: &SceneContext) -> Arc<ClearanceMap> {
        if let Some((_, m)) = self.maps.iter().find(|(id, _)| *id == ctx.scene.scene_id) {
            return m.clone();
        }
        let m = Arc::new(ClearanceMap::new(&ctx.occupancy));
        self.maps.push((ctx.scene.scene_id.clone(), m.clone()));
        m
    }

    pub fn plan(&self) -> &[WorldPoint] {
        &self.plan
    }

    /// Whole substeps for `amount` at `limit` per second, capped at one
    /// command; returns (rate, dt).
    fn command(&self, amount: f64, limit: f64) -> (f64, f64) {
        let max_n = (MAX_COMMAND / self.h).round();
        let n = (amount.abs() / (limit * self.h) - 1e-9).ceil().clamp(1.0, max_n);
        let dt = n * self.h;
        let rate = (amount / dt).clamp(-limit, limit);
        (rate, dt)
    }
}

impl Agent for OracleFollower {
    fn reset(&mut self, ctx: &Arc<SceneContext>, episode: &Episode, config: &SimConfig, body: &AgentBody) {
        let map = self.clearance(ctx);
        let wps = &episode.reference_path.waypoints;
        let radius = body.radius + FOLLOW_MARGIN;
        // split at each goal so shortcuts cannot skip one
        let mut plan: Vec<WorldPoint> = Vec::new();
        let mut from = 0;
        for g in &episode.goals {
            let Some(k) = wps[from..].iter().position(|w| *w == g.point) else {
                continue;
            };
            let leg = string_pull(ctx, &map, &wps[from..=from + k], radius);
            let skip = usize::from(!plan.is_empty());
            plan.extend(leg.into_iter().skip(skip));
            from += k;
        }
        if plan.is_empty() {
            plan = string_pull(ctx, &map, wps, radius);
        }
        self.plan = plan;
        self.next = 1;
        self.vmax = body.max_linear_speed;
        self.wmax = body.max_angular_speed;
        self.h = config.substep;
    }

    fn act(&mut self, obs: &Observation) -> Action {
        let pose = obs.pose;
        let p = pose.position();
        while let Some(target) = self.plan.get(self.next) {
            let d = p.distance(target);
            if d < 1e-6 {
                self.next += 1;
                continue;
            }
            let turn = normalize_angle(p.bearing_to(target) - pose.yaw);
            if turn.abs() > 1e-9 {
                let (omega, dt) = self.command(turn, self.wmax);
                return Action::Continuous { v: 0.0, omega, dt };
            }
            let (v, dt) = self.command(d, self.vmax);
            return Action::Continuous { v, omega: 0.0, dt };
        }
        Action::stop()
    }
}

/// Uniform over FORWARD / TURN_LEFT / TURN_RIGHT, with STOP drawn first at
/// a fixed probability.
#[derive(Debug)]
pub struct RandomAgent {
    seed: u64,
    rng: ChaCha8Rng,
    pub stop_probability: f64,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stop_probability: 0.02,
        }
    }
}

impl Agent for RandomAgent {
    fn reset(&mut self, _ctx: &Arc<SceneContext>, episode: &Episode, _config: &SimConfig, _body: &AgentBody) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a64(episode.episode_id.as_bytes()));
    }

    fn act(&mut self, _obs: &Observation) -> Action {
        if self.rng.gen_bool(self.stop_probability) {
            return Action::stop();
        }
        let primitive = match self.rng.gen_range(0..3) {
            0 => Primitive::Forward,
            1 => Primitive::TurnLeft,
            _ => Primitive::TurnRight,
        };
        Action::Discrete { primitive }
    }
}

/// Turns toward the longest free ray and walks forward; stops once the
/// oracle stop condition holds. It reads the goal position, so it is a
/// diagnostic rather than a blind baseline.
#[derive(Debug, Default)]
pub struct GreedyAgent {
    ctx: Option<Arc<SceneContext>>,
    goal: Option<WorldPoint>,
    clearance: f64,
}

impl Agent for GreedyAgent {
    fn reset(&mut self, ctx: &Arc<SceneContext>, episode: &Episode, config: &SimConfig, body: &AgentBody) {
        self.ctx = Some(ctx.clone());
        self.goal = Some(episode.final_goal());
        self.clearance = body.radius + config.primitives.forward_distance;
    }

    fn act(&mut self, obs: &Observation) -> Action {
        let (Some(ctx), Some(goal)) = (&self.ctx, self.goal) else {
            return Action::stop();
        };
        if oracle_stop(ctx, obs.pose.position(), goal) {
            return Action::stop();
        }
        let best = obs
            .range_scan
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.range.total_cmp(&b.1.range).then(b.0.cmp(&a.0)));
        let Some((_, ray)) = best else {
            return Action::stop();
        };
        let bearing = normalize_angle(ray.bearing);
        if bearing.abs() < 1e-9 && ray.range > self.clearance {
            return Action::forward();
        }
        let primitive = if bearing > 0.0 || (bearing.abs() - PI).abs() < 1e-9 {
            Primitive::TurnLeft
        } else {
            Primitive::TurnRight
        };
        Action::Discrete { primitive }
    }
}
