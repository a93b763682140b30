//! Offline episode runs: agent ↔ simulator loop and batch scoring.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use embodinav_core::env::SceneContext;
use embodinav_core::eval::{
    aggregate, score_logged, EpisodeResult, LoggedEvalError, MetricsReport, ReportConfig,
};
use embodinav_core::sim::{AgentBody, Mode, SimConfig, SimError, Simulator, Trajectory};
use embodinav_core::tasks::Episode;

use crate::agents::{Agent, AgentKind};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("episode {episode}: {source}")]
    Sim {
        episode: String,
        #[source]
        source: SimError,
    },
    #[error("episode {0}: scene not loaded")]
    MissingScene(String),
    #[error("episode {episode}: {source}")]
    Eval {
        episode: String,
        #[source]
        source: LoggedEvalError,
    },
}

/// Drive one episode to completion. An action the simulator rejects ends
/// the run with an error, since it would not advance the step counter.
pub fn run_episode(
    ctx: Arc<SceneContext>,
    episode: &Episode,
    agent: &mut dyn Agent,
    config: SimConfig,
    body: AgentBody,
) -> Result<Trajectory, SimError> {
    let mut sim = Simulator::new(ctx.clone(), body, config)?;
    let mut obs = sim.reset(episode)?;
    agent.reset(&ctx, episode, &config, &body);
    loop {
        let r = sim.step(agent.act(&obs))?;
        if r.done {
            break;
        }
        obs = r.observation;
    }
    Ok(sim.trajectory().cloned().expect("episode was reset"))
}

/// Score a finished trajectory through its logged form (CSV plus sidecar),
/// the same path offline `eval` and live sessions use.
pub fn score_trajectory(
    ctx: &SceneContext,
    episode: &Episode,
    trajectory: &Trajectory,
    mode: Mode,
) -> Result<EpisodeResult, LoggedEvalError> {
    score_logged(episode, &trajectory.to_csv(), &trajectory.meta(mode), ctx)
}

pub struct RunOutput {
    pub trajectories: Vec<Trajectory>,
    pub report: Option<MetricsReport>,
}

/// Run `kind` on every episode in parallel; results are sorted by episode id.
pub fn run_batch(
    contexts: &BTreeMap<String, Arc<SceneContext>>,
    episodes: &[&Episode],
    kind: AgentKind,
    config: SimConfig,
    body: AgentBody,
    seed: u64,
) -> Result<RunOutput, RunError> {
    let runs: Vec<(Trajectory, EpisodeResult)> = episodes
        .par_iter()
        .map(|ep| {
            let ctx = contexts
                .get(&ep.scene_id)
                .ok_or_else(|| RunError::MissingScene(ep.episode_id.clone()))?;
            let mut agent = kind.build(seed);
            let traj = run_episode(ctx.clone(), ep, agent.as_mut(), config, body).map_err(|source| {
                RunError::Sim {
                    episode: ep.episode_id.clone(),
                    source,
                }
            })?;
            let res = score_trajectory(ctx, ep, &traj, config.mode).map_err(|source| RunError::Eval {
                episode: ep.episode_id.clone(),
                source,
            })?;
            Ok((traj, res))
        })
        .collect::<Result<_, RunError>>()?;
    let (mut trajectories, results): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    trajectories.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
    let report = aggregate(results, report_config(&config, &body, Some(kind.as_str())));
    Ok(RunOutput {
        trajectories,
        report,
    })
}

pub fn report_config(config: &SimConfig, body: &AgentBody, agent: Option<&str>) -> ReportConfig {
    ReportConfig {
        mode: config.mode,
        success_thresh: config.success_thresh,
        collision_thresh: config.collision_thresh,
        agent_radius: body.radius,
        agent: agent.map(str::to_string),
        ..ReportConfig::default()
    }
}
