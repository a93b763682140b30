//! Live sessions scored against offline evaluation of their logs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use embodinav_core::eval::{score_logged, EpisodeResult};
use embodinav_core::sim::Mode;
use embodinav_core::tasks::TaskType;
use embodinav_service::agents::AgentKind;
use embodinav_service::commands::eval_dir;
use embodinav_service::server::Server;
use embodinav_service::session::ServiceData;

use super::{Client, LineClient};

/// `per_type` episodes of each task type, in id order.
pub fn pick(data: &ServiceData, per_type: usize) -> Vec<String> {
    let mut by_type: BTreeMap<TaskType, Vec<&str>> = BTreeMap::new();
    for (id, e) in &data.episodes {
        by_type.entry(e.task_type).or_default().push(id);
    }
    let mut out = Vec::new();
    for i in 0..per_type {
        for ids in by_type.values() {
            if let Some(id) = ids.get(i * 3) {
                out.push(id.to_string());
            }
        }
    }
    out
}

/// Play `ids` over TCP with rotating agents and modes and check every
/// live result against `score_logged` of the reply's own CSV and sidecar,
/// then against `eval` over the written files. Returns the live results.
pub fn live_equals_offline(data: &std::sync::Arc<ServiceData>, dataset: &Path, ids: &[String]) -> Vec<EpisodeResult> {
    let server = Server::bind("127.0.0.1:0", data.clone(), None).unwrap();
    let agents = [AgentKind::OracleFollower, AgentKind::Random, AgentKind::Greedy];
    let logs = tempfile::tempdir().unwrap();
    let mut live = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let mut c = Client::new(LineClient::connect(server.local_addr()));
        c.hello();
        let mode = (i % 4 == 3).then_some(Mode::TelHop);
        let done = c.play(data, id, agents[i % 3], i as u64, mode, Some(4));
        let ep = &data.episodes[id];
        let ctx = &data.contexts[&ep.scene_id];
        let offline = score_logged(ep, &done.trajectory_csv, &done.meta, ctx).unwrap();
        assert_eq!(offline, done.result, "{id}");
        assert_eq!(
            serde_json::to_string(&offline).unwrap(),
            serde_json::to_string(&done.result).unwrap()
        );
        fs::write(logs.path().join(format!("{id}.csv")), &done.trajectory_csv).unwrap();
        fs::write(
            logs.path().join(format!("{id}.meta.json")),
            serde_json::to_string_pretty(&done.meta).unwrap(),
        )
        .unwrap();
        live.push(done.result);
    }
    live.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
    let report = eval_dir(dataset, logs.path()).unwrap();
    assert_eq!(report.per_episode, live);
    let types: BTreeSet<_> = live.iter().map(|r| r.task_type).collect();
    assert_eq!(types.len(), TaskType::ALL.len());
    live
}
