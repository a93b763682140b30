//! Results reported live over the wire equal offline scoring of the logged
//! trajectory, and wire play equals in-process play.

mod common;

use common::live::{live_equals_offline, pick};
use common::{data, dataset_path, Client, LineClient};
use embodinav_core::sim::Mode;
use embodinav_service::agents::AgentKind;
use embodinav_service::runner::{run_episode, score_trajectory};
use embodinav_service::server::Server;

#[test]
fn twenty_live_sessions_match_offline_eval() {
    let data = data(Mode::Strict);
    let ids = pick(&data, 4);
    assert_eq!(ids.len(), 20);
    assert_eq!(live_equals_offline(&data, dataset_path(), &ids).len(), 20);
}

#[test]
fn wire_play_equals_in_process_play() {
    let data = data(Mode::TelHop);
    let server = Server::bind("127.0.0.1:0", data.clone(), None).unwrap();
    for (i, id) in pick(&data, 2).iter().enumerate() {
        let kind = [AgentKind::OracleFollower, AgentKind::Random, AgentKind::Greedy][i % 3];
        let mut c = Client::new(LineClient::connect(server.local_addr()));
        c.hello();
        let done = c.play(&data, id, kind, 17, None, None);

        let ep = &data.episodes[id];
        let ctx = data.contexts[&ep.scene_id].clone();
        let mut agent = kind.build(17);
        let t = run_episode(ctx.clone(), ep, agent.as_mut(), data.config, data.body).unwrap();
        assert_eq!(t.to_csv(), done.trajectory_csv, "{id} with {kind}");
        assert_eq!(t.meta(Mode::TelHop), done.meta);
        assert_eq!(score_trajectory(&ctx, ep, &t, Mode::TelHop).unwrap(), done.result);
    }
}
