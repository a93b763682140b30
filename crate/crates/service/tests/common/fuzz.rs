//! Randomized wire traffic checked against a model of the session state
//! machine. Every message must get exactly one well-formed reply whose kind
//! or error code the model predicts.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use embodinav_core::sim::Mode;
use embodinav_service::protocol::{
    DoneReply, ErrorPayload, HelloReply, Kind, OracleReply, ResetReply, StepReply, WireMessage,
};
use embodinav_service::session::ServiceData;

use super::{error_code, LineClient};

/// Every error code a client can provoke.
pub const CODES: [&str; 12] = [
    "malformed",
    "schema_invalid",
    "bad_seq",
    "session_mismatch",
    "unexpected_kind",
    "unknown_episode",
    "no_episode",
    "episode_active",
    "episode_finished",
    "invalid_action",
    "unsupported_action",
    "oracle_disabled",
];

/// Episode ids with their dialogue flag: the first 40 plus up to 20
/// dialogue episodes so oracle queries are well represented.
pub fn episode_pool(data: &ServiceData) -> Vec<(String, bool)> {
    let mut eps: Vec<(String, bool)> = data
        .episodes
        .values()
        .map(|e| (e.episode_id.clone(), e.instruction_bundle.oracle_enabled))
        .collect();
    let dialogue: Vec<_> = eps.iter().filter(|e| e.1).take(20).cloned().collect();
    eps.truncate(40);
    eps.extend(dialogue);
    eps
}

/// Send `total` messages over connections of 150 to 400 messages each.
/// The service must be in Strict mode.
pub fn fuzz_server(addr: SocketAddr, eps: &[(String, bool)], total: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    while tally.messages < total {
        let n = rng.gen_range(150..400).min(total - tally.messages);
        fuzz_connection(addr, &mut rng, n, eps, &mut tally);
    }
    tally
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ep {
    None,
    Running { dialogue: bool, mode: Mode },
    Finished,
}

pub struct Model {
    id: Option<String>,
    last_seq: Option<u64>,
    out_seq: u64,
    ep: Ep,
}

/// What an action payload is, as far as validation goes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionClass {
    Valid,
    Hop,
    Invalid,
    Schema,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SessionField {
    Right,
    Wrong,
    Missing,
}

#[derive(Debug, Clone)]
pub enum Gen {
    Garbage(Vec<u8>),
    NotSchema(String),
    ServiceKind(&'static str),
    Hello(Value, bool),
    Reset { episode: String, known: bool, schema_ok: bool, mode: Option<Mode> },
    Action(Value, ActionClass),
    Query(Value, bool),
}

pub enum Expect {
    Error(&'static str),
    Ok(&'static [Kind]),
}

fn action_payload(rng: &mut ChaCha8Rng) -> (Value, ActionClass) {
    let prim = ["FORWARD", "TURN_LEFT", "TURN_RIGHT"];
    match rng.gen_range(0..20) {
        0..=7 => (json!({"type": "discrete", "primitive": prim[rng.gen_range(0..3)]}), ActionClass::Valid),
        8 => (json!({"type": "discrete", "primitive": "STOP"}), ActionClass::Valid),
        9..=11 => {
            let n = rng.gen_range(1..=20);
            (
                json!({"type": "continuous", "v": rng.gen_range(-1.0..=1.0), "omega": rng.gen_range(-1.5..=1.5), "dt": n as f64 * 0.05}),
                ActionClass::Valid,
            )
        }
        12 => (json!({"type": "continuous", "v": 0.2, "omega": 0.0, "dt": 0.07}), ActionClass::Invalid),
        13 => (json!({"type": "continuous", "v": 3.0, "omega": 0.0, "dt": 0.5}), ActionClass::Invalid),
        14 => (json!({"type": "continuous", "v": 0.2, "omega": 0.0, "dt": 2.0}), ActionClass::Invalid),
        15 => (
            json!({"type": "waypoint_hop", "target": [rng.gen_range(-2.0..20.0), rng.gen_range(-2.0..20.0)]}),
            ActionClass::Hop,
        ),
        16 => (json!({"type": "oracle_query", "text": "where?"}), ActionClass::Schema),
        17 => (json!({"type": "teleport"}), ActionClass::Schema),
        18 => (json!({"type": "discrete", "primitive": "stop"}), ActionClass::Schema),
        _ => (json!({"type": "continuous", "v": 0.1}), ActionClass::Schema),
    }
}

fn garbage(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut v: Vec<u8> = match rng.gen_range(0..5) {
        0 => (0..rng.gen_range(1..60)).map(|_| rng.gen_range(0x20u8..0x7f)).collect(),
        1 => (0..rng.gen_range(1..40)).map(|_| rng.gen::<u8>()).filter(|b| *b != b'\n').collect(),
        2 => br#"{"kind":"hello","seq":1"#.to_vec(),
        3 => vec![0xc3, 0x28, b'{', b'}'],
        _ => b"{'kind': 'hello'}".to_vec(),
    };
    // blank lines get no reply at all
    if std::str::from_utf8(&v).is_ok_and(|t| t.trim().is_empty()) {
        v.push(b'!');
    }
    v
}

fn not_schema(rng: &mut ChaCha8Rng) -> String {
    let options = [
        r#"{"kind":"hello"}"#.to_string(),
        r#"{"kind":"fly","seq":5}"#.to_string(),
        r#"{"kind":"hello","seq":-3}"#.to_string(),
        r#"{"kind":"hello","seq":"7"}"#.to_string(),
        r#"{"kind":"reset","seq":9,"payload":{},"extra":true}"#.to_string(),
        "[1,2,3]".to_string(),
        "\"hello\"".to_string(),
        "null".to_string(),
        format!("{}", rng.gen_range(0..1000)),
    ];
    options.choose(rng).unwrap().clone()
}

fn generate(rng: &mut ChaCha8Rng, model: &Model, episodes: &[(String, bool)]) -> Gen {
    let running = matches!(model.ep, Ep::Running { .. });
    let roll = rng.gen_range(0..100);
    match roll {
        0..=4 => Gen::Garbage(garbage(rng)),
        5..=8 => Gen::NotSchema(not_schema(rng)),
        9..=10 => Gen::ServiceKind(["observation", "done", "error", "oracle_answer"][rng.gen_range(0..4)]),
        11..=14 => {
            let (p, ok) = match rng.gen_range(0..5) {
                0 => (Value::Null, true),
                1 => (json!({}), true),
                2 => (json!({"client": "fuzz", "protocol": 1}), true),
                3 => (json!({"protocol": 2}), false),
                _ => (json!({"colour": "blue"}), false),
            };
            Gen::Hello(p, ok)
        }
        15..=24 => {
            let (episode, known) = if rng.gen_bool(0.85) {
                (episodes.choose(rng).unwrap().0.clone(), true)
            } else {
                ("no-such-episode".to_string(), false)
            };
            let mode = match rng.gen_range(0..4) {
                0 => Some(Mode::TelHop),
                1 => Some(Mode::Strict),
                _ => None,
            };
            Gen::Reset { episode, known, schema_ok: rng.gen_range(0..12) != 0, mode }
        }
        25..=34 => {
            let good = rng.gen_bool(0.8);
            let text = ["Where is the cup?", "where is the sofa", "hello", "which way?"][rng.gen_range(0..4)];
            Gen::Query(if good { json!({"text": text}) } else { json!({"words": text}) }, good)
        }
        _ if running || rng.gen_bool(0.3) => {
            let (p, c) = action_payload(rng);
            Gen::Action(p, c)
        }
        _ => {
            let episode = episodes.choose(rng).unwrap().0.clone();
            Gen::Reset { episode, known: true, schema_ok: true, mode: None }
        }
    }
}

fn predict(g: &Gen, model: &Model, episodes: &BTreeMap<String, bool>) -> Expect {
    use Expect::*;
    let (kind, payload_ok) = match g {
        Gen::Garbage(b) => {
            let text = std::str::from_utf8(b).map(|t| t.trim_end_matches(['\n', '\r']));
            return if text.is_ok_and(|t| serde_json::from_str::<Value>(t).is_ok()) {
                Error("schema_invalid")
            } else {
                Error("malformed")
            };
        }
        Gen::NotSchema(s) => {
            return if serde_json::from_str::<Value>(s).is_ok() {
                Error("schema_invalid")
            } else {
                Error("malformed")
            }
        }
        Gen::ServiceKind(_) => return Error("unexpected_kind"),
        Gen::Hello(_, ok) => (Kind::Hello, *ok),
        Gen::Reset { schema_ok, .. } => (Kind::Reset, *schema_ok),
        Gen::Action(..) => (Kind::Action, true),
        Gen::Query(_, ok) => (Kind::OracleQuery, *ok),
    };
    match (&model.id, kind) {
        (None, Kind::Hello) => {}
        (None, _) | (Some(_), Kind::Hello) => return Error("unexpected_kind"),
        _ => {}
    }
    match g {
        Gen::Hello(..) => {
            if payload_ok {
                Ok(&[Kind::Hello])
            } else {
                Error("schema_invalid")
            }
        }
        Gen::Reset { episode, known, .. } => {
            if matches!(model.ep, Ep::Running { .. }) {
                Error("episode_active")
            } else if !payload_ok {
                Error("schema_invalid")
            } else if !known || !episodes.contains_key(episode) {
                Error("unknown_episode")
            } else {
                Ok(&[Kind::Observation])
            }
        }
        Gen::Action(_, class) => match model.ep {
            Ep::None => Error("no_episode"),
            Ep::Finished => Error("episode_finished"),
            Ep::Running { mode, .. } => match class {
                ActionClass::Schema => Error("schema_invalid"),
                ActionClass::Invalid => Error("invalid_action"),
                ActionClass::Hop if mode == Mode::Strict => Error("unsupported_action"),
                _ => Ok(&[Kind::Observation, Kind::Done]),
            },
        },
        Gen::Query(..) => match model.ep {
            Ep::None => Error("no_episode"),
            Ep::Finished => Error("episode_finished"),
            Ep::Running { dialogue, .. } => {
                if !payload_ok {
                    Error("schema_invalid")
                } else if !dialogue {
                    Error("oracle_disabled")
                } else {
                    Ok(&[Kind::OracleAnswer, Kind::Done])
                }
            }
        },
        _ => unreachable!(),
    }
}

/// Choose how the envelope around a structured message is filled in.
fn envelope(rng: &mut ChaCha8Rng, model: &Model) -> (SessionField, u64, bool) {
    let session = match rng.gen_range(0..30) {
        0 => SessionField::Wrong,
        1 => SessionField::Missing,
        _ => SessionField::Right,
    };
    let stale = model.last_seq.is_some() && rng.gen_range(0..25) == 0;
    let seq = match (stale, model.last_seq) {
        (true, Some(last)) => last.saturating_sub(rng.gen_range(0..3)),
        (_, Some(last)) => last + rng.gen_range(1..4),
        (_, None) => rng.gen_range(0..5),
    };
    (session, seq, stale)
}

fn encode(g: &Gen, model: &Model, session: SessionField, seq: u64) -> Vec<u8> {
    let sid = match session {
        SessionField::Right => model.id.clone().map(Value::from).unwrap_or(Value::Null),
        SessionField::Wrong => Value::from("s-forged"),
        SessionField::Missing => Value::Null,
    };
    let msg = |kind: &str, payload: Value| json!({"kind": kind, "session_id": sid, "seq": seq, "payload": payload});
    let v = match g {
        Gen::Garbage(b) => return b.clone(),
        Gen::NotSchema(s) => return s.clone().into_bytes(),
        Gen::ServiceKind(k) => msg(k, json!({})),
        Gen::Hello(p, _) => msg("hello", p.clone()),
        Gen::Reset { episode, schema_ok, mode, .. } => {
            let p = if *schema_ok {
                json!({"episode_id": episode, "mode": mode, "debug": false})
            } else {
                json!({"episode": episode})
            };
            msg("reset", p)
        }
        Gen::Action(p, _) => msg("action", p.clone()),
        Gen::Query(p, _) => msg("oracle_query", p.clone()),
    };
    v.to_string().into_bytes()
}

fn check_payload(kind: Kind, payload: &Value) -> u64 {
    fn parse<T: serde::de::DeserializeOwned>(p: &Value) -> T {
        serde_json::from_value(p.clone()).unwrap_or_else(|e| panic!("bad reply payload ({e}): {p}"))
    }
    match kind {
        Kind::Hello => parse::<HelloReply>(payload).reply_to,
        Kind::Observation if payload.get("episode").is_some() => parse::<ResetReply>(payload).reply_to,
        Kind::Observation => parse::<StepReply>(payload).reply_to,
        Kind::OracleAnswer => parse::<OracleReply>(payload).reply_to,
        Kind::Done => parse::<DoneReply>(payload).reply_to,
        other => panic!("unexpected reply kind {other:?}"),
    }
}

#[derive(Default)]
pub struct Tally {
    pub codes: BTreeSet<String>,
    pub kinds: BTreeMap<String, usize>,
    pub messages: usize,
}

/// Run `count` messages on one connection.
pub fn fuzz_connection(addr: SocketAddr, rng: &mut ChaCha8Rng, count: usize, eps: &[(String, bool)], tally: &mut Tally) {
    let by_id: BTreeMap<String, bool> = eps.iter().cloned().collect();
    let mut client = LineClient::connect(addr);
    let mut m = Model {
        id: None,
        last_seq: None,
        out_seq: 0,
        ep: Ep::None,
    };
    for _ in 0..count {
        let g = generate(rng, &m, eps);
        let (session, seq, stale) = envelope(rng, &m);
        let mut bytes = encode(&g, &m, session, seq);
        bytes.push(b'\n');
        let structured = !matches!(g, Gen::Garbage(_) | Gen::NotSchema(_) | Gen::ServiceKind(_));
        let expect = if matches!(g, Gen::ServiceKind(_)) {
            Expect::Error("unexpected_kind")
        } else if structured && stale {
            Expect::Error("bad_seq")
        } else if structured && m.id.is_some() && session != SessionField::Right && !matches!(g, Gen::Hello(..)) {
            Expect::Error("session_mismatch")
        } else {
            predict(&g, &m, &by_id)
        };
        if structured && !stale {
            m.last_seq = Some(seq);
        }
        let reply: WireMessage = client.send_raw(&bytes);
        tally.messages += 1;
        m.out_seq += 1;
        assert_eq!(reply.seq, m.out_seq, "reply seq for {g:?}");
        *tally.kinds.entry(format!("{:?}", reply.kind)).or_default() += 1;
        match expect {
            Expect::Error(code) => {
                let got = error_code(&reply);
                assert_eq!(got.as_deref(), Some(code), "{g:?} in {:?} -> {}", m.ep, reply.to_line());
                let p: ErrorPayload = serde_json::from_value(reply.payload.clone()).unwrap();
                if structured {
                    assert_eq!(p.offending_seq, Some(seq));
                } else if code == "malformed" {
                    assert_eq!(p.offending_seq, None);
                }
                assert_eq!(reply.session_id, m.id);
                tally.codes.insert(code.to_string());
            }
            Expect::Ok(kinds) => {
                assert!(kinds.contains(&reply.kind), "{g:?} in {:?} -> {}", m.ep, reply.to_line());
                assert_eq!(check_payload(reply.kind, &reply.payload), seq);
                match (&g, reply.kind) {
                    (Gen::Hello(..), _) => {
                        m.id = reply.session_id.clone();
                        assert!(m.id.is_some());
                    }
                    (Gen::Reset { episode, mode, .. }, _) => {
                        m.ep = Ep::Running {
                            dialogue: by_id[episode],
                            mode: mode.unwrap_or(Mode::Strict),
                        }
                    }
                    (_, Kind::Done) => m.ep = Ep::Finished,
                    _ => {}
                }
                assert_eq!(reply.session_id, m.id);
            }
        }
    }
}

