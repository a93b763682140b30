//! Per-connection session state machine.
//!
//! `new → hello → ready ⇄ (reset → active → done)`. Every request line
//! yields exactly one reply; nothing a client sends can panic the service.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::Serialize;
use serde_json::Value;

use embodinav_core::env::SceneContext;
use embodinav_core::sim::{Action, AgentBody, SimConfig, SimError, Simulator, Trajectory};
use embodinav_core::tasks::{Episode, LoadedDataset};

use crate::oracle::{oracle_answer, OracleAnswer};
use crate::protocol::*;
use crate::runner::score_trajectory;

/// Read-only data shared by all sessions.
#[derive(Debug, Clone)]
pub struct ServiceData {
    pub episodes: BTreeMap<String, Episode>,
    pub contexts: BTreeMap<String, Arc<SceneContext>>,
    pub config: SimConfig,
    pub body: AgentBody,
}

impl ServiceData {
    pub fn from_dataset(ds: &LoadedDataset, config: SimConfig) -> Self {
        Self {
            episodes: ds
                .all_episodes()
                .map(|e| (e.episode_id.clone(), e.clone()))
                .collect(),
            contexts: ds.contexts(),
            config,
            body: ds.manifest.config.agent,
        }
    }

    /// Keep only the listed episodes.
    pub fn restrict(&mut self, ids: &[&str]) {
        self.episodes.retain(|id, _| ids.contains(&id.as_str()));
    }
}

/// Everything known about a finished episode.
#[derive(Debug, Clone)]
pub struct DoneRecord {
    pub session_id: String,
    pub episode: Episode,
    pub trajectory: Trajectory,
    pub reply: DoneReply,
}

pub type DoneHook = Arc<dyn Fn(&DoneRecord) + Send + Sync>;

struct Active {
    sim: Simulator,
    episode: Episode,
    finished: bool,
}

static SESSION_COUNTER: AtomicU64 = AtomicU64::new(1);

pub struct Session {
    data: Arc<ServiceData>,
    id: Option<String>,
    last_seq: Option<u64>,
    out_seq: u64,
    active: Option<Active>,
    hook: Option<DoneHook>,
    /// Finished episode waiting for its reply to be delivered.
    pending: Option<DoneRecord>,
}

struct Fail {
    code: ErrorCode,
    message: String,
}

fn fail(code: ErrorCode, message: impl Into<String>) -> Fail {
    Fail {
        code,
        message: message.into(),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("payloads serialize")
}

impl Drop for Session {
    fn drop(&mut self) {
        self.after_reply();
    }
}

impl Session {
    pub fn new(data: Arc<ServiceData>) -> Self {
        Self {
            data,
            id: None,
            last_seq: None,
            out_seq: 0,
            active: None,
            hook: None,
            pending: None,
        }
    }

    pub fn with_hook(mut self, hook: DoneHook) -> Self {
        self.hook = Some(hook);
        self
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    /// Run the done hook for an episode whose final reply was just
    /// delivered. Transports call this after writing each reply.
    pub fn after_reply(&mut self) {
        if let (Some(hook), Some(record)) = (&self.hook, self.pending.take()) {
            hook(&record);
        }
    }

    /// Handle one raw request line and return the single reply.
    pub fn handle_line(&mut self, line: &str) -> WireMessage {
        let outcome = catch_unwind(AssertUnwindSafe(|| self.dispatch(line)));
        let (kind, payload) = match outcome {
            Ok(Ok(ok)) => ok,
            Ok(Err((f, seq))) => (Kind::Error, self.error_payload(f, seq)),
            Err(_) => {
                self.active = None;
                let f = fail(ErrorCode::Internal, "internal error; the episode was abandoned");
                (Kind::Error, self.error_payload(f, None))
            }
        };
        self.reply(kind, payload)
    }

    /// Reply to input that never became a line (bad UTF-8, oversized).
    pub fn reject_malformed(&mut self, message: &str) -> WireMessage {
        let p = self.error_payload(fail(ErrorCode::Malformed, message), None);
        self.reply(Kind::Error, p)
    }

    fn error_payload(&self, f: Fail, offending_seq: Option<u64>) -> Value {
        to_value(&ErrorPayload {
            code: f.code,
            message: f.message,
            offending_seq,
        })
    }

    fn reply(&mut self, kind: Kind, payload: Value) -> WireMessage {
        self.out_seq += 1;
        WireMessage {
            kind,
            session_id: self.id.clone(),
            seq: self.out_seq,
            payload,
        }
    }

    fn dispatch(&mut self, line: &str) -> Result<(Kind, Value), (Fail, Option<u64>)> {
        if line.len() > MAX_LINE {
            return Err((fail(ErrorCode::Malformed, "message too long"), None));
        }
        let raw: Value = serde_json::from_str(line)
            .map_err(|e| (fail(ErrorCode::Malformed, format!("invalid JSON: {e}")), None))?;
        let offending = raw.get("seq").and_then(Value::as_u64);
        let msg: WireMessage = serde_json::from_value(raw)
            .map_err(|e| (fail(ErrorCode::SchemaInvalid, e.to_string()), offending))?;
        let seq = msg.seq;
        let err = |f: Fail| (f, Some(seq));
        if !msg.kind.is_client_kind() {
            return Err(err(fail(
                ErrorCode::UnexpectedKind,
                "only hello, reset, action and oracle_query may be sent",
            )));
        }
        if let Some(last) = self.last_seq {
            if seq <= last {
                return Err(err(fail(
                    ErrorCode::BadSeq,
                    format!("seq {seq} is not greater than {last}"),
                )));
            }
        }
        self.last_seq = Some(seq);
        match (&self.id, msg.kind) {
            (None, Kind::Hello) => {}
            (None, _) => return Err(err(fail(ErrorCode::UnexpectedKind, "send hello first"))),
            (Some(_), Kind::Hello) => return Err(err(fail(ErrorCode::UnexpectedKind, "hello already received"))),
            (Some(id), _) if msg.session_id.as_deref() != Some(id.as_str()) => {
                return Err(err(fail(ErrorCode::SessionMismatch, format!("this is session {id}"))))
            }
            _ => {}
        }
        match msg.kind {
            Kind::Hello => self.hello(seq, &msg.payload),
            Kind::Reset => self.reset(seq, &msg.payload),
            Kind::Action => self.action(seq, &msg.payload),
            Kind::OracleQuery => self.query(seq, &msg.payload),
            _ => unreachable!("client kinds checked above"),
        }
        .map_err(err)
    }

    fn hello(&mut self, seq: u64, payload: &Value) -> Result<(Kind, Value), Fail> {
        let req: HelloRequest = if payload.is_null() {
            HelloRequest::default()
        } else {
            serde_json::from_value(payload.clone()).map_err(|e| fail(ErrorCode::SchemaInvalid, e.to_string()))?
        };
        if let Some(v) = req.protocol.filter(|v| *v != PROTOCOL_VERSION) {
            return Err(fail(
                ErrorCode::SchemaInvalid,
                format!("protocol {v} unsupported, expected {PROTOCOL_VERSION}"),
            ));
        }
        self.id = Some(format!("s{}", SESSION_COUNTER.fetch_add(1, Ordering::Relaxed)));
        Ok((
            Kind::Hello,
            to_value(&HelloReply {
                reply_to: seq,
                protocol: PROTOCOL_VERSION,
                server: concat!("embodinav ", env!("CARGO_PKG_VERSION")).to_string(),
                mode: self.data.config.mode,
                episodes: self.data.episodes.len(),
            }),
        ))
    }

    fn reset(&mut self, seq: u64, payload: &Value) -> Result<(Kind, Value), Fail> {
        if self.active.as_ref().is_some_and(|a| !a.finished) {
            return Err(fail(ErrorCode::EpisodeActive, "an episode is already running"));
        }
        let req: ResetRequest =
            serde_json::from_value(payload.clone()).map_err(|e| fail(ErrorCode::SchemaInvalid, e.to_string()))?;
        let episode = self
            .data
            .episodes
            .get(&req.episode_id)
            .ok_or_else(|| fail(ErrorCode::UnknownEpisode, format!("unknown episode {}", req.episode_id)))?
            .clone();
        let ctx = self
            .data
            .contexts
            .get(&episode.scene_id)
            .ok_or_else(|| fail(ErrorCode::Internal, format!("scene {} not loaded", episode.scene_id)))?
            .clone();
        let mut config = self.data.config;
        if let Some(m) = req.mode {
            config.mode = m;
        }
        let mut sim = Simulator::new(ctx.clone(), self.data.body, config)
            .map_err(|e| fail(ErrorCode::Internal, e.to_string()))?;
        let observation = sim
            .reset(&episode)
            .map_err(|e| fail(ErrorCode::Internal, e.to_string()))?;
        let reply = ResetReply {
            reply_to: seq,
            observation,
            episode: EpisodeView::of(&episode, config.mode, config.max_steps, req.debug),
            scene: ctx.scene.clone(),
            map: MapView::of(&ctx.occupancy),
        };
        self.active = Some(Active {
            sim,
            episode,
            finished: false,
        });
        Ok((Kind::Observation, to_value(&reply)))
    }

    fn running(&mut self) -> Result<&mut Active, Fail> {
        match self.active.as_mut() {
            None => Err(fail(ErrorCode::NoEpisode, "send reset first")),
            Some(a) if a.finished => Err(fail(ErrorCode::EpisodeFinished, "the episode is over; send reset")),
            Some(a) => Ok(a),
        }
    }

    fn action(&mut self, seq: u64, payload: &Value) -> Result<(Kind, Value), Fail> {
        self.running()?;
        let action = parse_action(payload).map_err(|e| fail(ErrorCode::SchemaInvalid, e.to_string()))?;
        if matches!(action, Action::OracleQuery { .. }) {
            return Err(fail(ErrorCode::SchemaInvalid, "send oracle queries as oracle_query messages"));
        }
        self.step(seq, action, None)
    }

    fn query(&mut self, seq: u64, payload: &Value) -> Result<(Kind, Value), Fail> {
        let a = self.running()?;
        let req: OracleQueryRequest =
            serde_json::from_value(payload.clone()).map_err(|e| fail(ErrorCode::SchemaInvalid, e.to_string()))?;
        let pose = a.sim.pose().expect("active episode");
        let answer = oracle_answer(&req.text, a.sim.context(), &a.episode, pose)
            .map_err(|e| fail(ErrorCode::OracleDisabled, e.to_string()))?;
        self.step(seq, Action::OracleQuery { text: req.text }, Some(answer))
    }

    fn step(&mut self, seq: u64, action: Action, answer: Option<OracleAnswer>) -> Result<(Kind, Value), Fail> {
        let a = self.running()?;
        let r = a.sim.step(action).map_err(|e| match e {
            SimError::InvalidAction(m) => fail(ErrorCode::InvalidAction, m),
            SimError::UnsupportedAction(m) => fail(ErrorCode::UnsupportedAction, m),
            SimError::EpisodeFinished => fail(ErrorCode::EpisodeFinished, "the episode is over"),
            other => fail(ErrorCode::Internal, other.to_string()),
        })?;
        if !r.done {
            return Ok(match answer {
                Some(answer) => (
                    Kind::OracleAnswer,
                    to_value(&OracleReply {
                        reply_to: seq,
                        answer,
                        observation: r.observation,
                    }),
                ),
                None => (
                    Kind::Observation,
                    to_value(&StepReply {
                        reply_to: seq,
                        observation: r.observation,
                        collided: r.collided,
                    }),
                ),
            });
        }
        a.finished = true;
        let mode = a.sim.config().mode;
        let trajectory = a.sim.trajectory().cloned().expect("active episode");
        let result = score_trajectory(a.sim.context(), &a.episode, &trajectory, mode)
            .map_err(|e| fail(ErrorCode::Internal, e.to_string()))?;
        let reply = DoneReply {
            reply_to: seq,
            done_reason: r.done_reason.expect("done implies a reason"),
            collided: r.collided,
            observation: r.observation,
            answer,
            result,
            trajectory_csv: trajectory.to_csv(),
            meta: trajectory.meta(mode),
        };
        let episode = a.episode.clone();
        if self.hook.is_some() {
            self.pending = Some(DoneRecord {
                session_id: self.id.clone().unwrap_or_default(),
                episode,
                trajectory,
                reply: reply.clone(),
            });
        }
        Ok((Kind::Done, to_value(&reply)))
    }
}
