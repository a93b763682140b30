//! Shared fixtures: a small generated dataset and a blocking line client.

#![allow(dead_code)]

pub mod fuzz;
pub mod live;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use serde_json::{json, Value};

use embodinav_core::sim::{Action, Mode, Observation};
use embodinav_service::agents::AgentKind;
use embodinav_service::commands::{gen_episodes, gen_scenes, service_data, GenEpisodes};
use embodinav_service::protocol::{DoneReply, Kind, OracleReply, ResetReply, StepReply, WireMessage};
use embodinav_service::session::{ServiceData, Session};

pub struct Fixture {
    _dir: tempfile::TempDir,
    pub dataset: PathBuf,
}

/// Four scenes and every task type, generated once per test binary.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let scenes = dir.path().join("scenes");
        let dataset = dir.path().join("dataset");
        gen_scenes(4, 11, &scenes, None).unwrap();
        gen_episodes(&GenEpisodes {
            scenes: &scenes,
            tasks: None,
            seed: 3,
            out: &dataset,
            config: None,
            refine: false,
        })
        .unwrap();
        Fixture { _dir: dir, dataset }
    })
}

pub fn data(mode: Mode) -> Arc<ServiceData> {
    Arc::new(service_data(&fixture().dataset, mode, None).unwrap())
}

pub fn dataset_path() -> &'static Path {
    &fixture().dataset
}

/// Builds well-formed requests with increasing seq numbers.
#[derive(Default)]
pub struct Requests {
    pub seq: u64,
    pub session: Option<String>,
}

impl Requests {
    pub fn make(&mut self, kind: &str, payload: Value) -> String {
        self.seq += 1;
        json!({ "kind": kind, "session_id": self.session, "seq": self.seq, "payload": payload }).to_string()
    }
}

pub fn parse_reply(line: &str) -> WireMessage {
    serde_json::from_str(line).unwrap_or_else(|e| panic!("reply is not a wire message ({e}): {line}"))
}

pub fn error_code(m: &WireMessage) -> Option<String> {
    (m.kind == Kind::Error).then(|| m.payload["code"].as_str().unwrap().to_string())
}

/// Anything that turns one request line into one reply.
pub trait Transport {
    fn roundtrip(&mut self, line: &str) -> WireMessage;
}

impl Transport for Session {
    fn roundtrip(&mut self, line: &str) -> WireMessage {
        self.handle_line(line)
    }
}

/// Wire client state: a transport plus the request builder.
pub struct Client<T: Transport> {
    pub t: T,
    pub req: Requests,
}

impl<T: Transport> Client<T> {
    pub fn new(t: T) -> Self {
        Self { t, req: Requests::default() }
    }

    pub fn send(&mut self, kind: &str, payload: Value) -> WireMessage {
        let line = self.req.make(kind, payload);
        let reply = self.t.roundtrip(&line);
        if reply.kind == Kind::Hello {
            self.req.session = reply.session_id.clone();
        }
        reply
    }

    pub fn hello(&mut self) {
        let r = self.send("hello", json!({"client": "test", "protocol": 1}));
        assert_eq!(r.kind, Kind::Hello, "{}", r.to_line());
    }

    /// Play `episode_id` with a built-in agent. Every `query_every` steps a
    /// dialogue episode sends an oracle query instead of an action.
    pub fn play(
        &mut self,
        data: &ServiceData,
        episode_id: &str,
        kind: AgentKind,
        seed: u64,
        mode: Option<Mode>,
        query_every: Option<usize>,
    ) -> DoneReply {
        let r = self.send("reset", json!({"episode_id": episode_id, "mode": mode}));
        assert_eq!(r.kind, Kind::Observation, "{}", r.to_line());
        let reset: ResetReply = serde_json::from_value(r.payload).unwrap();
        let ep = &data.episodes[episode_id];
        let ctx = data.contexts[&ep.scene_id].clone();
        let mut config = data.config;
        config.mode = reset.episode.mode;
        let mut agent = kind.build(seed);
        agent.reset(&ctx, ep, &config, &data.body);
        let mut obs: Observation = reset.observation;
        let dialogue = ep.instruction_bundle.oracle_enabled;
        for step in 1.. {
            let query = dialogue && query_every.is_some_and(|k| step % k == 0);
            let r = match (query, agent.act(&obs)) {
                (true, _) => self.send("oracle_query", json!({"text": "Where is the goal?"})),
                (false, Action::OracleQuery { text }) => self.send("oracle_query", json!({ "text": text })),
                (false, a) => self.send("action", serde_json::to_value(&a).unwrap()),
            };
            obs = match r.kind {
                Kind::Observation => serde_json::from_value::<StepReply>(r.payload).unwrap().observation,
                Kind::OracleAnswer => serde_json::from_value::<OracleReply>(r.payload).unwrap().observation,
                Kind::Done => return serde_json::from_value(r.payload).unwrap(),
                _ => panic!("{episode_id}: {}", r.to_line()),
            };
        }
        unreachable!()
    }
}

/// Line-protocol client over TCP.
pub struct LineClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    pub req: Requests,
}

impl LineClient {
    pub fn connect(addr: std::net::SocketAddr) -> Self {
        let s = TcpStream::connect(addr).unwrap();
        s.set_nodelay(true).unwrap();
        s.set_read_timeout(Some(std::time::Duration::from_secs(60))).unwrap();
        Self {
            reader: BufReader::new(s.try_clone().unwrap()),
            writer: s,
            req: Requests::default(),
        }
    }

    pub fn send_raw(&mut self, bytes: &[u8]) -> WireMessage {
        self.writer.write_all(bytes).unwrap();
        self.writer.flush().unwrap();
        let mut line = String::new();
        self.reader.read_line(&mut line).unwrap();
        parse_reply(line.trim_end())
    }

    pub fn send(&mut self, kind: &str, payload: Value) -> WireMessage {
        let line = self.req.make(kind, payload) + "\n";
        let reply = self.send_raw(line.as_bytes());
        if reply.kind == Kind::Hello {
            self.req.session = reply.session_id.clone();
        }
        reply
    }
}

impl Transport for LineClient {
    fn roundtrip(&mut self, line: &str) -> WireMessage {
        self.send_raw(format!("{line}\n").as_bytes())
    }
}

/// WebSocket client, one text frame per message.
pub struct WsClient(pub tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>>);

impl WsClient {
    pub fn connect(addr: std::net::SocketAddr) -> Self {
        let (ws, _) = tungstenite::connect(format!("ws://{addr}/")).unwrap();
        Self(ws)
    }
}

impl Transport for WsClient {
    fn roundtrip(&mut self, line: &str) -> WireMessage {
        self.0.send(tungstenite::Message::text(line)).unwrap();
        loop {
            match self.0.read().unwrap() {
                tungstenite::Message::Text(t) => return parse_reply(&t),
                tungstenite::Message::Ping(_) | tungstenite::Message::Pong(_) => continue,
                other => panic!("unexpected frame {other:?}"),
            }
        }
    }
}

/// The `serve --stdio` binary as a child process.
pub struct StdioClient {
    pub child: std::process::Child,
    stdin: std::process::ChildStdin,
    stdout: BufReader<std::process::ChildStdout>,
}

impl StdioClient {
    pub fn spawn(dataset: &Path, mode: &str) -> Self {
        use std::process::{Command, Stdio};
        let mut child = Command::new(env!("CARGO_BIN_EXE_embodinav"))
            .args(["serve", "--stdio", "--mode", mode, "--dataset"])
            .arg(dataset)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .unwrap();
        let stdin = child.stdin.take().unwrap();
        let stdout = BufReader::new(child.stdout.take().unwrap());
        Self { child, stdin, stdout }
    }

    /// Close stdin and wait for a clean exit.
    pub fn finish(mut self) -> std::process::ExitStatus {
        drop(self.stdin);
        self.child.wait().unwrap()
    }
}

impl Transport for StdioClient {
    fn roundtrip(&mut self, line: &str) -> WireMessage {
        writeln!(self.stdin, "{line}").unwrap();
        self.stdin.flush().unwrap();
        let mut out = String::new();
        self.stdout.read_line(&mut out).unwrap();
        parse_reply(out.trim_end())
    }
}
