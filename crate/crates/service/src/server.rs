//! Transports: line-delimited TCP, WebSocket (detected on the same port by
//! the HTTP upgrade request) and standard streams.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use tungstenite::Message;

use crate::protocol::MAX_LINE;
use crate::session::{DoneHook, ServiceData, Session};

enum Line {
    Text(String),
    Invalid(&'static str),
    Eof,
}

/// Read one `\n`-terminated line of at most `MAX_LINE` bytes. Longer lines
/// are consumed and reported as invalid.
fn read_line(r: &mut impl BufRead) -> io::Result<Line> {
    let mut buf = Vec::new();
    let mut overflow = false;
    loop {
        let chunk = r.fill_buf()?;
        if chunk.is_empty() {
            if buf.is_empty() && !overflow {
                return Ok(Line::Eof);
            }
            break;
        }
        let (take, done) = match chunk.iter().position(|&b| b == b'\n') {
            Some(i) => (i + 1, true),
            None => (chunk.len(), false),
        };
        if !overflow {
            if buf.len() + take > MAX_LINE + 2 {
                overflow = true;
                buf.clear();
            } else {
                buf.extend_from_slice(&chunk[..take]);
            }
        }
        r.consume(take);
        if done {
            break;
        }
    }
    if overflow {
        return Ok(Line::Invalid("message too long"));
    }
    match String::from_utf8(buf) {
        Ok(s) => Ok(Line::Text(s.trim_end_matches(['\n', '\r']).to_string())),
        Err(_) => Ok(Line::Invalid("message is not valid UTF-8")),
    }
}

/// Serve one line-delimited duplex stream until EOF. Blank lines are
/// ignored; every other line gets exactly one reply line.
pub fn serve_lines(mut session: Session, reader: impl Read, mut writer: impl Write) -> io::Result<()> {
    let mut reader = BufReader::new(reader);
    loop {
        let reply = match read_line(&mut reader)? {
            Line::Eof => return Ok(()),
            Line::Text(t) if t.trim().is_empty() => continue,
            Line::Text(t) => session.handle_line(&t),
            Line::Invalid(why) => session.reject_malformed(why),
        };
        let mut out = reply.to_line();
        out.push('\n');
        writer.write_all(out.as_bytes())?;
        writer.flush()?;
        session.after_reply();
    }
}

pub fn serve_stdio(data: Arc<ServiceData>, hook: Option<DoneHook>) -> io::Result<()> {
    let session = make_session(data, hook);
    serve_lines(session, io::stdin().lock(), io::stdout().lock())
}

fn make_session(data: Arc<ServiceData>, hook: Option<DoneHook>) -> Session {
    let s = Session::new(data);
    match hook {
        Some(h) => s.with_hook(h),
        None => s,
    }
}

fn serve_websocket(session: &mut Session, stream: TcpStream) -> io::Result<()> {
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    loop {
        let msg = match ws.read() {
            Ok(m) => m,
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(tungstenite::Error::Io(e)) => return Err(e),
            Err(e) => {
                log::debug!("websocket read failed: {e}");
                return Ok(());
            }
        };
        let reply = match msg {
            Message::Text(t) if t.trim().is_empty() => continue,
            Message::Text(t) => session.handle_line(t.trim_end_matches(['\n', '\r'])),
            Message::Binary(_) => session.reject_malformed("binary frames are not supported"),
            Message::Close(_) => return Ok(()),
            _ => continue,
        };
        if let Err(e) = ws.send(Message::text(reply.to_line())) {
            log::debug!("websocket write failed: {e}");
            return Ok(());
        }
        session.after_reply();
    }
}

fn handle_connection(stream: TcpStream, data: Arc<ServiceData>, hook: Option<DoneHook>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut session = make_session(data, hook);
    // the first bytes tell a WebSocket upgrade from a plain line client
    let mut head = [0u8; 4];
    let mut n = stream.peek(&mut head)?;
    let mut waits = 0;
    while n > 0 && n < 4 && !head[..n].contains(&b'\n') && waits < 200 {
        thread::sleep(std::time::Duration::from_millis(5));
        n = stream.peek(&mut head)?;
        waits += 1;
    }
    if n == 4 && &head == b"GET " {
        return serve_websocket(&mut session, stream);
    }
    let writer = stream.try_clone()?;
    serve_lines(session, stream, writer)
}

/// A running socket listener; each connection gets its own session thread.
pub struct Server {
    addr: SocketAddr,
}

impl Server {
    pub fn bind(addr: &str, data: Arc<ServiceData>, hook: Option<DoneHook>) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        thread::Builder::new()
            .name("embodinav-accept".into())
            .spawn(move || {
                for stream in listener.incoming() {
                    let stream = match stream {
                        Ok(s) => s,
                        Err(e) => {
                            log::warn!("accept failed: {e}");
                            continue;
                        }
                    };
                    let (data, hook) = (data.clone(), hook.clone());
                    let spawned = thread::Builder::new().name("embodinav-session".into()).spawn(move || {
                        let peer = stream.peer_addr().ok();
                        if let Err(e) = handle_connection(stream, data, hook) {
                            log::debug!("connection {peer:?} ended: {e}");
                        }
                    });
                    if let Err(e) = spawned {
                        log::warn!("could not start a session thread: {e}");
                    }
                }
            })?;
        Ok(Self { addr })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}
