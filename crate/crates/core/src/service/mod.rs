//! Live sessions over a WebSocket.
//!
//! One acceptor; each accepted connection gets its own engine thread. After
//! the handshake a reader thread owns the receiving half and does nothing but
//! store the newest angle and append to the received-input log. The engine
//! thread owns the session and the sending half, and steps the plant on
//! absolute 10 ms deadlines using whatever angle is in the cell at the
//! deadline (held over, and counted late, when nothing new arrived).
//!
//! `Pace::Lockstep` replaces the deadline with "wait for the input that
//! acknowledges this frame", which makes a scripted client reproducible
//! tick for tick.

pub mod client;
pub mod protocol;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;
use tungstenite::protocol::frame::coding::CloseCode;
use tungstenite::protocol::{CloseFrame, Role};
use tungstenite::WebSocket;

use crate::analysis::{block_norms, DEFAULT_TRIM_SECONDS};
use crate::engine::{EngineError, LogError, Session, SessionConfig, SessionLog, SessionStatus};
use crate::script::Block;
use protocol::{
    decode, encode, ErrorCode, EventKind, Hello, Message, SummaryRow, WireConfig, WireError, WireEvent, WireFrame,
    WireInput, WireSummary, PROTO_VERSION, TICK_RATE_HZ,
};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("websocket: {0}")]
    WebSocket(#[from] Box<tungstenite::Error>),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("client speaks protocol version {client}, server {server}")]
    Version { client: u32, server: u32 },
    #[error(transparent)]
    Protocol(#[from] protocol::ProtocolError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Log(#[from] LogError),
}

impl From<tungstenite::Error> for ServiceError {
    fn from(e: tungstenite::Error) -> Self {
        ServiceError::WebSocket(Box::new(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pace {
    /// Absolute deadlines at this many ticks per second.
    RealTime { hz: f64 },
    /// Advance when the client acknowledges the current frame.
    Lockstep,
}

impl Default for Pace {
    fn default() -> Self {
        Pace::RealTime { hz: TICK_RATE_HZ }
    }
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub pace: Pace,
    /// Log path for the first session; later sessions get `-2`, `-3`, ...
    /// before the extension.
    pub log_path: PathBuf,
    pub trim_seconds: f64,
    /// How long to wait for the client's hello, and in lockstep for each
    /// input.
    pub client_timeout: Duration,
    /// Recorded in the log header so `replay` can find the schedule.
    pub script_path: Option<String>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            pace: Pace::default(),
            log_path: PathBuf::from("session.csv"),
            trim_seconds: DEFAULT_TRIM_SECONDS,
            client_timeout: Duration::from_secs(10),
            script_path: None,
        }
    }
}

/// One received input message as seen by the reader thread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceivedInput {
    pub input: WireInput,
    /// Engine tick when it arrived.
    pub tick: u64,
    /// Milliseconds since the session started.
    pub arrival_ms: f64,
}

#[derive(Debug)]
pub struct SessionOutcome {
    pub log: SessionLog,
    pub log_path: PathBuf,
    pub received: Vec<ReceivedInput>,
    pub frames_sent: u64,
    /// Wall time from the first to the last frame sent.
    pub frame_span: Duration,
    pub peer: String,
}

impl SessionOutcome {
    /// Frames per second between the first and last frame.
    pub fn frame_rate(&self) -> Option<f64> {
        let secs = self.frame_span.as_secs_f64();
        (self.frames_sent > 1 && secs > 0.0).then(|| (self.frames_sent - 1) as f64 / secs)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Closed {
    Disconnected(String),
    Protocol(String),
}

#[derive(Debug, Default)]
struct Inbox {
    angle: f64,
    last_ack: Option<u64>,
    fresh: bool,
    received: Vec<ReceivedInput>,
    closed: Option<Closed>,
}

/// The latest-angle cell shared by the reader and engine threads.
#[derive(Default)]
struct Cell {
    inbox: Mutex<Inbox>,
    changed: Condvar,
    tick: std::sync::atomic::AtomicU64,
}

pub struct Server {
    listener: TcpListener,
    config: SessionConfig,
    opts: ServeOptions,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, config: SessionConfig, opts: ServeOptions) -> Result<Self, ServiceError> {
        config.validate()?;
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            config,
            opts,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, ServiceError> {
        Ok(self.listener.local_addr()?)
    }

    /// Accept one connection and run its session on this thread.
    pub fn serve_one(&self) -> Result<SessionOutcome, ServiceError> {
        let (stream, _) = self.listener.accept()?;
        run_connection(stream, self.config.clone(), &self.opts, self.opts.log_path.clone())
    }

    /// Accept connections until `max_sessions` have been handled (forever
    /// when `None`), one engine thread each. Returns the outcomes in
    /// acceptance order.
    pub fn serve(&self, max_sessions: Option<usize>) -> Vec<Result<SessionOutcome, ServiceError>> {
        let mut handles = Vec::new();
        for (n, stream) in self.listener.incoming().enumerate() {
            let path = numbered_path(&self.opts.log_path, n);
            let config = self.config.clone();
            let opts = self.opts.clone();
            handles.push(thread::spawn(move || {
                run_connection(stream?, config, &opts, path)
            }));
            if max_sessions.is_some_and(|m| handles.len() >= m) {
                break;
            }
        }
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(ServiceError::Handshake("session thread panicked".into()))))
            .collect()
    }
}

fn numbered_path(base: &Path, n: usize) -> PathBuf {
    if n == 0 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("session");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}-{}.{ext}", n + 1))
}

/// `<log>.received.csv`: every input message the reader saw.
pub fn received_path(log_path: &Path) -> PathBuf {
    let stem = log_path.file_stem().and_then(|s| s.to_str()).unwrap_or("session");
    log_path.with_file_name(format!("{stem}.received.csv"))
}

pub fn received_csv(received: &[ReceivedInput]) -> String {
    let mut out = String::from("seq,seq_ack,angle,timestamp,tick,arrival_ms\n");
    for r in received {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.3}",
            r.input.seq, r.input.seq_ack, r.input.angle, r.input.timestamp, r.tick, r.arrival_ms
        );
    }
    out
}

fn send(ws: &mut WebSocket<TcpStream>, msg: &Message) -> Result<(), ServiceError> {
    ws.send(tungstenite::Message::Text(encode(msg)))?;
    Ok(())
}

fn close(ws: &mut WebSocket<TcpStream>, code: CloseCode, reason: &str) {
    let _ = ws.close(Some(CloseFrame {
        code,
        reason: reason.to_string().into(),
    }));
    let _ = ws.flush();
}

fn reject(ws: &mut WebSocket<TcpStream>, seq: u64, code: ErrorCode, message: String) {
    let _ = send(ws, &Message::Error(WireError { seq, code, message }));
    close(ws, CloseCode::Protocol, "protocol error");
}

fn read_text(ws: &mut WebSocket<TcpStream>) -> Result<String, ServiceError> {
    loop {
        match ws.read()? {
            tungstenite::Message::Text(t) => return Ok(t),
            tungstenite::Message::Close(_) => return Err(tungstenite::Error::ConnectionClosed.into()),
            _ => continue,
        }
    }
}

fn handshake(ws: &mut WebSocket<TcpStream>, config: &SessionConfig, lockstep: bool) -> Result<String, ServiceError> {
    let meta = config.schedule.meta();
    let hello = Hello {
        seq: 0,
        proto_version: PROTO_VERSION,
        peer: "wheelcon".into(),
        schedule_hash: Some(config.schedule.hash()),
        config_hash: Some(config.hash()),
        tick_rate: Some(TICK_RATE_HZ),
        metadata: meta
            .iter()
            .filter(|(k, _)| !matches!(*k, "blocks" | "fitts"))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    };
    send(ws, &Message::Hello(hello))?;
    let reply = match decode(&read_text(ws)?) {
        Ok(Message::Hello(h)) => h,
        Ok(other) => {
            let err = protocol::ProtocolError::Unexpected {
                expected: "hello",
                got: other.kind().into(),
            };
            reject(ws, 0, ErrorCode::Unexpected, err.to_string());
            return Err(err.into());
        }
        Err(e) => {
            reject(ws, 0, ErrorCode::Malformed, e.to_string());
            return Err(e.into());
        }
    };
    if reply.proto_version != PROTO_VERSION {
        reject(
            ws,
            0,
            ErrorCode::ProtoVersion,
            format!("server speaks protocol version {PROTO_VERSION}, client sent {}", reply.proto_version),
        );
        return Err(ServiceError::Version {
            client: reply.proto_version,
            server: PROTO_VERSION,
        });
    }
    send(ws, &Message::Config(WireConfig::new(config, lockstep)))?;
    Ok(reply.peer)
}

fn reader_loop(mut ws: WebSocket<TcpStream>, cell: Arc<Cell>, stop: Arc<AtomicBool>, start: Instant) {
    let closed = loop {
        if stop.load(Ordering::Relaxed) {
            return;
        }
        let text = match ws.read() {
            Ok(tungstenite::Message::Text(t)) => t,
            Ok(tungstenite::Message::Close(_)) => break Closed::Disconnected("client closed the connection".into()),
            Ok(_) => continue,
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                continue
            }
            Err(e) => break Closed::Disconnected(e.to_string()),
        };
        match decode(&text) {
            Ok(Message::Input(input)) => {
                let mut inbox = cell.inbox.lock().expect("inbox poisoned");
                inbox.angle = if input.angle.is_finite() { input.angle } else { 0.0 };
                inbox.last_ack = Some(inbox.last_ack.map_or(input.seq_ack, |a| a.max(input.seq_ack)));
                inbox.fresh = true;
                inbox.received.push(ReceivedInput {
                    input,
                    tick: cell.tick.load(Ordering::Relaxed),
                    arrival_ms: start.elapsed().as_secs_f64() * 1e3,
                });
                cell.changed.notify_all();
            }
            Ok(other) => break Closed::Protocol(format!("unexpected `{}` message", other.kind())),
            Err(e) => break Closed::Protocol(e.to_string()),
        }
    };
    cell.inbox.lock().expect("inbox poisoned").closed = Some(closed);
    cell.changed.notify_all();
}

fn block_events(blocks: &[Block], tick: u64) -> Vec<Message> {
    let mut out = Vec::new();
    for (i, b) in blocks.iter().enumerate().filter(|(_, b)| b.start == tick) {
        let params = b.params.into();
        out.push(Message::Event(WireEvent {
            seq: tick,
            event: EventKind::BlockStart,
            block: i,
            label: b.label.clone(),
            params,
        }));
        if b.label.as_deref() == Some(crate::script::REST_LABEL) {
            out.push(Message::Event(WireEvent {
                seq: tick,
                event: EventKind::Rest,
                block: i,
                label: b.label.clone(),
                params,
            }));
        }
    }
    out
}

enum Step {
    Angle(f64, bool),
    Stop(SessionStatus, Option<(ErrorCode, String)>),
}

/// Wait for the angle to use at `tick`.
fn next_angle(cell: &Cell, pace: Pace, tick: u64, deadline: Instant, timeout: Duration) -> Step {
    let mut inbox = cell.inbox.lock().expect("inbox poisoned");
    match pace {
        Pace::RealTime { .. } => {
            drop(inbox);
            let now = Instant::now();
            if deadline > now {
                thread::sleep(deadline - now);
            }
            inbox = cell.inbox.lock().expect("inbox poisoned");
        }
        Pace::Lockstep => {
            let until = Instant::now() + timeout;
            while inbox.closed.is_none() && inbox.last_ack.is_none_or(|a| a < tick) {
                let now = Instant::now();
                if now >= until {
                    let msg = format!("no input for frame {tick} within {timeout:?}");
                    return Step::Stop(SessionStatus::Aborted(msg.clone()), Some((ErrorCode::Stalled, msg)));
                }
                inbox = cell.changed.wait_timeout(inbox, until - now).expect("inbox poisoned").0;
            }
        }
    }
    match &inbox.closed {
        Some(Closed::Disconnected(why)) => {
            return Step::Stop(SessionStatus::Aborted(format!("client disconnected at tick {tick}: {why}")), None)
        }
        Some(Closed::Protocol(why)) => {
            return Step::Stop(
                SessionStatus::Aborted(format!("protocol error at tick {tick}: {why}")),
                Some((ErrorCode::Malformed, why.clone())),
            )
        }
        None => {}
    }
    let fresh = inbox.fresh;
    inbox.fresh = false;
    Step::Angle(inbox.angle, fresh)
}

fn summary(log: &SessionLog, config: &SessionConfig, trim: f64, log_path: &Path) -> WireSummary {
    let (param_name, rows) = match block_norms(log, &config.schedule, trim) {
        Ok(report) => (
            report.param_name,
            report
                .rows
                .iter()
                .map(|r| SummaryRow {
                    block: r.block,
                    param: r.param.clone(),
                    l1: r.norms.l1,
                    l2: r.norms.l2,
                    linf: r.norms.linf,
                    n: r.n,
                    flagged: r.flagged,
                })
                .collect(),
        ),
        Err(_) => (String::new(), Vec::new()),
    };
    WireSummary {
        seq: log.records.len() as u64,
        status: match &log.header.status {
            SessionStatus::Complete => "complete".into(),
            SessionStatus::Aborted(why) => format!("aborted: {why}"),
        },
        param_name,
        rows,
        late_input: log.header.diagnostics.late_input,
        log: Some(log_path.display().to_string()),
    }
}

fn run_connection(
    stream: TcpStream,
    config: SessionConfig,
    opts: &ServeOptions,
    log_path: PathBuf,
) -> Result<SessionOutcome, ServiceError> {
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(opts.client_timeout))?;
    let mut ws = tungstenite::accept(stream.try_clone()?).map_err(|e| ServiceError::Handshake(e.to_string()))?;
    let peer = handshake(&mut ws, &config, opts.pace == Pace::Lockstep)?;

    let mut session = Session::new(config.clone())?;
    session.set_subject_label(format!("external:{peer}"));
    if let Some(p) = &opts.script_path {
        session.set_script_path(p.clone());
    }
    let blocks = config.schedule.blocks();
    let cell = Arc::new(Cell::default());
    let stop = Arc::new(AtomicBool::new(false));
    let start = Instant::now();

    // the reader wakes every 50 ms to notice `stop`
    stream.set_read_timeout(Some(Duration::from_millis(50)))?;
    let reader_ws = WebSocket::from_raw_socket(stream.try_clone()?, Role::Server, None);
    let reader = {
        let (cell, stop) = (cell.clone(), stop.clone());
        thread::spawn(move || reader_loop(reader_ws, cell, stop, start))
    };

    let period = match opts.pace {
        Pace::RealTime { hz } => Duration::from_secs_f64(1.0 / hz),
        Pace::Lockstep => Duration::ZERO,
    };
    let mut frames_sent = 0u64;
    let mut first_frame: Option<Instant> = None;
    let mut last_frame = start;
    let mut failure: Option<(SessionStatus, Option<(ErrorCode, String)>)> = None;
    let mut send_frame = |ws: &mut WebSocket<TcpStream>, session: &mut Session| -> Result<(), ServiceError> {
        let tick = session.tick_index();
        for event in block_events(&blocks, tick) {
            send(ws, &event)?;
        }
        let frame = session.frame()?;
        send(ws, &Message::Frame(WireFrame::from_frame(&frame)))?;
        let now = Instant::now();
        first_frame.get_or_insert(now);
        last_frame = now;
        frames_sent += 1;
        Ok(())
    };

    let epoch = Instant::now();
    if let Err(e) = send_frame(&mut ws, &mut session) {
        failure = Some((SessionStatus::Aborted(format!("send failed at tick 0: {e}")), None));
    }
    while failure.is_none() && !session.is_complete() {
        let tick = session.tick_index();
        let deadline = epoch + period * (tick as u32 + 1);
        match next_angle(&cell, opts.pace, tick, deadline, opts.client_timeout) {
            Step::Angle(angle, fresh) => {
                if !fresh {
                    session.note_late_input();
                }
                session.advance(angle)?;
                cell.tick.store(session.tick_index(), Ordering::Relaxed);
                if !session.is_complete() {
                    if let Err(e) = send_frame(&mut ws, &mut session) {
                        failure = Some((
                            SessionStatus::Aborted(format!("send failed at tick {}: {e}", session.tick_index())),
                            None,
                        ));
                    }
                }
            }
            Step::Stop(status, err) => failure = Some((status, err)),
        }
    }
    let frame_span = first_frame.map_or(Duration::ZERO, |f| last_frame - f);

    let (status, wire_err) = match failure {
        Some((status, err)) => (status, err),
        None => (SessionStatus::Complete, None),
    };
    let complete = status == SessionStatus::Complete;
    let log = session.seal_with(status);
    if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    log.write_files(&log_path)?;

    let tick = log.records.len() as u64;
    if let Some((code, message)) = wire_err {
        reject(&mut ws, tick, code, message);
    } else {
        let _ = send(&mut ws, &Message::Summary(summary(&log, &config, opts.trim_seconds, &log_path)));
        close(&mut ws, if complete { CloseCode::Normal } else { CloseCode::Away }, "session over");
    }
    stop.store(true, Ordering::Relaxed);
    let _ = reader.join();
    let received = std::mem::take(&mut cell.inbox.lock().expect("inbox poisoned").received);
    fs::write(received_path(&log_path), received_csv(&received))?;

    Ok(SessionOutcome {
        log,
        log_path,
        received,
        frames_sent,
        frame_span,
        peer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_log_paths() {
        let base = Path::new("/tmp/x/run.csv");
        assert_eq!(numbered_path(base, 0), base);
        assert_eq!(numbered_path(base, 2), Path::new("/tmp/x/run-3.csv"));
        assert_eq!(received_path(base), Path::new("/tmp/x/run.received.csv"));
    }

    #[test]
    fn rest_blocks_raise_two_events() {
        let sched = crate::script::build_game(crate::script::GameId::BumpsAndTrail, 1).unwrap();
        let blocks = sched.blocks();
        let at_zero = block_events(&blocks, 0);
        let kinds: Vec<_> = at_zero
            .iter()
            .map(|m| match m {
                Message::Event(e) => e.event,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(kinds, vec![EventKind::BlockStart, EventKind::Rest]);
        assert!(block_events(&blocks, 1).is_empty());
    }
}
