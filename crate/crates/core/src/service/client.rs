//! A scripted client: connects, handshakes, and answers every frame with
//! an angle from a policy.

use std::net::TcpStream;
use std::time::Instant;

use tungstenite::WebSocket;

use super::protocol::{decode, encode, Hello, Message, WireConfig, WireError, WireEvent, WireFrame, WireInput, WireSummary};
use super::ServiceError;
use crate::subjects::Subject;

pub struct Client {
    ws: WebSocket<TcpStream>,
    pub hello: Hello,
    pub config: Option<WireConfig>,
    /// Set when the server refused the handshake.
    pub rejected: Option<WireError>,
    started: Instant,
    next_seq: u64,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct ClientReport {
    pub frames: u64,
    /// Angle sent for each frame, in frame order.
    pub sent: Vec<f64>,
    pub events: Vec<WireEvent>,
    pub summary: Option<WireSummary>,
    pub error: Option<WireError>,
}

fn read_message(ws: &mut WebSocket<TcpStream>) -> Result<Option<Message>, ServiceError> {
    loop {
        match ws.read() {
            Ok(tungstenite::Message::Text(t)) => return Ok(Some(decode(&t)?)),
            Ok(tungstenite::Message::Close(_)) => return Ok(None),
            Ok(_) => continue,
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
}

impl Client {
    /// Connect and handshake with `proto_version` (normally
    /// `PROTO_VERSION`). A version the server refuses comes back as
    /// `rejected`, not as an error.
    pub fn connect(addr: &str, peer: &str, proto_version: u32) -> Result<Self, ServiceError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let (mut ws, _) = tungstenite::client(format!("ws://{addr}/"), stream)
            .map_err(|e| ServiceError::Handshake(e.to_string()))?;
        let hello = match read_message(&mut ws)? {
            Some(Message::Hello(h)) => h,
            other => {
                return Err(ServiceError::Handshake(format!(
                    "expected hello, got {:?}",
                    other.map(|m| m.kind())
                )))
            }
        };
        let mut mine = Hello::client(peer);
        mine.proto_version = proto_version;
        ws.send(tungstenite::Message::Text(encode(&Message::Hello(mine))))?;
        let mut client = Self {
            ws,
            hello,
            config: None,
            rejected: None,
            started: Instant::now(),
            next_seq: 1,
        };
        match read_message(&mut client.ws)? {
            Some(Message::Config(c)) => client.config = Some(c),
            Some(Message::Error(e)) => client.rejected = Some(e),
            other => {
                return Err(ServiceError::Handshake(format!(
                    "expected config, got {:?}",
                    other.map(|m| m.kind())
                )))
            }
        }
        Ok(client)
    }

    /// Send a raw text message, bypassing the protocol types.
    pub fn send_raw(&mut self, text: &str) -> Result<(), ServiceError> {
        self.ws.send(tungstenite::Message::Text(text.to_string()))?;
        Ok(())
    }

    pub fn send_input(&mut self, seq_ack: u64, angle: f64) -> Result<(), ServiceError> {
        let msg = Message::Input(WireInput {
            seq: self.next_seq,
            seq_ack,
            angle,
            timestamp: self.started.elapsed().as_secs_f64() * 1e3,
        });
        self.next_seq += 1;
        self.ws.send(tungstenite::Message::Text(encode(&msg)))?;
        Ok(())
    }

    /// Answer frames with `policy` until the server ends the session or
    /// `stop_after` frames have been answered, after which the client
    /// hangs up.
    pub fn play(
        mut self,
        mut policy: impl FnMut(&WireFrame) -> f64,
        stop_after: Option<u64>,
    ) -> Result<ClientReport, ServiceError> {
        let mut report = ClientReport::default();
        if self.rejected.is_some() {
            report.error = self.rejected.take();
            return Ok(report);
        }
        while let Some(msg) = read_message(&mut self.ws)? {
            match msg {
                Message::Frame(frame) => {
                    let angle = policy(&frame);
                    report.frames += 1;
                    report.sent.push(angle);
                    self.send_input(frame.seq, angle)?;
                    if stop_after.is_some_and(|n| report.frames >= n) {
                        let _ = self.ws.close(None);
                        let _ = self.ws.flush();
                        break;
                    }
                }
                Message::Event(e) => report.events.push(e),
                Message::Summary(s) => report.summary = Some(s),
                Message::Error(e) => report.error = Some(e),
                _ => {}
            }
        }
        Ok(report)
    }

    /// Play with a synthetic subject, converting each wire frame back to an
    /// engine frame.
    pub fn play_subject(self, subject: &mut dyn Subject, stop_after: Option<u64>) -> Result<ClientReport, ServiceError> {
        let ctx = self
            .config
            .as_ref()
            .map(WireConfig::subject_context)
            .ok_or_else(|| ServiceError::Handshake("no config received".into()))?;
        subject
            .begin(&ctx)
            .map_err(|e| ServiceError::Handshake(format!("subject setup: {e}")))?;
        let mut failed = None;
        let report = self.play(
            |frame| match subject.act(&frame.to_frame()) {
                Ok(a) => a,
                Err(e) => {
                    failed.get_or_insert(e);
                    0.0
                }
            },
            stop_after,
        )?;
        match failed {
            Some(e) => Err(ServiceError::Handshake(format!("subject failed: {e}"))),
            None => Ok(report),
        }
    }
}
