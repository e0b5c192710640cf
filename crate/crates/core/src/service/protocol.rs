//! Wire messages. One JSON object per WebSocket text message, tagged by
//! `kind`, every one carrying `seq`. See `docs/protocol.md`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disturbance::FittsZone;
use crate::engine::{Frame, SessionConfig};
use crate::plant::UnitMode;
use crate::script::BlockParams;
use crate::signal::{ticks_to_seconds, TrailSample, TICK_SECONDS};
use crate::subjects::SubjectContext;

pub const PROTO_VERSION: u32 = 1;
pub const TICK_RATE_HZ: f64 = 100.0;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("expected a `{expected}` message, got `{got}`")]
    Unexpected { expected: &'static str, got: String },
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    Hello(Hello),
    Config(WireConfig),
    Frame(WireFrame),
    Input(WireInput),
    Event(WireEvent),
    Summary(WireSummary),
    Error(WireError),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello(_) => "hello",
            Message::Config(_) => "config",
            Message::Frame(_) => "frame",
            Message::Input(_) => "input",
            Message::Event(_) => "event",
            Message::Summary(_) => "summary",
            Message::Error(_) => "error",
        }
    }

    pub fn seq(&self) -> u64 {
        match self {
            Message::Hello(m) => m.seq,
            Message::Config(m) => m.seq,
            Message::Frame(m) => m.seq,
            Message::Input(m) => m.seq,
            Message::Event(m) => m.seq,
            Message::Summary(m) => m.seq,
            Message::Error(m) => m.seq,
        }
    }
}

pub fn encode(msg: &Message) -> String {
    serde_json::to_string(msg).expect("wire messages always serialize")
}

pub fn decode(text: &str) -> Result<Message, ProtocolError> {
    Ok(serde_json::from_str(text)?)
}

/// First message in each direction. The server's carries the session
/// metadata; the client's only needs `proto_version` and `peer`.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Default)]
pub struct Hello {
    pub seq: u64,
    pub proto_version: u32,
    pub peer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl Hello {
    pub fn client(peer: impl Into<String>) -> Self {
        Self {
            seq: 0,
            proto_version: PROTO_VERSION,
            peer: peer.into(),
            ..Self::default()
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct WireConfig {
    pub seq: u64,
    pub mode: UnitMode,
    pub sensitivity: f64,
    pub max_angle: f64,
    pub max_speed: f64,
    pub bump_gain: f64,
    pub screen_width_px: f64,
    pub lookbehind: f64,
    pub ticks: u64,
    pub seed: u64,
    pub lockstep: bool,
}

impl WireConfig {
    pub fn new(config: &SessionConfig, lockstep: bool) -> Self {
        let ctx = config.subject_context();
        Self {
            seq: 0,
            mode: config.mode(),
            sensitivity: config.sensitivity,
            max_angle: config.max_angle,
            max_speed: config.max_speed(),
            bump_gain: config.bump_gain,
            screen_width_px: config.screen_width_px,
            lookbehind: config.lookbehind,
            ticks: config.schedule.ticks(),
            seed: ctx.seed,
            lockstep,
        }
    }

    pub fn subject_context(&self) -> SubjectContext {
        SubjectContext {
            mode: self.mode,
            sensitivity: self.sensitivity,
            max_angle: self.max_angle,
            seed: self.seed,
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq)]
pub struct WireParams {
    pub r_act: u32,
    pub t_act: f64,
    pub t_vis: f64,
    pub r_vis: u32,
}

impl From<BlockParams> for WireParams {
    fn from(p: BlockParams) -> Self {
        Self {
            r_act: p.r_act,
            t_act: p.t_act,
            t_vis: p.t_vis,
            r_vis: p.r_vis,
        }
    }
}

impl From<WireParams> for BlockParams {
    fn from(p: WireParams) -> Self {
        Self {
            r_act: p.r_act,
            t_act: p.t_act,
            t_vis: p.t_vis,
            r_vis: p.r_vis,
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq)]
pub struct WireZone {
    /// Tick at which the zone appeared.
    pub since: u64,
    pub center: f64,
    pub width: f64,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct WireFrame {
    pub seq: u64,
    pub t: f64,
    pub player: f64,
    /// `(dt_ahead, pos)` pairs, oldest first; `dt_ahead` in seconds, negative
    /// for the past.
    pub trail_window: Vec<(f64, f64)>,
    pub block_param: WireParams,
    pub fitts_zone: Option<WireZone>,
}

impl WireFrame {
    pub fn from_frame(frame: &Frame) -> Self {
        Self {
            seq: frame.seq,
            t: frame.t,
            player: frame.player,
            trail_window: frame
                .trail
                .iter()
                .map(|s| (ticks_to_seconds(s.offset), s.pos))
                .collect(),
            block_param: frame.params.into(),
            fitts_zone: frame.fitts_zone.map(|z| WireZone {
                since: z.tick,
                center: z.center,
                width: z.width,
            }),
        }
    }

    /// The engine-side frame this was built from.
    pub fn to_frame(&self) -> Frame {
        Frame {
            seq: self.seq,
            t: self.t,
            player: self.player,
            trail: self
                .trail_window
                .iter()
                .map(|&(dt, pos)| TrailSample {
                    offset: (dt / TICK_SECONDS).round() as i64,
                    pos,
                })
                .collect(),
            params: self.block_param.into(),
            fitts_zone: self.fitts_zone.map(|z| FittsZone {
                tick: z.since,
                center: z.center,
                width: z.width,
            }),
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq)]
pub struct WireInput {
    pub seq: u64,
    /// Last frame the client had seen.
    pub seq_ack: u64,
    /// Degrees; the server clamps to the travel limit.
    pub angle: f64,
    /// Client clock, milliseconds.
    pub timestamp: f64,
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BlockStart,
    Rest,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct WireEvent {
    pub seq: u64,
    pub event: EventKind,
    pub block: usize,
    pub label: Option<String>,
    pub params: WireParams,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub block: usize,
    pub param: String,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub n: usize,
    pub flagged: bool,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct WireSummary {
    pub seq: u64,
    pub status: String,
    pub param_name: String,
    pub rows: Vec<SummaryRow>,
    pub late_input: u64,
    pub log: Option<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    ProtoVersion,
    Malformed,
    Unexpected,
    Stalled,
    Internal,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct WireError {
    pub seq: u64,
    pub code: ErrorCode,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Session;
    use crate::script::{build_game, GameId};

    #[test]
    fn kind_tag_and_seq_on_every_message() {
        let msgs = [
            Message::Hello(Hello::client("t")),
            Message::Input(WireInput {
                seq: 3,
                seq_ack: 2,
                angle: -4.5,
                timestamp: 12.0,
            }),
            Message::Error(WireError {
                seq: 9,
                code: ErrorCode::ProtoVersion,
                message: "x".into(),
            }),
        ];
        for m in msgs {
            let text = encode(&m);
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["kind"], m.kind());
            assert_eq!(v["seq"], m.seq());
            assert_eq!(decode(&text).unwrap(), m);
        }
        assert!(encode(&Message::Hello(Hello::client("t"))).contains("\"proto_version\":1"));
    }

    #[test]
    fn frames_survive_the_wire_exactly() {
        let mut s = Session::new(SessionConfig::new(build_game(GameId::VisionRate, 2).unwrap())).unwrap();
        for _ in 0..40 {
            s.advance(10.0).unwrap();
        }
        let frame = s.frame().unwrap();
        let wire = WireFrame::from_frame(&frame);
        let back = match decode(&encode(&Message::Frame(wire))).unwrap() {
            Message::Frame(f) => f.to_frame(),
            other => panic!("{other:?}"),
        };
        assert_eq!(back, frame);
        assert_eq!(back.trail.len(), 301);
    }

    #[test]
    fn malformed_and_unknown_kinds_rejected() {
        assert!(decode("{\"kind\":\"input\",\"seq\":1}").is_err());
        assert!(decode("{\"kind\":\"teleport\",\"seq\":1}").is_err());
        assert!(decode("not json").is_err());
    }
}
