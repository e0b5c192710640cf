//! Synthetic subjects that close the loop in headless runs, plus the
//! exhaustive minimax oracle.

mod human;
pub mod oracle;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use human::{HumanParams, NoisyHuman};
pub use oracle::{minimax_value, search_level_scale, uniform_levels, MinimaxResult, OracleError};

use crate::engine::Frame;
use crate::plant::UnitMode;
use crate::signal::{seconds_to_ticks, ActionQuantizer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubjectError {
    #[error("subject configuration: {0}")]
    Config(String),
    #[error("bad subject spec `{spec}`: {message}")]
    Spec { spec: String, message: String },
    #[error("input trace exhausted at tick {0}")]
    TraceExhausted(u64),
    #[error("{0}")]
    Failed(String),
}

/// Session facts a subject may use when it starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectContext {
    pub mode: UnitMode,
    /// Plant displacement per tick per degree.
    pub sensitivity: f64,
    pub max_angle: f64,
    pub seed: u64,
}

/// A controller driven by the engine thread: one frame in, one wheel angle
/// (degrees) out, every tick.
pub trait Subject {
    /// Spec string, written into log headers.
    fn label(&self) -> String;

    fn begin(&mut self, _ctx: &SubjectContext) -> Result<(), SubjectError> {
        Ok(())
    }

    fn act(&mut self, frame: &Frame) -> Result<f64, SubjectError>;
}

/// Holds one angle for the whole session.
#[derive(Debug, Clone)]
pub struct ConstantAngle {
    angle: f64,
}

impl ConstantAngle {
    pub fn new(angle: f64) -> Self {
        Self { angle }
    }
}

impl Subject for ConstantAngle {
    fn label(&self) -> String {
        format!("constant:angle={}", self.angle)
    }

    fn act(&mut self, _frame: &Frame) -> Result<f64, SubjectError> {
        Ok(self.angle)
    }
}

/// Plays back a recorded per-tick angle trace.
#[derive(Debug, Clone)]
pub struct TracePlayer {
    trace: Vec<f64>,
    next: usize,
}

impl TracePlayer {
    pub fn new(trace: Vec<f64>) -> Self {
        Self { trace, next: 0 }
    }
}

impl Subject for TracePlayer {
    fn label(&self) -> String {
        "trace".into()
    }

    fn act(&mut self, frame: &Frame) -> Result<f64, SubjectError> {
        let a = self
            .trace
            .get(self.next)
            .copied()
            .ok_or(SubjectError::TraceExhausted(frame.seq))?;
        self.next += 1;
        Ok(a)
    }
}

/// Inverts the trail with an internal delay of `T` ticks.
///
/// Model mode: emits `-r(t - T)`, zero before the first `T` ticks. Game mode:
/// steers the player onto the visible trail position one tick ahead of the
/// observation it acts on; with no visible future it falls back to the
/// newest sample, costing a tick of lag.
#[derive(Debug, Clone)]
pub struct DelayedInverter {
    delay: usize,
    history: VecDeque<f64>,
    ctx: Option<SubjectContext>,
}

impl DelayedInverter {
    pub fn new(delay_ticks: usize) -> Self {
        Self {
            delay: delay_ticks,
            history: VecDeque::with_capacity(delay_ticks + 1),
            ctx: None,
        }
    }

    pub fn delay_ticks(&self) -> usize {
        self.delay
    }

    fn delayed(&mut self, value: f64) -> f64 {
        self.history.push_back(value);
        if self.history.len() > self.delay {
            self.history.pop_front().unwrap_or(0.0)
        } else {
            0.0
        }
    }
}

impl Subject for DelayedInverter {
    fn label(&self) -> String {
        format!("delayed-inverter:T={}", self.delay as f64 / 100.0)
    }

    fn begin(&mut self, ctx: &SubjectContext) -> Result<(), SubjectError> {
        self.history.clear();
        self.ctx = Some(*ctx);
        Ok(())
    }

    fn act(&mut self, frame: &Frame) -> Result<f64, SubjectError> {
        let ctx = self
            .ctx
            .ok_or_else(|| SubjectError::Config("begin was not called".into()))?;
        match ctx.mode {
            UnitMode::Model => {
                let r = frame.at_offset(0).map(|s| s.pos).ok_or_else(|| {
                    SubjectError::Config("present trail increment is not visible".into())
                })?;
                Ok(self.delayed(-r) / ctx.sensitivity)
            }
            UnitMode::Game => {
                if frame.params.t_vis > 0.0 {
                    return Err(SubjectError::Config(format!(
                        "delayed inverter needs T_vis <= 0 in game mode, got {}",
                        frame.params.t_vis
                    )));
                }
                let want = 1 - self.delay as i64;
                let target = match frame.at_offset(want) {
                    Some(s) => s.pos,
                    None => match frame.fitts_zone {
                        Some(z) => z.center,
                        None => frame.newest().map(|s| s.pos).unwrap_or(frame.player),
                    },
                };
                Ok((target - frame.player) / ctx.sensitivity)
            }
        }
    }
}

/// Pick `s` in `levels` minimizing `|x + pending + s|`; ties go to the
/// smaller `|s|`, then to the negative level.
pub fn quantized_greedy(x: f64, pending: f64, levels: &[f64]) -> f64 {
    let mut best = f64::NAN;
    let mut best_cost = f64::INFINITY;
    for &s in levels {
        let cost = (x + pending + s).abs();
        let better = cost < best_cost
            || (cost == best_cost
                && (s.abs() < best.abs() || (s.abs() == best.abs() && s < best)));
        if better {
            best = s;
            best_cost = cost;
        }
    }
    best
}

/// One-step greedy controller over the engine's action levels, accounting
/// for its own commands still inside the action delay line.
#[derive(Debug, Clone)]
pub struct QuantizedGreedy {
    pending: VecDeque<f64>,
    ctx: Option<SubjectContext>,
}

impl QuantizedGreedy {
    pub fn new() -> Self {
        Self {
            pending: VecDeque::new(),
            ctx: None,
        }
    }
}

impl Default for QuantizedGreedy {
    fn default() -> Self {
        Self::new()
    }
}

impl Subject for QuantizedGreedy {
    fn label(&self) -> String {
        "quantized-greedy".into()
    }

    fn begin(&mut self, ctx: &SubjectContext) -> Result<(), SubjectError> {
        self.pending.clear();
        self.ctx = Some(*ctx);
        Ok(())
    }

    fn act(&mut self, frame: &Frame) -> Result<f64, SubjectError> {
        let ctx = self
            .ctx
            .ok_or_else(|| SubjectError::Config("begin was not called".into()))?;
        let quantizer = ActionQuantizer::new(
            frame.params.r_act,
            ctx.max_angle,
            ctx.sensitivity * ctx.max_angle,
        )
        .map_err(|e| SubjectError::Config(e.to_string()))?;
        let x = match ctx.mode {
            UnitMode::Model => frame.player,
            UnitMode::Game => {
                let trail = frame
                    .at_offset(0)
                    .or(frame.newest())
                    .map(|s| s.pos)
                    .or(frame.fitts_zone.map(|z| z.center))
                    .unwrap_or(frame.player);
                frame.player - trail
            }
        };
        let delay = seconds_to_ticks(frame.params.t_act).max(0) as usize;
        while self.pending.len() > delay {
            self.pending.pop_front();
        }
        let pending: f64 = self.pending.iter().sum();
        let s = quantized_greedy(x, pending, &quantizer.levels());
        if delay > 0 {
            self.pending.push_back(s);
            if self.pending.len() > delay {
                self.pending.pop_front();
            }
        }
        Ok(s / ctx.sensitivity)
    }
}

/// Parsed `--subject` argument: `kind[:key=value,...]`.
#[derive(Debug, Clone, PartialEq)]
pub enum SubjectSpec {
    /// `T` in seconds, converted to whole ticks.
    DelayedInverter { delay_ticks: usize },
    QuantizedGreedy,
    NoisyHuman(HumanParams),
    Constant { angle: f64 },
    /// Inputs come from a live client.
    External,
}

impl SubjectSpec {
    /// Build a synthetic subject. `External` has no local implementation.
    pub fn build(&self) -> Option<Box<dyn Subject + Send>> {
        Some(match self {
            SubjectSpec::DelayedInverter { delay_ticks } => {
                Box::new(DelayedInverter::new(*delay_ticks))
            }
            SubjectSpec::QuantizedGreedy => Box::new(QuantizedGreedy::new()),
            SubjectSpec::NoisyHuman(p) => Box::new(NoisyHuman::new(p.clone())),
            SubjectSpec::Constant { angle } => Box::new(ConstantAngle::new(*angle)),
            SubjectSpec::External => return None,
        })
    }
}

impl fmt::Display for SubjectSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubjectSpec::DelayedInverter { delay_ticks } => {
                write!(f, "delayed-inverter:T={}", *delay_ticks as f64 / 100.0)
            }
            SubjectSpec::QuantizedGreedy => f.write_str("quantized-greedy"),
            SubjectSpec::NoisyHuman(p) => write!(f, "{}", p),
            SubjectSpec::Constant { angle } => write!(f, "constant:angle={angle}"),
            SubjectSpec::External => f.write_str("external"),
        }
    }
}

impl FromStr for SubjectSpec {
    type Err = SubjectError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let bad = |message: String| SubjectError::Spec {
            spec: spec.to_string(),
            message,
        };
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut params = Vec::new();
        for entry in rest.split(',').filter(|e| !e.is_empty()) {
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, found `{entry}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| bad(format!("`{k}` is not a number: `{v}`")))?;
            if !v.is_finite() {
                return Err(bad(format!("`{k}` must be finite")));
            }
            params.push((k.trim().to_string(), v));
        }
        let unknown = |allowed: &[&str]| {
            params
                .iter()
                .find(|(k, _)| !allowed.contains(&k.as_str()))
                .map(|(k, _)| bad(format!("unknown parameter `{k}` for {kind}")))
        };
        match kind {
            "delayed-inverter" => {
                if let Some(e) = unknown(&["T"]) {
                    return Err(e);
                }
                let t = params.iter().find(|(k, _)| k == "T").map_or(0.0, |p| p.1);
                if t < 0.0 {
                    return Err(bad("T must be non-negative".into()));
                }
                Ok(SubjectSpec::DelayedInverter {
                    delay_ticks: seconds_to_ticks(t) as usize,
                })
            }
            "quantized-greedy" => match unknown(&[]) {
                Some(e) => Err(e),
                None => Ok(SubjectSpec::QuantizedGreedy),
            },
            "noisy-human" => {
                if let Some(e) = unknown(HumanParams::KEYS) {
                    return Err(e);
                }
                let mut p = HumanParams::default();
                for (k, v) in &params {
                    p.set(k, *v).map_err(bad)?;
                }
                Ok(SubjectSpec::NoisyHuman(p))
            }
            "constant" => {
                if let Some(e) = unknown(&["angle"]) {
                    return Err(e);
                }
                let angle = params.iter().find(|(k, _)| k == "angle").map_or(0.0, |p| p.1);
                Ok(SubjectSpec::Constant { angle })
            }
            "external" => Ok(SubjectSpec::External),
            other => Err(bad(format!(
                "unknown kind `{other}` (delayed-inverter, quantized-greedy, noisy-human, constant, external)"
            ))),
        }
    }
}
