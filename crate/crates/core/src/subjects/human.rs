//! A deliberately simple stand-in for a human player.
//!
//! Perception: the gap between each visible trail sample and the player is
//! rounded to a grid of `1/2^rate` screen widths, and the whole observation
//! reaches the controller `delay` seconds late. The controller aims at the trail position where its
//! command will land (`T_act + delay + 1` ticks past the observation),
//! averaging the perceived samples within `span` seconds of that point
//! (by default just the one sample). When
//! the preview is too short it uses what it can see, which is where the lag
//! comes from. The player position is predicted forward with an efference
//! copy of the subject's own intended commands (a Smith predictor), and the
//! predicted gap is closed with proportional `gain`. Gaussian angle noise
//! with standard deviation `sd` degrees is added last.

use std::collections::VecDeque;
use std::fmt;

use super::{Subject, SubjectContext, SubjectError};
use crate::engine::Frame;
use crate::plant::UnitMode;
use crate::rng::{Prng, Stream};
use crate::signal::seconds_to_ticks;

#[derive(Debug, Clone, PartialEq)]
pub struct HumanParams {
    /// Perception-to-command latency, seconds.
    pub internal_delay: f64,
    /// Bits per perceived trail sample.
    pub internal_rate: u32,
    /// Angle noise standard deviation, degrees.
    pub motor_noise_sd: f64,
    pub gain: f64,
    /// Half-width of the preview averaging window, seconds.
    pub span: f64,
    /// Added to the session seed for the noise stream.
    pub seed: u64,
}

impl Default for HumanParams {
    fn default() -> Self {
        Self {
            internal_delay: 0.3,
            internal_rate: 4,
            motor_noise_sd: 2.0,
            gain: 0.1,
            span: 0.0,
            seed: 0,
        }
    }
}

impl HumanParams {
    pub const KEYS: &'static [&'static str] = &["sd", "delay", "rate", "gain", "span", "seed"];

    pub fn set(&mut self, key: &str, v: f64) -> Result<(), String> {
        match key {
            "sd" if v >= 0.0 => self.motor_noise_sd = v,
            "delay" if (0.0..1.0).contains(&v) => self.internal_delay = v,
            "rate" if (1.0..=10.0).contains(&v) && v.fract() == 0.0 => self.internal_rate = v as u32,
            "gain" if v > 0.0 && v <= 1.0 => self.gain = v,
            "span" if (0.0..1.0).contains(&v) => self.span = v,
            "seed" if v >= 0.0 && v.fract() == 0.0 => self.seed = v as u64,
            "sd" => return Err(format!("sd must be >= 0, got {v}")),
            "delay" => return Err(format!("delay must be in [0, 1) s, got {v}")),
            "rate" => return Err(format!("rate must be an integer in 1..=10, got {v}")),
            "gain" => return Err(format!("gain must be in (0, 1], got {v}")),
            "span" => return Err(format!("span must be in [0, 1) s, got {v}")),
            "seed" => return Err(format!("seed must be a non-negative integer, got {v}")),
            other => return Err(format!("unknown parameter `{other}`")),
        }
        Ok(())
    }
}

impl fmt::Display for HumanParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "noisy-human:sd={},delay={},rate={},gain={},span={},seed={}",
            self.motor_noise_sd, self.internal_delay, self.internal_rate, self.gain, self.span, self.seed
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct Observation {
    player: f64,
    target: f64,
}

#[derive(Debug, Clone)]
pub struct NoisyHuman {
    params: HumanParams,
    delay: usize,
    span: i64,
    ctx: Option<SubjectContext>,
    rng: Prng,
    perceived: VecDeque<Observation>,
    /// Intended per-tick displacements, newest last.
    commands: VecDeque<f64>,
}

impl NoisyHuman {
    pub fn new(params: HumanParams) -> Self {
        Self {
            delay: seconds_to_ticks(params.internal_delay).max(0) as usize,
            span: seconds_to_ticks(params.span).max(0),
            rng: Prng::new(params.seed, Stream::Subject),
            params,
            ctx: None,
            perceived: VecDeque::new(),
            commands: VecDeque::new(),
        }
    }

    pub fn params(&self) -> &HumanParams {
        &self.params
    }

    fn observe(&self, frame: &Frame, lead: i64) -> Observation {
        // gaps to the player are perceived on a uniform grid with a zero level
        let step = 1.0 / (1u64 << self.params.internal_rate) as f64;
        let perceive = |p: f64| frame.player + ((p - frame.player) / step).round() * step;
        let target = if let Some(zone) = frame.fitts_zone {
            perceive(zone.center)
        } else {
            let lo = lead - self.span;
            let hi = lead + self.span;
            let mut sum = 0.0;
            let mut n = 0usize;
            for s in frame.trail.iter().filter(|s| s.offset >= lo && s.offset <= hi) {
                sum += perceive(s.pos);
                n += 1;
            }
            if n == 0 {
                frame.newest().map(|s| perceive(s.pos)).unwrap_or(frame.player)
            } else {
                sum / n as f64
            }
        };
        Observation {
            player: frame.player,
            target,
        }
    }
}

impl Subject for NoisyHuman {
    fn label(&self) -> String {
        self.params.to_string()
    }

    fn begin(&mut self, ctx: &SubjectContext) -> Result<(), SubjectError> {
        if ctx.mode != UnitMode::Game {
            return Err(SubjectError::Config(
                "noisy-human plays game-mode sessions only".into(),
            ));
        }
        self.ctx = Some(*ctx);
        self.rng = Prng::new(ctx.seed.wrapping_add(self.params.seed), Stream::Subject);
        self.perceived.clear();
        self.commands.clear();
        Ok(())
    }

    fn act(&mut self, frame: &Frame) -> Result<f64, SubjectError> {
        let ctx = self
            .ctx
            .ok_or_else(|| SubjectError::Config("begin was not called".into()))?;
        let action_delay = seconds_to_ticks(frame.params.t_act).max(0) as usize;
        let lead = (action_delay + self.delay + 1) as i64;

        let obs = self.observe(frame, lead);
        if self.perceived.is_empty() {
            self.perceived.extend(std::iter::repeat_n(obs, self.delay));
        }
        self.perceived.push_back(obs);
        let seen = self.perceived.pop_front().unwrap_or(obs);

        let in_flight = self.delay + action_delay;
        let predicted = seen.player + self.commands.iter().rev().take(in_flight).sum::<f64>();
        let max_speed = ctx.sensitivity * ctx.max_angle;
        let command = (self.params.gain * (seen.target - predicted)).clamp(-max_speed, max_speed);
        self.commands.push_back(command);
        while self.commands.len() > in_flight.max(1) + 100 {
            self.commands.pop_front();
        }

        let noise = self.params.motor_noise_sd * self.rng.normal();
        Ok((command / ctx.sensitivity + noise).clamp(-ctx.max_angle, ctx.max_angle))
    }
}
