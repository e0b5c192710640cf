//! Fixed-tick session loop.
//!
//! Each tick runs the layered loop in a fixed order: sample the schedule,
//! render the visible (vision-quantized) trail, quantize and delay the wheel
//! angle into the control `u(t)`, step the plant with the trail increment,
//! the scaled bump and `u(t)`, and record `(t, x(t), u(t))` where `x(t)` is
//! the error at the start of the tick.

mod log;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use log::{
    inputs_path, Diagnostics, LogError, LogHeader, LogRecord, SessionLog, SessionStatus,
    LOG_FORMAT,
};

use crate::disturbance::{FittsSchedule, FittsZone};
use crate::plant::{
    step_plant, PlantError, PlantState, StepInputs, UnitMode, DEFAULT_MAX_ANGLE,
    DEFAULT_SCREEN_WIDTH_PX, DEFAULT_SENSITIVITY,
};
use crate::rng::PRNG_ID;
use crate::script::{BlockParams, ParameterSchedule};
use crate::signal::{
    quantize_vision_unchecked, seconds_to_ticks, ticks_to_seconds, visible_segment, ActionQuantizer, DelayLine,
    SignalError, TrailSample, VisionWindow, DEFAULT_LOOKBEHIND_SECONDS,
};
use crate::subjects::{Subject, SubjectContext, SubjectError};

/// Bump force that displaces the player as fast as a 45 degree wheel hold
/// when at full amplitude (100).
pub const BUMP_EQUIVALENT_ANGLE_DEG: f64 = 45.0;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("subject failed at tick {tick}: {source}")]
    Subject {
        tick: u64,
        #[source]
        source: SubjectError,
        /// Everything recorded before the failure, sealed as aborted.
        partial: Box<SessionLog>,
    },
    #[error("subject rejected the session: {0}")]
    SubjectSetup(#[source] SubjectError),
    #[error("log header does not match the configuration: {0}")]
    HashMismatch(String),
    #[error("input trace has {have} ticks, schedule needs {need}")]
    TraceLength { have: usize, need: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub schedule: ParameterSchedule,
    /// Player velocity per degree of wheel angle, screen widths per tick
    /// (model mode: plant units per tick per angle unit).
    pub sensitivity: f64,
    pub max_angle: f64,
    /// Plant displacement per tick per unit of bump force.
    pub bump_gain: f64,
    pub screen_width_px: f64,
    pub lookbehind: f64,
}

impl SessionConfig {
    /// Defaults for the schedule's unit mode. Model mode uses unit gains so
    /// the wheel angle is the control action itself.
    pub fn new(schedule: ParameterSchedule) -> Self {
        match schedule.mode() {
            UnitMode::Model => Self {
                schedule,
                sensitivity: 1.0,
                max_angle: 1.0,
                bump_gain: 1.0,
                screen_width_px: DEFAULT_SCREEN_WIDTH_PX,
                lookbehind: DEFAULT_LOOKBEHIND_SECONDS,
            },
            UnitMode::Game => Self {
                schedule,
                sensitivity: DEFAULT_SENSITIVITY,
                max_angle: DEFAULT_MAX_ANGLE,
                bump_gain: DEFAULT_SENSITIVITY * BUMP_EQUIVALENT_ANGLE_DEG / 100.0,
                screen_width_px: DEFAULT_SCREEN_WIDTH_PX,
                lookbehind: DEFAULT_LOOKBEHIND_SECONDS,
            },
        }
    }

    pub fn with_sensitivity(mut self, k: f64) -> Self {
        let ratio = self.bump_gain / self.sensitivity;
        self.sensitivity = k;
        self.bump_gain = ratio * k;
        self
    }

    pub fn mode(&self) -> UnitMode {
        self.schedule.mode()
    }

    pub fn max_speed(&self) -> f64 {
        self.sensitivity * self.max_angle
    }

    /// Factor from internal plant units to logged error units.
    pub fn error_scale(&self) -> f64 {
        match self.mode() {
            UnitMode::Model => 1.0,
            UnitMode::Game => self.screen_width_px / 100.0,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(EngineError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("sensitivity", self.sensitivity)?;
        positive("max_angle", self.max_angle)?;
        positive("screen_width_px", self.screen_width_px)?;
        if !(self.bump_gain >= 0.0 && self.bump_gain.is_finite()) {
            return Err(EngineError::Config(format!(
                "bump gain must be non-negative, got {}",
                self.bump_gain
            )));
        }
        if !(self.lookbehind >= 0.0) {
            return Err(EngineError::Config("lookbehind must be non-negative".into()));
        }
        Ok(())
    }

    /// Hash over everything that shapes the `(t, x, u)` records for a given
    /// input trace.
    pub fn hash(&self) -> String {
        let text = format!(
            "mode={};k={:e};max_angle={:e};g_w={:e};screen={:e};lookbehind={:e};schedule={}",
            self.mode(),
            self.sensitivity,
            self.max_angle,
            self.bump_gain,
            self.screen_width_px,
            self.lookbehind,
            self.schedule.hash()
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn subject_context(&self) -> SubjectContext {
        SubjectContext {
            mode: self.mode(),
            sensitivity: self.sensitivity,
            max_angle: self.max_angle,
            seed: self.schedule.meta().seed().unwrap_or(0),
        }
    }
}

/// What the subject sees at a tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub seq: u64,
    pub t: f64,
    /// Player position in screen widths (game mode), or the error itself
    /// (model mode).
    pub player: f64,
    /// Visible trail, oldest first. Game mode: vision-quantized positions.
    /// Model mode: the per-tick trail increments.
    pub trail: Vec<TrailSample>,
    pub params: BlockParams,
    pub fitts_zone: Option<FittsZone>,
}

impl Frame {
    /// Newest visible trail sample.
    pub fn newest(&self) -> Option<&TrailSample> {
        self.trail.last()
    }

    /// Visible sample at an exact tick offset from the present.
    pub fn at_offset(&self, offset: i64) -> Option<&TrailSample> {
        let first = self.trail.first()?.offset;
        let idx = offset - first;
        if idx < 0 {
            return None;
        }
        self.trail.get(idx as usize)
    }
}

/// Single-owner session state. Not shared across threads.
#[derive(Debug)]
pub struct Session {
    config: SessionConfig,
    trail: Vec<f64>,
    bumps: Vec<f64>,
    fitts: Option<FittsSchedule>,
    ticks: u64,
    state: PlantState,
    player: f64,
    action_delay: DelayLine,
    records: Vec<LogRecord>,
    input_trace: Vec<f64>,
    diagnostics: Diagnostics,
    subject: String,
    script: Option<String>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let ticks = config.schedule.ticks();
        let fitts = config.schedule.fitts();
        let trail = match &fitts {
            Some(f) => f.centers(ticks as usize),
            None => config.schedule.dense_r(),
        };
        let bumps = config.schedule.dense_w();
        let first = config.schedule.sample(0);
        let action_delay = DelayLine::from_seconds(first.t_act)?;
        let player = match config.mode() {
            UnitMode::Game => trail[0],
            UnitMode::Model => 0.0,
        };
        Ok(Self {
            trail,
            bumps,
            fitts,
            ticks,
            state: PlantState::initial(),
            player,
            action_delay,
            records: Vec::with_capacity(ticks as usize),
            input_trace: Vec::with_capacity(ticks as usize),
            diagnostics: Diagnostics::default(),
            subject: "external".into(),
            script: None,
            config,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn set_subject_label(&mut self, label: impl Into<String>) {
        self.subject = label.into();
    }

    pub fn set_script_path(&mut self, path: impl Into<String>) {
        self.script = Some(path.into());
    }

    pub fn tick_index(&self) -> u64 {
        self.state.t
    }

    pub fn total_ticks(&self) -> u64 {
        self.ticks
    }

    pub fn is_complete(&self) -> bool {
        self.state.t >= self.ticks
    }

    /// Current error in logged units.
    pub fn error(&self) -> f64 {
        self.state.x * self.config.error_scale()
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn note_late_input(&mut self) {
        self.diagnostics.late_input += 1;
    }

    /// View of the current tick: the visible trail segment passed through
    /// the vision quantizer.
    pub fn frame(&mut self) -> Result<Frame, EngineError> {
        let t = self.state.t;
        let row = *self.config.schedule.sample(t);
        let fitts_zone = self
            .fitts
            .as_ref()
            .and_then(|f| f.zone_at(t))
            .copied();
        let trail = if fitts_zone.is_some() {
            Vec::new()
        } else {
            let window = VisionWindow::new(row.t_vis, self.config.lookbehind)?;
            let mut segment = visible_segment(&self.trail, t, &window);
            if self.config.mode() == UnitMode::Game {
                for sample in &mut segment {
                    let q = quantize_vision_unchecked(sample.pos, row.r_vis);
                    if q.clamped {
                        self.diagnostics.clamped_vision += 1;
                    }
                    sample.pos = q.value;
                }
            }
            segment
        };
        let player = match self.config.mode() {
            UnitMode::Game => self.player,
            UnitMode::Model => self.state.x,
        };
        Ok(Frame {
            seq: t,
            t: ticks_to_seconds(t as i64),
            player,
            trail,
            params: row.params(),
            fitts_zone,
        })
    }

    /// Apply a wheel angle for the current tick and step the plant. Returns
    /// `None` once the schedule is exhausted.
    pub fn advance(&mut self, wheel_angle: f64) -> Result<Option<LogRecord>, EngineError> {
        if self.is_complete() {
            return Ok(None);
        }
        let t = self.state.t;
        let row = *self.config.schedule.sample(t);
        let delay_ticks = seconds_to_ticks(row.t_act) as usize;
        if delay_ticks != self.action_delay.delay_ticks() {
            self.action_delay.set_delay_ticks(delay_ticks);
        }
        if wheel_angle.abs() > self.config.max_angle {
            self.diagnostics.clamped_angle += 1;
        }
        self.input_trace.push(wheel_angle);

        let quantizer =
            ActionQuantizer::new(row.r_act, self.config.max_angle, self.config.max_speed())?;
        let u = self.action_delay.push(quantizer.quantize(wheel_angle));

        let idx = t as usize;
        let r = match self.config.mode() {
            UnitMode::Model => self.trail[idx],
            UnitMode::Game => {
                let next = self.trail.get(idx + 1).copied().unwrap_or(self.trail[idx]);
                -(next - self.trail[idx])
            }
        };
        let w = self.bumps[idx] * self.config.bump_gain;

        let record = LogRecord {
            t: ticks_to_seconds(t as i64),
            x: self.state.x * self.config.error_scale(),
            u: u / self.config.sensitivity,
        };
        self.state = step_plant(self.state, StepInputs::new(u, r, w))?;
        self.player += u + w;
        self.records.push(record);
        Ok(Some(record))
    }

    /// `frame` then `advance` with the given angle.
    pub fn tick(&mut self, wheel_angle: f64) -> Result<Option<(Frame, LogRecord)>, EngineError> {
        if self.is_complete() {
            return Ok(None);
        }
        let frame = self.frame()?;
        Ok(self.advance(wheel_angle)?.map(|rec| (frame, rec)))
    }

    fn header(&self, status: SessionStatus) -> LogHeader {
        LogHeader {
            config_hash: self.config.hash(),
            schedule_hash: self.config.schedule.hash(),
            seed: self.config.schedule.meta().seed(),
            prng: self
                .config
                .schedule
                .meta()
                .get("prng")
                .unwrap_or(PRNG_ID)
                .to_string(),
            mode: self.config.mode(),
            error_scale: self.config.error_scale(),
            subject: self.subject.clone(),
            status,
            diagnostics: self.diagnostics.clone(),
            script: self.script.clone(),
        }
    }

    /// Seal the log. Status is complete only if every tick ran.
    pub fn seal(self) -> SessionLog {
        let status = if self.is_complete() {
            SessionStatus::Complete
        } else {
            SessionStatus::Aborted(format!(
                "stopped at tick {} of {}",
                self.state.t, self.ticks
            ))
        };
        self.seal_with(status)
    }

    pub fn seal_with(self, status: SessionStatus) -> SessionLog {
        SessionLog {
            header: self.header(status),
            records: self.records,
            input_trace: self.input_trace,
        }
    }
}

/// Run every tick with a synthetic subject, no wall-clock pacing.
pub fn run_headless(
    config: SessionConfig,
    subject: &mut dyn Subject,
) -> Result<SessionLog, EngineError> {
    let ctx = config.subject_context();
    let mut session = Session::new(config)?;
    session.set_subject_label(subject.label());
    subject.begin(&ctx).map_err(EngineError::SubjectSetup)?;
    while !session.is_complete() {
        let frame = session.frame()?;
        match subject.act(&frame) {
            Ok(angle) => {
                session.advance(angle)?;
            }
            Err(source) => {
                let tick = session.tick_index();
                let partial = session.seal_with(SessionStatus::Aborted(format!(
                    "subject failed at tick {tick}: {source}"
                )));
                return Err(EngineError::Subject {
                    tick,
                    source,
                    partial: Box::new(partial),
                });
            }
        }
    }
    Ok(session.seal())
}

/// Drive a session from a recorded per-tick angle trace.
pub fn run_trace(config: SessionConfig, trace: &[f64]) -> Result<SessionLog, EngineError> {
    let mut session = Session::new(config)?;
    if (trace.len() as u64) < session.total_ticks() {
        return Err(EngineError::TraceLength {
            have: trace.len(),
            need: session.total_ticks(),
        });
    }
    session.set_subject_label("trace");
    for &angle in trace.iter().take(session.total_ticks() as usize) {
        session.advance(angle)?;
    }
    Ok(session.seal())
}

/// Re-run a recorded session from its input trace. The configuration must
/// hash to the values in the log header. Aborted logs replay up to the
/// recorded length.
pub fn replay(log: &SessionLog, config: SessionConfig) -> Result<SessionLog, EngineError> {
    let schedule_hash = config.schedule.hash();
    if schedule_hash != log.header.schedule_hash {
        return Err(EngineError::HashMismatch(format!(
            "schedule hash {} != {}",
            schedule_hash, log.header.schedule_hash
        )));
    }
    let config_hash = config.hash();
    if config_hash != log.header.config_hash {
        return Err(EngineError::HashMismatch(format!(
            "config hash {} != {}",
            config_hash, log.header.config_hash
        )));
    }
    let mut session = Session::new(config)?;
    session.set_subject_label(format!("replay:{}", log.header.subject));
    if let Some(script) = &log.header.script {
        session.set_script_path(script.clone());
    }
    for &angle in &log.input_trace {
        if session.advance(angle)?.is_none() {
            break;
        }
    }
    let mut out = session.seal();
    out.header.diagnostics.late_input = log.header.diagnostics.late_input;
    if !log.is_complete() {
        out.header.status = log.header.status.clone();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::{Metadata, ScheduleRow};
    use crate::subjects::{ConstantAngle, DelayedInverter};

    fn game_schedule(rows: Vec<ScheduleRow>) -> ParameterSchedule {
        ParameterSchedule::new(rows, Metadata::new().with("mode", "game").with("seed", "1")).unwrap()
    }

    fn flat_rows(n: u64, f: impl Fn(u64) -> ScheduleRow) -> Vec<ScheduleRow> {
        (0..n).map(f).collect()
    }

    fn still(tick: u64) -> ScheduleRow {
        ScheduleRow {
            tick,
            r: 0.5,
            w: 0.0,
            r_act: 10,
            t_act: 0.0,
            t_vis: 0.0,
            r_vis: 10,
        }
    }

    #[test]
    fn equilibrium_stays_zero() {
        let sched = ParameterSchedule::model(&vec![0.0; 500], &[], 0, 0).unwrap();
        let log = run_headless(SessionConfig::new(sched), &mut ConstantAngle::new(0.0)).unwrap();
        assert_eq!(log.records.len(), 500);
        // a zero angle maps to the smallest rightward level; with the model
        // defaults that is 1/512 per tick
        let sched = game_schedule(flat_rows(500, still));
        let mut session = Session::new(SessionConfig::new(sched)).unwrap();
        let mut xs = Vec::new();
        while let Some((_, rec)) = session.tick(0.0).unwrap() {
            xs.push(rec.x);
        }
        assert!(xs.iter().all(|x| x.abs() < 0.1), "{:?}", xs.last());
    }

    #[test]
    fn model_equilibrium_with_inverter() {
        let sched = ParameterSchedule::model(&vec![0.0; 300], &[], 0, 0).unwrap();
        let log = run_headless(SessionConfig::new(sched), &mut DelayedInverter::new(0)).unwrap();
        // inverter emits -0 which the action quantizer maps to the first
        // level; zero disturbance still yields a bounded drift
        assert!(log.records.iter().all(|r| r.x.abs() <= 300.0 / 512.0));
    }

    #[test]
    fn action_delay_latency() {
        // angle steps from 0 to +45 at tick 100; T_act = 0.3 s
        let sched = game_schedule(flat_rows(200, |t| ScheduleRow {
            t_act: 0.3,
            ..still(t)
        }));
        let mut session = Session::new(SessionConfig::new(sched)).unwrap();
        let mut recs = Vec::new();
        for t in 0..200u64 {
            let angle = if t >= 100 { 45.0 } else { -45.0 };
            recs.push(session.tick(angle).unwrap().unwrap().1);
        }
        // with -45 held before the change, x moves left steadily; the slope
        // flips sign first between ticks 130 and 131
        let slope = |t: usize| recs[t + 1].x - recs[t].x;
        assert!(slope(129) < 0.0);
        assert!(slope(130) > 0.0);
        assert!(recs[130].u > 0.0 && recs[129].u < 0.0);
        // first tick whose x differs from the pre-change trend
        let trend = recs[100].x - recs[99].x;
        let first = (100..199)
            .find(|&t| ((recs[t + 1].x - recs[t].x) - trend).abs() > 1e-12)
            .unwrap()
            + 1;
        assert_eq!(first, 131);
    }

    #[test]
    fn vision_rate_one_renders_two_columns() {
        let sched = game_schedule(flat_rows(300, |t| ScheduleRow {
            r: 0.1 + 0.8 * (t as f64 / 300.0),
            r_vis: 1,
            t_vis: -1.0,
            ..still(t)
        }));
        let mut session = Session::new(SessionConfig::new(sched)).unwrap();
        while let Some((frame, _)) = session.tick(0.0).unwrap() {
            assert!(!frame.trail.is_empty());
            assert!(frame.trail.iter().all(|s| s.pos == 0.25 || s.pos == 0.75));
        }
    }

    #[test]
    fn fitts_frames_carry_zone() {
        let sched = crate::script::build_game(crate::script::GameId::Fitts, 3).unwrap();
        let mut session = Session::new(SessionConfig::new(sched)).unwrap();
        let (frame, rec) = session.tick(0.0).unwrap().unwrap();
        assert!(frame.trail.is_empty());
        assert_eq!(frame.fitts_zone.unwrap().center, 0.5);
        assert_eq!(rec.x, 0.0);
    }

    #[test]
    fn complete_signal_and_hashes() {
        let sched = game_schedule(flat_rows(5, still));
        let config = SessionConfig::new(sched);
        let mut session = Session::new(config.clone()).unwrap();
        for _ in 0..5 {
            assert!(session.tick(1.0).unwrap().is_some());
        }
        assert!(session.tick(1.0).unwrap().is_none());
        let log = session.seal();
        assert!(log.is_complete());
        assert_eq!(log.header.config_hash, config.hash());
        assert_eq!(log.header.schedule_hash, config.schedule.hash());
    }

    #[test]
    fn replay_rejects_other_schedule() {
        let a = game_schedule(flat_rows(50, still));
        let b = game_schedule(flat_rows(50, |t| ScheduleRow { r: 0.4, ..still(t) }));
        let log = run_headless(SessionConfig::new(a.clone()), &mut ConstantAngle::new(3.0)).unwrap();
        assert_eq!(replay(&log, SessionConfig::new(a.clone())).unwrap().records, log.records);
        assert!(matches!(
            replay(&log, SessionConfig::new(b)),
            Err(EngineError::HashMismatch(_))
        ));
        let other_gain = SessionConfig::new(a).with_sensitivity(2e-5);
        assert!(matches!(replay(&log, other_gain), Err(EngineError::HashMismatch(_))));
    }

    #[test]
    fn bad_config_rejected() {
        let mut c = SessionConfig::new(game_schedule(flat_rows(5, still)));
        c.sensitivity = 0.0;
        assert!(matches!(Session::new(c), Err(EngineError::Config(_))));
    }
}
