//! Experiment scripts: one CSV row per time stamp,
//! `time,r,w,R_act,T_act,T_vis,R_vis`, with an optional leading `#` line of
//! `key=value` metadata.
//!
//! Every value in a [`ParameterSchedule`] is stored in its canonical form
//! (at most six significant digits, times on the 10 ms grid), so writing and
//! re-parsing a schedule reproduces it exactly.

mod games;

use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::disturbance::{DisturbanceError, FittsSchedule, FittsZone};
use crate::plant::UnitMode;
use crate::signal::{ticks_to_seconds, TICKS_PER_SECOND};

pub use games::{
    build_game, build_game_with, BuildOptions, GameId, GAME1_ADVANCE_WARNINGS, GAME2_ACTION_DELAYS, GAME5_SCENARIOS,
    REST_LABEL,
};

pub const FIELD_COUNT: usize = 7;
pub const FIELD_NAMES: [&str; FIELD_COUNT] = ["time", "r", "w", "R_act", "T_act", "T_vis", "R_vis"];
pub const MAX_BUMP: f64 = 100.0;

/// A Table-1 style range violation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Constraint {
    #[error("time {0} s is negative")]
    NegativeTime(f64),
    #[error("time {0} s is not a multiple of 10 ms")]
    TimeOffTick(f64),
    #[error("trail value {0} out of range for {1} mode")]
    Trail(f64, UnitMode),
    #[error("bump {0} exceeds |w| <= 100")]
    Bump(f64),
    #[error("action rate {0} not an integer in 1..=10 bits")]
    ActionRate(f64),
    #[error("action delay {0} s is negative")]
    ActionDelay(f64),
    #[error("vision delay {0} s outside [-1, 1)")]
    VisionDelay(f64),
    #[error("vision rate {0} not an integer in 1..=10 bits")]
    VisionRate(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScriptError {
    #[error("line {line}: expected {FIELD_COUNT} fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: field `{field}` is not a number: {text:?}")]
    NonNumeric {
        line: usize,
        field: &'static str,
        text: String,
    },
    #[error("line {line}: time {time} s does not follow {previous} s")]
    NonMonotonicTime { line: usize, time: f64, previous: f64 },
    #[error("line {line}: {violation}")]
    Constraint { line: usize, violation: Constraint },
    #[error("line {line}: malformed metadata entry {entry:?}")]
    BadHeader { line: usize, entry: String },
    #[error("line {line}: metadata header must be the first line")]
    MisplacedHeader { line: usize },
    #[error("schedule has no rows")]
    Empty,
    #[error("disturbance generator: {0}")]
    Generator(#[from] DisturbanceError),
}

/// Round to six significant digits, the precision of the script format.
pub fn canonical(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Text form of a canonical value: shortest round-trip decimal, never an
/// exponent, never a locale separator.
pub fn format_value(x: f64) -> String {
    format!("{}", canonical(x))
}

fn format_time(tick: u64) -> String {
    format!("{}.{:02}", tick / 100, tick % 100)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleRow {
    pub tick: u64,
    /// Trail position (game mode) or trail increment (model mode).
    pub r: f64,
    /// Bump force.
    pub w: f64,
    pub r_act: u32,
    /// Action delay, seconds.
    pub t_act: f64,
    /// Vision delay, seconds; negative is advance warning.
    pub t_vis: f64,
    pub r_vis: u32,
}

impl ScheduleRow {
    pub fn time(&self) -> f64 {
        ticks_to_seconds(self.tick as i64)
    }

    fn canonicalize(mut self) -> Self {
        self.r = canonical(self.r);
        self.w = canonical(self.w);
        self.t_act = canonical(self.t_act);
        self.t_vis = canonical(self.t_vis);
        self
    }

    /// The experiment parameters, ignoring the per-tick disturbances.
    pub fn params(&self) -> BlockParams {
        BlockParams {
            r_act: self.r_act,
            t_act: self.t_act,
            t_vis: self.t_vis,
            r_vis: self.r_vis,
        }
    }

    fn validate(&self, mode: UnitMode) -> Result<(), Constraint> {
        let trail_ok = match mode {
            UnitMode::Game => (0.0..=1.0).contains(&self.r),
            UnitMode::Model => self.r.abs() <= 1.0,
        };
        if !trail_ok {
            return Err(Constraint::Trail(self.r, mode));
        }
        if !(self.w.abs() <= MAX_BUMP) {
            return Err(Constraint::Bump(self.w));
        }
        if !(1..=10).contains(&self.r_act) {
            return Err(Constraint::ActionRate(self.r_act as f64));
        }
        if !(self.t_act >= 0.0 && self.t_act.is_finite()) {
            return Err(Constraint::ActionDelay(self.t_act));
        }
        if !(-1.0..1.0).contains(&self.t_vis) {
            return Err(Constraint::VisionDelay(self.t_vis));
        }
        if !(1..=10).contains(&self.r_vis) {
            return Err(Constraint::VisionRate(self.r_vis as f64));
        }
        Ok(())
    }
}

/// Step-valued experiment parameters active during a tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockParams {
    pub r_act: u32,
    pub t_act: f64,
    pub t_vis: f64,
    pub r_vis: u32,
}

/// Half-open tick range `[start, end)` of constant parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub start: u64,
    pub end: u64,
    pub params: BlockParams,
    pub label: Option<String>,
}

impl Block {
    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Ordered `key=value` pairs from the header line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Insert or replace. Keys and values must not contain whitespace or `=`
    /// in keys.
    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        debug_assert!(!key.contains(char::is_whitespace) && !key.contains('='));
        debug_assert!(!value.contains(char::is_whitespace));
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.set(key, value);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn mode(&self) -> UnitMode {
        self.get("mode")
            .and_then(|m| m.parse().ok())
            .unwrap_or_default()
    }

    pub fn seed(&self) -> Option<u64> {
        self.get("seed").and_then(|s| s.parse().ok())
    }

    /// Labelled block starts from the `blocks` entry, as `(tick, label)`.
    pub fn blocks(&self) -> Option<Vec<(u64, String)>> {
        let raw = self.get("blocks")?;
        raw.split(';')
            .map(|item| {
                let (time, label) = item.split_once(':')?;
                Some((parse_tick(time.parse().ok()?)?, label.to_string()))
            })
            .collect()
    }

    pub fn set_blocks(&mut self, blocks: &[(u64, &str)]) {
        let value = blocks
            .iter()
            .map(|(tick, label)| format!("{}:{}", format_time(*tick), label))
            .collect::<Vec<_>>()
            .join(";");
        self.set("blocks", value);
    }

    /// Fitts zone sequence from the `zones` entry.
    pub fn fitts(&self) -> Option<FittsSchedule> {
        let raw = self.get("zones")?;
        let jumps = raw
            .split(';')
            .map(|item| {
                let mut parts = item.split(':');
                let tick = parse_tick(parts.next()?.parse().ok()?)?;
                let center = parts.next()?.parse().ok()?;
                let width = parts.next()?.parse().ok()?;
                Some(FittsZone {
                    tick,
                    center,
                    width,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(FittsSchedule { jumps })
    }

    pub fn set_fitts(&mut self, fitts: &FittsSchedule) {
        let value = fitts
            .jumps
            .iter()
            .map(|z| {
                format!(
                    "{}:{}:{}",
                    format_time(z.tick),
                    format_value(z.center),
                    format_value(z.width)
                )
            })
            .collect::<Vec<_>>()
            .join(";");
        self.set("zones", value);
    }

    fn parse(line_no: usize, text: &str) -> Result<Self, ScriptError> {
        let mut meta = Metadata::new();
        for entry in text.split_whitespace() {
            match entry.split_once('=') {
                Some((k, v)) if !k.is_empty() => meta.set(k, v),
                _ => {
                    return Err(ScriptError::BadHeader {
                        line: line_no,
                        entry: entry.to_string(),
                    })
                }
            }
        }
        Ok(meta)
    }
}

fn parse_tick(seconds: f64) -> Option<u64> {
    let ticks = seconds * TICKS_PER_SECOND;
    let rounded = ticks.round();
    if seconds < 0.0 || (ticks - rounded).abs() > 1e-6 {
        return None;
    }
    Some(rounded as u64)
}

/// Validated, time-ordered rows plus metadata. Immutable once built.
#[derive(Debug, Clone)]
pub struct ParameterSchedule {
    rows: Vec<ScheduleRow>,
    meta: Metadata,
    hash: std::sync::OnceLock<String>,
}

impl PartialEq for ParameterSchedule {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.meta == other.meta
    }
}

impl ParameterSchedule {
    pub fn new(rows: Vec<ScheduleRow>, meta: Metadata) -> Result<Self, ScriptError> {
        if rows.is_empty() {
            return Err(ScriptError::Empty);
        }
        let mode = meta.mode();
        let rows: Vec<ScheduleRow> = rows.into_iter().map(ScheduleRow::canonicalize).collect();
        let offset = if meta.is_empty() { 1 } else { 2 };
        for (i, row) in rows.iter().enumerate() {
            let line = i + offset;
            if i > 0 && row.tick <= rows[i - 1].tick {
                return Err(ScriptError::NonMonotonicTime {
                    line,
                    time: row.time(),
                    previous: rows[i - 1].time(),
                });
            }
            row.validate(mode)
                .map_err(|violation| ScriptError::Constraint { line, violation })?;
        }
        Ok(Self {
            rows,
            meta,
            hash: std::sync::OnceLock::new(),
        })
    }

    /// Model-mode schedule with one row per tick: `r` and `w` are the
    /// per-tick increments, parameters fixed for the whole run.
    pub fn model(
        r: &[f64],
        w: &[f64],
        t_act_ticks: u32,
        seed: u64,
    ) -> Result<Self, ScriptError> {
        let rows = r
            .iter()
            .enumerate()
            .map(|(i, &r)| ScheduleRow {
                tick: i as u64,
                r,
                w: w.get(i).copied().unwrap_or(0.0),
                r_act: 10,
                t_act: ticks_to_seconds(t_act_ticks as i64),
                t_vis: 0.0,
                r_vis: 10,
            })
            .collect();
        let meta = Metadata::new()
            .with("game", "model")
            .with("seed", seed.to_string())
            .with("prng", crate::rng::PRNG_ID)
            .with("mode", "model");
        Self::new(rows, meta)
    }

    /// The first `ticks` ticks of this schedule, metadata kept.
    pub fn truncated(&self, ticks: u64) -> Result<Self, ScriptError> {
        let mut rows: Vec<ScheduleRow> = self.rows.iter().filter(|r| r.tick < ticks).copied().collect();
        if ticks > 0 && rows.last().is_some_and(|r| r.tick + 1 < ticks) {
            let mut held = *self.sample(ticks - 1);
            held.tick = ticks - 1;
            rows.push(held);
        }
        Self::new(rows, self.meta.clone())
    }

    pub fn rows(&self) -> &[ScheduleRow] {
        &self.rows
    }

    pub fn meta(&self) -> &Metadata {
        &self.meta
    }

    pub fn mode(&self) -> UnitMode {
        self.meta.mode()
    }

    /// Number of ticks covered, from tick 0 through the last stamp.
    pub fn ticks(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.tick + 1)
    }

    pub fn duration(&self) -> f64 {
        ticks_to_seconds(self.ticks() as i64)
    }

    /// Previous-row hold; before the first stamp the first row applies.
    pub fn sample(&self, tick: u64) -> &ScheduleRow {
        let idx = self.rows.partition_point(|r| r.tick <= tick);
        &self.rows[idx.saturating_sub(1)]
    }

    pub fn sample_time(&self, seconds: f64) -> &ScheduleRow {
        self.sample((seconds.max(0.0) * TICKS_PER_SECOND + 1e-6).floor() as u64)
    }

    /// Held `r` value at every tick.
    pub fn dense_r(&self) -> Vec<f64> {
        self.dense(|row| row.r)
    }

    pub fn dense_w(&self) -> Vec<f64> {
        self.dense(|row| row.w)
    }

    fn dense(&self, field: impl Fn(&ScheduleRow) -> f64) -> Vec<f64> {
        let n = self.ticks() as usize;
        let mut out = Vec::with_capacity(n);
        let mut idx = 0;
        for t in 0..n as u64 {
            while idx + 1 < self.rows.len() && self.rows[idx + 1].tick <= t {
                idx += 1;
            }
            out.push(field(&self.rows[idx]));
        }
        out
    }

    pub fn fitts(&self) -> Option<FittsSchedule> {
        self.meta.fitts()
    }

    /// Maximal runs of constant experiment parameters, or the labelled
    /// segments of the `blocks` header entry when present.
    pub fn blocks(&self) -> Vec<Block> {
        let end = self.ticks();
        if let Some(labels) = self.meta.blocks() {
            return labels
                .iter()
                .enumerate()
                .map(|(i, (start, label))| {
                    let stop = labels.get(i + 1).map_or(end, |(next, _)| *next).min(end);
                    Block {
                        start: *start,
                        end: stop,
                        params: self.sample(*start).params(),
                        label: Some(label.clone()),
                    }
                })
                .filter(|b| b.start < b.end)
                .collect();
        }
        let mut out: Vec<Block> = Vec::new();
        for row in &self.rows {
            let params = row.params();
            match out.last_mut() {
                Some(block) if block.params == params => {}
                _ => {
                    if let Some(block) = out.last_mut() {
                        block.end = row.tick;
                    }
                    out.push(Block {
                        start: if out.is_empty() { 0 } else { row.tick },
                        end,
                        params,
                        label: None,
                    });
                }
            }
        }
        out
    }

    /// SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        self.hash
            .get_or_init(|| hex::encode(Sha256::digest(write_script(self).as_bytes())))
            .clone()
    }
}

pub fn parse_script(text: &str) -> Result<ParameterSchedule, ScriptError> {
    let mut meta = Metadata::new();
    let mut rows = Vec::new();
    let mut seen_content = false;
    let mut last: Option<(u64, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(header) = trimmed.strip_prefix('#') {
            if seen_content {
                return Err(ScriptError::MisplacedHeader { line });
            }
            meta = Metadata::parse(line, header)?;
            seen_content = true;
            continue;
        }
        seen_content = true;
        let row = parse_row(line, trimmed, meta.mode())?;
        if let Some((prev, _)) = last {
            if row.tick <= prev {
                return Err(ScriptError::NonMonotonicTime {
                    line,
                    time: row.time(),
                    previous: ticks_to_seconds(prev as i64),
                });
            }
        }
        last = Some((row.tick, line));
        rows.push(row);
    }
    ParameterSchedule::new(rows, meta)
}

fn parse_row(line: usize, text: &str, mode: UnitMode) -> Result<ScheduleRow, ScriptError> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if fields.len() != FIELD_COUNT {
        return Err(ScriptError::FieldCount {
            line,
            found: fields.len(),
        });
    }
    let mut values = [0.0f64; FIELD_COUNT];
    for (i, field) in fields.iter().enumerate() {
        values[i] = field
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ScriptError::NonNumeric {
                line,
                field: FIELD_NAMES[i],
                text: field.to_string(),
            })?;
    }
    let [time, r, w, r_act, t_act, t_vis, r_vis] = values;
    let constraint = |violation| ScriptError::Constraint { line, violation };
    if time < 0.0 {
        return Err(constraint(Constraint::NegativeTime(time)));
    }
    let tick = parse_tick(time).ok_or_else(|| constraint(Constraint::TimeOffTick(time)))?;
    let rate = |v: f64, err: fn(f64) -> Constraint| {
        if v.fract() == 0.0 && (1.0..=10.0).contains(&v) {
            Ok(v as u32)
        } else {
            Err(constraint(err(v)))
        }
    };
    let row = ScheduleRow {
        tick,
        r,
        w,
        r_act: rate(r_act, Constraint::ActionRate)?,
        t_act,
        t_vis,
        r_vis: rate(r_vis, Constraint::VisionRate)?,
    };
    row.validate(mode).map_err(constraint)?;
    Ok(row)
}

/// Canonical text: header (if any metadata), then one LF-terminated row per
/// stamp.
pub fn write_script(sched: &ParameterSchedule) -> String {
    let mut out = String::with_capacity(sched.rows.len() * 32);
    if !sched.meta.is_empty() {
        out.push('#');
        for (k, v) in sched.meta.iter() {
            let _ = write!(out, " {k}={v}");
        }
        out.push('\n');
    }
    for row in &sched.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            format_time(row.tick),
            format_value(row.r),
            format_value(row.w),
            row.r_act,
            format_value(row.t_act),
            format_value(row.t_vis),
            row.r_vis
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(tick: u64) -> ScheduleRow {
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
    fn parses_direct_field_mapping() {
        let s = parse_script("0.01,0.6,10,4,0.15,0.2,5\n").unwrap();
        assert_eq!(
            s.rows()[0],
            ScheduleRow {
                tick: 1,
                r: 0.6,
                w: 10.0,
                r_act: 4,
                t_act: 0.15,
                t_vis: 0.2,
                r_vis: 5
            }
        );
    }

    #[test]
    fn rejects_six_field_example_with_line_number() {
        let err = parse_script("# game=1\n0.01,6,10,-1,30,0.2\n").unwrap_err();
        assert_eq!(err, ScriptError::FieldCount { line: 2, found: 6 });
        assert_eq!(err.to_string(), "line 2: expected 7 fields, found 6");
    }

    #[test]
    fn rejects_equal_times() {
        let err = parse_script("0.00,0.5,0,10,0,0,10\n0.00,0.5,0,10,0,0,10\n").unwrap_err();
        assert!(matches!(err, ScriptError::NonMonotonicTime { line: 2, .. }));
    }

    #[test]
    fn rejects_non_numeric() {
        let err = parse_script("0.00,abc,0,10,0,0,10\n").unwrap_err();
        assert!(matches!(
            err,
            ScriptError::NonNumeric {
                line: 1,
                field: "r",
                ..
            }
        ));
    }

    #[test]
    fn each_constraint_has_its_own_kind() {
        let cases = [
            ("0.005,0.5,0,10,0,0,10", Constraint::TimeOffTick(0.005)),
            ("-0.01,0.5,0,10,0,0,10", Constraint::NegativeTime(-0.01)),
            ("0.00,1.5,0,10,0,0,10", Constraint::Trail(1.5, UnitMode::Game)),
            ("0.00,0.5,101,10,0,0,10", Constraint::Bump(101.0)),
            ("0.00,0.5,0,11,0,0,10", Constraint::ActionRate(11.0)),
            ("0.00,0.5,0,0,0,0,10", Constraint::ActionRate(0.0)),
            ("0.00,0.5,0,2.5,0,0,10", Constraint::ActionRate(2.5)),
            ("0.00,0.5,0,10,-0.1,0,10", Constraint::ActionDelay(-0.1)),
            ("0.00,0.5,0,10,0,1,10", Constraint::VisionDelay(1.0)),
            ("0.00,0.5,0,10,0,-1.5,10", Constraint::VisionDelay(-1.5)),
            ("0.00,0.5,0,10,0,0,0", Constraint::VisionRate(0.0)),
            ("0.00,0.5,0,10,0,0,12", Constraint::VisionRate(12.0)),
        ];
        for (text, expected) in cases {
            match parse_script(text) {
                Err(ScriptError::Constraint { line: 1, violation }) => {
                    assert_eq!(violation, expected, "{text}")
                }
                other => panic!("{text}: {other:?}"),
            }
        }
        // model mode accepts signed trail increments
        assert!(parse_script("# mode=model\n0.00,-1,0,10,0,0,10\n").is_ok());
        assert!(parse_script("# mode=model\n0.00,-1.5,0,10,0,0,10\n").is_err());
        // boundary values are legal
        assert!(parse_script("0.00,0,-100,1,0,-1,1\n0.01,1,100,10,5,0.99,10\n").is_ok());
    }

    #[test]
    fn header_rules() {
        let s = parse_script("# game=2 seed=7 prng=x\n0.00,0.5,0,10,0,0,10\n").unwrap();
        assert_eq!(s.meta().get("seed"), Some("7"));
        assert!(matches!(
            parse_script("0.00,0.5,0,10,0,0,10\n# late=1\n"),
            Err(ScriptError::MisplacedHeader { line: 2 })
        ));
        assert!(matches!(
            parse_script("# novalue\n0.00,0.5,0,10,0,0,10\n"),
            Err(ScriptError::BadHeader { .. })
        ));
        assert_eq!(parse_script("# game=1\n"), Err(ScriptError::Empty));
    }

    #[test]
    fn sample_hold_semantics() {
        let mut a = row(0);
        a.r = 0.1;
        let mut b = row(50);
        b.r = 0.9;
        let s = ParameterSchedule::new(vec![a, b], Metadata::new()).unwrap();
        assert_eq!(s.sample_time(0.30).r, 0.1);
        assert_eq!(s.sample_time(0.50).r, 0.9);
        assert_eq!(s.sample_time(12.0).r, 0.9);

        let late = ParameterSchedule::new(vec![row(20)], Metadata::new()).unwrap();
        assert_eq!(late.sample(0).tick, 20);
        assert_eq!(late.dense_r().len(), 21);
    }

    #[test]
    fn write_format_is_canonical() {
        let mut r = row(1234);
        r.r = 0.123456789;
        r.w = -37.5;
        r.t_vis = -0.75;
        let s = ParameterSchedule::new(vec![r], Metadata::new().with("game", "x")).unwrap();
        assert_eq!(write_script(&s), "# game=x\n12.34,0.123457,-37.5,10,0,-0.75,10\n");
        assert_eq!(format_value(1e-7), "0.0000001");
        assert_eq!(format_value(-0.0), "0");
        assert_eq!(format_value(123456789.0), "123457000");
    }

    #[test]
    fn write_parse_canonicalizes_idempotently() {
        let text = "# a=1\n0.1,0.1234567,1.00,3,0.150,-0.2,4\n";
        let once = write_script(&parse_script(text).unwrap());
        let twice = write_script(&parse_script(&once).unwrap());
        assert_eq!(once, twice);
        assert_eq!(once, "# a=1\n0.10,0.123457,1,3,0.15,-0.2,4\n");
    }

    #[test]
    fn truncation_keeps_prefix_and_holds_last_row() {
        let text = "0.00,0.5,0,10,0,0,10\n1.00,0.6,0,10,0,0,10\n";
        let s = parse_script(text).unwrap();
        let t = s.truncated(50).unwrap();
        assert_eq!(t.ticks(), 50);
        assert_eq!(t.sample(49).r, 0.5);
        let g = crate::script::build_game(crate::script::GameId::VisionDelay, 1).unwrap();
        let short = g.truncated(700).unwrap();
        assert_eq!(short.dense_r(), g.dense_r()[..700].to_vec());
        assert_eq!(short.blocks().len(), 1);
    }

    proptest! {
        #[test]
        fn parse_write_identity(
            vals in prop::collection::vec((0.0f64..=1.0, -100.0f64..=100.0, 1u32..=10, 0.0f64..3.0, -1.0f64..0.999, 1u32..=10), 1..30),
            gaps in prop::collection::vec(1u64..500, 30),
        ) {
            let mut tick = 0;
            let rows: Vec<ScheduleRow> = vals.iter().zip(&gaps).map(|(&(r, w, r_act, t_act, t_vis, r_vis), &gap)| {
                tick += gap;
                ScheduleRow { tick, r, w, r_act, t_act, t_vis, r_vis }
            }).collect();
            let sched = ParameterSchedule::new(rows, Metadata::new().with("seed", "3")).unwrap();
            let parsed = parse_script(&write_script(&sched)).unwrap();
            prop_assert_eq!(parsed, sched);
        }
    }
}
