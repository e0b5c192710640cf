//! Error norms, per-block summaries and Fitts movement times.
//!
//! `L1` and `L2` are the time-averaged forms: `mean |x|` and
//! `sqrt(mean x^2)`. Reports label them `L1-mean` and `L2-rms`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::SessionLog;
use crate::script::{Block, ParameterSchedule};
use crate::signal::{seconds_to_ticks, ticks_to_seconds};

pub const DEFAULT_TRIM_SECONDS: f64 = 5.0;
pub const REPORT_COLUMNS: &str = "block,param,L1,L2,Linf,n";

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("norms of an empty sequence are undefined")]
    Empty,
    #[error("trim must be a non-negative number of seconds, got {0}")]
    BadTrim(f64),
    #[error("log was recorded against schedule {log}, not {schedule}")]
    ScheduleMismatch { log: String, schedule: String },
    #[error("schedule has no Fitts zones")]
    NotFitts,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

impl Norms {
    pub fn get(&self, which: NormKind) -> f64 {
        match which {
            NormKind::L1 => self.l1,
            NormKind::L2 => self.l2,
            NormKind::Linf => self.linf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::Linf];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::L1 => "L1",
            NormKind::L2 => "L2",
            NormKind::Linf => "Linf",
        }
    }
}

pub fn norms(x: &[f64]) -> Result<Norms, AnalysisError> {
    if x.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let n = x.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut linf = 0.0f64;
    let mut floor = f64::INFINITY;
    for &v in x {
        abs_sum += v.abs();
        sq_sum += v * v;
        linf = linf.max(v.abs());
        floor = floor.min(v.abs());
    }
    // both means lie in [min|x|, max|x|]; clamping keeps last-bit rounding
    // from breaking the chain or the constant-signal case
    let l2 = (sq_sum / n).sqrt().clamp(floor, linf);
    let l1 = (abs_sum / n).clamp(floor, l2);
    Ok(Norms { l1, l2, linf })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormRow {
    pub block: usize,
    /// Swept parameter value, or the scenario label.
    pub param: String,
    pub norms: Norms,
    pub n: usize,
    /// Block shorter than twice the trim (or cut short by an aborted
    /// session): norms cover whatever the block has, untrimmed.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    /// Name of the swept parameter (`T_vis`, `T_act`, `R_vis`, `R_act`,
    /// `scenario`).
    pub param_name: String,
    pub trim_seconds: f64,
    pub rows: Vec<NormRow>,
}

impl NormReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# L1 = L1-mean (mean |x|), L2 = L2-rms (sqrt of mean x^2), Linf = max |x|; param = {}; trim = {} s",
            self.param_name, self.trim_seconds
        );
        let flagged: Vec<String> = self
            .rows
            .iter()
            .filter(|r| r.flagged)
            .map(|r| r.block.to_string())
            .collect();
        if !flagged.is_empty() {
            let _ = writeln!(out, "# untrimmed short blocks: {}", flagged.join(" "));
        }
        out.push_str(REPORT_COLUMNS);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.block, r.param, r.norms.l1, r.norms.l2, r.norms.linf, r.n
            );
        }
        out
    }

    pub fn row(&self, param: &str) -> Option<&NormRow> {
        self.rows.iter().find(|r| r.param == param)
    }
}

pub fn export_report(report: &NormReport, path: &Path) -> Result<(), AnalysisError> {
    fs::write(path, report.to_csv()).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write a log and its input trace (`t,x,u` and `t,angle`).
pub fn export_log(log: &SessionLog, path: &Path) -> Result<(), AnalysisError> {
    log.write_files(path).map_err(|e| match e {
        crate::engine::LogError::Io { path, source } => AnalysisError::Io { path, source },
        other => AnalysisError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(other.to_string()),
        },
    })
}

fn swept_parameter(blocks: &[Block]) -> (&'static str, fn(&Block) -> String) {
    if blocks.iter().any(|b| b.label.is_some()) {
        return ("scenario", |b| b.label.clone().unwrap_or_default());
    }
    let candidates: [(&'static str, fn(&Block) -> String); 4] = [
        ("T_vis", |b| b.params.t_vis.to_string()),
        ("T_act", |b| b.params.t_act.to_string()),
        ("R_vis", |b| b.params.r_vis.to_string()),
        ("R_act", |b| b.params.r_act.to_string()),
    ];
    for (name, f) in candidates {
        if blocks.windows(2).any(|w| f(&w[0]) != f(&w[1])) {
            return (name, f);
        }
    }
    candidates[0]
}

/// Norms over each constant-parameter block, `trim_seconds` cut from both
/// ends.
pub fn block_norms(
    log: &SessionLog,
    sched: &ParameterSchedule,
    trim_seconds: f64,
) -> Result<NormReport, AnalysisError> {
    if !(trim_seconds >= 0.0 && trim_seconds.is_finite()) {
        return Err(AnalysisError::BadTrim(trim_seconds));
    }
    if !log.header.schedule_hash.is_empty() && log.header.schedule_hash != sched.hash() {
        return Err(AnalysisError::ScheduleMismatch {
            log: log.header.schedule_hash.clone(),
            schedule: sched.hash(),
        });
    }
    let trim = seconds_to_ticks(trim_seconds) as u64;
    let blocks = sched.blocks();
    let (param_name, param_of) = swept_parameter(&blocks);
    let recorded = log.records.len() as u64;
    let mut rows = Vec::new();
    for (id, block) in blocks.iter().enumerate() {
        let end = block.end.min(recorded);
        if block.start >= end {
            continue;
        }
        let truncated = end < block.end;
        let short = block.len() <= 2 * trim;
        let (lo, hi, flagged) = if short || truncated {
            (block.start, end, true)
        } else {
            (block.start + trim, block.end - trim, false)
        };
        let xs: Vec<f64> = log.records[lo as usize..hi as usize].iter().map(|r| r.x).collect();
        rows.push(NormRow {
            block: id,
            param: param_of(block),
            norms: norms(&xs)?,
            n: xs.len(),
            flagged,
        });
    }
    Ok(NormReport {
        param_name: param_name.to_string(),
        trim_seconds,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementTime {
    pub jump: usize,
    pub jump_time: f64,
    /// Seconds from the jump to the first tick the bar is inside the zone;
    /// `None` when it never got there before the next jump.
    pub mt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementSummary {
    pub trials: usize,
    pub censored: usize,
    /// Mean over uncensored trials.
    pub mean: Option<f64>,
}

impl MovementSummary {
    pub fn censoring_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.censored as f64 / self.trials as f64
        }
    }
}

/// Movement time for every zone jump (the initial zone is not a jump).
pub fn movement_times(log: &SessionLog, sched: &ParameterSchedule) -> Result<Vec<MovementTime>, AnalysisError> {
    let fitts = sched.fitts().ok_or(AnalysisError::NotFitts)?;
    let scale = if log.header.error_scale > 0.0 {
        log.header.error_scale
    } else {
        1.0
    };
    let recorded = log.records.len() as u64;
    let mut out = Vec::new();
    for (i, zone) in fitts.jumps.iter().enumerate().skip(1) {
        if zone.tick >= recorded {
            break;
        }
        let until = fitts.jumps.get(i + 1).map_or(recorded, |z| z.tick).min(recorded);
        let half = zone.width / 2.0;
        let entry = (zone.tick..until).find(|&t| (log.records[t as usize].x / scale).abs() <= half);
        out.push(MovementTime {
            jump: i,
            jump_time: zone.time(),
            mt: entry.map(|t| ticks_to_seconds((t - zone.tick) as i64)),
        });
    }
    Ok(out)
}

pub fn summarize_movements(mts: &[MovementTime]) -> MovementSummary {
    let done: Vec<f64> = mts.iter().filter_map(|m| m.mt).collect();
    MovementSummary {
        trials: mts.len(),
        censored: mts.len() - done.len(),
        mean: (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64),
    }
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation, ties given their average rank. `None` for
/// fewer than two points or a constant input.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}
