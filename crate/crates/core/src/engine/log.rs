//! Session logs: `t,x,u` records plus the per-tick wheel-angle trace needed
//! for exact replay.
//!
//! On disk a log is two CSV files. `<name>.csv` carries `#` header rows and
//! then `t,x,u`; `<name>.inputs.csv` carries `t,angle`. Floats use the
//! shortest decimal that parses back to the same bits, so a written log reads
//! back unchanged.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::plant::UnitMode;

pub const LOG_FORMAT: &str = "wheelcon-log v1";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// One row per tick: time in seconds, error, control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub x: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SessionStatus {
    #[default]
    Complete,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Ticks where no fresh input arrived and the previous angle was held.
    pub late_input: u64,
    /// Trail samples outside [0, 1] before vision quantization.
    pub clamped_vision: u64,
    /// Ticks whose wheel angle exceeded the travel limit.
    pub clamped_angle: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogHeader {
    pub config_hash: String,
    pub schedule_hash: String,
    pub seed: Option<u64>,
    pub prng: String,
    pub mode: UnitMode,
    /// Logged error units per screen width (game mode) or 1 (model mode).
    pub error_scale: f64,
    pub subject: String,
    pub status: SessionStatus,
    pub diagnostics: Diagnostics,
    /// Path of the script the session ran, when known.
    pub script: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
    /// Raw wheel angle fed to the engine at each tick.
    pub input_trace: Vec<f64>,
}

fn format_time(t: f64) -> String {
    format!("{t:.2}")
}

impl SessionLog {
    pub fn is_complete(&self) -> bool {
        self.header.status == SessionStatus::Complete
    }

    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.x).collect()
    }

    pub fn controls(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.u).collect()
    }

    /// The `t,x,u` file.
    pub fn to_csv(&self) -> String {
        let h = &self.header;
        let mut out = String::with_capacity(self.records.len() * 24 + 256);
        let _ = writeln!(out, "# {LOG_FORMAT}");
        let _ = writeln!(out, "# config_hash={}", h.config_hash);
        let _ = writeln!(out, "# schedule_hash={}", h.schedule_hash);
        match h.seed {
            Some(seed) => {
                let _ = writeln!(out, "# seed={seed}");
            }
            None => out.push_str("# seed=none\n"),
        }
        let _ = writeln!(out, "# prng={}", h.prng);
        let _ = writeln!(out, "# mode={} error_scale={}", h.mode, h.error_scale);
        let _ = writeln!(out, "# subject={}", h.subject);
        if let Some(script) = &h.script {
            let _ = writeln!(out, "# script={script}");
        }
        match &h.status {
            SessionStatus::Complete => out.push_str("# status=complete\n"),
            SessionStatus::Aborted(reason) => {
                let _ = writeln!(out, "# status=aborted {}", reason.replace('\n', " "));
            }
        }
        let d = &h.diagnostics;
        let _ = writeln!(
            out,
            "# late_input={} clamped_vision={} clamped_angle={}",
            d.late_input, d.clamped_vision, d.clamped_angle
        );
        out.push_str("t,x,u\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{}", format_time(r.t), r.x, r.u);
        }
        out
    }

    /// The `t,angle` file.
    pub fn inputs_csv(&self) -> String {
        let mut out = String::with_capacity(self.input_trace.len() * 16 + 16);
        out.push_str("t,angle\n");
        for (i, a) in self.input_trace.iter().enumerate() {
            let _ = writeln!(out, "{},{}", format_time(i as f64 / 100.0), a);
        }
        out
    }

    pub fn write_files(&self, path: &Path) -> Result<(), LogError> {
        let io = |p: &Path| {
            let p = p.to_path_buf();
            move |source| LogError::Io { path: p, source }
        };
        fs::write(path, self.to_csv()).map_err(io(path))?;
        let inputs = inputs_path(path);
        fs::write(&inputs, self.inputs_csv()).map_err(io(&inputs))?;
        Ok(())
    }

    /// Read a log and, when present, its input trace.
    pub fn read_files(path: &Path) -> Result<Self, LogError> {
        let text = fs::read_to_string(path).map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut log = Self::parse(&text).map_err(|(line, message)| LogError::Format {
            path: path.to_path_buf(),
            line,
            message,
        })?;
        let inputs = inputs_path(path);
        if inputs.exists() {
            let text = fs::read_to_string(&inputs).map_err(|source| LogError::Io {
                path: inputs.clone(),
                source,
            })?;
            log.input_trace = parse_inputs(&text).map_err(|(line, message)| LogError::Format {
                path: inputs,
                line,
                message,
            })?;
        }
        Ok(log)
    }

    pub fn parse(text: &str) -> Result<Self, (usize, String)> {
        let mut log = SessionLog::default();
        let mut seen_columns = false;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if let Some(rest) = line.strip_prefix('#') {
                parse_header_line(&mut log.header, rest.trim()).map_err(|m| (line_no, m))?;
                continue;
            }
            if !seen_columns {
                if line.trim() != "t,x,u" {
                    return Err((line_no, format!("expected column row `t,x,u`, found {line:?}")));
                }
                seen_columns = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let vals = parse_floats(line, 3).map_err(|m| (line_no, m))?;
            log.records.push(LogRecord {
                t: vals[0],
                x: vals[1],
                u: vals[2],
            });
        }
        if !seen_columns {
            return Err((0, "missing `t,x,u` column row".into()));
        }
        Ok(log)
    }
}

/// `log.csv` -> `log.inputs.csv`.
pub fn inputs_path(log_path: &Path) -> PathBuf {
    let stem = log_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    log_path.with_file_name(format!("{stem}.inputs.csv"))
}

fn parse_floats(line: &str, n: usize) -> Result<Vec<f64>, String> {
    let vals: Vec<f64> = line
        .split(',')
        .map(|f| f.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("{e}: {line:?}"))?;
    if vals.len() != n {
        return Err(format!("expected {n} fields, found {}", vals.len()));
    }
    Ok(vals)
}

fn parse_inputs(text: &str) -> Result<Vec<f64>, (usize, String)> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line.trim() != "t,angle" {
                return Err((1, format!("expected column row `t,angle`, found {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        out.push(parse_floats(line, 2).map_err(|m| (idx + 1, m))?[1]);
    }
    Ok(out)
}

fn parse_header_line(h: &mut LogHeader, text: &str) -> Result<(), String> {
    if text == LOG_FORMAT {
        return Ok(());
    }
    if let Some(reason) = text.strip_prefix("status=aborted") {
        h.status = SessionStatus::Aborted(reason.trim().to_string());
        return Ok(());
    }
    for entry in text.split_whitespace() {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| format!("malformed header entry {entry:?}"))?;
        let count = || value.parse::<u64>().map_err(|e| format!("{key}: {e}"));
        match key {
            "config_hash" => h.config_hash = value.to_string(),
            "schedule_hash" => h.schedule_hash = value.to_string(),
            "seed" => h.seed = value.parse().ok(),
            "prng" => h.prng = value.to_string(),
            "mode" => h.mode = value.parse()?,
            "error_scale" => {
                h.error_scale = value.parse().map_err(|e| format!("error_scale: {e}"))?
            }
            "subject" => h.subject = value.to_string(),
            "script" => h.script = Some(value.to_string()),
            "status" if value == "complete" => h.status = SessionStatus::Complete,
            "late_input" => h.diagnostics.late_input = count()?,
            "clamped_vision" => h.diagnostics.clamped_vision = count()?,
            "clamped_angle" => h.diagnostics.clamped_angle = count()?,
            // unknown keys are carried by newer writers; ignore
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SessionLog {
        SessionLog {
            header: LogHeader {
                config_hash: "abc".into(),
                schedule_hash: "def".into(),
                seed: Some(9),
                prng: crate::rng::PRNG_ID.into(),
                mode: UnitMode::Game,
                error_scale: 19.2,
                subject: "noisy-human:sd=2".into(),
                status: SessionStatus::Aborted("subject failed: boom".into()),
                diagnostics: Diagnostics {
                    late_input: 3,
                    clamped_vision: 0,
                    clamped_angle: 1,
                },
                script: Some("game5.txt".into()),
            },
            records: vec![
                LogRecord { t: 0.0, x: 0.0, u: 0.0 },
                LogRecord { t: 0.01, x: 0.1 + 0.2, u: -1.0 / 3.0 },
            ],
            input_trace: vec![0.0, 12.345678901234],
        }
    }

    #[test]
    fn csv_layout() {
        let text = sample().to_csv();
        assert!(text.starts_with("# wheelcon-log v1\n# config_hash=abc\n"));
        assert!(text.contains("\nt,x,u\n0.00,0,0\n0.01,0.30000000000000004,-0.3333333333333333\n"));
    }

    #[test]
    fn files_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let log = sample();
        log.write_files(&path).unwrap();
        assert!(dir.path().join("run.inputs.csv").exists());
        assert_eq!(SessionLog::read_files(&path).unwrap(), log);
    }

    #[test]
    fn rejects_garbage() {
        assert!(SessionLog::parse("t,x,u\n0.00,abc,0\n").is_err());
        assert!(SessionLog::parse("0.00,0,0\n").is_err());
        assert!(SessionLog::parse("# mode=warp\nt,x,u\n").is_err());
    }
}
