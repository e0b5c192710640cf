//! The `wheelcon` command line.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::analysis::{block_norms, movement_times, summarize_movements, DEFAULT_TRIM_SECONDS};
use crate::engine::{replay, run_headless, SessionConfig, SessionLog};
use crate::script::{build_game, parse_script, write_script, GameId, ParameterSchedule};
use crate::service::{Pace, ServeOptions, Server};
use crate::subjects::SubjectSpec;
use crate::verify::{trend_checks, verify_delay, verify_rate};

#[derive(Debug, Parser)]
#[command(name = "wheelcon", version, about = "Sensorimotor tracking testbed: scripts, sessions, checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the schedule of a canonical game.
    Gen {
        /// 1..5 or fitts
        #[arg(long)]
        game: GameId,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play a script headless with a synthetic subject.
    Run {
        #[arg(long)]
        script: PathBuf,
        /// e.g. `delayed-inverter:T=0.1`, `quantized-greedy`,
        /// `noisy-human:sd=2,delay=0.3`, `constant:angle=10`
        #[arg(long, default_value = "noisy-human")]
        subject: SubjectSpec,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        plant: PlantArgs,
    },
    /// Theory checks.
    Verify {
        #[command(subcommand)]
        check: VerifyCommand,
    },
    /// Host live sessions over a WebSocket.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value = "session.csv")]
        out: PathBuf,
        /// Advance on client acknowledgement instead of the 100 Hz clock.
        #[arg(long)]
        lockstep: bool,
        /// Stop after this many sessions.
        #[arg(long)]
        sessions: Option<usize>,
        #[command(flatten)]
        plant: PlantArgs,
    },
    /// Re-run a recorded log from its input trace and compare.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Defaults to the script named in the log header.
        #[arg(long)]
        script: Option<PathBuf>,
        #[command(flatten)]
        plant: PlantArgs,
    },
    /// Per-block error norms of a log.
    Analyze {
        log: PathBuf,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TRIM_SECONDS)]
        trim: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Delayed inverse policy against worst-case and square-wave disturbances.
    Delay {
        #[arg(long = "max-T", default_value_t = 10)]
        max_t: u32,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 2000)]
        ticks: usize,
    },
    /// Exhaustive minimax value against the rate lower bound.
    Rate {
        #[arg(long = "R", value_delimiter = ',', default_value = "1,2")]
        bits: Vec<u32>,
        #[arg(long, default_value_t = 6)]
        horizon: usize,
        #[arg(long, value_delimiter = ',', default_value = "-1,1", allow_hyphen_values = true)]
        grid: Vec<f64>,
    },
    /// Qualitative sweep trends with a synthetic subject on Games 1-5.
    Trends {
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value = "noisy-human")]
        subject: SubjectSpec,
    },
}

#[derive(Debug, Args, Clone, Copy)]
pub struct PlantArgs {
    /// Wheel sensitivity, screen widths per tick per degree (game mode).
    #[arg(long)]
    pub sensitivity: Option<f64>,
}

impl PlantArgs {
    fn config(&self, schedule: ParameterSchedule) -> SessionConfig {
        let config = SessionConfig::new(schedule);
        match self.sensitivity {
            Some(k) => config.with_sensitivity(k),
            None => config,
        }
    }
}

fn read_text(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            anyhow::anyhow!("{what} file not found: {}", path.display())
        } else {
            anyhow::anyhow!("reading {what} {}: {e}", path.display())
        }
    })
}

pub fn load_script(path: &Path) -> Result<ParameterSchedule> {
    let text = read_text(path, "script")?;
    parse_script(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_log(path: &Path) -> Result<SessionLog> {
    if !path.exists() {
        bail!("log file not found: {}", path.display());
    }
    Ok(SessionLog::read_files(path)?)
}

fn script_for(log: &SessionLog, explicit: Option<&Path>) -> Result<ParameterSchedule> {
    match explicit.map(Path::to_path_buf).or_else(|| log.header.script.as_ref().map(PathBuf::from)) {
        Some(p) => load_script(&p),
        None => bail!("the log does not name its script; pass --script"),
    }
}

/// Run one parsed command, writing human-readable output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { game, seed, out: path } => {
            let text = write_script(&build_game(game, seed)?);
            match path {
                Some(p) => {
                    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
                    writeln!(out, "wrote game {game} seed {seed} to {}", p.display())?;
                }
                None => out.write_all(text.as_bytes())?,
            }
        }
        Command::Run {
            script,
            subject,
            out: path,
            plant,
        } => {
            let sched = load_script(&script)?;
            let Some(mut subj) = subject.build() else {
                bail!("subject `{subject}` needs a live connection; use `serve`");
            };
            let mut log = run_headless(plant.config(sched), subj.as_mut())?;
            log.header.script = Some(script.display().to_string());
            log.write_files(&path)?;
            writeln!(
                out,
                "{} ticks, subject {}, log {}",
                log.records.len(),
                log.header.subject,
                path.display()
            )?;
        }
        Command::Verify { check } => return verify(check, out),
        Command::Serve {
            port,
            host,
            script,
            out: path,
            lockstep,
            sessions,
            plant,
        } => {
            let config = plant.config(load_script(&script)?);
            let opts = ServeOptions {
                pace: if lockstep { Pace::Lockstep } else { Pace::default() },
                log_path: path,
                client_timeout: Duration::from_secs(30),
                script_path: Some(script.display().to_string()),
                ..ServeOptions::default()
            };
            let server = Server::bind((host.as_str(), port), config, opts)?;
            writeln!(out, "listening on ws://{}", server.local_addr()?)?;
            out.flush()?;
            let mut failed = false;
            for outcome in server.serve(sessions) {
                match outcome {
                    Ok(o) => {
                        let log = &o.log;
                        writeln!(
                            out,
                            "session from {}: {:?}, {} frames at {:.2} Hz, {} late inputs, log {}",
                            o.peer,
                            log.header.status,
                            o.frames_sent,
                            o.frame_rate().unwrap_or(0.0),
                            log.header.diagnostics.late_input,
                            o.log_path.display()
                        )?;
                    }
                    Err(e) => {
                        failed = true;
                        writeln!(out, "session failed: {e}")?;
                    }
                }
            }
            if failed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Replay { log, script, plant } => {
            let recorded = load_log(&log)?;
            let sched = script_for(&recorded, script.as_deref())?;
            let again = replay(&recorded, plant.config(sched))?;
            let n = recorded.records.len();
            match (0..n).find(|&i| again.records.get(i) != recorded.records.get(i)) {
                None if again.records.len() >= n => {
                    writeln!(out, "replay identical: {n} records")?;
                }
                Some(i) => {
                    writeln!(out, "replay differs at record {i}")?;
                    return Ok(ExitCode::FAILURE);
                }
                None => {
                    writeln!(out, "replay stopped after {} of {n} records", again.records.len())?;
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Command::Analyze {
            log,
            script,
            trim,
            out: path,
        } => {
            let recorded = load_log(&log)?;
            let sched = script_for(&recorded, script.as_deref())?;
            if sched.fitts().is_some() {
                let mts = movement_times(&recorded, &sched)?;
                let s = summarize_movements(&mts);
                writeln!(out, "jump,time,mt")?;
                for m in &mts {
                    let mt = m.mt.map_or("censored".to_string(), |v| format!("{v:.2}"));
                    writeln!(out, "{},{:.2},{mt}", m.jump, m.jump_time)?;
                }
                writeln!(
                    out,
                    "# trials {} censored {} ({:.1}%) mean MT {}",
                    s.trials,
                    s.censored,
                    100.0 * s.censoring_rate(),
                    s.mean.map_or("n/a".into(), |v| format!("{v:.3} s"))
                )?;
            } else {
                let report = block_norms(&recorded, &sched, trim)?;
                let csv = report.to_csv();
                match path {
                    Some(p) => {
                        crate::analysis::export_report(&report, &p)?;
                        writeln!(out, "wrote {} blocks to {}", report.rows.len(), p.display())?;
                    }
                    None => out.write_all(csv.as_bytes())?,
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(check: VerifyCommand, out: &mut dyn Write) -> Result<ExitCode> {
    let passed = match check {
        VerifyCommand::Delay { max_t, seeds, ticks } => {
            let report = verify_delay(max_t, seeds, ticks)?;
            write!(out, "{report}")?;
            report.passes()
        }
        VerifyCommand::Rate { bits, horizon, grid } => {
            if let Some(b) = bits.iter().find(|&&b| !(1..=2).contains(&b)) {
                bail!("R = {b}: the exhaustive search supports R in 1..=2 (at most 4 levels)");
            }
            let report = verify_rate(&bits, horizon, &grid)?;
            write!(out, "{report}")?;
            report.passes()
        }
        VerifyCommand::Trends { seeds, subject } => {
            let (tables, checks) = trend_checks(&subject, seeds)?;
            for t in &tables {
                writeln!(out, "{t}")?;
            }
            for c in &checks {
                writeln!(out, "{c}")?;
            }
            checks.iter().all(|c| c.passed)
        }
    };
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

/// Parse `args` (including the program name) and run. Errors print to
/// stderr and exit 1; usage errors exit 2.
pub fn main_with(args: impl IntoIterator<Item = String>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
