//! Theory checks and multi-seed sweeps built on the engine, the subjects
//! and the oracle.

use std::fmt;
use std::thread;

use crate::analysis::{block_norms, Norms};
use crate::engine::{run_headless, EngineError, SessionConfig};
use crate::plant::telescoped_error;
use crate::rng::{Prng, Stream};
use crate::script::{build_game, GameId, ParameterSchedule, ScriptError};
use crate::subjects::oracle::{effort_formula, rate_lower_bound, search_level_scale, LevelSearch};
use crate::subjects::{DelayedInverter, OracleError, SubjectSpec};

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
    #[error("subject `{0}` cannot run headless")]
    NotSynthetic(String),
}

/// `±1` square wave whose half-periods are drawn from `1..=max_half`.
pub fn square_wave(len: usize, seed: u64, max_half: usize) -> Vec<f64> {
    let mut rng = Prng::new(seed, Stream::Verify);
    let mut level = rng.sign();
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let run = 1 + rng.below(max_half);
        out.extend(std::iter::repeat_n(level, run.min(len - out.len())));
        level = -level;
    }
    out
}

fn sup_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayRow {
    pub delay: u32,
    /// Worst case `r ≡ 1`.
    pub sup_x: f64,
    pub sup_u: f64,
    /// Largest `sup|x|` and `sup|u|` over the seeded square waves.
    pub seeded_sup_x: f64,
    pub seeded_sup_u: f64,
    /// Every run agreed tick for tick with the telescoped sum.
    pub telescoped: bool,
}

impl DelayRow {
    pub fn passes(&self) -> bool {
        self.sup_x == self.delay as f64
            && self.sup_u == 1.0
            && self.seeded_sup_x <= self.delay as f64
            && self.seeded_sup_u == 1.0
            && self.telescoped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayReport {
    pub rows: Vec<DelayRow>,
    pub seeds: u64,
    pub ticks: usize,
}

impl DelayReport {
    pub fn passes(&self) -> bool {
        self.rows.iter().all(DelayRow::passes)
    }
}

impl fmt::Display for DelayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "delay law: u(t+T) = -r(t), {} ticks, r = 1 and {} seeded square waves",
            self.ticks, self.seeds
        )?;
        writeln!(f, "{:>3} {:>8} {:>8} {:>10} {:>10} {:>10}  result", "T", "sup|x|", "sup|u|", "seed sup|x|", "seed sup|u|", "telescoped")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>3} {:>8} {:>8} {:>10} {:>10} {:>10}  {}",
                r.delay,
                r.sup_x,
                r.sup_u,
                r.seeded_sup_x,
                r.seeded_sup_u,
                r.telescoped,
                if r.passes() { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn delayed_policy_run(r: &[f64], delay: u32) -> Result<(Vec<f64>, f64, bool), VerifyError> {
    let sched = ParameterSchedule::model(r, &[], delay, 0)?;
    let log = run_headless(SessionConfig::new(sched), &mut DelayedInverter::new(0))?;
    let xs = log.errors();
    let oracle = telescoped_error(r, delay as i64).map_err(EngineError::from)?;
    let exact = xs[..] == oracle[..xs.len()];
    Ok((xs, sup_abs(&log.controls()), exact))
}

/// Model-mode sessions with the delayed inverse policy for `T = 0..=max_delay`.
pub fn verify_delay(max_delay: u32, seeds: u64, ticks: usize) -> Result<DelayReport, VerifyError> {
    let mut rows = Vec::new();
    for delay in 0..=max_delay {
        let (xs, sup_u, exact) = delayed_policy_run(&vec![1.0; ticks], delay)?;
        let mut row = DelayRow {
            delay,
            sup_x: sup_abs(&xs),
            sup_u,
            seeded_sup_x: 0.0,
            seeded_sup_u: 0.0,
            telescoped: exact,
        };
        for seed in 0..seeds {
            let r = square_wave(ticks, seed, 2 * max_delay as usize + 2);
            let (xs, sup_u, exact) = delayed_policy_run(&r, delay)?;
            row.seeded_sup_x = row.seeded_sup_x.max(sup_abs(&xs));
            row.seeded_sup_u = row.seeded_sup_u.max(sup_u);
            row.telescoped &= exact;
        }
        rows.push(row);
    }
    Ok(DelayReport { rows, seeds, ticks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub bits: u32,
    pub horizon: usize,
    pub bound: f64,
    pub search: LevelSearch,
    /// Reported next to the oracle's control effort, not checked.
    pub effort_formula: f64,
}

impl RateRow {
    pub fn value(&self) -> f64 {
        self.search.result.value
    }

    pub fn passes(&self) -> bool {
        self.value() >= self.bound - 1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub grid: Vec<f64>,
    pub rows: Vec<RateRow>,
}

impl RateReport {
    pub fn passes(&self) -> bool {
        self.rows.iter().all(RateRow::passes)
    }
}

impl fmt::Display for RateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "data-rate bound: exhaustive minimax, adversary grid {:?}", self.grid)?;
        writeln!(
            f,
            "{:>2} {:>3} {:>9} {:>10} {:>9} {:>8} {:>11} {:>6}  result",
            "R", "N", "scale", "value", "bound", "sup|u|", "effort eq.", "evals"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>2} {:>3} {:>9.5} {:>10.6} {:>9.6} {:>8.5} {:>11.6} {:>6}  {}",
                r.bits,
                r.horizon,
                r.search.scale,
                r.value(),
                r.bound,
                r.search.result.sup_u,
                r.effort_formula,
                r.search.evaluations,
                if r.passes() { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Level-scale range scanned by `verify_rate`.
pub const SCALE_RANGE: (f64, f64) = (0.05, 4.0);

pub fn verify_rate(bits: &[u32], horizon: usize, grid: &[f64]) -> Result<RateReport, VerifyError> {
    let mut rows = Vec::new();
    for &b in bits {
        let search = search_level_scale(b, horizon, grid, SCALE_RANGE.0, SCALE_RANGE.1)?;
        rows.push(RateRow {
            bits: b,
            horizon,
            bound: rate_lower_bound(b),
            search,
            effort_formula: effort_formula(b),
        });
    }
    Ok(RateReport {
        grid: grid.to_vec(),
        rows,
    })
}

/// Seed-averaged per-block norms for one game.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub game: GameId,
    pub param_name: String,
    pub params: Vec<String>,
    pub mean: Vec<Norms>,
    pub seeds: usize,
}

impl SweepTable {
    pub fn norm(&self, param: &str) -> Option<&Norms> {
        self.params.iter().position(|p| p == param).map(|i| &self.mean[i])
    }
}

impl fmt::Display for SweepTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "game {} ({} seeds), mean per-block norms", self.game, self.seeds)?;
        writeln!(f, "{:>12} {:>10} {:>10} {:>10}", self.param_name, "L1", "L2", "Linf")?;
        for (p, n) in self.params.iter().zip(&self.mean) {
            writeln!(f, "{:>12} {:>10.4} {:>10.4} {:>10.4}", p, n.l1, n.l2, n.linf)?;
        }
        Ok(())
    }
}

/// Play `game` once per seed with `subject` and average each block's norms.
/// Seeds run on separate threads; the result does not depend on scheduling.
pub fn sweep_game(
    game: GameId,
    seeds: std::ops::Range<u64>,
    subject: &SubjectSpec,
    trim_seconds: f64,
) -> Result<SweepTable, VerifyError> {
    if subject.build().is_none() {
        return Err(VerifyError::NotSynthetic(subject.to_string()));
    }
    let seed_list: Vec<u64> = seeds.collect();
    let workers = thread::available_parallelism().map_or(4, |n| n.get()).min(seed_list.len().max(1));
    let chunks: Vec<&[u64]> = seed_list.chunks(seed_list.len().div_ceil(workers).max(1)).collect();
    let results: Vec<Result<Vec<_>, VerifyError>> = thread::scope(|s| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| {
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|&seed| {
                            let sched = build_game(game, seed)?;
                            let mut subj = subject.build().expect("checked above");
                            let log = run_headless(SessionConfig::new(sched.clone()), subj.as_mut())?;
                            Ok(block_norms(&log, &sched, trim_seconds)?)
                        })
                        .collect::<Result<Vec<_>, VerifyError>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut reports = Vec::with_capacity(seed_list.len());
    for r in results {
        reports.extend(r?);
    }
    let first = reports.first().ok_or(VerifyError::NotSynthetic("no seeds".into()))?;
    let rows: Vec<usize> = first
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.flagged)
        .map(|(i, _)| i)
        .collect();
    let n = reports.len() as f64;
    let mean = rows
        .iter()
        .map(|&i| {
            let sum = reports.iter().fold((0.0, 0.0, 0.0), |acc, rep| {
                let m = rep.rows[i].norms;
                (acc.0 + m.l1, acc.1 + m.l2, acc.2 + m.linf)
            });
            Norms {
                l1: sum.0 / n,
                l2: sum.1 / n,
                linf: sum.2 / n,
            }
        })
        .collect();
    Ok(SweepTable {
        game,
        param_name: first.param_name.clone(),
        params: rows.iter().map(|&i| first.rows[i].param.clone()).collect(),
        mean,
        seeds: reports.len(),
    })
}

/// One qualitative trend check over seed-averaged sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for TrendCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Spearman ρ threshold for the delay sweeps.
pub const DELAY_RHO_MIN: f64 = 0.9;
/// Allowed relative gap between the R = 5 and R = 7 norms.
pub const PLATEAU_TOLERANCE: f64 = 0.10;

fn param_values(table: &SweepTable) -> Vec<f64> {
    table.params.iter().map(|p| p.parse().unwrap_or(f64::NAN)).collect()
}

/// Linf rank correlation with the swept delay.
pub fn check_delay_trend(table: &SweepTable) -> TrendCheck {
    let delays = param_values(table);
    let linf: Vec<f64> = table.mean.iter().map(|n| n.linf).collect();
    let rho = crate::analysis::spearman(&delays, &linf);
    TrendCheck {
        name: format!("game {} Linf vs {} Spearman >= {DELAY_RHO_MIN}", table.game, table.param_name),
        passed: rho.is_some_and(|r| r >= DELAY_RHO_MIN),
        detail: format!("rho = {}", rho.map_or("undefined".into(), |r| format!("{r:.4}"))),
    }
}

/// Linf rank correlation with delay over the blocks of several delay
/// sweeps pooled together.
pub fn check_pooled_delay_trend(tables: &[&SweepTable]) -> TrendCheck {
    let mut delays = Vec::new();
    let mut linf = Vec::new();
    for t in tables {
        delays.extend(param_values(t));
        linf.extend(t.mean.iter().map(|n| n.linf));
    }
    let games: Vec<String> = tables.iter().map(|t| t.game.to_string()).collect();
    let rho = crate::analysis::spearman(&delays, &linf);
    TrendCheck {
        name: format!("games {} pooled Linf vs delay Spearman >= {DELAY_RHO_MIN}", games.join("+")),
        passed: rho.is_some_and(|r| r >= DELAY_RHO_MIN),
        detail: format!("rho = {} over {} blocks", rho.map_or("undefined".into(), |r| format!("{r:.4}")), delays.len()),
    }
}

/// Norms non-increasing in the rate until they settle on a plateau. A rise
/// between neighbouring rates fails unless both values already sit within
/// the plateau tolerance of the `R = 7` value; `R = 5` must be inside that
/// band and `R = 1` must lie above it. Checked for L1, L2 and Linf.
pub fn check_rate_trend(table: &SweepTable) -> TrendCheck {
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    let (Some(r5), Some(r7), Some(r1)) = (table.norm("5"), table.norm("7"), table.norm("1")) else {
        return TrendCheck {
            name: format!("game {} norms vs {}", table.game, table.param_name),
            passed: false,
            detail: "missing R = 1, 5 or 7 block".into(),
        };
    };
    for kind in crate::analysis::NormKind::ALL {
        let floor = r7.get(kind);
        let on_plateau = |v: f64| (v - floor).abs() <= PLATEAU_TOLERANCE * floor;
        let v: Vec<f64> = table.mean.iter().map(|n| n.get(kind)).collect();
        for (i, w) in v.windows(2).enumerate() {
            if w[1] > w[0] && !(on_plateau(w[0]) && on_plateau(w[1])) {
                failures.push(format!("{} rises {} -> {} off the plateau", kind.name(), table.params[i], table.params[i + 1]));
            }
        }
        let gap = (r5.get(kind) - floor).abs() / floor;
        notes.push(format!("{} R5/R7 gap {:.1}%", kind.name(), 100.0 * gap));
        if gap > PLATEAU_TOLERANCE {
            failures.push(format!("{} R5 vs R7 gap {:.1}%", kind.name(), 100.0 * gap));
        }
        if r1.get(kind) <= floor * (1.0 + PLATEAU_TOLERANCE) {
            failures.push(format!("{} no decrease from R1 to R7", kind.name()));
        }
    }
    TrendCheck {
        name: format!(
            "game {} norms non-increasing in {} to a plateau, R5 within 10% of R7",
            table.game, table.param_name
        ),
        passed: failures.is_empty(),
        detail: if failures.is_empty() { notes.join(", ") } else { failures.join("; ") },
    }
}

/// The combined scenario's norms are at least each isolated scenario's.
pub fn check_multiplexing(table: &SweepTable) -> TrendCheck {
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    match table.norm("trail+bumps") {
        None => failures.push("no trail+bumps block".to_string()),
        Some(both) => {
            for single in ["bumps", "trail"] {
                let Some(one) = table.norm(single) else {
                    failures.push(format!("no {single} block"));
                    continue;
                };
                for kind in crate::analysis::NormKind::ALL {
                    let (c, s) = (both.get(kind), one.get(kind));
                    notes.push(format!("{} {:.3}>={:.3}", kind.name(), c, s));
                    if c < s {
                        failures.push(format!("{} combined {c:.4} < {single} {s:.4}", kind.name()));
                    }
                }
            }
        }
    }
    TrendCheck {
        name: "game 5 combined scenario norms >= each isolated scenario".into(),
        passed: failures.is_empty(),
        detail: if failures.is_empty() { notes.join(", ") } else { failures.join("; ") },
    }
}

/// Every qualitative trend check on `seeds` seeds.
pub fn trend_checks(subject: &SubjectSpec, seeds: u64) -> Result<(Vec<SweepTable>, Vec<TrendCheck>), VerifyError> {
    let mut tables = Vec::new();
    let mut checks = Vec::new();
    for game in [GameId::VisionDelay, GameId::ActionDelay] {
        let t = sweep_game(game, 0..seeds, subject, crate::analysis::DEFAULT_TRIM_SECONDS)?;
        checks.push(check_delay_trend(&t));
        tables.push(t);
    }
    checks.push(check_pooled_delay_trend(&[&tables[0], &tables[1]]));
    for game in [GameId::VisionRate, GameId::ActionRate] {
        let t = sweep_game(game, 0..seeds, subject, crate::analysis::DEFAULT_TRIM_SECONDS)?;
        checks.push(check_rate_trend(&t));
        tables.push(t);
    }
    let t = sweep_game(GameId::BumpsAndTrail, 0..seeds, subject, crate::analysis::DEFAULT_TRIM_SECONDS)?;
    checks.push(check_multiplexing(&t));
    tables.push(t);
    Ok((tables, checks))
}
