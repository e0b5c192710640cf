//! Canonical protocols for Games 1-5 and the Fitts reaching task.

use std::fmt;
use std::str::FromStr;

use super::{Metadata, ParameterSchedule, ScheduleRow, ScriptError};
use crate::disturbance::{
    calibrated_trail_speed, gen_bumps, gen_fitts, gen_trail, BumpPattern,
    DEFAULT_MARGIN, SWITCH_PERIOD_SECONDS,
};
use crate::plant::DEFAULT_SENSITIVITY;
use crate::rng::PRNG_ID;
use crate::signal::seconds_to_ticks;

/// Game 1 look-ahead per 30 s block, as advance warning in seconds.
pub const GAME1_ADVANCE_WARNINGS: [f64; 13] = [
    1.0, 0.75, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0, -0.1, -0.2, -0.3, -0.4, -0.5,
];
/// Game 2 action delay per 30 s block, seconds.
pub const GAME2_ACTION_DELAYS: [f64; 6] = [0.0, 0.15, 0.30, 0.45, 0.60, 0.75];
pub const RATE_SWEEP: std::ops::RangeInclusive<u32> = 1..=7;

pub const BLOCK_SECONDS: f64 = 30.0;
pub const SCENARIO_SECONDS: f64 = 60.0;
pub const REST_SECONDS: f64 = 5.0;
pub const FITTS_SECONDS: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GameId {
    VisionDelay,
    ActionDelay,
    VisionRate,
    ActionRate,
    BumpsAndTrail,
    Fitts,
}

impl GameId {
    pub const ALL: [GameId; 6] = [
        GameId::VisionDelay,
        GameId::ActionDelay,
        GameId::VisionRate,
        GameId::ActionRate,
        GameId::BumpsAndTrail,
        GameId::Fitts,
    ];
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GameId::VisionDelay => "1",
            GameId::ActionDelay => "2",
            GameId::VisionRate => "3",
            GameId::ActionRate => "4",
            GameId::BumpsAndTrail => "5",
            GameId::Fitts => "fitts",
        })
    }
}

impl FromStr for GameId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" => Ok(GameId::VisionDelay),
            "2" => Ok(GameId::ActionDelay),
            "3" => Ok(GameId::VisionRate),
            "4" => Ok(GameId::ActionRate),
            "5" => Ok(GameId::BumpsAndTrail),
            "fitts" => Ok(GameId::Fitts),
            other => Err(format!("unknown game `{other}` (expected 1..5 or fitts)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    /// Trail speed in screen widths per second.
    pub trail_speed: f64,
    pub margin: f64,
    pub bump_amplitude: f64,
    pub bump_pattern: BumpPattern,
    /// Vision delay of Game 2.
    pub action_delay_game_vision: f64,
    /// Vision delay of Games 3 and 4.
    pub rate_game_vision: f64,
    /// Games 3 and 4 replay one block-length trail in every block.
    pub repeat_rate_trail: bool,
    pub fitts_widths: Vec<f64>,
    pub fitts_distances: Vec<f64>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            trail_speed: calibrated_trail_speed(DEFAULT_SENSITIVITY),
            margin: DEFAULT_MARGIN,
            bump_amplitude: 100.0,
            bump_pattern: BumpPattern::Resample,
            action_delay_game_vision: 0.0,
            rate_game_vision: -1.0,
            repeat_rate_trail: true,
            fitts_widths: vec![0.05, 0.1, 0.2],
            fitts_distances: vec![0.1, 0.2, 0.3],
        }
    }
}

pub fn build_game(id: GameId, seed: u64) -> Result<ParameterSchedule, ScriptError> {
    build_game_with(id, seed, &BuildOptions::default())
}

fn base_row(tick: u64) -> ScheduleRow {
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

fn header(id: GameId, seed: u64) -> Metadata {
    Metadata::new()
        .with("game", id.to_string())
        .with("seed", seed.to_string())
        .with("prng", PRNG_ID)
        .with("mode", "game")
}

/// Equal-length blocks over one continuous trail; `apply` sets the swept
/// parameter for block `b`.
fn swept_blocks(
    id: GameId,
    seed: u64,
    opts: &BuildOptions,
    blocks: usize,
    apply: impl Fn(usize, &mut ScheduleRow),
) -> Result<ParameterSchedule, ScriptError> {
    let per_block = seconds_to_ticks(BLOCK_SECONDS) as usize;
    let total = per_block * blocks;
    let repeat = opts.repeat_rate_trail && matches!(id, GameId::VisionRate | GameId::ActionRate);
    let trail_ticks = if repeat { per_block } else { total };
    let trail = gen_trail(
        trail_ticks as f64 * crate::signal::TICK_SECONDS,
        seed,
        opts.trail_speed,
        opts.margin,
    )?;
    let rows = (0..total)
        .map(|i| {
            let mut row = base_row(i as u64);
            row.r = trail.samples[i % trail_ticks];
            row.t_vis = match id {
                GameId::ActionDelay => opts.action_delay_game_vision,
                _ => opts.rate_game_vision,
            };
            apply(i / per_block, &mut row);
            row
        })
        .collect();
    ParameterSchedule::new(rows, header(id, seed))
}

pub fn build_game_with(
    id: GameId,
    seed: u64,
    opts: &BuildOptions,
) -> Result<ParameterSchedule, ScriptError> {
    match id {
        GameId::VisionDelay => swept_blocks(id, seed, opts, GAME1_ADVANCE_WARNINGS.len(), |b, row| {
            row.t_vis = -GAME1_ADVANCE_WARNINGS[b];
        }),
        GameId::ActionDelay => swept_blocks(id, seed, opts, GAME2_ACTION_DELAYS.len(), |b, row| {
            row.t_act = GAME2_ACTION_DELAYS[b];
        }),
        GameId::VisionRate => swept_blocks(id, seed, opts, RATE_SWEEP.count(), |b, row| {
            row.r_vis = *RATE_SWEEP.start() + b as u32;
        }),
        GameId::ActionRate => swept_blocks(id, seed, opts, RATE_SWEEP.count(), |b, row| {
            row.r_act = *RATE_SWEEP.start() + b as u32;
        }),
        GameId::BumpsAndTrail => game5(seed, opts),
        GameId::Fitts => fitts(seed, opts),
    }
}

/// Scenario labels of Game 5, in play order.
pub const GAME5_SCENARIOS: [&str; 3] = ["bumps", "trail", "trail+bumps"];
pub const REST_LABEL: &str = "rest";

fn game5(seed: u64, opts: &BuildOptions) -> Result<ParameterSchedule, ScriptError> {
    let rest = seconds_to_ticks(REST_SECONDS) as u64;
    let scenario = seconds_to_ticks(SCENARIO_SECONDS) as u64;
    let trail = gen_trail(SCENARIO_SECONDS, seed, opts.trail_speed, opts.margin)?;
    let bumps = gen_bumps(
        SCENARIO_SECONDS,
        seed,
        opts.bump_amplitude,
        SWITCH_PERIOD_SECONDS,
        opts.bump_pattern,
    )?;

    let mut rows = Vec::with_capacity(((rest + scenario) * 3) as usize);
    let mut blocks = Vec::new();
    let mut tick = 0u64;
    for label in GAME5_SCENARIOS {
        blocks.push((tick, REST_LABEL));
        for _ in 0..rest {
            rows.push(game5_row(tick));
            tick += 1;
        }
        blocks.push((tick, label));
        for i in 0..scenario as usize {
            let mut row = game5_row(tick);
            if label.contains("trail") {
                row.r = trail.samples[i];
            }
            if label.contains("bumps") {
                row.w = bumps.samples[i];
            }
            rows.push(row);
            tick += 1;
        }
    }
    let mut meta = header(GameId::BumpsAndTrail, seed);
    meta.set_blocks(&blocks);
    ParameterSchedule::new(rows, meta)
}

fn game5_row(tick: u64) -> ScheduleRow {
    ScheduleRow {
        t_vis: -1.0,
        ..base_row(tick)
    }
}

fn fitts(seed: u64, opts: &BuildOptions) -> Result<ParameterSchedule, ScriptError> {
    let zones = gen_fitts(FITTS_SECONDS, seed, &opts.fitts_widths, &opts.fitts_distances)?;
    let ticks = seconds_to_ticks(FITTS_SECONDS) as usize;
    let centers = zones.centers(ticks);
    let rows = centers
        .into_iter()
        .enumerate()
        .map(|(i, c)| ScheduleRow {
            r: c,
            ..base_row(i as u64)
        })
        .collect();
    let mut meta = header(GameId::Fitts, seed).with("task", "fitts");
    meta.set_fitts(&zones);
    ParameterSchedule::new(rows, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::{parse_script, write_script};

    fn block_values<T: PartialEq + Copy>(s: &ParameterSchedule, f: impl Fn(&ScheduleRow) -> T) -> Vec<T> {
        let mut out: Vec<T> = Vec::new();
        for row in s.rows() {
            if out.last() != Some(&f(row)) {
                out.push(f(row));
            }
        }
        out
    }

    #[test]
    fn game1_structure() {
        let s = build_game(GameId::VisionDelay, 1).unwrap();
        assert_eq!(s.duration(), 390.0);
        let t_vis = block_values(&s, |r| r.t_vis);
        assert_eq!(t_vis.len(), 13);
        assert_eq!(
            t_vis,
            vec![-1.0, -0.75, -0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
        );
        assert!(s.rows().iter().all(|r| r.w == 0.0 && r.t_act == 0.0));
    }

    #[test]
    fn game2_to_4_structure() {
        let g2 = build_game(GameId::ActionDelay, 1).unwrap();
        assert_eq!(g2.duration(), 180.0);
        assert_eq!(block_values(&g2, |r| r.t_act), GAME2_ACTION_DELAYS.to_vec());

        let g3 = build_game(GameId::VisionRate, 1).unwrap();
        assert_eq!(g3.duration(), 210.0);
        assert_eq!(block_values(&g3, |r| r.r_vis), (1..=7).collect::<Vec<u32>>());
        assert!(g3.rows().iter().all(|r| r.r_act == 10));

        let g4 = build_game(GameId::ActionRate, 1).unwrap();
        assert_eq!(g4.duration(), 210.0);
        assert_eq!(block_values(&g4, |r| r.r_act), (1..=7).collect::<Vec<u32>>());

        // rate blocks replay one trail; the delay games do not
        let per_block = 3000;
        for g in [&g3, &g4] {
            let r: Vec<f64> = g.rows().iter().map(|row| row.r).collect();
            assert!(r.chunks(per_block).all(|c| c == &r[..per_block]));
        }
        let r2: Vec<f64> = g2.rows().iter().map(|row| row.r).collect();
        assert_ne!(r2[..per_block], r2[per_block..2 * per_block]);
    }

    #[test]
    fn game5_duplicates_tracks() {
        let s = build_game(GameId::BumpsAndTrail, 3).unwrap();
        assert_eq!(s.duration(), 195.0);
        let blocks = s.meta().blocks().unwrap();
        let labels: Vec<&str> = blocks.iter().map(|(_, l)| l.as_str()).collect();
        assert_eq!(labels, vec!["rest", "bumps", "rest", "trail", "rest", "trail+bumps"]);
        let starts: Vec<u64> = blocks.iter().map(|(t, _)| *t).collect();
        assert_eq!(starts, vec![0, 500, 6500, 7000, 13000, 13500]);

        let rows = s.rows();
        for i in 0..6000 {
            assert_eq!(rows[13500 + i].r, rows[7000 + i].r);
            assert_eq!(rows[13500 + i].w, rows[500 + i].w);
            assert_eq!(rows[500 + i].r, 0.5);
            assert_eq!(rows[7000 + i].w, 0.0);
        }
        assert!(rows.iter().all(|r| r.t_vis == -1.0 && r.t_act == 0.0 && r.r_vis == 10 && r.r_act == 10));
        for (start, label) in &blocks {
            if label == "rest" {
                assert!(rows[*start as usize..*start as usize + 500]
                    .iter()
                    .all(|r| r.w == 0.0 && r.r == 0.5));
            }
        }
    }

    #[test]
    fn fitts_zones_in_header() {
        let s = build_game(GameId::Fitts, 2).unwrap();
        let zones = s.fitts().unwrap();
        assert!(zones.jumps.len() > 10);
        for z in &zones.jumps {
            assert_eq!(s.sample(z.tick).r, z.center);
        }
    }

    #[test]
    fn builders_round_trip_and_are_deterministic() {
        for id in GameId::ALL {
            let a = build_game(id, 7).unwrap();
            let text = write_script(&a);
            assert_eq!(parse_script(&text).unwrap(), a, "game {id}");
            assert_eq!(write_script(&build_game(id, 7).unwrap()), text);
            assert_ne!(write_script(&build_game(id, 8).unwrap()), text);
        }
    }

    #[test]
    fn block_segmentation() {
        let g2 = build_game(GameId::ActionDelay, 1).unwrap();
        let blocks = g2.blocks();
        assert_eq!(blocks.len(), 6);
        assert!(blocks.iter().all(|b| b.len() == 3000 && b.label.is_none()));
        assert_eq!(blocks[5].params.t_act, 0.75);
        assert_eq!(blocks.last().unwrap().end, g2.ticks());

        let g5 = build_game(GameId::BumpsAndTrail, 1).unwrap();
        let lens: Vec<u64> = g5.blocks().iter().map(|b| b.len()).collect();
        assert_eq!(lens, vec![500, 6000, 500, 6000, 500, 6000]);
    }

    #[test]
    fn game_id_parsing() {
        assert_eq!("3".parse::<GameId>().unwrap(), GameId::VisionRate);
        assert!("6".parse::<GameId>().is_err());
    }
}
