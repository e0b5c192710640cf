//! Seeded generators for the trail `r(t)`, the bumps `w(t)` and the Fitts
//! target jumps.

use thiserror::Error;

use crate::rng::{Prng, Stream};
use crate::signal::{seconds_to_ticks, ticks_to_seconds, TICKS_PER_SECOND, TICK_SECONDS};

/// Wheel angle (degrees) that must be held to keep pace with the trail.
pub const TRAIL_WHEEL_ANGLE_DEG: f64 = 75.0;
/// Direction / sign resampling period for trail and bumps.
pub const SWITCH_PERIOD_SECONDS: f64 = 0.1;
pub const DEFAULT_MARGIN: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisturbanceError {
    #[error("duration must be positive, got {0} s")]
    BadDuration(f64),
    #[error("margin {0} outside (0, 0.5)")]
    BadMargin(f64),
    #[error("trail speed {speed} units/s moves {step} per tick, more than the {room} between margins")]
    SpeedTooHigh { speed: f64, step: f64, room: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("segment {0} s is not a whole number of ticks")]
    SegmentNotOnTick(f64),
    #[error("fitts zone width {width} with jump distance {distance} does not fit on screen")]
    UnrealizableZone { width: f64, distance: f64 },
    #[error("fitts widths and distances must be non-empty")]
    EmptyFittsLists,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackKind {
    TrailPosition,
    BumpForce,
}

/// Densely sampled signal, one value per tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub kind: TrackKind,
}

impl Track {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn duration_ticks(duration: f64) -> Result<usize, DisturbanceError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(DisturbanceError::BadDuration(duration));
    }
    Ok(seconds_to_ticks(duration).max(1) as usize)
}

fn segment_ticks(segment: f64) -> Result<usize, DisturbanceError> {
    let ticks = segment * TICKS_PER_SECOND;
    if !(segment > 0.0) || (ticks - ticks.round()).abs() > 1e-9 || ticks.round() < 1.0 {
        return Err(DisturbanceError::SegmentNotOnTick(segment));
    }
    Ok(ticks.round() as usize)
}

/// Trail speed (normalized screen widths per second) that requires holding
/// the calibrated wheel angle at the given sensitivity (widths per tick per
/// degree).
pub fn calibrated_trail_speed(sensitivity: f64) -> f64 {
    TRAIL_WHEEL_ANGLE_DEG * sensitivity * TICKS_PER_SECOND
}

/// Constant-speed trail starting at screen centre. The direction is
/// resampled every 100 ms and reflected whenever the next step would leave
/// `[margin, 1 - margin]`.
pub fn gen_trail(
    duration: f64,
    seed: u64,
    speed: f64,
    margin: f64,
) -> Result<Track, DisturbanceError> {
    let n = duration_ticks(duration)?;
    if !(margin > 0.0 && margin < 0.5) {
        return Err(DisturbanceError::BadMargin(margin));
    }
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(DisturbanceError::NonPositive {
            name: "speed",
            value: speed,
        });
    }
    let step = speed * TICK_SECONDS;
    let (lo, hi) = (margin, 1.0 - margin);
    if step > hi - lo {
        return Err(DisturbanceError::SpeedTooHigh {
            speed,
            step,
            room: hi - lo,
        });
    }

    let period = segment_ticks(SWITCH_PERIOD_SECONDS)?;
    let mut rng = Prng::new(seed, Stream::Trail);
    let mut samples = Vec::with_capacity(n);
    let mut pos = 0.5;
    let mut dir = rng.sign();
    samples.push(pos);
    for i in 1..n {
        if i % period == 0 {
            dir = rng.sign();
        }
        let next = pos + dir * step;
        if next < lo || next > hi {
            dir = -dir;
        }
        pos += dir * step;
        samples.push(pos);
    }
    Ok(Track {
        dt: TICK_SECONDS,
        samples,
        kind: TrackKind::TrailPosition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BumpPattern {
    /// Independent random sign per segment.
    #[default]
    Resample,
    /// Strict alternation from a random starting sign.
    Alternate,
}

/// Binary bump force: `±amplitude`, constant over each `segment`.
pub fn gen_bumps(
    duration: f64,
    seed: u64,
    amplitude: f64,
    segment: f64,
    pattern: BumpPattern,
) -> Result<Track, DisturbanceError> {
    let n = duration_ticks(duration)?;
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(DisturbanceError::NonPositive {
            name: "amplitude",
            value: amplitude,
        });
    }
    let seg = segment_ticks(segment)?;
    let mut rng = Prng::new(seed, Stream::Bumps);
    let mut sign = rng.sign();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && i % seg == 0 {
            sign = match pattern {
                BumpPattern::Resample => rng.sign(),
                BumpPattern::Alternate => -sign,
            };
        }
        samples.push(sign * amplitude);
    }
    Ok(Track {
        dt: TICK_SECONDS,
        samples,
        kind: TrackKind::BumpForce,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittsZone {
    /// Tick at which the zone appears.
    pub tick: u64,
    pub center: f64,
    pub width: f64,
}

impl FittsZone {
    pub fn time(&self) -> f64 {
        ticks_to_seconds(self.tick as i64)
    }

    pub fn contains(&self, pos: f64) -> bool {
        (pos - self.center).abs() <= self.width / 2.0
    }
}

/// Zone sequence for the reaching task. The first entry is the initial zone
/// at tick 0, centred on screen.
#[derive(Debug, Clone, PartialEq)]
pub struct FittsSchedule {
    pub jumps: Vec<FittsZone>,
}

impl FittsSchedule {
    /// Zone active at tick `t`.
    pub fn zone_at(&self, t: u64) -> Option<&FittsZone> {
        let idx = self.jumps.partition_point(|z| z.tick <= t);
        idx.checked_sub(1).map(|i| &self.jumps[i])
    }

    /// Dense per-tick zone centres.
    pub fn centers(&self, ticks: usize) -> Vec<f64> {
        (0..ticks as u64)
            .map(|t| self.zone_at(t).map_or(0.5, |z| z.center))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpInterval {
    pub min_seconds: f64,
    pub max_seconds: f64,
}

impl Default for JumpInterval {
    fn default() -> Self {
        Self {
            min_seconds: 3.0,
            max_seconds: 6.0,
        }
    }
}

pub fn gen_fitts(
    duration: f64,
    seed: u64,
    widths: &[f64],
    distances: &[f64],
) -> Result<FittsSchedule, DisturbanceError> {
    gen_fitts_with(duration, seed, widths, distances, JumpInterval::default())
}

pub fn gen_fitts_with(
    duration: f64,
    seed: u64,
    widths: &[f64],
    distances: &[f64],
    interval: JumpInterval,
) -> Result<FittsSchedule, DisturbanceError> {
    let n = duration_ticks(duration)? as u64;
    if widths.is_empty() || distances.is_empty() {
        return Err(DisturbanceError::EmptyFittsLists);
    }
    for &width in widths {
        for &distance in distances {
            // from any on-screen centre at least one direction must fit
            if !(width > 0.0 && width < 1.0 && distance > 0.0 && distance <= (1.0 - width) / 2.0)
            {
                return Err(DisturbanceError::UnrealizableZone { width, distance });
            }
        }
    }
    if !(interval.min_seconds > 0.0 && interval.max_seconds >= interval.min_seconds) {
        return Err(DisturbanceError::NonPositive {
            name: "jump interval",
            value: interval.min_seconds,
        });
    }

    let mut rng = Prng::new(seed, Stream::Fitts);
    let mut jumps = vec![FittsZone {
        tick: 0,
        center: 0.5,
        width: widths[0],
    }];
    let mut tick = 0u64;
    loop {
        let gap = interval.min_seconds + rng.uniform() * (interval.max_seconds - interval.min_seconds);
        tick += seconds_to_ticks(gap).max(1) as u64;
        if tick >= n {
            break;
        }
        let width = widths[rng.below(widths.len())];
        let distance = distances[rng.below(distances.len())];
        let from = jumps.last().map(|z| z.center).unwrap_or(0.5);
        let fits = |c: f64| c - width / 2.0 >= -1e-12 && c + width / 2.0 <= 1.0 + 1e-12;
        let (up, down) = (from + distance, from - distance);
        let center = match (fits(up), fits(down)) {
            (true, true) => {
                if rng.coin() {
                    up
                } else {
                    down
                }
            }
            (true, false) => up,
            (false, true) => down,
            (false, false) => return Err(DisturbanceError::UnrealizableZone { width, distance }),
        };
        jumps.push(FittsZone {
            tick,
            center,
            width,
        });
    }
    Ok(FittsSchedule { jumps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trail_stays_inside_margins() {
        for seed in 0..20 {
            let t = gen_trail(120.0, seed, 0.4, 0.1).unwrap();
            let min = t.samples.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = t.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(min >= 0.1 - 1e-12 && max <= 0.9 + 1e-12, "seed {seed}: {min} {max}");
        }
    }

    #[test]
    fn degenerate_trail_is_centre() {
        let t = gen_trail(0.01, 3, 0.25, 0.1).unwrap();
        assert_eq!(t.samples, vec![0.5]);
    }

    #[test]
    fn trail_rate_is_two_valued() {
        let speed = 0.25;
        let t = gen_trail(60.0, 11, speed, 0.1).unwrap();
        for w in t.samples.windows(2) {
            let rate = (w[1] - w[0]) / TICK_SECONDS;
            assert!((rate.abs() - speed).abs() < 1e-9, "rate {rate}");
        }
    }

    #[test]
    fn trail_rejects_bad_params() {
        assert!(matches!(
            gen_trail(1.0, 0, 100.0, 0.1),
            Err(DisturbanceError::SpeedTooHigh { .. })
        ));
        assert!(gen_trail(0.0, 0, 0.2, 0.1).is_err());
        assert!(gen_trail(1.0, 0, 0.2, 0.5).is_err());
        assert!(gen_trail(1.0, 0, -0.2, 0.1).is_err());
    }

    #[test]
    fn calibrated_speed_holds_reference_angle() {
        let k = 1.0 / 30_000.0;
        let speed = calibrated_trail_speed(k);
        // per-tick trail step equals the player velocity at 75 degrees
        assert!((speed * TICK_SECONDS - 75.0 * k).abs() < 1e-15);
    }

    #[test]
    fn bumps_binary_segmented_deterministic() {
        let a = gen_bumps(30.0, 5, 100.0, 0.1, BumpPattern::Resample).unwrap();
        assert!(a.samples.iter().all(|&v| v == 100.0 || v == -100.0));
        for chunk in a.samples.chunks(10) {
            assert!(chunk.iter().all(|&v| v == chunk[0]));
        }
        let b = gen_bumps(30.0, 5, 100.0, 0.1, BumpPattern::Resample).unwrap();
        assert_eq!(a, b);
        assert!(gen_bumps(1.0, 5, 100.0, 0.015, BumpPattern::Resample).is_err());
        assert!(gen_bumps(1.0, 5, 0.0, 0.1, BumpPattern::Resample).is_err());
    }

    #[test]
    fn alternating_bumps() {
        let a = gen_bumps(1.0, 9, 2.0, 0.1, BumpPattern::Alternate).unwrap();
        for w in a.samples.chunks(10).collect::<Vec<_>>().windows(2) {
            assert_eq!(w[0][0], -w[1][0]);
        }
    }

    #[test]
    fn bump_mean_unbiased() {
        // 10^4 segments of 100 ms
        let a = gen_bumps(1000.0, 2024, 100.0, 0.1, BumpPattern::Resample).unwrap();
        let segs: Vec<f64> = a.samples.chunks(10).map(|c| c[0]).collect();
        assert_eq!(segs.len(), 10_000);
        let mean = segs.iter().sum::<f64>() / segs.len() as f64;
        assert!(mean.abs() <= 5.0, "mean {mean}");
    }

    #[test]
    fn trail_and_bump_signs_uncorrelated() {
        let seed = 77;
        let trail = gen_trail(1000.0, seed, 0.25, 0.1).unwrap();
        let bumps = gen_bumps(1000.0, seed, 1.0, 0.1, BumpPattern::Resample).unwrap();
        let rates: Vec<f64> = trail
            .samples
            .windows(2)
            .step_by(10)
            .map(|w| (w[1] - w[0]).signum())
            .collect();
        let signs: Vec<f64> = bumps.samples.iter().step_by(10).copied().collect();
        let n = rates.len().min(signs.len());
        let corr = sample_correlation(&rates[..n], &signs[..n]);
        assert!(corr.abs() < 0.05, "corr {corr}");
    }

    fn sample_correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn fitts_single_width_distance() {
        let s = gen_fitts(120.0, 4, &[0.05], &[0.4]).unwrap();
        assert!(s.jumps.len() > 10);
        for w in s.jumps.windows(2) {
            assert!(((w[1].center - w[0].center).abs() - 0.4).abs() < 1e-12);
            assert_eq!(w[1].width, 0.05);
            let gap = (w[1].tick - w[0].tick) as f64 * TICK_SECONDS;
            assert!((3.0..=6.0).contains(&gap));
        }
        assert_eq!(s, gen_fitts(120.0, 4, &[0.05], &[0.4]).unwrap());
    }

    #[test]
    fn fitts_zones_on_screen() {
        let s = gen_fitts(600.0, 8, &[0.05, 0.1, 0.2], &[0.1, 0.2, 0.3]).unwrap();
        for z in &s.jumps {
            assert!(z.center - z.width / 2.0 >= -1e-12);
            assert!(z.center + z.width / 2.0 <= 1.0 + 1e-12);
        }
        for w in s.jumps.windows(2) {
            assert_ne!(w[0].center, w[1].center);
        }
    }

    #[test]
    fn fitts_rejects_unrealizable() {
        assert!(matches!(
            gen_fitts(60.0, 1, &[0.3], &[0.5]),
            Err(DisturbanceError::UnrealizableZone { .. })
        ));
        assert!(gen_fitts(60.0, 1, &[], &[0.2]).is_err());
    }
}
