//! Delay and quantization on the vision and action paths, and the visible
//! trail window.

use std::collections::VecDeque;

use thiserror::Error;

/// Length of one tick in seconds.
pub const TICK_SECONDS: f64 = 0.01;
pub const TICKS_PER_SECOND: f64 = 100.0;

pub const MIN_RATE_BITS: u32 = 1;
pub const MAX_RATE_BITS: u32 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("rate {0} bits outside 1..=10")]
    RateOutOfRange(u32),
    #[error("vision delay {0} s outside [-1, 1)")]
    VisionDelayOutOfRange(f64),
    #[error("negative delay {0} s")]
    NegativeDelay(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Round a duration in seconds to the nearest whole tick.
pub fn seconds_to_ticks(seconds: f64) -> i64 {
    (seconds * TICKS_PER_SECOND).round() as i64
}

pub fn ticks_to_seconds(ticks: i64) -> f64 {
    ticks as f64 / TICKS_PER_SECOND
}

fn check_rate(bits: u32) -> Result<(), SignalError> {
    if (MIN_RATE_BITS..=MAX_RATE_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(SignalError::RateOutOfRange(bits))
    }
}

/// Fixed-length FIFO: the value returned by `push` is the sample pushed
/// `delay_ticks` calls earlier, or zero while the line is still filling.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    buffer: VecDeque<f64>,
}

impl DelayLine {
    pub fn new(delay_ticks: usize) -> Self {
        Self {
            buffer: std::iter::repeat_n(0.0, delay_ticks).collect(),
        }
    }

    pub fn from_seconds(seconds: f64) -> Result<Self, SignalError> {
        if seconds < 0.0 || !seconds.is_finite() {
            return Err(SignalError::NegativeDelay(seconds));
        }
        Ok(Self::new(seconds_to_ticks(seconds) as usize))
    }

    pub fn delay_ticks(&self) -> usize {
        self.buffer.len()
    }

    pub fn push(&mut self, sample: f64) -> f64 {
        match self.buffer.pop_front() {
            Some(out) => {
                self.buffer.push_back(sample);
                out
            }
            None => sample,
        }
    }

    /// Change the delay mid-stream. Growing inserts zeros at the output end
    /// (a short silence); shrinking drops the oldest pending samples.
    pub fn set_delay_ticks(&mut self, delay_ticks: usize) {
        while self.buffer.len() > delay_ticks {
            self.buffer.pop_front();
        }
        while self.buffer.len() < delay_ticks {
            self.buffer.push_front(0.0);
        }
    }

    /// Samples still in flight, oldest first.
    pub fn pending(&self) -> impl Iterator<Item = f64> + '_ {
        self.buffer.iter().copied()
    }
}

/// Result of a vision quantization; `clamped` flags an input outside [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisionSample {
    pub value: f64,
    pub clamped: bool,
}

/// Mid-rise quantizer on [0, 1]: the centre of the 2^R uniform bin holding
/// `pos`.
pub fn quantize_vision(pos: f64, bits: u32) -> Result<VisionSample, SignalError> {
    check_rate(bits)?;
    Ok(quantize_vision_unchecked(pos, bits))
}

pub(crate) fn quantize_vision_unchecked(pos: f64, bits: u32) -> VisionSample {
    let clamped = !(0.0..=1.0).contains(&pos);
    let pos = if pos.is_nan() { 0.5 } else { pos.clamp(0.0, 1.0) };
    let bins = (1u64 << bits) as f64;
    let bin = (pos * bins).floor().min(bins - 1.0);
    VisionSample {
        value: (bin + 0.5) / bins,
        clamped,
    }
}

/// Action-path quantizer. Output speeds are `±k * max_speed / 2^(R-1)` for
/// `k = 1..=2^(R-1)`; there is no zero level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionQuantizer {
    bits: u32,
    max_angle: f64,
    max_speed: f64,
}

impl ActionQuantizer {
    pub fn new(bits: u32, max_angle: f64, max_speed: f64) -> Result<Self, SignalError> {
        check_rate(bits)?;
        for (name, value) in [("max_angle", max_angle), ("max_speed", max_speed)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SignalError::NonPositive { name, value });
            }
        }
        Ok(Self {
            bits,
            max_angle,
            max_speed,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    fn half_levels(&self) -> u64 {
        1u64 << (self.bits - 1)
    }

    pub fn step(&self) -> f64 {
        self.max_speed / self.half_levels() as f64
    }

    /// Map a wheel angle (degrees) to a signed speed. Angles beyond
    /// `max_angle` clamp; zero maps right; ties round to the larger level.
    pub fn quantize(&self, angle: f64) -> f64 {
        let n = self.half_levels() as f64;
        let angle = if angle.is_nan() { 0.0 } else { angle };
        let frac = (angle.abs() / self.max_angle).min(1.0);
        let level = (frac * n + 0.5).floor().clamp(1.0, n);
        let magnitude = level * self.max_speed / n;
        if angle >= 0.0 {
            magnitude
        } else {
            -magnitude
        }
    }

    /// All 2^R output values, ascending.
    pub fn levels(&self) -> Vec<f64> {
        let n = self.half_levels();
        let step = self.step();
        let mut out: Vec<f64> = (1..=n).rev().map(|k| -(k as f64) * step).collect();
        out.extend((1..=n).map(|k| k as f64 * step));
        out
    }
}

pub fn quantize_action(
    angle: f64,
    bits: u32,
    max_angle: f64,
    max_speed: f64,
) -> Result<f64, SignalError> {
    Ok(ActionQuantizer::new(bits, max_angle, max_speed)?.quantize(angle))
}

/// Default length of past trail kept on screen below the player.
pub const DEFAULT_LOOKBEHIND_SECONDS: f64 = 2.0;

/// Visible interval `[t - lookbehind, t - T_vis]`. Negative `T_vis` is
/// advance warning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisionWindow {
    t_vis_ticks: i64,
    lookbehind_ticks: i64,
}

impl VisionWindow {
    pub fn new(t_vis: f64, lookbehind: f64) -> Result<Self, SignalError> {
        if !(-1.0..1.0).contains(&t_vis) {
            return Err(SignalError::VisionDelayOutOfRange(t_vis));
        }
        if !(lookbehind >= 0.0) {
            return Err(SignalError::NegativeDelay(lookbehind));
        }
        Ok(Self {
            t_vis_ticks: seconds_to_ticks(t_vis),
            lookbehind_ticks: seconds_to_ticks(lookbehind),
        })
    }

    pub fn with_vision_delay(t_vis: f64) -> Result<Self, SignalError> {
        Self::new(t_vis, DEFAULT_LOOKBEHIND_SECONDS)
    }

    pub fn t_vis_ticks(&self) -> i64 {
        self.t_vis_ticks
    }

    pub fn lookbehind_ticks(&self) -> i64 {
        self.lookbehind_ticks
    }

    /// Offsets (in ticks, relative to the present) of the first and last
    /// visible samples. The range is empty when the vision delay exceeds the
    /// lookbehind.
    pub fn offsets(&self) -> std::ops::RangeInclusive<i64> {
        -self.lookbehind_ticks..=-self.t_vis_ticks
    }
}

/// One visible trail sample: tick offset from the present (positive = ahead)
/// and position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrailSample {
    pub offset: i64,
    pub pos: f64,
}

/// Trail samples visible at tick `t`, oldest first. Queries outside the track
/// return the nearest boundary sample.
pub fn visible_segment(trail: &[f64], t: u64, window: &VisionWindow) -> Vec<TrailSample> {
    if trail.is_empty() {
        return Vec::new();
    }
    let last = trail.len() as i64 - 1;
    window
        .offsets()
        .map(|offset| {
            let idx = (t as i64 + offset).clamp(0, last) as usize;
            TrailSample {
                offset,
                pos: trail[idx],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delay_line_identity_and_shift() {
        let mut line = DelayLine::new(0);
        let out: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&s| line.push(s)).collect();
        assert_eq!(out, vec![1.0, 2.0, 3.0]);

        let mut line = DelayLine::new(3);
        let out: Vec<f64> = [1.0, 2.0, 3.0, 4.0, 5.0]
            .iter()
            .map(|&s| line.push(s))
            .collect();
        assert_eq!(out, vec![0.0, 0.0, 0.0, 1.0, 2.0]);
        assert_eq!(line.delay_ticks(), 3);
    }

    #[test]
    fn delay_seconds_round_to_ticks() {
        assert_eq!(DelayLine::from_seconds(0.15).unwrap().delay_ticks(), 15);
        assert_eq!(DelayLine::from_seconds(0.3).unwrap().delay_ticks(), 30);
        assert_eq!(DelayLine::from_seconds(0.75).unwrap().delay_ticks(), 75);
        assert!(DelayLine::from_seconds(-0.01).is_err());
    }

    #[test]
    fn delay_resize() {
        let mut line = DelayLine::new(2);
        line.push(1.0);
        line.push(2.0);
        line.set_delay_ticks(4);
        let out: Vec<f64> = (0..4).map(|_| line.push(9.0)).collect();
        assert_eq!(out, vec![0.0, 0.0, 1.0, 2.0]);
        line.set_delay_ticks(1);
        assert_eq!(line.push(7.0), 9.0);
    }

    #[test]
    fn vision_quantizer_examples() {
        assert_eq!(quantize_vision(0.3, 1).unwrap().value, 0.25);
        assert_eq!(quantize_vision(0.6, 2).unwrap().value, 0.625);
        assert_eq!(quantize_vision(0.75, 1).unwrap().value, 0.75);
        assert_eq!(quantize_vision(1.0, 1).unwrap().value, 0.75);
        let out = quantize_vision(1.3, 3).unwrap();
        assert!(out.clamped);
        assert_eq!(out.value, 15.0 / 16.0);
        assert!(quantize_vision(0.5, 0).is_err());
        assert!(quantize_vision(0.5, 11).is_err());
    }

    #[test]
    fn action_quantizer_examples() {
        let s = 2.0;
        assert_eq!(quantize_action(30.0, 1, 90.0, s).unwrap(), s);
        assert_eq!(quantize_action(-30.0, 1, 90.0, s).unwrap(), -s);
        assert_eq!(quantize_action(0.0, 1, 90.0, s).unwrap(), s);

        let q = ActionQuantizer::new(3, 90.0, s).unwrap();
        let mags: Vec<f64> = q.levels().into_iter().filter(|&v| v > 0.0).collect();
        assert_eq!(mags, vec![s / 4.0, s / 2.0, 3.0 * s / 4.0, s]);
        // 1/8 of full scale sits exactly between 0 and the first level
        assert_eq!(q.quantize(90.0 / 8.0), s / 4.0);
        // 3/8 of full scale ties between s/4 and s/2
        assert_eq!(q.quantize(3.0 * 90.0 / 8.0), s / 2.0);
        assert_eq!(q.quantize(400.0), s);
        assert_eq!(q.quantize(-400.0), -s);
    }

    #[test]
    fn window_examples() {
        let trail: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let w = VisionWindow::new(-1.0, 2.0).unwrap();
        let seg = visible_segment(&trail, 500, &w);
        assert_eq!(seg.last().unwrap().offset, 100);
        assert_eq!(seg.last().unwrap().pos, 600.0);
        assert_eq!(seg.first().unwrap().pos, 300.0);

        let w = VisionWindow::new(0.0, 2.0).unwrap();
        assert_eq!(visible_segment(&trail, 500, &w).last().unwrap().offset, 0);

        let w = VisionWindow::new(0.5, 2.0).unwrap();
        let seg = visible_segment(&trail, 500, &w);
        assert_eq!(seg.last().unwrap().offset, -50);
        assert!(seg.iter().all(|s| s.offset < 0));

        // boundary hold outside the track
        let w = VisionWindow::new(-1.0, 0.0).unwrap();
        let seg = visible_segment(&trail, 990, &w);
        assert_eq!(seg.last().unwrap().pos, 999.0);

        assert!(VisionWindow::new(1.0, 2.0).is_err());
        assert!(VisionWindow::new(-1.01, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn vision_idempotent_bounded_monotone(p in 0.0f64..=1.0, q in 0.0f64..=1.0, bits in 1u32..=10) {
            let qp = quantize_vision(p, bits).unwrap().value;
            prop_assert_eq!(quantize_vision(qp, bits).unwrap().value, qp);
            prop_assert!((qp - p).abs() <= 1.0 / (1u64 << (bits + 1)) as f64 + 1e-15);
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(quantize_vision(lo, bits).unwrap().value <= quantize_vision(hi, bits).unwrap().value);
        }

        #[test]
        fn action_outputs_in_level_set(angle in -200.0f64..200.0, bits in 1u32..=10) {
            let q = ActionQuantizer::new(bits, 90.0, 1.5).unwrap();
            let levels = q.levels();
            prop_assert_eq!(levels.len(), 1usize << bits);
            let out = q.quantize(angle);
            prop_assert!(out != 0.0);
            prop_assert!(levels.contains(&out));
        }

        #[test]
        fn delay_lines_compose(a in 0usize..8, b in 0usize..8, xs in prop::collection::vec(-5.0f64..5.0, 0..40)) {
            let mut first = DelayLine::new(a);
            let mut second = DelayLine::new(b);
            let mut joint = DelayLine::new(a + b);
            for &x in &xs {
                prop_assert_eq!(second.push(first.push(x)), joint.push(x));
            }
        }
    }
}
