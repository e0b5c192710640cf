//! Exhaustive game-tree search for the quantized control game.
//!
//! Each tick the controller commits `u` from a finite level set, then the
//! adversary picks `r` from a finite grid, and `x <- x + u + r` from
//! `x(0) = 0`. The value is the controller's best guaranteed bound on
//! `max_t |x(t)|` over the horizon. Because the cost is a running maximum,
//! the optimal continuation depends only on the current `x` and the ticks
//! left, so a table keyed by that pair is exact. States are keyed by how many
//! times each level and each grid value has been used, which fixes `x`
//! without float-equality guesswork.

use std::collections::HashMap;

use thiserror::Error;

pub const MAX_HORIZON: usize = 12;
pub const MAX_LEVELS: usize = 4;
pub const MAX_GRID: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(
        "search budget exceeded: horizon {horizon} (max {MAX_HORIZON}), {levels} levels (max {MAX_LEVELS}), {grid} adversary values (max {MAX_GRID})"
    )]
    Budget {
        horizon: usize,
        levels: usize,
        grid: usize,
    },
    #[error("level set and adversary grid must be non-empty and finite")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxResult {
    pub value: f64,
    /// Largest |u| the optimal controller uses along the adversary's best
    /// line of play.
    pub sup_u: f64,
    /// That line of play as `(u, r)` pairs.
    pub path: Vec<(f64, f64)>,
    /// Distinct `(state, ticks left)` entries evaluated.
    pub states: usize,
}

struct Search<'a> {
    levels: &'a [f64],
    grid: &'a [f64],
    memo: HashMap<u64, f64>,
}

// 4 bits per count; horizon <= 12 keeps every count below 16.
fn key(counts: &[u8; MAX_LEVELS + MAX_GRID], left: usize) -> u64 {
    counts
        .iter()
        .fold(left as u64, |k, &c| (k << 4) | c as u64)
}

impl Search<'_> {
    fn position(&self, counts: &[u8; MAX_LEVELS + MAX_GRID]) -> f64 {
        let mut x = 0.0;
        for (i, &s) in self.levels.iter().enumerate() {
            x += counts[i] as f64 * s;
        }
        for (j, &r) in self.grid.iter().enumerate() {
            x += counts[MAX_LEVELS + j] as f64 * r;
        }
        x
    }

    /// Worst-case outcome of playing level `i` now, and the adversary reply
    /// that achieves it.
    fn after_move(&mut self, counts: &[u8; MAX_LEVELS + MAX_GRID], left: usize, i: usize) -> (f64, usize) {
        let mut worst = f64::NEG_INFINITY;
        let mut reply = 0;
        for j in 0..self.grid.len() {
            let mut next = *counts;
            next[i] += 1;
            next[MAX_LEVELS + j] += 1;
            let here = self.position(&next).abs();
            let v = here.max(self.value(&next, left - 1));
            if v > worst {
                worst = v;
                reply = j;
            }
        }
        (worst, reply)
    }

    /// Best level to play: lowest worst case, then smaller |u|, then the
    /// negative level.
    fn best_move(&mut self, counts: &[u8; MAX_LEVELS + MAX_GRID], left: usize) -> (f64, usize, usize) {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..self.levels.len() {
            let (v, reply) = self.after_move(counts, left, i);
            let (s, b) = (self.levels[i], self.levels[best.1]);
            let better = v < best.0
                || (v == best.0 && (s.abs() < b.abs() || (s.abs() == b.abs() && s < b)));
            if better {
                best = (v, i, reply);
            }
        }
        best
    }

    fn value(&mut self, counts: &[u8; MAX_LEVELS + MAX_GRID], left: usize) -> f64 {
        if left == 0 {
            return 0.0;
        }
        let k = key(counts, left);
        if let Some(&v) = self.memo.get(&k) {
            return v;
        }
        let v = self.best_move(counts, left).0;
        self.memo.insert(k, v);
        v
    }
}

/// Exact value of the `horizon`-tick game.
pub fn minimax_value(horizon: usize, levels: &[f64], grid: &[f64]) -> Result<MinimaxResult, OracleError> {
    if horizon > MAX_HORIZON || levels.len() > MAX_LEVELS || grid.len() > MAX_GRID {
        return Err(OracleError::Budget {
            horizon,
            levels: levels.len(),
            grid: grid.len(),
        });
    }
    if levels.is_empty() || grid.is_empty() || levels.iter().chain(grid).any(|v| !v.is_finite()) {
        return Err(OracleError::Empty);
    }
    let mut search = Search {
        levels,
        grid,
        memo: HashMap::new(),
    };
    let mut counts = [0u8; MAX_LEVELS + MAX_GRID];
    let value = search.value(&counts, horizon);

    let mut path = Vec::with_capacity(horizon);
    for left in (1..=horizon).rev() {
        let (_, i, j) = search.best_move(&counts, left);
        counts[i] += 1;
        counts[MAX_LEVELS + j] += 1;
        path.push((levels[i], grid[j]));
    }
    let sup_u = path.iter().fold(0.0f64, |m, (u, _)| m.max(u.abs()));
    Ok(MinimaxResult {
        value,
        sup_u,
        path,
        states: search.memo.len(),
    })
}

/// The symmetric uniform level set of `bits` bits with largest level
/// `scale`: `{±k·scale/2^(bits-1)}`.
pub fn uniform_levels(bits: u32, scale: f64) -> Vec<f64> {
    let n = 1u32 << bits.saturating_sub(1);
    let mut out: Vec<f64> = (1..=n).rev().map(|k| -(k as f64) * scale / n as f64).collect();
    out.extend((1..=n).map(|k| k as f64 * scale / n as f64));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSearch {
    pub scale: f64,
    pub levels: Vec<f64>,
    pub result: MinimaxResult,
    pub evaluations: usize,
}

/// Lowest game value over uniform level sets: a coarse scan of scales in
/// `[lo, hi]`, then golden-section refinement around the best scan point.
pub fn search_level_scale(
    bits: u32,
    horizon: usize,
    grid: &[f64],
    lo: f64,
    hi: f64,
) -> Result<LevelSearch, OracleError> {
    const COARSE: usize = 32;
    const REFINE: usize = 48;
    let mut evaluations = 0;
    let mut best: Option<LevelSearch> = None;
    let mut eval = |scale: f64, best: &mut Option<LevelSearch>| -> Result<f64, OracleError> {
        let levels = uniform_levels(bits, scale);
        let result = minimax_value(horizon, &levels, grid)?;
        evaluations += 1;
        let v = result.value;
        let improves = match best {
            None => true,
            Some(b) => v < b.result.value || (v == b.result.value && scale < b.scale),
        };
        if improves {
            *best = Some(LevelSearch {
                scale,
                levels,
                result,
                evaluations: 0,
            });
        }
        Ok(v)
    };

    let step = (hi - lo) / (COARSE - 1) as f64;
    for i in 0..COARSE {
        eval(lo + step * i as f64, &mut best)?;
    }
    let centre = best.as_ref().map_or(lo, |b| b.scale);
    let (mut a, mut b) = ((centre - step).max(lo), (centre + step).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = eval(c, &mut best)?;
    let mut fd = eval(d, &mut best)?;
    for _ in 0..REFINE {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = eval(c, &mut best)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = eval(d, &mut best)?;
        }
    }
    let mut out = best.ok_or(OracleError::Empty)?;
    out.evaluations = evaluations;
    Ok(out)
}

/// `1/2^(R-1)`: the worst-case deviation no R-bit controller can beat
/// against a unit adversary.
pub fn rate_lower_bound(bits: u32) -> f64 {
    1.0 / (1u64 << (bits - 1)) as f64
}

/// `(1 + 1/2^(R-1))(1 - 1/2^R)`, reported next to the oracle's control
/// effort.
pub fn effort_formula(bits: u32) -> f64 {
    let half = (1u64 << (bits - 1)) as f64;
    (1.0 + 1.0 / half) * (1.0 - 1.0 / (2.0 * half))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Plain recursion over the full tree, no table.
    fn brute(x: f64, left: usize, levels: &[f64], grid: &[f64]) -> f64 {
        if left == 0 {
            return 0.0;
        }
        levels
            .iter()
            .map(|u| {
                grid.iter()
                    .map(|r| {
                        let nx = x + u + r;
                        nx.abs().max(brute(nx, left - 1, levels, grid))
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn small_cases() {
        assert_eq!(minimax_value(0, &[-1.0, 1.0], &[-1.0, 1.0]).unwrap().value, 0.0);
        let r = minimax_value(1, &[-0.1, 0.1], &[-1.0, 1.0]).unwrap();
        assert!((r.value - 1.1).abs() < 1e-12);
        assert_eq!(r.sup_u, 0.1);
        assert_eq!(r.path.len(), 1);
    }

    #[test]
    fn budget_enforced() {
        assert!(matches!(
            minimax_value(13, &[1.0], &[1.0]),
            Err(OracleError::Budget { horizon: 13, .. })
        ));
        assert!(minimax_value(3, &[1.0; 5], &[1.0]).is_err());
        assert!(minimax_value(3, &[1.0], &[1.0; 4]).is_err());
        assert_eq!(minimax_value(3, &[], &[1.0]), Err(OracleError::Empty));
    }

    #[test]
    fn formula_values() {
        assert_eq!(effort_formula(1), 1.0);
        assert_eq!(effort_formula(2), 1.125);
        assert_eq!(rate_lower_bound(1), 1.0);
        assert_eq!(rate_lower_bound(2), 0.5);
        assert_eq!(uniform_levels(2, 1.0), vec![-1.0, -0.5, 0.5, 1.0]);
    }

    #[test]
    fn twelve_tick_game_is_tractable() {
        let r = minimax_value(12, &uniform_levels(2, 1.0), &[-1.0, 0.0, 1.0]).unwrap();
        assert!(r.value >= 0.5);
    }

    #[test]
    fn level_search_respects_bound() {
        for bits in [1, 2] {
            let s = search_level_scale(bits, 6, &[-1.0, 1.0], 0.25, 4.0).unwrap();
            assert!(s.result.value >= rate_lower_bound(bits) - 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn matches_plain_recursion(
            n in 0usize..5,
            levels in proptest::collection::vec(-2.0f64..2.0, 1..=4),
            grid in proptest::collection::vec(-1.5f64..1.5, 1..=3),
        ) {
            let v = minimax_value(n, &levels, &grid).unwrap().value;
            prop_assert!((v - brute(0.0, n, &levels, &grid)).abs() < 1e-9);
        }

        #[test]
        fn monotone_in_horizon_and_levels(
            n in 0usize..6,
            levels in proptest::collection::vec(-2.0f64..2.0, 1..=3),
            extra in -2.0f64..2.0,
        ) {
            let grid = [-1.0, 1.0];
            let v = minimax_value(n, &levels, &grid).unwrap().value;
            let longer = minimax_value(n + 1, &levels, &grid).unwrap().value;
            prop_assert!(longer >= v);
            let mut refined = levels.clone();
            refined.push(extra);
            let finer = minimax_value(n, &refined, &grid).unwrap().value;
            prop_assert!(finer <= v + 1e-12);
        }
    }
}
