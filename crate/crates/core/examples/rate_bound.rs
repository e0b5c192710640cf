//! Exhaustive minimax value of an R-bit controller against a +-1
//! adversary, next to the 1/2^(R-1) lower bound.
//!
//! cargo run --release --example rate_bound -- [horizon]

use wheelcon::subjects::oracle::rate_lower_bound;
use wheelcon::subjects::{minimax_value, search_level_scale, uniform_levels};
use wheelcon::verify::SCALE_RANGE;

fn main() -> anyhow::Result<()> {
    let horizon: usize = std::env::args().nth(1).map_or(Ok(6), |s| s.parse())?;
    let grid = [-1.0, 1.0];
    for bits in 1..=2 {
        let unit = minimax_value(horizon, &uniform_levels(bits, 1.0), &grid)?;
        let best = search_level_scale(bits, horizon, &grid, SCALE_RANGE.0, SCALE_RANGE.1)?;
        println!(
            "R={bits} N={horizon}: value {:.4} at unit levels, {:.4} at best scale {:.3}, bound {}",
            unit.value,
            best.result.value,
            best.scale,
            rate_lower_bound(bits)
        );
        let line: Vec<String> = best.result.path.iter().map(|(u, r)| format!("({u:+.2},{r:+})")).collect();
        println!("  adversary line (u, r): {}", line.join(" "));
    }
    Ok(())
}
