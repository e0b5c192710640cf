//! Worst-case error of the delayed inverse policy grows one unit per tick
//! of delay.
//!
//! cargo run --example delay_law

use wheelcon::engine::{run_headless, SessionConfig};
use wheelcon::script::ParameterSchedule;
use wheelcon::subjects::DelayedInverter;
use wheelcon::verify::square_wave;

fn sup(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn main() -> anyhow::Result<()> {
    let ticks = 500;
    println!("{:>3} {:>10} {:>12}", "T", "r = 1", "square wave");
    for delay in 0..=10 {
        let mut row = Vec::new();
        for r in [vec![1.0; ticks], square_wave(ticks, 1, 22)] {
            let sched = ParameterSchedule::model(&r, &[], delay, 0)?;
            let log = run_headless(SessionConfig::new(sched), &mut DelayedInverter::new(0))?;
            row.push(sup(&log.errors()));
        }
        println!("{delay:>3} {:>10} {:>12}", row[0], row[1]);
    }
    Ok(())
}
