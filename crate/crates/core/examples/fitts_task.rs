//! Zone-jump pointing task: movement time per jump for the noisy-human
//! subject.
//!
//! cargo run --release --example fitts_task -- [seed]

use wheelcon::analysis::{movement_times, summarize_movements};
use wheelcon::engine::{run_headless, SessionConfig};
use wheelcon::script::{build_game, GameId};
use wheelcon::subjects::{HumanParams, NoisyHuman};

fn main() -> anyhow::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let sched = build_game(GameId::Fitts, seed)?;
    let log = run_headless(SessionConfig::new(sched.clone()), &mut NoisyHuman::new(HumanParams::default()))?;
    let mts = movement_times(&log, &sched)?;
    let zones = sched.fitts().expect("fitts schedule");
    for (m, z) in mts.iter().zip(zones.jumps.iter().skip(1)) {
        let mt = m.mt.map_or("censored".into(), |v| format!("{v:.2} s"));
        println!("jump {:>2} at {:>6.2} s, width {:.2}: {mt}", m.jump, m.jump_time, z.width);
    }
    let s = summarize_movements(&mts);
    println!(
        "{} trials, {:.0}% censored, mean MT {}",
        s.trials,
        100.0 * s.censoring_rate(),
        s.mean.map_or("n/a".into(), |v| format!("{v:.3} s"))
    );
    Ok(())
}
