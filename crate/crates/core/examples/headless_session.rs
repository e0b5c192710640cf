//! Play Game 4 headless with the noisy-human subject and print per-block
//! error norms.
//!
//! cargo run --release --example headless_session -- [subject-spec]

use wheelcon::analysis::{block_norms, DEFAULT_TRIM_SECONDS};
use wheelcon::engine::{run_headless, SessionConfig};
use wheelcon::script::{build_game, GameId};
use wheelcon::subjects::SubjectSpec;

fn main() -> anyhow::Result<()> {
    let spec: SubjectSpec = std::env::args().nth(1).unwrap_or_else(|| "noisy-human".into()).parse()?;
    let sched = build_game(GameId::ActionRate, 1)?;
    let mut subject = spec.build().ok_or_else(|| anyhow::anyhow!("{spec} needs a live client"))?;
    let log = run_headless(SessionConfig::new(sched.clone()), subject.as_mut())?;
    println!("{} ticks, status {:?}", log.records.len(), log.header.status);
    print!("{}", block_norms(&log, &sched, DEFAULT_TRIM_SECONDS)?.to_csv());
    Ok(())
}
