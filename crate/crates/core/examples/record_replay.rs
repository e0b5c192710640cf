//! Record a session to disk, read it back and replay its input trace.
//!
//! cargo run --example record_replay

use wheelcon::engine::{replay, run_headless, SessionConfig, SessionLog};
use wheelcon::script::{build_game, GameId};
use wheelcon::subjects::{HumanParams, NoisyHuman};

fn main() -> anyhow::Result<()> {
    let config = SessionConfig::new(build_game(GameId::VisionDelay, 2)?.truncated(3000)?);
    let log = run_headless(config.clone(), &mut NoisyHuman::new(HumanParams::default()))?;

    let path = std::env::temp_dir().join("wheelcon-record-replay.csv");
    log.write_files(&path)?;
    let loaded = SessionLog::read_files(&path)?;
    let again = replay(&loaded, config)?;

    println!("wrote {}", path.display());
    println!("records on disk equal in memory: {}", loaded.records == log.records);
    println!("replay reproduces (t, x, u): {}", again.records == log.records);
    println!("input trace identical: {}", again.input_trace == log.input_trace);
    println!("replayed subject label: {}", again.header.subject);
    Ok(())
}
