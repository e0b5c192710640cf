//! Seed-averaged per-block norms of the noisy-human subject on Games 1-5.
//!
//! cargo run --release --example noisy_human_sweep -- [seeds] [subject-spec]

use wheelcon::analysis::DEFAULT_TRIM_SECONDS;
use wheelcon::script::GameId;
use wheelcon::subjects::SubjectSpec;
use wheelcon::verify::sweep_game;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map_or(Ok(20), |s| s.parse())?;
    let spec: SubjectSpec = args.next().unwrap_or_else(|| "noisy-human".into()).parse()?;
    println!("subject: {spec}");
    for game in [
        GameId::VisionDelay,
        GameId::ActionDelay,
        GameId::VisionRate,
        GameId::ActionRate,
        GameId::BumpsAndTrail,
    ] {
        let table = sweep_game(game, 0..seeds, &spec, DEFAULT_TRIM_SECONDS)?;
        println!("{table}");
    }
    Ok(())
}
