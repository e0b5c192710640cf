//! Build every canonical game, print its block structure and optionally
//! write the scripts.
//!
//! cargo run --example build_games -- [seed] [out-dir]

use wheelcon::script::{build_game, write_script, GameId};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;
    let out = args.next();
    for id in GameId::ALL {
        let g = build_game(id, seed)?;
        let blocks: Vec<String> = g
            .blocks()
            .iter()
            .map(|b| match &b.label {
                Some(l) => format!("{l}:{}s", b.len() / 100),
                None => format!("{:?}", b.params),
            })
            .collect();
        println!("game {id}: {} s, {} blocks, schedule {}", g.duration(), blocks.len(), &g.hash()[..12]);
        for b in blocks.iter().take(8) {
            println!("    {b}");
        }
        if let Some(dir) = &out {
            std::fs::write(format!("{dir}/game{id}.txt"), write_script(&g))?;
        }
    }
    Ok(())
}
