//! Host one session over a WebSocket and drive it with a scripted client
//! in the same process.
//!
//! cargo run --release --example live_session -- [lockstep|realtime]

use std::thread;

use wheelcon::engine::SessionConfig;
use wheelcon::script::{build_game, GameId};
use wheelcon::service::client::Client;
use wheelcon::service::protocol::{encode, Message, PROTO_VERSION};
use wheelcon::service::{Pace, ServeOptions, Server};
use wheelcon::subjects::{HumanParams, NoisyHuman};

fn main() -> anyhow::Result<()> {
    let pace = match std::env::args().nth(1).as_deref() {
        Some("realtime") => Pace::default(),
        _ => Pace::Lockstep,
    };
    let config = SessionConfig::new(build_game(GameId::BumpsAndTrail, 1)?.truncated(1500)?);
    let opts = ServeOptions {
        pace,
        log_path: std::env::temp_dir().join("wheelcon-live.csv"),
        ..ServeOptions::default()
    };
    let server = Server::bind("127.0.0.1:0", config, opts)?;
    let addr = server.local_addr()?.to_string();
    let host = thread::spawn(move || server.serve_one());

    let client = Client::connect(&addr, "example", PROTO_VERSION)?;
    if let Some(c) = &client.config {
        println!("config: {}", encode(&Message::Config(c.clone())));
    }
    let report = client.play_subject(&mut NoisyHuman::new(HumanParams::default()), None)?;
    for e in &report.events {
        println!("event {:?} block {} {:?}", e.event, e.block, e.label);
    }
    if let Some(s) = &report.summary {
        for row in &s.rows {
            println!("block {} {}: L1 {:.3} L2 {:.3} Linf {:.3}", row.block, row.param, row.l1, row.l2, row.linf);
        }
    }

    let outcome = host.join().expect("server thread")?;
    println!(
        "{} frames, {:.1} Hz, {} late inputs, log {}",
        outcome.frames_sent,
        outcome.frame_rate().unwrap_or(0.0),
        outcome.log.header.diagnostics.late_input,
        outcome.log_path.display()
    );
    Ok(())
}
