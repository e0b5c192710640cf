//! Per-block norms of a recorded log, written next to it as
//! `<log>.report.csv`.
//!
//! cargo run --example analyze_log -- <log.csv> <script.txt> [trim-seconds]

use std::path::PathBuf;

use wheelcon::analysis::{block_norms, export_report, DEFAULT_TRIM_SECONDS};
use wheelcon::cli::load_script;
use wheelcon::engine::SessionLog;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let (Some(log), Some(script)) = (args.next(), args.next()) else {
        anyhow::bail!("usage: analyze_log <log.csv> <script.txt> [trim-seconds]");
    };
    let trim: f64 = args.next().map_or(Ok(DEFAULT_TRIM_SECONDS), |s| s.parse())?;
    let log_path = PathBuf::from(log);
    let recorded = SessionLog::read_files(&log_path)?;
    let report = block_norms(&recorded, &load_script(script.as_ref())?, trim)?;
    let out = log_path.with_extension("report.csv");
    export_report(&report, &out)?;
    print!("{}", report.to_csv());
    println!("# written to {}", out.display());
    Ok(())
}
