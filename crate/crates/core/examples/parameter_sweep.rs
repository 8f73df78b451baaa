//! Concurrent sweep over mobility and bump amplitude.
//!
//! The largest amplitude cannot be closed into a valid triod, so those
//! members are reported as failed while the rest of the batch completes.
//!
//! cargo run --release --example parameter_sweep

use triod_flow::cli::{self, SweepConfig};

fn main() -> triod_flow::Result<()> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/sweep.json"))
        .map_err(|e| triod_flow::Error::InvalidInput(e.to_string()))?;
    let sweep: SweepConfig =
        serde_json::from_str(&text).map_err(|e| triod_flow::Error::InvalidInput(e.to_string()))?;
    let rows = cli::run_sweep(&sweep, cli::threads_from_env())?;
    println!("{:>6} {:>6} {:>7} {:>14} {:>12} {:>12}", "gamma", "amp", "status", "energy", "mis. rate", "curv. rate");
    for r in &rows {
        let s = &r.summary;
        let rate = |f: Option<cli::RateFit>| f.map_or(f64::NAN, |f| f.rate);
        println!(
            "{:6} {:6} {:>7} {:14.10} {:12.4} {:12.4}",
            r.gamma,
            r.bump_amplitude,
            s.status,
            s.energy,
            rate(s.misorientation_decay),
            rate(s.curvature_decay)
        );
    }
    Ok(())
}
