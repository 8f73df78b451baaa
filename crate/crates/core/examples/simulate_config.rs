//! Runs a JSON configuration through the library and prints its summary.
//!
//! cargo run --release --example simulate_config -- crates/core/configs/misorientation_only.json

use std::path::PathBuf;

use triod_flow::cli::{self, SimulationConfig};

fn main() -> triod_flow::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/misorientation_only.json")));
    let config = SimulationConfig::load(&path)?;
    let outcome = cli::simulate(&config)?;
    for r in outcome.records.iter().step_by((outcome.records.len() / 10).max(1)) {
        println!(
            "t {:7.4}  energy {:.10}  misorientation {:.3e}  curvature {:.3e}",
            r.t, r.energy, r.sum_delta_alpha_sq, r.weighted_kappa_l2
        );
    }
    println!("{}", serde_json::to_string_pretty(&outcome.summary).expect("summary serializes"));
    Ok(())
}
