//! Orientation dynamics with the geometry frozen.
//!
//! With unit lengths and a quadratic tension of curvature 2c = 1, each
//! misorientation decays at rate 3 gamma, so their sum of squares decays at
//! rate 6 gamma while the orientation sum stays fixed.
//!
//! cargo run --release --example misorientation_decay

use std::f64::consts::PI;

use triod_flow::diagnostics::{self, DiagnosticsRecord};
use triod_flow::solver::{self, SolverConfig, TimeStep};
use triod_flow::{EndpointSet, GrainModel, SurfaceTensionModel, TriodState};

fn main() -> triod_flow::Result<()> {
    let endpoints = EndpointSet::equilateral(1.0);
    let angles = [-PI / 2.0, PI / 6.0, 5.0 * PI / 6.0];
    for gamma in [0.5, 1.0, 2.0] {
        let model = GrainModel::new(SurfaceTensionModel::Quadratic { s0: 1.0, c: 0.5 }, gamma)?;
        let initial = TriodState::straight(16, angles, [1.0; 3], [0.0, 0.2, -0.1]);
        let config = SolverConfig {
            grid_n: 16,
            time_step: TimeStep::Fixed(1e-3),
            t_end: 2.0 / gamma,
            record_every: 10,
            stop_residual: 0.0,
            frozen_geometry: true,
            ..SolverConfig::default()
        };
        let mut records: Vec<DiagnosticsRecord> = Vec::new();
        solver::run(initial, &model, &endpoints, &config, &mut records)?;
        let (rate, r2) =
            diagnostics::decay_rate_fit(&records, |r| r.sum_delta_alpha_sq, diagnostics::default_window(&records))?;
        let drift = (records.last().unwrap().alpha_sum - records[0].alpha_sum).abs();
        println!("gamma {gamma:4}: rate {rate:.8} (expected {:.1}), r2 {r2:.10}, sum drift {drift:.1e}", 6.0 * gamma);
    }
    Ok(())
}
