//! Constant tension: classical curvature flow of a triod.
//!
//! Orientations never move, and the bent initial network relaxes to the
//! Steiner triod with 120 degree angles at the junction.
//!
//! cargo run --release --example classical_network

use std::f64::consts::PI;

use triod_flow::diagnostics::{self, DiagnosticsRecord};
use triod_flow::geometry::{self, PlanarTriod};
use triod_flow::solver::{self, SolverConfig};
use triod_flow::{scenario, EndpointSet, GrainModel, SurfaceTensionModel};

fn main() -> triod_flow::Result<()> {
    let endpoints = EndpointSet::from_coords([[0.0, 0.0], [2.0, 0.0], [0.8, 1.6]])?;
    let model = GrainModel::new(SurfaceTensionModel::Constant { s0: 1.0 }, 1.0)?;
    let alpha0 = [0.3, -0.2, 0.1];
    let grid_n = 100;
    let initial = scenario::perturbed_steiner_initial(&endpoints, alpha0, &model, grid_n, 0.3, 2)?;
    let config = SolverConfig { grid_n, t_end: 10.0, record_every: 500, ..SolverConfig::default() };
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let last = solver::run(initial, &model, &endpoints, &config, &mut records)?;
    for r in &records {
        println!("t {:8.4}  length {:.10}  curvature norm {:.3e}", r.t, r.energy, r.weighted_kappa_l2);
    }
    let angles: Vec<String> = diagnostics::junction_cosines(&last)
        .iter()
        .map(|c| format!("{:.10}", c.clamp(-1.0, 1.0).acos() * 180.0 / PI))
        .collect();
    println!("junction angles [{}] degrees", angles.join(", "));
    println!("orientations unchanged: {}", last.alpha == alpha0);
    let steiner = geometry::steiner_triod(&endpoints, grid_n)?;
    println!("distance to Steiner triod {:.2e}", geometry::triod_distance(&PlanarTriod::reconstruct(&last, &endpoints), &steiner));
    Ok(())
}
