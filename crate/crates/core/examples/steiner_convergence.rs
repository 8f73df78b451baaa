//! Perturbed Steiner triod relaxing back to equilibrium.
//!
//! Prints the energy, the misorientation norm, the curvature norm and the
//! distance to the Steiner triod at a few times, then the fitted decay rates.
//!
//! cargo run --release --example steiner_convergence

use std::time::Instant;

use triod_flow::diagnostics::{self, DiagnosticsRecord};
use triod_flow::solver::{self, SolverConfig, TimeStep};
use triod_flow::{geometry, scenario, EndpointSet, GrainModel, SurfaceTensionModel};

fn main() -> triod_flow::Result<()> {
    let endpoints = EndpointSet::equilateral(1.0);
    let model = GrainModel::new(SurfaceTensionModel::Quadratic { s0: 1.0, c: 0.5 }, 1.0)?;
    let config = SolverConfig {
        grid_n: 200,
        time_step: TimeStep::Cfl(0.4),
        t_end: 5.0,
        record_every: 200,
        ..SolverConfig::default()
    };
    let initial = scenario::perturbed_steiner_initial(&endpoints, [0.0, 0.1, -0.1], &model, config.grid_n, 0.1, 1)?;
    let started = Instant::now();
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let last = solver::run(initial, &model, &endpoints, &config, &mut records)?;
    println!("{} records in {:.2?}", records.len(), started.elapsed());

    println!("{:>6} {:>14} {:>12} {:>12} {:>12}", "t", "energy", "sum d_alpha^2", "kappa norm", "to steiner");
    let stride = (records.len() / 10).max(1);
    for r in records.iter().step_by(stride).chain(records.last()) {
        println!(
            "{:6.3} {:14.10} {:12.4e} {:12.4e} {:12.4e}",
            r.t, r.energy, r.sum_delta_alpha_sq, r.weighted_kappa_l2, r.dist_to_steiner
        );
    }
    let window = diagnostics::default_window(&records);
    let (rate_alpha, r2_alpha) = diagnostics::decay_rate_fit(&records, |r| r.sum_delta_alpha_sq, window)?;
    let half = (0.5 * last.time, last.time);
    let (rate_kappa, r2_kappa) = diagnostics::decay_rate_fit(&records, |r| r.weighted_kappa_l2, half)?;
    println!("misorientation norm decays at {rate_alpha:.4} (r2 {r2_alpha:.6})");
    println!("curvature norm decays at {rate_kappa:.4} (r2 {r2_kappa:.6})");
    let fermat = geometry::fermat_point(&endpoints)?;
    let end = records.last().unwrap();
    println!(
        "junction ({:.3e}, {:.3e}), Fermat point ({:.3e}, {:.3e}), mismatch {:.3e}",
        end.junction[0], end.junction[1], fermat.x, fermat.y, end.junction_mismatch
    );
    println!("junction cosines {:?}", diagnostics::junction_cosines(&last));
    Ok(())
}
