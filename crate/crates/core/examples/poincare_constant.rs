//! Smallest Rayleigh quotient of the weighted three-segment network.
//!
//! Shows second-order convergence on the analytic case (unit weights,
//! segments of length pi/2, eigenvalue 1), how the constant scales with
//! length, and its minimum over a parameter box.
//!
//! cargo run --release --example poincare_constant

use std::f64::consts::PI;

use triod_flow::rayleigh::{self, NetworkEigenProblem};

fn main() -> triod_flow::Result<()> {
    println!("{:>6} {:>16} {:>12}", "nodes", "eigenvalue", "error");
    let mut previous: Option<f64> = None;
    for n in [25usize, 50, 100, 200, 400] {
        let lambda = rayleigh::poincare_constant(&NetworkEigenProblem::new([PI / 2.0; 3], [1.0; 3], n)?)?;
        let err = (lambda - 1.0).abs();
        let order = previous.map_or(String::new(), |p| format!("order {:.3}", (p / err).log2()));
        println!("{n:6} {lambda:16.12} {err:12.3e} {order}");
        previous = Some(err);
    }

    let base = rayleigh::poincare_constant(&NetworkEigenProblem::new([1.0, 1.4, 0.8], [1.0, 1.2, 0.9], 200)?)?;
    let doubled = rayleigh::poincare_constant(&NetworkEigenProblem::new([2.0, 2.8, 1.6], [1.0, 1.2, 0.9], 200)?)?;
    println!("doubling every length divides the constant by {:.6}", base / doubled);

    let (mode_value, modes) = rayleigh::poincare_mode(&NetworkEigenProblem::new([1.0, 1.4, 0.8], [1.0, 1.2, 0.9], 200)?)?;
    let ends: Vec<String> = modes.iter().map(|m| format!("{:+.4}", m[m.len() - 1])).collect();
    println!("mode for {mode_value:.6} takes the values {} at the junction", ends.join(", "));

    let boxed = rayleigh::poincare_constant_over_box((0.5, 2.0), (0.5, 2.0), 4, 64)?;
    println!("minimum over [0.5, 2]^6 on a 4^6 grid: {boxed:.6}");
    Ok(())
}
