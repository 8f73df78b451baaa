//! Grid refinement of the energy identity and of junction concurrency.
//!
//! Runs the same perturbed triod on successively finer grids with a fixed
//! CFL number, so every halving of the grid spacing quarters the time step.
//!
//! cargo run --release --example refinement_study

use triod_flow::diagnostics::{self, DiagnosticsRecord};
use triod_flow::solver::{self, RecordSink, SolverConfig, StepReport, TimeStep};
use triod_flow::{scenario, EndpointSet, GrainModel, SurfaceTensionModel, TriodState};

struct Collect {
    model: GrainModel,
    records: Vec<DiagnosticsRecord>,
    last_energy: Option<f64>,
    worst_increase: f64,
}

impl RecordSink for Collect {
    fn record(&mut self, record: &DiagnosticsRecord, _state: &TriodState) {
        self.records.push(record.clone());
    }

    fn on_step(&mut self, state: &TriodState, _report: &StepReport) {
        let e = diagnostics::energy(state, &self.model);
        if let Some(prev) = self.last_energy {
            self.worst_increase = self.worst_increase.max(e - prev);
        }
        self.last_energy = Some(e);
    }
}

fn main() -> triod_flow::Result<()> {
    let endpoints = EndpointSet::equilateral(1.0);
    let model = GrainModel::new(SurfaceTensionModel::Quadratic { s0: 1.0, c: 0.5 }, 1.0)?;
    let t_end = 0.25;
    println!("{:>5} {:>10} {:>14} {:>14} {:>14}", "N", "dt", "max balance", "mismatch(end)", "max E increase");
    for n in [100usize, 200, 400] {
        let config = SolverConfig {
            grid_n: n,
            time_step: TimeStep::Cfl(0.4),
            t_end,
            record_every: 20,
            stop_residual: 0.0,
            ..SolverConfig::default()
        };
        let initial = scenario::perturbed_steiner_initial(&endpoints, [0.0, 0.1, -0.1], &model, n, 0.1, 1)?;
        let dt = config.dt_for(&initial, &model);
        let mut sink = Collect { model, records: Vec::new(), last_energy: None, worst_increase: f64::NEG_INFINITY };
        solver::run(initial, &model, &endpoints, &config, &mut sink)?;
        let balance = diagnostics::energy_balance_residual(&sink.records)?;
        let max_balance = balance.iter().filter(|(t, _)| *t >= 0.05).map(|b| b.1).fold(0.0, f64::max);
        let end = sink.records.last().unwrap();
        println!(
            "{n:5} {dt:10.3e} {max_balance:14.4e} {:14.4e} {:14.4e}",
            end.junction_mismatch, sink.worst_increase
        );
    }
    Ok(())
}
