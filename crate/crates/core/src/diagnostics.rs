//! Observables along a trajectory: energy and its dissipation, orientation
//! norms, weighted curvature norms and distances to the Steiner triod.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, PlanarTriod};
use crate::model::{self, next, EndpointSet, GrainModel, TriodState};
use crate::numerics;

pub const TIMESERIES_HEADER: &str = "t,energy,dissipation_rhs,energy_balance_residual,sum_delta_alpha_sq,alpha_sum,\
weighted_kappa_l2,weighted_dkappa_l2,herring_residual,junction_x,junction_y,junction_mismatch,dist_to_steiner,\
min_length,alpha1,alpha2,alpha3,L1,L2,L3";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub dissipation_rhs: f64,
    /// Filled in afterwards from neighbouring records; NaN until then.
    pub energy_balance_residual: f64,
    pub sum_delta_alpha_sq: f64,
    pub alpha_sum: f64,
    pub weighted_kappa_l2: f64,
    pub weighted_dkappa_l2: f64,
    pub herring_residual: f64,
    pub junction: [f64; 2],
    pub junction_mismatch: f64,
    /// NaN when the endpoints admit no Steiner triod.
    pub dist_to_steiner: f64,
    pub min_length: f64,
    pub triangle_condition_ok: bool,
    pub alpha: [f64; 3],
    pub lengths: [f64; 3],
}

impl DiagnosticsRecord {
    pub fn write_csv_row<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut fields = vec![
            self.t,
            self.energy,
            self.dissipation_rhs,
            self.energy_balance_residual,
            self.sum_delta_alpha_sq,
            self.alpha_sum,
            self.weighted_kappa_l2,
            self.weighted_dkappa_l2,
            self.herring_residual,
            self.junction[0],
            self.junction[1],
            self.junction_mismatch,
            self.dist_to_steiner,
            self.min_length,
        ];
        fields.extend(self.alpha);
        fields.extend(self.lengths);
        let row: Vec<String> = fields.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", row.join(","))
    }
}

pub fn write_timeseries<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> io::Result<()> {
    writeln!(w, "{TIMESERIES_HEADER}")?;
    for r in records {
        r.write_csv_row(&mut w)?;
    }
    Ok(())
}

/// `E = sum_j sigma(Delta^(j) alpha) L^(j)`.
pub fn energy(state: &TriodState, model: &GrainModel) -> f64 {
    let sig = model.sigmas(&state.alpha);
    (0..3).map(|j| sig[j] * state.lengths[j]).sum()
}

/// `-sum_j ( int (sigma kappa)^2 ds + (d_t alpha^(j))^2 / gamma )`.
pub fn dissipation_rhs(state: &TriodState, model: &GrainModel) -> f64 {
    let sig = model.sigmas(&state.alpha);
    let rate = model.alpha_rate(&state.alpha, &state.lengths);
    let h = state.h();
    (0..3)
        .map(|j| {
            let d = numerics::derivative_vec(&state.theta[j], h);
            let curve = sig[j] * sig[j] / state.lengths[j] * numerics::trapezoid_sq(&d, h);
            -(curve + rate[j] * rate[j] / model.gamma)
        })
        .sum()
}

/// `sum_j (Delta^(j) alpha)^2`.
pub fn misorientation_norm(state: &TriodState) -> f64 {
    model::misorientations(&state.alpha).iter().map(|d| d * d).sum()
}

pub fn alpha_sum(state: &TriodState) -> f64 {
    state.alpha.iter().sum()
}

/// `(sum_j int sigma^2 kappa^2 ds, sum_j int sigma^3 (d_s kappa)^2 ds)`.
pub fn weighted_curvature_norms(state: &TriodState, model: &GrainModel) -> (f64, f64) {
    let sig = model.sigmas(&state.alpha);
    let h = state.h();
    let mut first = 0.0;
    let mut second = 0.0;
    for j in 0..3 {
        let l = state.lengths[j];
        let kappa = model::curvature_field(state, j);
        let dk = numerics::derivative_vec(&kappa, h);
        first += sig[j].powi(2) * l * numerics::trapezoid_sq(&kappa, h);
        second += sig[j].powi(3) / l * numerics::trapezoid_sq(&dk, h);
    }
    (first, second)
}

/// `cos(Theta^(j+1)(1) - Theta^(j)(1))`; all equal `-1/2` at a symmetric junction.
pub fn junction_cosines(state: &TriodState) -> [f64; 3] {
    let a = state.junction_angles();
    std::array::from_fn(|j| (a[next(j)] - a[j]).cos())
}

/// Largest of the three equilibrium measures (Herring residual, weighted
/// curvature norm, misorientation norm), each as an L2-type norm.
pub fn equilibrium_residual(record: &DiagnosticsRecord) -> f64 {
    record
        .herring_residual
        .max(record.weighted_kappa_l2.sqrt())
        .max(record.sum_delta_alpha_sq.sqrt())
}

/// Builds records for one run; caches the Steiner reference triod.
#[derive(Debug, Clone)]
pub struct Recorder {
    endpoints: EndpointSet,
    steiner: Option<PlanarTriod>,
}

impl Recorder {
    pub fn new(endpoints: EndpointSet, grid_n: usize) -> Self {
        Self { endpoints, steiner: geometry::steiner_triod(&endpoints, grid_n).ok() }
    }

    pub fn record(&self, state: &TriodState, model: &GrainModel) -> DiagnosticsRecord {
        let triod = PlanarTriod::reconstruct(state, &self.endpoints);
        let junction = triod.junction_point();
        let (wk, wdk) = weighted_curvature_norms(state, model);
        DiagnosticsRecord {
            t: state.time,
            energy: energy(state, model),
            dissipation_rhs: dissipation_rhs(state, model),
            energy_balance_residual: f64::NAN,
            sum_delta_alpha_sq: misorientation_norm(state),
            alpha_sum: alpha_sum(state),
            weighted_kappa_l2: wk,
            weighted_dkappa_l2: wdk,
            herring_residual: model::herring_residual(state, &model.tension),
            junction: [junction.x, junction.y],
            junction_mismatch: geometry::junction_mismatch(&triod),
            dist_to_steiner: self.steiner.as_ref().map_or(f64::NAN, |s| geometry::triod_distance(&triod, s)),
            min_length: state.lengths.iter().copied().fold(f64::INFINITY, f64::min),
            triangle_condition_ok: model::triangle_condition(&model.sigmas(&state.alpha)),
            alpha: state.alpha,
            lengths: state.lengths,
        }
    }
}

/// `|dE/dt - dissipation_rhs|` at every interior record, with `dE/dt` from
/// the three-point centred difference (second order also for unequal
/// spacing). Returns `(t, residual)` pairs.
pub fn energy_balance_residual(records: &[DiagnosticsRecord]) -> Result<Vec<(f64, f64)>> {
    if records.len() < 3 {
        return Err(Error::InsufficientRecords { needed: 3, got: records.len() });
    }
    Ok(records
        .windows(3)
        .map(|w| {
            let (h1, h2) = (w[1].t - w[0].t, w[2].t - w[1].t);
            let de = -h2 / (h1 * (h1 + h2)) * w[0].energy
                + (h2 - h1) / (h1 * h2) * w[1].energy
                + h1 / (h2 * (h1 + h2)) * w[2].energy;
            (w[1].t, (de - w[1].dissipation_rhs).abs())
        })
        .collect())
}

/// Stores [`energy_balance_residual`] into the records; the two ends stay NaN.
pub fn fill_energy_balance(records: &mut [DiagnosticsRecord]) {
    if let Ok(res) = energy_balance_residual(records) {
        for (r, (_, v)) in records[1..].iter_mut().zip(res) {
            r.energy_balance_residual = v;
        }
    }
}

/// Log-linear least-squares fit `field ~ C exp(-rate t)` over the records
/// with `t` in `window`. Returns `(rate, r^2)`.
pub fn decay_rate_fit<F>(records: &[DiagnosticsRecord], field: F, window: (f64, f64)) -> Result<(f64, f64)>
where
    F: Fn(&DiagnosticsRecord) -> f64,
{
    let samples: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1)
        .map(|r| (r.t, field(r)))
        .collect();
    fit_exponential(&samples)
}

/// Same fit on raw `(t, value)` samples.
pub fn fit_exponential(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.len() < 3 {
        return Err(Error::InsufficientRecords { needed: 3, got: samples.len() });
    }
    if let Some(&(t, value)) = samples.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositiveSamples { t, value });
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let logs: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let (_, slope, r2) = numerics::linear_fit(&ts, &logs);
    Ok((-slope, r2))
}

/// Default fit window: drops the first 10% of the recorded span.
pub fn default_window(records: &[DiagnosticsRecord]) -> (f64, f64) {
    match (records.first(), records.last()) {
        (Some(a), Some(b)) => (a.t + 0.1 * (b.t - a.t), b.t),
        _ => (0.0, 0.0),
    }
}
