//! Time integration of the angle/length/orientation system.
//!
//! One step advances, in order: the orientations (classical RK4 with the
//! lengths frozen), the lengths (explicit Euler), and the angle fields
//! (implicit diffusion, explicit lagged nonlocal and advective terms). The
//! three junction values `Theta^(j)(1)` are then closed by a damped Newton
//! solve of the two Herring rows and the weighted flux row.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord, Recorder};
use crate::error::{Error, Result};
use crate::model::{self, next, GrainModel, EndpointSet, TriodState};
use crate::numerics;

/// Guard on `1 - c1 c2 c3` in the junction velocity formula.
pub const DEFAULT_DENOMINATOR_GUARD: f64 = 1e-8;

/// Herring residual the initial data of a run must satisfy.
pub const INITIAL_HERRING_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStep {
    Fixed(f64),
    /// `dt = cfl * dx^2 * min_j L_j^2 / sigma_j`, re-evaluated every step.
    Cfl(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid_n: usize,
    pub time_step: TimeStep,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub t_end: f64,
    /// Equilibrium threshold on the largest of the Herring residual, the
    /// weighted curvature L2 norm and the misorientation norm. Zero disables
    /// the check.
    pub stop_residual: f64,
    pub record_every: usize,
    pub denominator_guard: f64,
    /// A step whose largest angle change exceeds this (radians) is rejected
    /// as unstable.
    pub max_angle_update: f64,
    /// Only the orientations evolve; angles and lengths stay fixed and the
    /// initial Herring check is skipped.
    pub frozen_geometry: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_n: 200,
            time_step: TimeStep::Cfl(0.4),
            newton_tol: 1e-12,
            newton_max_iter: 25,
            t_end: 1.0,
            stop_residual: 1e-9,
            record_every: 100,
            denominator_guard: DEFAULT_DENOMINATOR_GUARD,
            max_angle_update: 0.5,
            frozen_geometry: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.grid_n < 16 {
            return bad(format!("grid_n must be at least 16, got {}", self.grid_n));
        }
        match self.time_step {
            TimeStep::Fixed(dt) if !(dt > 0.0 && dt.is_finite()) => {
                return bad(format!("dt must be positive, got {dt}"))
            }
            TimeStep::Cfl(c) if !(c > 0.0 && c <= 1.0) => {
                return bad(format!("cfl must lie in (0, 1], got {c}"))
            }
            _ => {}
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return bad("newton tolerance and iteration cap must be positive".into());
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if !(self.stop_residual >= 0.0) {
            return bad("stop_residual must be non-negative".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.denominator_guard > 0.0 && self.max_angle_update > 0.0) {
            return bad("guards must be positive".into());
        }
        Ok(())
    }

    /// Time step for the given state, before clipping to `t_end`.
    pub fn dt_for(&self, state: &TriodState, model: &GrainModel) -> f64 {
        match self.time_step {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Cfl(cfl) => {
                let h = 1.0 / self.grid_n as f64;
                let sig = model.sigmas(&state.alpha);
                let limit = (0..3)
                    .map(|j| state.lengths[j] * state.lengths[j] / sig[j])
                    .fold(f64::INFINITY, f64::min);
                cfl * h * h * limit
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub dt_used: f64,
    pub newton_iterations: usize,
    pub herring_residual_post: f64,
    pub max_theta_update: f64,
}

/// Tangential velocities `lambda^(j)(1)` at the junction from the normal
/// velocities `V^(j)` and the junction tangent angles.
pub fn junction_tangential_velocity(
    angles: &[f64; 3],
    normal_velocity: &[f64; 3],
    guard: f64,
) -> Result<[f64; 3]> {
    let c: [f64; 3] = std::array::from_fn(|j| (angles[next(j)] - angles[j]).cos());
    let s: [f64; 3] = std::array::from_fn(|j| (angles[next(j)] - angles[j]).sin());
    let denominator = 1.0 - c[0] * c[1] * c[2];
    if denominator < guard {
        return Err(Error::DegenerateJunction { denominator, guard });
    }
    let v = normal_velocity;
    Ok(std::array::from_fn(|j| {
        let (j1, j2) = (next(j), next(next(j)));
        -(c[j] * c[j1] * s[j2] * v[j] + s[j] * v[j1] + c[j] * s[j1] * v[j2]) / denominator
    }))
}

/// `g^(j)`: tangential velocity at the junction for the current state, with
/// normal velocity `V = sigma kappa`.
pub fn tangent_velocity_junction(state: &TriodState, model: &GrainModel) -> Result<[f64; 3]> {
    tangent_velocity_junction_guarded(state, model, DEFAULT_DENOMINATOR_GUARD)
}

pub fn tangent_velocity_junction_guarded(
    state: &TriodState,
    model: &GrainModel,
    guard: f64,
) -> Result<[f64; 3]> {
    let sig = model.sigmas(&state.alpha);
    let h = state.h();
    let v: [f64; 3] = std::array::from_fn(|j| {
        let th = &state.theta[j];
        let n = th.len() - 1;
        let dx = (3.0 * th[n] - 4.0 * th[n - 1] + th[n - 2]) / (2.0 * h);
        sig[j] * dx / state.lengths[j]
    });
    junction_tangential_velocity(&state.junction_angles(), &v, guard)
}

/// Right-hand side of one angle equation, split for IMEX treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsParts {
    /// `sigma / L^2 * d_xx Theta` (Neumann ghost at `x = 0`, one-sided at `x = 1`).
    pub diffusion: Vec<f64>,
    /// Nonlocal stretching term plus the junction-driven advection.
    pub explicit: Vec<f64>,
}

impl RhsParts {
    pub fn total(&self) -> Vec<f64> {
        self.diffusion.iter().zip(&self.explicit).map(|(a, b)| a + b).collect()
    }
}

/// Explicit part of the angle equation for a single curve:
/// `(sigma dTheta / L^2) (int_0^x dTheta^2 - x int_0^1 dTheta^2) + (x dTheta / L) g`.
fn explicit_rhs_into(
    dtheta: &[f64],
    length: f64,
    sigma: f64,
    g: f64,
    h: f64,
    cumulative: &mut [f64],
    sq: &mut [f64],
    out: &mut [f64],
) {
    let n = dtheta.len() - 1;
    for (s, d) in sq.iter_mut().zip(dtheta) {
        *s = d * d;
    }
    numerics::cumulative_trapezoid(sq, h, cumulative);
    let total = cumulative[n];
    let a = sigma / (length * length);
    let b = g / length;
    out[0] = 0.0;
    for i in 1..=n {
        let x = i as f64 * h;
        out[i] = dtheta[i] * (a * (cumulative[i] - x * total) + b * x);
    }
}

/// Right-hand side of the angle equation of one curve with given `sigma`,
/// length and junction tangential velocity `g`.
pub fn curve_rhs(theta: &[f64], length: f64, sigma: f64, g: f64) -> RhsParts {
    let n = theta.len() - 1;
    let h = 1.0 / n as f64;
    let dtheta = numerics::derivative_vec(theta, h);
    let mut cumulative = vec![0.0; n + 1];
    let mut sq = vec![0.0; n + 1];
    let mut explicit = vec![0.0; n + 1];
    explicit_rhs_into(&dtheta, length, sigma, g, h, &mut cumulative, &mut sq, &mut explicit);
    let mut diffusion = numerics::second_derivative(theta, h);
    diffusion[0] = 2.0 * (theta[1] - theta[0]) / (h * h);
    let a = sigma / (length * length);
    diffusion.iter_mut().for_each(|v| *v *= a);
    RhsParts { diffusion, explicit }
}

pub fn rhs_interior(state: &TriodState, model: &GrainModel, j: usize) -> Result<RhsParts> {
    let g = tangent_velocity_junction(state, model)?;
    let sig = model.sigmas(&state.alpha);
    Ok(curve_rhs(&state.theta[j], state.lengths[j], sig[j], g[j]))
}

/// Angles of one curve after the implicit solve, as an affine function of
/// the still unknown junction value `b`: `theta_i = base_i + b * response_i`
/// for the nodes `0..N` (the junction node itself excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSolution {
    pub base: Vec<f64>,
    pub response: Vec<f64>,
}

impl PartialSolution {
    /// Takes the interior nodes of an existing angle field as fixed.
    pub fn frozen(theta: &[f64]) -> Self {
        let n = theta.len() - 1;
        Self { base: theta[..n].to_vec(), response: vec![0.0; n] }
    }

    /// Junction derivative `d_x Theta(1) = p + q b` from the one-sided stencil.
    fn derivative_coefficients(&self, h: f64) -> (f64, f64) {
        let n = self.base.len();
        let (u1, u2) = (self.base[n - 1], self.base[n - 2]);
        let (w1, w2) = (self.response[n - 1], self.response[n - 2]);
        ((-4.0 * u1 + u2) / (2.0 * h), (3.0 - 4.0 * w1 + w2) / (2.0 * h))
    }

    pub fn assemble(&self, b: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.base.iter().zip(&self.response).map(|(u, w)| u + b * w).collect();
        out.push(b);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionSolution {
    pub values: [f64; 3],
    /// `d_x Theta^(j)(1)` from the closing one-sided stencil.
    pub derivatives: [f64; 3],
    pub iterations: usize,
    pub residual: f64,
}

/// Residuals of the junction rows. The flux row is scaled by `h` so all
/// three rows are angle-sized.
fn junction_residual(b: &[f64; 3], sig: &[f64; 3], w: &[f64; 3], p: &[f64; 3], q: &[f64; 3], h: f64) -> Vector3<f64> {
    let mut r = Vector3::zeros();
    for j in 0..3 {
        r[0] += sig[j] * b[j].cos();
        r[1] += sig[j] * b[j].sin();
        r[2] += h * w[j] * (p[j] + q[j] * b[j]);
    }
    r
}

fn max_abs(v: &Vector3<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solves `sum sigma cos b = 0`, `sum sigma sin b = 0`,
/// `sum (sigma^2 / L) d_x Theta(1) = 0` for the junction values `b` by damped
/// Newton, starting from `guess`.
pub fn apply_junction_bc(
    partial: &[PartialSolution; 3],
    sigmas: &[f64; 3],
    lengths: &[f64; 3],
    guess: [f64; 3],
    tol: f64,
    max_iter: usize,
) -> Result<JunctionSolution> {
    let n = partial[0].base.len();
    let h = 1.0 / n as f64;
    let mut p = [0.0; 3];
    let mut q = [0.0; 3];
    for j in 0..3 {
        (p[j], q[j]) = partial[j].derivative_coefficients(h);
    }
    let w: [f64; 3] = std::array::from_fn(|j| sigmas[j] * sigmas[j] / lengths[j]);
    let mut b = guess;
    let mut r = junction_residual(&b, sigmas, &w, &p, &q, h);
    let mut iterations = 0;
    while max_abs(&r) > tol {
        if iterations == max_iter {
            return Err(Error::NewtonDivergence { iterations, residual: max_abs(&r) });
        }
        iterations += 1;
        let jac = Matrix3::from_fn(|row, j| match row {
            0 => -sigmas[j] * b[j].sin(),
            1 => sigmas[j] * b[j].cos(),
            _ => h * w[j] * q[j],
        });
        let delta = jac
            .lu()
            .solve(&(-r))
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .ok_or(Error::NewtonDivergence { iterations, residual: max_abs(&r) })?;
        // backtracking on the max-norm of the residual
        let current = max_abs(&r);
        let mut step = 1.0;
        loop {
            let trial: [f64; 3] = std::array::from_fn(|j| b[j] + step * delta[j]);
            let rt = junction_residual(&trial, sigmas, &w, &p, &q, h);
            if max_abs(&rt) < current || step < 1e-3 {
                b = trial;
                r = rt;
                break;
            }
            step *= 0.5;
        }
    }
    let derivatives = std::array::from_fn(|j| p[j] + q[j] * b[j]);
    Ok(JunctionSolution { values: b, derivatives, iterations, residual: max_abs(&r) })
}

/// One classical RK4 step of the orientation ODE with lengths held fixed.
pub fn step_alphas(alpha: &[f64; 3], lengths: &[f64; 3], model: &GrainModel, dt: f64) -> [f64; 3] {
    let f = |a: &[f64; 3]| model.alpha_rate(a, lengths);
    let shift = |a: &[f64; 3], k: &[f64; 3], s: f64| -> [f64; 3] { std::array::from_fn(|j| a[j] + s * k[j]) };
    let k1 = f(alpha);
    let k2 = f(&shift(alpha, &k1, 0.5 * dt));
    let k3 = f(&shift(alpha, &k2, 0.5 * dt));
    let k4 = f(&shift(alpha, &k3, dt));
    std::array::from_fn(|j| alpha[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
}

/// `dL/dt = -(sigma / L) int_0^1 (d_x Theta)^2 dx + g` for one curve.
pub fn length_rate(theta: &[f64], length: f64, sigma: f64, g: f64) -> f64 {
    let h = 1.0 / (theta.len() - 1) as f64;
    let d = numerics::derivative_vec(theta, h);
    -sigma / length * numerics::trapezoid_sq(&d, h) + g
}

/// Explicit Euler update of the three lengths.
pub fn step_lengths(state: &TriodState, model: &GrainModel, dt: f64) -> Result<[f64; 3]> {
    let g = tangent_velocity_junction(state, model)?;
    let sig = model.sigmas(&state.alpha);
    let mut out = [0.0; 3];
    for j in 0..3 {
        let l = state.lengths[j] + dt * length_rate(&state.theta[j], state.lengths[j], sig[j], g[j]);
        if !(l > 0.0) {
            return Err(Error::LengthCollapse { curve: j + 1, length: l });
        }
        out[j] = l;
    }
    Ok(out)
}

/// Reusable buffers for stepping a state of fixed grid size.
#[derive(Debug, Clone)]
pub struct Stepper {
    n: usize,
    dtheta: [Vec<f64>; 3],
    explicit: Vec<f64>,
    cumulative: Vec<f64>,
    sq: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    scratch: Vec<f64>,
    partial: [PartialSolution; 3],
}

impl Stepper {
    pub fn new(grid_n: usize) -> Self {
        let n = grid_n;
        let z = |len: usize| vec![0.0; len];
        Self {
            n,
            dtheta: [z(n + 1), z(n + 1), z(n + 1)],
            explicit: z(n + 1),
            cumulative: z(n + 1),
            sq: z(n + 1),
            lower: z(n),
            diag: z(n),
            upper: z(n),
            scratch: z(n),
            partial: std::array::from_fn(|_| PartialSolution { base: z(n), response: z(n) }),
        }
    }

    /// Advances `state` by `dt` in place.
    pub fn advance(
        &mut self,
        state: &mut TriodState,
        model: &GrainModel,
        config: &SolverConfig,
        dt: f64,
    ) -> Result<StepReport> {
        let n = self.n;
        if state.grid_n() != n {
            return Err(Error::InvalidInput(format!(
                "state has {} intervals, stepper expects {n}",
                state.grid_n()
            )));
        }
        let h = 1.0 / n as f64;

        // (i) orientations
        let alpha_new = step_alphas(&state.alpha, &state.lengths, model, dt);
        if config.frozen_geometry {
            state.alpha = alpha_new;
            state.time += dt;
            let residual = model::herring_residual(state, &model.tension);
            return Ok(StepReport {
                dt_used: dt,
                newton_iterations: 0,
                herring_residual_post: residual,
                max_theta_update: 0.0,
            });
        }
        let sig = model.sigmas(&alpha_new);
        for j in 0..3 {
            model::junction_angle_cosine(&sig, j, model::DEFAULT_ANGLE_EPS)?;
        }

        // (ii) lengths, with the junction velocity of the current angles
        let mut integrals = [0.0; 3];
        let mut v = [0.0; 3];
        for j in 0..3 {
            numerics::derivative(&state.theta[j], h, &mut self.dtheta[j]);
            integrals[j] = numerics::trapezoid_sq(&self.dtheta[j], h);
            v[j] = sig[j] * self.dtheta[j][n] / state.lengths[j];
        }
        let g = junction_tangential_velocity(&state.junction_angles(), &v, config.denominator_guard)?;
        let mut lengths_new = [0.0; 3];
        for j in 0..3 {
            let l = state.lengths[j] + dt * (-sig[j] / state.lengths[j] * integrals[j] + g[j]);
            if !(l > 0.0) {
                return Err(Error::LengthCollapse { curve: j + 1, length: l });
            }
            lengths_new[j] = l;
        }

        // (iii) angles: implicit diffusion with lagged explicit terms
        for j in 0..3 {
            explicit_rhs_into(
                &self.dtheta[j],
                lengths_new[j],
                sig[j],
                g[j],
                h,
                &mut self.cumulative,
                &mut self.sq,
                &mut self.explicit,
            );
            let r = dt * sig[j] / (lengths_new[j] * lengths_new[j] * h * h);
            for i in 0..n {
                self.lower[i] = -r;
                self.diag[i] = 1.0 + 2.0 * r;
                self.upper[i] = -r;
            }
            // Neumann ghost node at x = 0
            self.upper[0] = -2.0 * r;
            let th = &state.theta[j];
            let part = &mut self.partial[j];
            for i in 0..n {
                part.base[i] = th[i] + dt * self.explicit[i];
                part.response[i] = 0.0;
            }
            part.response[n - 1] = r;
            numerics::solve_tridiagonal2(
                &self.lower,
                &self.diag,
                &self.upper,
                &mut part.base,
                &mut part.response,
                &mut self.scratch,
            );
        }
        let guess = state.junction_angles();
        let sol = apply_junction_bc(&self.partial, &sig, &lengths_new, guess, config.newton_tol, config.newton_max_iter)?;

        let mut max_update = 0.0f64;
        for j in 0..3 {
            let part = &self.partial[j];
            let th = &mut state.theta[j];
            for i in 0..n {
                let v = part.base[i] + sol.values[j] * part.response[i];
                max_update = max_update.max((v - th[i]).abs());
                th[i] = v;
            }
            max_update = max_update.max((sol.values[j] - th[n]).abs());
            th[n] = sol.values[j];
        }
        if !(max_update <= config.max_angle_update) {
            return Err(Error::Instability { max_update });
        }
        state.alpha = alpha_new;
        state.lengths = lengths_new;
        state.time += dt;
        let residual = model::herring_residual(state, &model.tension);
        Ok(StepReport {
            dt_used: dt,
            newton_iterations: sol.iterations,
            herring_residual_post: residual,
            max_theta_update: max_update,
        })
    }
}

/// Advances one time step (clipped so as not to pass `config.t_end`).
pub fn step(state: &TriodState, model: &GrainModel, config: &SolverConfig) -> Result<(TriodState, StepReport)> {
    let mut next_state = state.clone();
    let mut dt = config.dt_for(state, model);
    if state.time < config.t_end {
        dt = dt.min(config.t_end - state.time);
    }
    let report = Stepper::new(state.grid_n()).advance(&mut next_state, model, config, dt)?;
    Ok((next_state, report))
}

/// Consumer of the diagnostics stream emitted by [`run`].
pub trait RecordSink {
    fn record(&mut self, record: &DiagnosticsRecord, state: &TriodState);

    /// Called after every successful step, recorded or not.
    fn on_step(&mut self, _state: &TriodState, _report: &StepReport) {}
}

impl RecordSink for Vec<DiagnosticsRecord> {
    fn record(&mut self, record: &DiagnosticsRecord, _state: &TriodState) {
        self.push(record.clone());
    }
}

impl<F: FnMut(&DiagnosticsRecord, &TriodState)> RecordSink for F {
    fn record(&mut self, record: &DiagnosticsRecord, state: &TriodState) {
        self(record, state)
    }
}

/// Integrates from `initial` to `config.t_end` (or until equilibrium),
/// emitting a record every `config.record_every` steps plus one at each end.
pub fn run<S: RecordSink + ?Sized>(
    initial: TriodState,
    model: &GrainModel,
    endpoints: &EndpointSet,
    config: &SolverConfig,
    sink: &mut S,
) -> Result<TriodState> {
    config.validate()?;
    initial.validate()?;
    if initial.grid_n() != config.grid_n {
        return Err(Error::InvalidInput(format!(
            "initial state has {} intervals but grid_n is {}",
            initial.grid_n(),
            config.grid_n
        )));
    }
    let herring = model::herring_residual(&initial, &model.tension);
    if !config.frozen_geometry && herring > INITIAL_HERRING_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "initial data violate the Herring condition (residual {herring:e})"
        )));
    }
    let recorder = Recorder::new(*endpoints, config.grid_n);
    let mut state = initial;
    let mut stepper = Stepper::new(config.grid_n);
    let mut rec = recorder.record(&state, model);
    sink.record(&rec, &state);
    let mut steps = 0usize;
    let end_slack = 1e-12 * config.t_end.max(1.0);
    while state.time < config.t_end - end_slack {
        if config.stop_residual > 0.0 && diagnostics::equilibrium_residual(&rec) < config.stop_residual {
            break;
        }
        let dt = config.dt_for(&state, model).min(config.t_end - state.time);
        let time = state.time;
        let report = stepper
            .advance(&mut state, model, config, dt)
            .map_err(|e| Error::AtTime { time, source: Box::new(e) })?;
        sink.on_step(&state, &report);
        steps += 1;
        if steps.is_multiple_of(config.record_every) {
            rec = recorder.record(&state, model);
            sink.record(&rec, &state);
        }
    }
    if !steps.is_multiple_of(config.record_every) {
        rec = recorder.record(&state, model);
        sink.record(&rec, &state);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SurfaceTensionModel;
    use crate::scenario;
    use nalgebra::{Vector2, Vector3};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const SYMMETRIC: [f64; 3] = [-PI / 2.0, PI / 6.0, 5.0 * PI / 6.0];

    fn quad() -> GrainModel {
        GrainModel::new(SurfaceTensionModel::Quadratic { s0: 1.0, c: 0.5 }, 1.0).unwrap()
    }

    fn constant() -> GrainModel {
        GrainModel::new(SurfaceTensionModel::Constant { s0: 1.0 }, 1.0).unwrap()
    }

    /// Solves the pairwise tangent relations `lambda_j = c_j lambda_{j+1} - s_j V_{j+1}` densely.
    fn pairwise_oracle(angles: &[f64; 3], v: &[f64; 3]) -> [f64; 3] {
        let mut a = Matrix3::zeros();
        let mut b = Vector3::zeros();
        for j in 0..3 {
            let d = angles[next(j)] - angles[j];
            a[(j, j)] = 1.0;
            a[(j, next(j))] = -d.cos();
            b[j] = -d.sin() * v[next(j)];
        }
        let x = a.lu().solve(&b).unwrap();
        [x[0], x[1], x[2]]
    }

    #[test]
    fn junction_velocity_vanishes_without_curvature() {
        assert_eq!(junction_tangential_velocity(&SYMMETRIC, &[0.0; 3], 1e-8).unwrap(), [0.0; 3]);
    }

    #[test]
    fn junction_velocity_symmetric_cases() {
        let v = 0.7;
        let g = junction_tangential_velocity(&SYMMETRIC, &[v; 3], 1e-8).unwrap();
        for gj in g {
            assert!((gj + v / 3f64.sqrt()).abs() < 1e-14);
        }
        let g = junction_tangential_velocity(&SYMMETRIC, &[v, 0.0, 0.0], 1e-8).unwrap();
        let o = pairwise_oracle(&SYMMETRIC, &[v, 0.0, 0.0]);
        for j in 0..3 {
            assert!((g[j] - o[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_junction_is_reported() {
        let r = junction_tangential_velocity(&[0.0, 0.0, 0.0], &[1.0; 3], 1e-8);
        assert!(matches!(r, Err(Error::DegenerateJunction { .. })));
    }

    proptest! {
        /// A junction moving with velocity `w` has normal speeds `w . nu_j`
        /// and tangential speeds `w . tau_j`.
        #[test]
        fn junction_velocity_projects_a_rigid_motion(
            t0 in -3.0..3.0f64, d1 in 0.5..2.6f64, d2 in 0.5..2.6f64,
            wx in -2.0..2.0f64, wy in -2.0..2.0f64,
        ) {
            prop_assume!(d1 + d2 < 2.0 * PI - 0.5);
            let angles = [t0, t0 + d1, t0 + d1 + d2];
            let w = Vector2::new(wx, wy);
            let v: [f64; 3] = std::array::from_fn(|j| w.dot(&Vector2::new(-angles[j].sin(), angles[j].cos())));
            let g = junction_tangential_velocity(&angles, &v, 1e-8).unwrap();
            for j in 0..3 {
                let expected = w.dot(&Vector2::new(angles[j].cos(), angles[j].sin()));
                prop_assert!((g[j] - expected).abs() < 1e-9 * (1.0 + w.norm()));
            }
            let o = pairwise_oracle(&angles, &v);
            for j in 0..3 {
                prop_assert!((g[j] - o[j]).abs() < 1e-9);
            }
        }

        #[test]
        fn orientation_step_conserves_sum(
            a0 in -1.0..1.0f64, a1 in -1.0..1.0f64, a2 in -1.0..1.0f64,
            l0 in 0.2..3.0f64, l1 in 0.2..3.0f64, l2 in 0.2..3.0f64,
        ) {
            let alpha = [a0, a1, a2];
            let out = step_alphas(&alpha, &[l0, l1, l2], &quad(), 1e-2);
            prop_assert!((out.iter().sum::<f64>() - alpha.iter().sum::<f64>()).abs() < 1e-14);
        }
    }

    #[test]
    fn straight_triod_has_no_angle_forcing() {
        let s = TriodState::straight(32, SYMMETRIC, [1.0; 3], [0.0; 3]);
        for j in 0..3 {
            let parts = rhs_interior(&s, &quad(), j).unwrap();
            assert!(parts.total().iter().all(|v| v.abs() < 1e-12));
        }
    }

    /// Theta = sin(pi x), L = sigma = 1, g = 0: the nonlocal term reduces to
    /// `pi^2 cos(pi x) sin(2 pi x) / 4` and the diffusion to `-pi^2 sin(pi x)`.
    #[test]
    fn single_curve_rhs_matches_closed_form() {
        let err = |n: usize| {
            let theta: Vec<f64> = (0..=n).map(|i| (PI * i as f64 / n as f64).sin()).collect();
            let parts = curve_rhs(&theta, 1.0, 1.0, 0.0);
            assert_eq!(parts.explicit[0], 0.0);
            (1..n)
                .map(|i| {
                    let x = i as f64 / n as f64;
                    let f = PI * PI * (PI * x).cos() * (2.0 * PI * x).sin() / 4.0;
                    let d = -PI * PI * (PI * x).sin();
                    (parts.explicit[i] - f).abs().max((parts.diffusion[i] - d).abs())
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(100), err(200));
        assert!(e1 < 1e-2 && e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn frozen_state_is_a_fixed_point_of_the_closure() {
        let s = TriodState::straight(40, SYMMETRIC, [1.0; 3], [0.0; 3]);
        let partial = s.theta.clone().map(|t| PartialSolution::frozen(&t));
        let sol = apply_junction_bc(&partial, &[1.0; 3], &[1.0; 3], s.junction_angles(), 1e-12, 25).unwrap();
        assert!(sol.iterations <= 1);
        for j in 0..3 {
            assert!((sol.values[j] - SYMMETRIC[j]).abs() < 1e-12);
            assert!(sol.derivatives[j].abs() < 1e-9);
        }
    }

    #[test]
    fn closure_restores_the_symmetric_junction() {
        let s = TriodState::straight(40, SYMMETRIC, [1.0; 3], [0.0; 3]);
        let partial = s.theta.clone().map(|t| PartialSolution::frozen(&t));
        let guess = [SYMMETRIC[0] + 0.05, SYMMETRIC[1] - 0.02, SYMMETRIC[2] + 0.03];
        let sol = apply_junction_bc(&partial, &[1.0; 3], &[1.0; 3], guess, 1e-12, 25).unwrap();
        assert!(sol.iterations >= 1);
        for j in 0..3 {
            let d = sol.values[next(j)] - sol.values[j];
            assert!((d.rem_euclid(2.0 * PI) - 2.0 * PI / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn closure_without_a_solution_diverges() {
        let s = TriodState::straight(40, [0.0; 3], [1.0; 3], [0.0; 3]);
        let partial = s.theta.clone().map(|t| PartialSolution::frozen(&t));
        let r = apply_junction_bc(&partial, &[1.0, 1.0, 3.0], &[1.0; 3], [0.0; 3], 1e-12, 25);
        assert!(matches!(r, Err(Error::NewtonDivergence { .. })), "{r:?}");
    }

    #[test]
    fn orientation_step_matches_linear_decay() {
        let m = quad();
        assert_eq!(step_alphas(&[0.4; 3], &[1.0; 3], &m, 1e-3), [0.4; 3]);
        let alpha = [0.0, 0.2, -0.05];
        let dt = 1e-3;
        let out = step_alphas(&alpha, &[1.0; 3], &m, dt);
        let d0 = model::misorientations(&alpha);
        let d1 = model::misorientations(&out);
        for j in 0..3 {
            assert!((d1[j] - d0[j] * (-3.0 * dt).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn length_rates() {
        let m = quad();
        let s = TriodState::straight(32, SYMMETRIC, [1.0, 1.0, 1.0], [0.0; 3]);
        assert_eq!(step_lengths(&s, &m, 1e-3).unwrap(), [1.0; 3]);

        let n = 200;
        let theta: Vec<f64> = (0..=n).map(|i| (PI * i as f64 / n as f64).sin()).collect();
        assert!((length_rate(&theta, 1.0, 1.0, 0.0) + PI * PI / 2.0).abs() < 1e-3);
        let arc: Vec<f64> = (0..=n).map(|i| 0.5 * i as f64 / n as f64).collect();
        assert!(length_rate(&arc, 2.0, 1.0, 0.0) < 0.0);
    }

    #[test]
    fn steiner_triod_is_stationary() {
        let ep = EndpointSet::equilateral(1.0);
        let m = constant();
        let s = scenario::straight_herring_initial(&ep, [0.0; 3], &m, 64).unwrap();
        let config = SolverConfig { grid_n: 64, t_end: 1.0, ..SolverConfig::default() };
        let (next_state, report) = step(&s, &m, &config).unwrap();
        for j in 0..3 {
            assert!((next_state.lengths[j] - s.lengths[j]).abs() < 1e-10);
            for (a, b) in next_state.theta[j].iter().zip(&s.theta[j]) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        assert!(report.herring_residual_post <= 1e-12);
        assert!(report.newton_iterations <= config.newton_max_iter);
    }

    #[test]
    fn zero_horizon_run_returns_the_initial_state() {
        let ep = EndpointSet::equilateral(1.0);
        let m = quad();
        let s = scenario::perturbed_steiner_initial(&ep, [0.0, 0.1, -0.1], &m, 32, 0.1, 1).unwrap();
        let config = SolverConfig { grid_n: 32, t_end: 0.0, ..SolverConfig::default() };
        let mut records = Vec::new();
        let out = run(s.clone(), &m, &ep, &config, &mut records).unwrap();
        assert_eq!(out, s);
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn run_rejects_unbalanced_initial_data() {
        let ep = EndpointSet::equilateral(1.0);
        let s = TriodState::straight(32, [0.0, 1.0, 2.0], [1.0; 3], [0.0; 3]);
        let config = SolverConfig { grid_n: 32, ..SolverConfig::default() };
        let r = run(s, &quad(), &ep, &config, &mut Vec::new());
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn short_run_keeps_invariants_step_by_step() {
        struct Check {
            model: GrainModel,
            prev: Option<(f64, f64, f64)>,
            alpha_sum0: f64,
            worst: [f64; 4],
        }
        impl RecordSink for Check {
            fn record(&mut self, _: &DiagnosticsRecord, _: &TriodState) {}
            fn on_step(&mut self, state: &TriodState, report: &StepReport) {
                let e = diagnostics::energy(state, &self.model);
                let d = diagnostics::misorientation_norm(state);
                let sum: f64 = state.alpha.iter().sum();
                if let Some((e0, d0, _)) = self.prev {
                    self.worst[0] = self.worst[0].max(e - e0);
                    self.worst[1] = self.worst[1].max(d - d0);
                }
                self.worst[2] = self.worst[2].max((sum - self.alpha_sum0).abs());
                self.worst[3] = self.worst[3].max(report.herring_residual_post);
                self.prev = Some((e, d, sum));
            }
        }
        let ep = EndpointSet::equilateral(1.0);
        let m = quad();
        let s = scenario::perturbed_steiner_initial(&ep, [0.0, 0.2, -0.1], &m, 48, 0.1, 2).unwrap();
        let config = SolverConfig { grid_n: 48, t_end: 0.2, ..SolverConfig::default() };
        let mut check = Check { model: m, prev: None, alpha_sum0: s.alpha.iter().sum(), worst: [f64::NEG_INFINITY; 4] };
        run(s, &m, &ep, &config, &mut check).unwrap();
        assert!(check.worst[0] <= 1e-8, "energy increase {}", check.worst[0]);
        assert!(check.worst[1] <= 1e-12, "misorientation increase {}", check.worst[1]);
        assert!(check.worst[2] <= 1e-13, "orientation sum drift {}", check.worst[2]);
        assert!(check.worst[3] <= 1e-11, "Herring residual {}", check.worst[3]);
    }

    #[test]
    fn oversized_step_is_flagged() {
        let ep = EndpointSet::equilateral(1.0);
        let m = quad();
        let s = scenario::perturbed_steiner_initial(&ep, [0.0, 0.1, -0.1], &m, 100, 0.5, 3).unwrap();
        let config = SolverConfig { grid_n: 100, time_step: TimeStep::Fixed(1.0), t_end: 5.0, ..SolverConfig::default() };
        let r = run(s, &m, &ep, &config, &mut Vec::new());
        let e = r.unwrap_err();
        assert!(matches!(e, Error::AtTime { .. }));
        assert!(matches!(
            e.root(),
            Error::NewtonDivergence { .. } | Error::Instability { .. } | Error::LengthCollapse { .. } | Error::DegenerateJunction { .. }
        ), "{e:?}");
    }
}
