//! Admissible initial data: straight triods in Herring balance and smooth
//! perturbations of them.

use nalgebra::{Matrix2, Point2, Vector2};

use crate::error::{Error, Result};
use crate::geometry;
use crate::model::{self, prev, EndpointSet, GrainModel, TriodState};
use crate::numerics;
use crate::solver::{self, PartialSolution};

/// Straight spokes meeting at the weighted Fermat point with weights
/// `sigma(Delta alpha0)`, so the Herring condition holds with zero curvature.
pub fn straight_herring_initial(
    endpoints: &EndpointSet,
    alpha0: [f64; 3],
    model: &GrainModel,
    grid_n: usize,
) -> Result<TriodState> {
    let sig = model.sigmas(&alpha0);
    let a0 = geometry::weighted_fermat_point(endpoints, &sig).map_err(|e| match e {
        Error::VertexOptimal(j) => Error::A2LikeViolation(j),
        other => other,
    })?;
    let mut angles = [0.0; 3];
    let mut lengths = [0.0; 3];
    for j in 0..3 {
        let d = a0 - endpoints.points[j];
        angles[j] = d.y.atan2(d.x);
        lengths[j] = d.norm();
    }
    Ok(TriodState::straight(grid_n, angles, lengths, alpha0))
}

/// Chord `int_0^1 (cos Theta, sin Theta) dx` of one curve, rotated by `rho`.
fn chord(theta: &[f64], rho: f64) -> Vector2<f64> {
    let h = 1.0 / (theta.len() - 1) as f64;
    let c: Vec<f64> = theta.iter().map(|t| (t + rho).cos()).collect();
    let s: Vec<f64> = theta.iter().map(|t| (t + rho).sin()).collect();
    Vector2::new(numerics::trapezoid(&c, h), numerics::trapezoid(&s, h))
}

/// Junction point and lengths making curves 1 and 2 meet, and the signed
/// miss of curve 3 (its chord crossed with the direction to that point).
fn fit_lengths(theta: &[Vec<f64>; 3], endpoints: &EndpointSet, rho: f64) -> Option<(Point2<f64>, [f64; 3], f64)> {
    let u: [Vector2<f64>; 3] = std::array::from_fn(|j| chord(&theta[j], rho));
    let p = &endpoints.points;
    // P0 + L0 u0 = P1 + L1 u1
    let m = Matrix2::from_columns(&[u[0], -u[1]]);
    let l = m.lu().solve(&(p[1] - p[0]))?;
    let a = p[0] + l[0] * u[0];
    let d = a - p[2];
    let l2 = d.dot(&u[2]) / u[2].norm_squared();
    let miss = u[2].perp(&d) / u[2].norm();
    Some((a, [l[0], l[1], l2], miss))
}

/// Common rotation `rho` (by secant on the miss of the third curve) and the
/// lengths that make all three curves meet.
fn fit_rotation(theta: &[Vec<f64>; 3], endpoints: &EndpointSet, scale: f64) -> Option<(f64, [f64; 3])> {
    let miss = |rho: f64| fit_lengths(theta, endpoints, rho).map(|f| f.2);
    let (mut r0, mut r1) = (0.0, 1e-3);
    let (mut f0, mut f1) = (miss(r0)?, miss(r1)?);
    if f0.abs() <= 1e-14 * scale {
        return fit_lengths(theta, endpoints, 0.0).map(|f| (0.0, f.1));
    }
    for _ in 0..50 {
        if f1.abs() <= 1e-14 * scale {
            return fit_lengths(theta, endpoints, r1).map(|f| (r1, f.1));
        }
        let r2 = r1 - f1 * (r1 - r0) / (f1 - f0);
        if !r2.is_finite() || r2.abs() > std::f64::consts::PI {
            return None;
        }
        (r0, f0) = (r1, f1);
        r1 = r2;
        f1 = miss(r1)?;
    }
    None
}

/// Adds `amplitude * c_j * x^2 sin(mode pi x)` to the angles of the straight
/// Herring triod, re-closes the junction rows, and refits lengths plus a
/// common rotation so the three reconstructed curves meet again.
///
/// The per-curve factors `c_j` are proportional to `L_j / sigma_j^2` with
/// signs `(1, -1/2, -1/2)`, which keeps the weighted flux at the junction
/// balanced; the first curve carries the full `amplitude`.
pub fn perturbed_steiner_initial(
    endpoints: &EndpointSet,
    alpha0: [f64; 3],
    model: &GrainModel,
    grid_n: usize,
    bump_amplitude: f64,
    bump_mode: u32,
) -> Result<TriodState> {
    let base = straight_herring_initial(endpoints, alpha0, model, grid_n)?;
    if bump_amplitude == 0.0 {
        return Ok(base);
    }
    if !bump_amplitude.is_finite() || bump_mode == 0 {
        return Err(Error::InvalidInput("bump amplitude must be finite and bump mode positive".into()));
    }
    let sig = model.sigmas(&alpha0);
    let weight: [f64; 3] = std::array::from_fn(|j| base.lengths[j] / (sig[j] * sig[j]));
    let share = [1.0, -0.5, -0.5];
    let k = bump_mode as f64 * std::f64::consts::PI;
    let mut theta = base.theta.clone();
    for j in 0..3 {
        let amp = bump_amplitude * share[j] * weight[j] / weight[0];
        for (i, t) in theta[j].iter_mut().enumerate() {
            let x = i as f64 / grid_n as f64;
            *t += amp * x * x * (k * x).sin();
        }
    }

    let fail = |residual: f64| Error::NewtonDivergence { iterations: 0, residual };
    let scale = base.lengths.iter().copied().fold(0.0, f64::max);

    // Alternate between closing the junction rows and refitting lengths plus
    // a common rotation; the rotation leaves the junction rows untouched and
    // the length change feeds back only weakly through the flux weights.
    let mut lengths = base.lengths;
    for _ in 0..8 {
        let partial: [PartialSolution; 3] = std::array::from_fn(|j| PartialSolution::frozen(&theta[j]));
        let guess: [f64; 3] = std::array::from_fn(|j| *theta[j].last().unwrap());
        let sol = solver::apply_junction_bc(&partial, &sig, &lengths, guess, 1e-13, 25)?;
        let mut moved = 0.0f64;
        for j in 0..3 {
            let last = theta[j].last_mut().unwrap();
            moved = moved.max((*last - sol.values[j]).abs());
            *last = sol.values[j];
        }
        let (rho, fitted) = fit_rotation(&theta, endpoints, scale).ok_or_else(|| fail(f64::INFINITY))?;
        if fitted.iter().any(|l| !(*l > 0.0)) {
            return Err(fail(f64::INFINITY));
        }
        for t in theta.iter_mut().flat_map(|c| c.iter_mut()) {
            *t += rho;
        }
        let change = (0..3).map(|j| (fitted[j] - lengths[j]).abs()).fold(0.0, f64::max);
        lengths = fitted;
        if moved <= 1e-15 && change <= 1e-15 * scale {
            break;
        }
    }
    let state = TriodState::new(theta, lengths, alpha0).map_err(|_| fail(f64::INFINITY))?;
    let triod = geometry::PlanarTriod::reconstruct(&state, endpoints);
    let gap = geometry::junction_mismatch(&triod);
    if gap > 1e-8 * scale {
        return Err(fail(gap));
    }
    if self_intersects(&triod) {
        return Err(fail(gap));
    }
    Ok(state)
}

fn segments_cross(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, d: Point2<f64>) -> bool {
    let o = |p: Point2<f64>, q: Point2<f64>, r: Point2<f64>| (q - p).perp(&(r - p));
    let (d1, d2) = (o(a, b, c), o(a, b, d));
    let (d3, d4) = (o(c, d, a), o(c, d, b));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Whether any two non-adjacent polyline segments of the triod cross.
fn self_intersects(triod: &geometry::PlanarTriod) -> bool {
    let segs: Vec<(usize, usize, Point2<f64>, Point2<f64>)> = triod
        .curves
        .iter()
        .enumerate()
        .flat_map(|(j, c)| c.windows(2).enumerate().map(move |(i, w)| (j, i, w[0], w[1])))
        .collect();
    let last = triod.curves[0].len() - 2;
    for (m, s) in segs.iter().enumerate() {
        for t in &segs[m + 1..] {
            let adjacent = (s.0 == t.0 && s.1.abs_diff(t.1) <= 1) || (s.0 != t.0 && s.1 == last && t.1 == last);
            if !adjacent && segments_cross(s.2, s.3, t.2, t.3) {
                return true;
            }
        }
    }
    false
}

/// `(Herring residual, |d/dt of the two Herring rows|)` at the current state.
///
/// The second entry inserts the semi-discrete junction angle velocity
/// `sigma/L^2 Theta_xx(1) + Theta_x(1) g / L` and the orientation rates into
/// the time-differentiated balance `sum_j sigma_j tau_j`. NaN when the
/// junction velocity is undefined.
pub fn compatibility_residual(state: &TriodState, model: &GrainModel) -> (f64, f64) {
    let first = model::herring_residual(state, &model.tension);
    let g = match solver::tangent_velocity_junction(state, model) {
        Ok(g) => g,
        Err(_) => return (first, f64::NAN),
    };
    let sig = model.sigmas(&state.alpha);
    let d = model::misorientations(&state.alpha);
    let rate = model.alpha_rate(&state.alpha, &state.lengths);
    let h = state.h();
    let mut total = Vector2::zeros();
    for j in 0..3 {
        let th = &state.theta[j];
        let n = th.len() - 1;
        let l = state.lengths[j];
        let dx = (3.0 * th[n] - 4.0 * th[n - 1] + th[n - 2]) / (2.0 * h);
        let dxx = (2.0 * th[n] - 5.0 * th[n - 1] + 4.0 * th[n - 2] - th[n - 3]) / (h * h);
        let db = sig[j] / (l * l) * dxx + dx * g[j] / l;
        let dsig = model.tension.derivative(d[j]) * (rate[prev(j)] - rate[j]);
        let (s, c) = th[n].sin_cos();
        total += dsig * Vector2::new(c, s) + sig[j] * db * Vector2::new(-s, c);
    }
    (first, total.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SurfaceTensionModel;
    fn quad() -> GrainModel {
        GrainModel::new(SurfaceTensionModel::Quadratic { s0: 1.0, c: 0.5 }, 1.0).unwrap()
    }

    #[test]
    fn equilateral_equal_alphas_give_symmetric_spokes() {
        let s = straight_herring_initial(&EndpointSet::equilateral(1.0), [0.2; 3], &quad(), 32).unwrap();
        for j in 0..3 {
            assert!((s.lengths[j] - 1.0).abs() < 1e-12);
            assert!(model::curvature_field(&s, j).iter().all(|k| k.abs() < 1e-12));
        }
        let a = s.junction_angles();
        for j in 0..3 {
            assert!(((a[(j + 1) % 3] - a[j]).cos() + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn unequal_alphas_shift_the_junction() {
        let ep = EndpointSet::equilateral(1.0);
        let m = quad();
        let s = straight_herring_initial(&ep, [0.0, 0.3, -0.3], &m, 32).unwrap();
        assert!(model::herring_residual(&s, &m.tension) <= 1e-10);
        let triod = geometry::PlanarTriod::reconstruct(&s, &ep);
        assert!(geometry::junction_mismatch(&triod) < 1e-12);
        // the junction moves away from the centroid
        assert!(triod.junction_point().coords.norm() > 1e-3);
    }

    #[test]
    fn dominant_tension_has_no_interior_junction() {
        let ep = EndpointSet::equilateral(1.0);
        let m = GrainModel::new(SurfaceTensionModel::Quadratic { s0: 1.0, c: 5.0 }, 1.0).unwrap();
        // misorientations (2, -1, -1): the first tension is 21 against 6 and 6
        let r = straight_herring_initial(&ep, [0.0, 1.0, 2.0], &m, 32);
        assert_eq!(r, Err(Error::A2LikeViolation(1)));
    }

    #[test]
    fn perturbed_state_is_admissible() {
        let ep = EndpointSet::equilateral(1.0);
        let m = quad();
        let alpha = [0.0, 0.1, -0.1];
        let s0 = perturbed_steiner_initial(&ep, alpha, &m, 64, 0.0, 1).unwrap();
        assert_eq!(s0, straight_herring_initial(&ep, alpha, &m, 64).unwrap());

        let s = perturbed_steiner_initial(&ep, alpha, &m, 200, 0.1, 1).unwrap();
        assert!(model::herring_residual(&s, &m.tension) <= 1e-10);
        let triod = geometry::PlanarTriod::reconstruct(&s, &ep);
        assert!(geometry::junction_mismatch(&triod) <= 1e-8);
        let (wk, _) = crate::diagnostics::weighted_curvature_norms(&s, &m);
        assert!(wk > 1e-4);
        let (herring, rate) = compatibility_residual(&s, &m);
        assert!(herring <= 1e-10 && rate.is_finite());
    }

    #[test]
    fn large_bump_leaves_the_admissible_set() {
        let ep = EndpointSet::equilateral(1.0);
        let r = perturbed_steiner_initial(&ep, [0.0; 3], &quad(), 100, 10.0, 1);
        assert!(matches!(r, Err(Error::NewtonDivergence { .. })), "{r:?}");
    }

    #[test]
    fn small_bumps_scale_linearly() {
        let ep = EndpointSet::equilateral(1.0);
        let m = quad();
        let base = straight_herring_initial(&ep, [0.0; 3], &m, 64).unwrap();
        let dev = |a: f64| {
            let s = perturbed_steiner_initial(&ep, [0.0; 3], &m, 64, a, 2).unwrap();
            (0..3)
                .flat_map(|j| s.theta[j].iter().zip(&base.theta[j]).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>())
                .fold(0.0, f64::max)
        };
        let (d1, d2) = (dev(1e-3), dev(5e-4));
        assert!((d1 / d2 - 2.0).abs() < 1e-2, "{d1} {d2}");
    }

    #[test]
    fn compatibility_of_equilibrium_and_random_data() {
        let ep = EndpointSet::equilateral(1.0);
        let m = quad();
        let s = straight_herring_initial(&ep, [0.3; 3], &m, 32).unwrap();
        let (a, b) = compatibility_residual(&s, &m);
        assert!(a < 1e-15 && b < 1e-12);
        let mut bad = s.clone();
        for j in 0..3 {
            *bad.theta[j].last_mut().unwrap() = 0.3 * j as f64;
        }
        assert!(compatibility_residual(&bad, &m).0 > 1.0);
        let s = straight_herring_initial(&ep, [0.0, 0.2, -0.1], &m, 32).unwrap();
        let (a, b) = compatibility_residual(&s, &m);
        assert!(a <= 1e-10 && b.is_finite() && b > 0.0);
    }
}
