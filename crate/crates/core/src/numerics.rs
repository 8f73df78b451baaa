//! Finite-difference and quadrature helpers on the uniform grid `x_i = i/N`.
//!
//! All stencils are second order, including the one-sided ones used at the
//! two ends of each curve.

/// First derivative of nodal values on a uniform grid with spacing `h`.
///
/// Central differences inside, three-point one-sided stencils at both ends.
pub fn derivative(values: &[f64], h: f64, out: &mut [f64]) {
    let n = values.len();
    assert!(n >= 3, "need at least three nodes");
    assert_eq!(out.len(), n);
    let inv = 1.0 / (2.0 * h);
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) * inv;
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) * inv;
    }
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) * inv;
}

pub fn derivative_vec(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    derivative(values, h, &mut out);
    out
}

/// Second derivative; the end values use four-point one-sided stencils.
pub fn second_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 4, "need at least four nodes");
    let inv = 1.0 / (h * h);
    let mut out = vec![0.0; n];
    out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) * inv;
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) * inv;
    }
    out[n - 1] =
        (2.0 * values[n - 1] - 5.0 * values[n - 2] + 4.0 * values[n - 3] - values[n - 4]) * inv;
    out
}

/// Composite trapezoid rule over the whole grid.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[n - 1]))
}

/// Composite trapezoid of the squared values, without an intermediate buffer.
pub fn trapezoid_sq(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().map(|v| v * v).sum();
    h * (inner + 0.5 * (values[0] * values[0] + values[n - 1] * values[n - 1]))
}

/// Running trapezoid integral, `out[i] = int_0^{x_i}`.
pub fn cumulative_trapezoid(values: &[f64], h: f64, out: &mut [f64]) {
    assert_eq!(values.len(), out.len());
    if values.is_empty() {
        return;
    }
    out[0] = 0.0;
    for i in 1..values.len() {
        out[i] = out[i - 1] + 0.5 * h * (values[i - 1] + values[i]);
    }
}

/// Solves a tridiagonal system for two right-hand sides at once (Thomas
/// algorithm). `lower[0]` and `upper[n-1]` are ignored. The right-hand sides
/// are overwritten with the solutions.
///
/// Only valid for diagonally dominant systems; no pivoting is done.
pub fn solve_tridiagonal2(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs_a: &mut [f64],
    rhs_b: &mut [f64],
    scratch: &mut [f64],
) {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && scratch.len() == n);
    debug_assert!(rhs_a.len() == n && rhs_b.len() == n);
    let mut denom = diag[0];
    scratch[0] = upper[0] / denom;
    rhs_a[0] /= denom;
    rhs_b[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        rhs_a[i] = (rhs_a[i] - lower[i] * rhs_a[i - 1]) / denom;
        rhs_b[i] = (rhs_b[i] - lower[i] * rhs_b[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs_a[i] -= scratch[i] * rhs_a[i + 1];
        rhs_b[i] -= scratch[i] * rhs_b[i + 1];
    }
}

/// Least-squares line `y = intercept + slope * x`, with the coefficient of
/// determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (intercept, slope, r2)
}
