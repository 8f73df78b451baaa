//! Domain types for the triod and the misorientation-dependent surface
//! tension, plus the junction algebra shared by every other module.
//!
//! Curves are indexed `0, 1, 2` (curve `j` of the usual 1-based numbering is
//! index `j - 1`). All cyclic neighbours wrap modulo three, so the
//! misorientation of curve `j` is `alpha[j - 1] - alpha[j]` with
//! `alpha[-1] = alpha[2]`.

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;

/// Default guard on `|cos(angle)|` approaching one.
pub const DEFAULT_ANGLE_EPS: f64 = 1e-8;

#[inline]
pub(crate) fn next(j: usize) -> usize {
    (j + 1) % 3
}

#[inline]
pub(crate) fn prev(j: usize) -> usize {
    (j + 2) % 3
}

/// Isotropic grain-boundary tension as a function of misorientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum SurfaceTensionModel {
    /// `s0 + c * a^2`
    Quadratic { s0: f64, c: f64 },
    /// `s0 * cosh(a)`
    Cosh { s0: f64 },
    /// Misorientation-independent tension. Not strictly convex, so the
    /// orientations never move; used to reproduce classical network flow.
    Constant { s0: f64 },
}

impl Default for SurfaceTensionModel {
    fn default() -> Self {
        SurfaceTensionModel::Quadratic { s0: 1.0, c: 0.5 }
    }
}

impl SurfaceTensionModel {
    pub fn value(&self, a: f64) -> f64 {
        match *self {
            SurfaceTensionModel::Quadratic { s0, c } => s0 + c * a * a,
            SurfaceTensionModel::Cosh { s0 } => s0 * a.cosh(),
            SurfaceTensionModel::Constant { s0 } => s0,
        }
    }

    pub fn derivative(&self, a: f64) -> f64 {
        match *self {
            SurfaceTensionModel::Quadratic { c, .. } => 2.0 * c * a,
            SurfaceTensionModel::Cosh { s0 } => s0 * a.sinh(),
            SurfaceTensionModel::Constant { .. } => 0.0,
        }
    }

    pub fn second_derivative(&self, a: f64) -> f64 {
        match *self {
            SurfaceTensionModel::Quadratic { c, .. } => 2.0 * c,
            SurfaceTensionModel::Cosh { s0 } => s0 * a.cosh(),
            SurfaceTensionModel::Constant { .. } => 0.0,
        }
    }

    /// Whether the law is strictly convex with a minimum at zero
    /// misorientation. `Constant` is the one shipped law that is not.
    pub fn is_convex(&self) -> bool {
        !matches!(self, SurfaceTensionModel::Constant { .. })
    }

    /// Minimum of the second derivative over `|a| <= bound`.
    pub fn min_curvature_on(&self, bound: f64) -> f64 {
        match *self {
            // cosh is smallest at the origin
            SurfaceTensionModel::Cosh { s0 } => s0,
            _ => self.second_derivative(bound),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (s0, c) = match *self {
            SurfaceTensionModel::Quadratic { s0, c } => (s0, Some(c)),
            SurfaceTensionModel::Cosh { s0 } | SurfaceTensionModel::Constant { s0 } => (s0, None),
        };
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma.s0 must be positive, got {s0}")));
        }
        if let Some(c) = c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidInput(format!("sigma.c must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// Surface tension law together with the orientation mobility `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrainModel {
    pub tension: SurfaceTensionModel,
    pub gamma: f64,
}

impl GrainModel {
    pub fn new(tension: SurfaceTensionModel, gamma: f64) -> Result<Self> {
        tension.validate()?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { tension, gamma })
    }

    pub fn sigmas(&self, alpha: &[f64; 3]) -> [f64; 3] {
        sigma_triple(&self.tension, alpha)
    }

    /// Right-hand side of the orientation ODE at fixed lengths.
    pub fn alpha_rate(&self, alpha: &[f64; 3], lengths: &[f64; 3]) -> [f64; 3] {
        let d = misorientations(alpha);
        let q: [f64; 3] = std::array::from_fn(|j| self.tension.derivative(d[j]) * lengths[j]);
        std::array::from_fn(|j| -self.gamma * (q[next(j)] - q[j]))
    }
}

/// Discrete state: tangent angles on `x_i = i/N`, curve lengths, lattice
/// orientations and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriodState {
    pub theta: [Vec<f64>; 3],
    pub lengths: [f64; 3],
    pub alpha: [f64; 3],
    pub time: f64,
}

impl TriodState {
    pub fn new(theta: [Vec<f64>; 3], lengths: [f64; 3], alpha: [f64; 3]) -> Result<Self> {
        let state = Self { theta, lengths, alpha, time: 0.0 };
        state.validate()?;
        Ok(state)
    }

    /// Straight curves with constant angles.
    pub fn straight(grid_n: usize, angles: [f64; 3], lengths: [f64; 3], alpha: [f64; 3]) -> Self {
        Self {
            theta: std::array::from_fn(|j| vec![angles[j]; grid_n + 1]),
            lengths,
            alpha,
            time: 0.0,
        }
    }

    pub fn grid_n(&self) -> usize {
        self.theta[0].len() - 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.grid_n() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.grid_n() as f64
    }

    /// Tangent angles at the triple junction (`x = 1`).
    pub fn junction_angles(&self) -> [f64; 3] {
        std::array::from_fn(|j| *self.theta[j].last().unwrap())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.theta[0].len();
        if n < 5 {
            return Err(Error::InvalidInput(format!("grid needs at least 4 intervals, got {}", n - 1)));
        }
        for j in 0..3 {
            if self.theta[j].len() != n {
                return Err(Error::InvalidInput("curves have different node counts".into()));
            }
            if !(self.lengths[j] > 0.0 && self.lengths[j].is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "length of curve {} must be positive, got {}",
                    j + 1,
                    self.lengths[j]
                )));
            }
            if !self.alpha[j].is_finite() {
                return Err(Error::InvalidInput("non-finite orientation".into()));
            }
            let th = &self.theta[j];
            if th.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite angle on curve {}", j + 1)));
            }
            if th.windows(2).any(|w| (w[1] - w[0]).abs() >= std::f64::consts::PI) {
                return Err(Error::InvalidInput(format!("angle branch jumps on curve {}", j + 1)));
            }
        }
        Ok(())
    }
}

/// The three fixed outer endpoints `P^(j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointSet {
    pub points: [Point2<f64>; 3],
}

impl EndpointSet {
    pub fn new(points: [Point2<f64>; 3]) -> Result<Self> {
        for j in 0..3 {
            if points[j].iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput("non-finite endpoint".into()));
            }
            if (points[j] - points[next(j)]).norm() == 0.0 {
                return Err(Error::InvalidInput("endpoints must be pairwise distinct".into()));
            }
        }
        let a = points[1] - points[0];
        let b = points[2] - points[0];
        let scale = a.norm() * b.norm();
        if a.perp(&b).abs() <= 1e-12 * scale {
            return Err(Error::InvalidInput("endpoints are collinear".into()));
        }
        Ok(Self { points })
    }

    pub fn from_coords(coords: [[f64; 2]; 3]) -> Result<Self> {
        Self::new(coords.map(|c| Point2::new(c[0], c[1])))
    }

    /// Vertices of an equilateral triangle on the circle of radius `r`
    /// about the origin, listed counter-clockwise starting at the top.
    pub fn equilateral(r: f64) -> Self {
        let pts = std::array::from_fn(|j| {
            let phi = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * j as f64 / 3.0;
            Point2::new(r * phi.cos(), r * phi.sin())
        });
        Self { points: pts }
    }

    /// Interior angle of the endpoint triangle at each vertex.
    pub fn interior_angles(&self) -> [f64; 3] {
        std::array::from_fn(|j| {
            let p = self.points[j];
            let u = self.points[next(j)] - p;
            let v = self.points[prev(j)] - p;
            (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos()
        })
    }

    /// Every interior angle is below `2 pi / 3`.
    pub fn satisfies_a2(&self) -> bool {
        self.interior_angles().iter().all(|&a| a < 2.0 * std::f64::consts::FRAC_PI_3)
    }
}

/// `Delta^(j) alpha = alpha^(j-1) - alpha^(j)`, cyclically.
pub fn misorientations(alpha: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|j| alpha[prev(j)] - alpha[j])
}

pub fn sigma_triple(model: &SurfaceTensionModel, alpha: &[f64; 3]) -> [f64; 3] {
    misorientations(alpha).map(|d| model.value(d))
}

/// `<tau^(j), tau^(j+1)>` at a junction in Herring balance, from the tensions
/// alone. Fails when the angle degenerates (`|cos| >= 1 - eps`).
pub fn junction_angle_cosine(sigmas: &[f64; 3], j: usize, eps: f64) -> Result<f64> {
    let (sp, s0, s1) = (sigmas[prev(j)], sigmas[j], sigmas[next(j)]);
    let cosine = (sp * sp - s0 * s0 - s1 * s1) / (2.0 * s0 * s1);
    if cosine.abs() >= 1.0 - eps {
        return Err(Error::DegenerateAngle { cosine, eps });
    }
    Ok(cosine)
}

/// Strict triangle inequality for the tension triple; equivalent to all
/// three junction angles lying strictly inside `(0, pi)`.
pub fn triangle_condition(sigmas: &[f64; 3]) -> bool {
    (0..3).all(|j| {
        let (sp, s0, s1) = (sigmas[prev(j)], sigmas[j], sigmas[next(j)]);
        let lo = (s0 - s1) * (s0 - s1);
        let hi = (s0 + s1) * (s0 + s1);
        lo < sp * sp && sp * sp < hi
    })
}

/// Curvature `kappa = d_x Theta / L` at every node of curve `j`.
pub fn curvature_field(state: &TriodState, j: usize) -> Vec<f64> {
    let mut k = numerics::derivative_vec(&state.theta[j], state.h());
    let inv = 1.0 / state.lengths[j];
    k.iter_mut().for_each(|v| *v *= inv);
    k
}

/// Force imbalance `|sum_j sigma_j tau_j|` at the junction.
pub fn herring_residual(state: &TriodState, model: &SurfaceTensionModel) -> f64 {
    herring_vector(&sigma_triple(model, &state.alpha), &state.junction_angles()).norm()
}

pub(crate) fn herring_vector(sigmas: &[f64; 3], angles: &[f64; 3]) -> Vector2<f64> {
    (0..3).fold(Vector2::zeros(), |acc, j| {
        acc + sigmas[j] * Vector2::new(angles[j].cos(), angles[j].sin())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const QUAD: SurfaceTensionModel = SurfaceTensionModel::Quadratic { s0: 1.0, c: 0.5 };
    const COSH: SurfaceTensionModel = SurfaceTensionModel::Cosh { s0: 1.0 };

    fn samples() -> impl Iterator<Item = f64> {
        (0..=2000).map(|i| -10.0 + i as f64 * 1e-2)
    }

    #[test]
    fn tension_laws_positive_and_convex() {
        for m in [QUAD, COSH, SurfaceTensionModel::Constant { s0: 2.0 }] {
            for a in samples() {
                assert!(m.value(a) > 0.0);
            }
        }
        for m in [QUAD, COSH] {
            assert_eq!(m.derivative(0.0), 0.0);
            for a in samples() {
                assert!(m.second_derivative(a) > 0.0);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let step = 1e-5;
        for m in [QUAD, COSH] {
            for a in samples().step_by(7) {
                let fd = (m.value(a + step) - m.value(a - step)) / (2.0 * step);
                let d = m.derivative(a);
                let scale = d.abs().max(1e-3);
                assert!((fd - d).abs() / scale <= 1e-6, "{m:?} at {a}: {fd} vs {d}");
                let fd2 = (m.derivative(a + step) - m.derivative(a - step)) / (2.0 * step);
                let d2 = m.second_derivative(a);
                assert!((fd2 - d2).abs() / d2 <= 1e-6);
            }
        }
    }

    #[test]
    fn misorientation_examples() {
        assert_eq!(misorientations(&[1.0, 1.0, 1.0]), [0.0, 0.0, 0.0]);
        assert_eq!(misorientations(&[0.0, 1.0, 2.0]), [2.0, -1.0, -1.0]);
    }

    #[test]
    fn sigma_triple_examples() {
        assert_eq!(sigma_triple(&QUAD, &[0.7, 0.7, 0.7]), [1.0, 1.0, 1.0]);
        assert_eq!(sigma_triple(&QUAD, &[0.0, 1.0, 2.0]), [3.0, 1.5, 1.5]);
        let x: f64 = 0.83;
        let s = sigma_triple(&COSH, &[0.0, 0.0, x]);
        // Delta = (x, 0, -x)
        assert!((s[0] - x.cosh()).abs() < 1e-15);
        assert_eq!(s[1], 1.0);
        assert!((s[2] - x.cosh()).abs() < 1e-15);
    }

    #[test]
    fn junction_cosine_examples() {
        for j in 0..3 {
            assert_eq!(junction_angle_cosine(&[1.0, 1.0, 1.0], j, DEFAULT_ANGLE_EPS).unwrap(), -0.5);
        }
        // sigma^(0) of the 1-based notation is sigma^(3): place sqrt 2 last
        let c = junction_angle_cosine(&[1.0, 1.0, 2f64.sqrt()], 0, DEFAULT_ANGLE_EPS).unwrap();
        assert!(c.abs() < 1e-15);
        assert!(matches!(
            junction_angle_cosine(&[1.0, 1.0, 2.0], 0, DEFAULT_ANGLE_EPS),
            Err(Error::DegenerateAngle { .. })
        ));
    }

    /// Independent route: build unit vectors in force balance by placing the
    /// tension vectors head to tail, then take the dot product.
    #[test]
    fn junction_cosine_matches_force_polygon() {
        let sig = [1.0, 1.0, 2f64.sqrt()];
        // tau1 along +x; tau2 at angle phi solves |s1 tau1 + s2 tau2| = s3
        let phi = {
            let (mut lo, mut hi) = (0.0, PI);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let r = (sig[0] + sig[1] * mid.cos()).hypot(sig[1] * mid.sin());
                if r > sig[2] {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let t1 = Vector2::new(1.0, 0.0);
        let t2 = Vector2::new(phi.cos(), phi.sin());
        let t3 = -(sig[0] * t1 + sig[1] * t2) / sig[2];
        assert!((t3.norm() - 1.0).abs() < 1e-12);
        let c = junction_angle_cosine(&sig, 0, DEFAULT_ANGLE_EPS).unwrap();
        assert!((c - t1.dot(&t2)).abs() < 1e-12);
        let c2 = junction_angle_cosine(&sig, 1, DEFAULT_ANGLE_EPS).unwrap();
        assert!((c2 - t2.dot(&t3)).abs() < 1e-12);
    }

    #[test]
    fn triangle_condition_examples() {
        assert!(triangle_condition(&[1.0, 1.0, 1.0]));
        assert!(!triangle_condition(&[1.0, 1.0, 2.0]));
        assert!(!triangle_condition(&[3.0, 1.5, 1.5]));
        assert!(triangle_condition(&[1.2, 1.0, 1.1]));
    }

    #[test]
    fn curvature_examples() {
        let n = 200;
        let flat = TriodState::straight(n, [0.3, 1.0, 2.0], [1.0, 2.0, 3.0], [0.0; 3]);
        assert!(curvature_field(&flat, 1).iter().all(|k| k.abs() < 1e-12));

        let len = 2.5;
        let mut arc = flat.clone();
        arc.lengths[0] = len;
        arc.theta[0] = (0..=n).map(|i| len * i as f64 / n as f64).collect();
        assert!(curvature_field(&arc, 0).iter().all(|k| (k - 1.0).abs() < 1e-12));

        let mut wavy = flat;
        wavy.lengths[2] = 2.0;
        wavy.theta[2] = (0..=n).map(|i| (PI * i as f64 / n as f64).sin()).collect();
        let err = curvature_field(&wavy, 2)
            .iter()
            .enumerate()
            .map(|(i, k)| (k - 0.5 * PI * (PI * i as f64 / n as f64).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "{err}");
    }

    #[test]
    fn curvature_converges_at_second_order() {
        let err = |n: usize| {
            let mut s = TriodState::straight(n, [0.0; 3], [1.5; 3], [0.0; 3]);
            s.theta[0] = (0..=n).map(|i| (2.0 * i as f64 / n as f64).exp()).collect();
            curvature_field(&s, 0)
                .iter()
                .enumerate()
                .map(|(i, k)| (k - 2.0 * (2.0 * i as f64 / n as f64).exp() / 1.5).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(40) / err(80)).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn herring_examples() {
        let d = PI / 180.0;
        let sym = TriodState::straight(16, [90.0 * d, 210.0 * d, 330.0 * d], [1.0; 3], [0.0; 3]);
        assert!(herring_residual(&sym, &QUAD) < 1e-15);
        let bad = TriodState::straight(16, [0.0, 90.0 * d, 180.0 * d], [1.0; 3], [0.0; 3]);
        assert!((herring_residual(&bad, &QUAD) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn endpoint_checks() {
        assert!(EndpointSet::from_coords([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        assert!(EndpointSet::from_coords([[0.0, 0.0], [0.0, 0.0], [2.0, 1.0]]).is_err());
        assert!(EndpointSet::equilateral(1.0).satisfies_a2());
        let obtuse = EndpointSet::from_coords([[0.0, 0.0], [1.0, 0.0], [-0.9, 0.5]]).unwrap();
        assert!(!obtuse.satisfies_a2());
    }

    #[test]
    fn alpha_rate_telescopes() {
        let m = GrainModel::new(QUAD, 1.3).unwrap();
        let r = m.alpha_rate(&[0.2, -0.4, 0.9], &[0.7, 1.1, 1.9]);
        assert!((r[0] + r[1] + r[2]).abs() < 1e-15);
        assert!(GrainModel::new(QUAD, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn misorientations_sum_to_zero(a in prop::array::uniform3(-1e3f64..1e3)) {
            let d = misorientations(&a);
            prop_assert!((d[0] + d[1] + d[2]).abs() <= 1e-12 * (1.0 + a.iter().map(|v| v.abs()).sum::<f64>()));
        }

        #[test]
        fn equal_sigmas_give_120_degrees(s in 1e-3f64..1e3, j in 0usize..3) {
            prop_assert_eq!(junction_angle_cosine(&[s, s, s], j, DEFAULT_ANGLE_EPS).unwrap(), -0.5);
        }

        #[test]
        fn convexity_lower_bound(d in -3.0f64..3.0) {
            for m in [QUAD, COSH] {
                let lower = m.min_curvature_on(3.0) * d * d;
                prop_assert!(m.derivative(d) * d >= lower - 1e-12);
            }
        }
    }
}
