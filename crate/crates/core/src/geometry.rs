//! Planar reconstruction of the curves, the (weighted) Fermat point and the
//! Steiner reference triod.

use std::io::{self, Write};

use nalgebra::{Matrix2, Point2, Vector2};

use crate::error::{Error, Result};
use crate::model::{self, next, prev, EndpointSet, TriodState};
use crate::numerics;

/// Distance floor used by the Weiszfeld update near a vertex.
const WEISZFELD_FLOOR: f64 = 1e-14;

/// Three point sequences, each starting at its outer endpoint and ending at
/// (or near) the junction.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarTriod {
    pub curves: [Vec<Point2<f64>>; 3],
}

impl PlanarTriod {
    pub fn reconstruct(state: &TriodState, endpoints: &EndpointSet) -> Self {
        Self { curves: std::array::from_fn(|j| reconstruct_curve(state, endpoints, j)) }
    }

    /// Straight spokes from every endpoint to `junction`, `grid_n + 1` points each.
    pub fn spokes(endpoints: &EndpointSet, junction: Point2<f64>, grid_n: usize) -> Self {
        Self {
            curves: std::array::from_fn(|j| {
                let p = endpoints.points[j];
                let d = junction - p;
                (0..=grid_n).map(|i| p + d * (i as f64 / grid_n as f64)).collect()
            }),
        }
    }

    pub fn junction_ends(&self) -> [Point2<f64>; 3] {
        std::array::from_fn(|j| *self.curves[j].last().unwrap())
    }

    /// Mean of the three curve ends.
    pub fn junction_point(&self) -> Point2<f64> {
        let e = self.junction_ends();
        Point2::from((e[0].coords + e[1].coords + e[2].coords) / 3.0)
    }
}

/// `xi(x_i) = P + L * int_0^{x_i} (cos Theta, sin Theta)` by the trapezoid rule.
pub fn reconstruct_curve(state: &TriodState, endpoints: &EndpointSet, j: usize) -> Vec<Point2<f64>> {
    let th = &state.theta[j];
    let h = state.h();
    let l = state.lengths[j];
    let cos: Vec<f64> = th.iter().map(|t| t.cos()).collect();
    let sin: Vec<f64> = th.iter().map(|t| t.sin()).collect();
    let mut cx = vec![0.0; th.len()];
    let mut cy = vec![0.0; th.len()];
    numerics::cumulative_trapezoid(&cos, h, &mut cx);
    numerics::cumulative_trapezoid(&sin, h, &mut cy);
    let p = endpoints.points[j];
    cx.iter().zip(&cy).map(|(x, y)| Point2::new(p.x + l * x, p.y + l * y)).collect()
}

/// Largest pairwise distance between the three curve ends.
pub fn junction_mismatch(triod: &PlanarTriod) -> f64 {
    let e = triod.junction_ends();
    (0..3).map(|j| (e[j] - e[next(j)]).norm()).fold(0.0, f64::max)
}

fn weighted_gradient(points: &[Point2<f64>; 3], weights: &[f64; 3], a: &Point2<f64>) -> Vector2<f64> {
    (0..3).fold(Vector2::zeros(), |g, k| {
        let d = a - points[k];
        g + weights[k] * d / d.norm().max(WEISZFELD_FLOOR)
    })
}

/// Minimizer of `sum_j w_j |a - P_j|`.
///
/// A vertex `P_j` is the minimizer iff `|sum_{k != j} w_k u_k| <= w_j` with
/// `u_k` the unit vector from `P_j` to `P_k`; that case is reported as
/// `VertexOptimal(j)` (1-based). Otherwise Weiszfeld iterations are followed
/// by a Newton polish so the gradient is at roundoff level.
pub fn weighted_fermat_point(endpoints: &EndpointSet, weights: &[f64; 3]) -> Result<Point2<f64>> {
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidInput(format!("weights must be positive, got {weights:?}")));
    }
    let p = &endpoints.points;
    for j in 0..3 {
        let pull: Vector2<f64> = [next(j), prev(j)]
            .iter()
            .map(|&k| weights[k] * (p[k] - p[j]).normalize())
            .sum();
        if pull.norm() <= weights[j] {
            return Err(Error::VertexOptimal(j + 1));
        }
    }
    let wsum: f64 = weights.iter().sum();
    let mut a = Point2::from((0..3).map(|k| weights[k] * p[k].coords).sum::<Vector2<f64>>() / wsum);
    let scale = (0..3).map(|k| (p[k] - p[next(k)]).norm()).fold(0.0, f64::max);
    for _ in 0..10_000 {
        let mut num = Vector2::zeros();
        let mut den = 0.0;
        for k in 0..3 {
            let d = (a - p[k]).norm().max(WEISZFELD_FLOOR);
            num += weights[k] * p[k].coords / d;
            den += weights[k] / d;
        }
        let na = Point2::from(num / den);
        let moved = (na - a).norm();
        a = na;
        if moved <= 1e-12 * scale {
            break;
        }
    }
    // Newton on the gradient; the Hessian is positive definite away from the vertices.
    for _ in 0..20 {
        let g = weighted_gradient(p, weights, &a);
        if g.norm() <= 1e-13 * wsum {
            break;
        }
        let mut hess = Matrix2::zeros();
        for k in 0..3 {
            let d = a - p[k];
            let r = d.norm().max(WEISZFELD_FLOOR);
            let u = d / r;
            hess += weights[k] / r * (Matrix2::identity() - u * u.transpose());
        }
        let Some(step) = hess.lu().solve(&g) else { break };
        let trial = a - step;
        if weighted_gradient(p, weights, &trial).norm() >= g.norm() {
            break;
        }
        a = trial;
    }
    Ok(a)
}

pub fn fermat_point(endpoints: &EndpointSet) -> Result<Point2<f64>> {
    weighted_fermat_point(endpoints, &[1.0; 3]).map_err(|e| match e {
        Error::VertexOptimal(j) => Error::A2Violation(j),
        other => other,
    })
}

/// The length-minimizing triod: straight spokes to the Fermat point.
pub fn steiner_triod(endpoints: &EndpointSet, grid_n: usize) -> Result<PlanarTriod> {
    Ok(PlanarTriod::spokes(endpoints, fermat_point(endpoints)?, grid_n))
}

fn directed_hausdorff(a: &[Point2<f64>], b: &[Point2<f64>]) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
        .sqrt()
}

/// Max over curves of the symmetric discrete Hausdorff distance.
pub fn triod_distance(a: &PlanarTriod, b: &PlanarTriod) -> f64 {
    (0..3)
        .map(|j| directed_hausdorff(&a.curves[j], &b.curves[j]).max(directed_hausdorff(&b.curves[j], &a.curves[j])))
        .fold(0.0, f64::max)
}

/// Writes the `curve_id,x,px,py,theta,kappa` snapshot table (curves 1-based).
pub fn write_snapshot<W: Write>(mut w: W, state: &TriodState, endpoints: &EndpointSet) -> io::Result<()> {
    writeln!(w, "curve_id,x,px,py,theta,kappa")?;
    let triod = PlanarTriod::reconstruct(state, endpoints);
    for j in 0..3 {
        let kappa = model::curvature_field(state, j);
        for (i, p) in triod.curves[j].iter().enumerate() {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                j + 1,
                state.x(i),
                p.x,
                p.y,
                state.theta[j][i],
                kappa[i]
            )?;
        }
    }
    Ok(())
}
