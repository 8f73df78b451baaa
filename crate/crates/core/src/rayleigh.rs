//! Smallest Rayleigh quotient of the three-segment network operator.
//!
//! On segments of lengths `L_j` with weights `s_j` the quotient is
//! `sum_j int s_j^3 phi_j'^2 / sum_j int s_j^2 phi_j^2` over functions with
//! `phi_j(0) = 0` and `sum_j s_j^2 phi_j(L_j) = 0`. It is discretized with P1
//! elements; the end value of the third segment is eliminated through the
//! coupling constraint, so the unknowns are the interior nodes of every
//! segment followed by the end values of the first two segments.

use nalgebra::{DMatrix, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkEigenProblem {
    pub seg_lengths: [f64; 3],
    pub weights: [f64; 3],
    /// Elements per segment.
    pub nodes_per_segment: usize,
}

impl NetworkEigenProblem {
    pub fn new(seg_lengths: [f64; 3], weights: [f64; 3], nodes_per_segment: usize) -> Result<Self> {
        if seg_lengths.iter().chain(&weights).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "lengths and weights must be positive, got {seg_lengths:?} and {weights:?}"
            )));
        }
        if nodes_per_segment < 2 {
            return Err(Error::InvalidInput("need at least two elements per segment".into()));
        }
        Ok(Self { seg_lengths, weights, nodes_per_segment })
    }

    /// Size of the constrained space: `3 (n - 1) + 2`.
    pub fn reduced_size(&self) -> usize {
        3 * (self.nodes_per_segment - 1) + 2
    }

    /// Coefficients of each segment's end value in terms of the two retained
    /// end values.
    pub fn end_map(&self) -> [[f64; 2]; 3] {
        let w2 = self.weights.map(|s| s * s);
        [[1.0, 0.0], [0.0, 1.0], [-w2[0] / w2[2], -w2[1] / w2[2]]]
    }
}

/// Symmetric matrix on the constrained space in block-arrow form: one
/// tridiagonal block per segment, coupled only through the last interior
/// node to the 2x2 block of retained end values.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrowMatrix {
    pub diag: [Vec<f64>; 3],
    /// Off-diagonal of each tridiagonal block (`n - 2` entries).
    pub off: [Vec<f64>; 3],
    /// Coupling of each segment's last interior node to the two end values.
    pub couple: [[f64; 2]; 3],
    pub corner: Matrix2<f64>,
}

impl ArrowMatrix {
    fn block_len(&self) -> usize {
        self.diag[0].len()
    }

    pub fn size(&self) -> usize {
        3 * self.block_len() + 2
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.block_len();
        let size = self.size();
        let mut a = DMatrix::zeros(size, size);
        for j in 0..3 {
            let o = j * m;
            for i in 0..m {
                a[(o + i, o + i)] = self.diag[j][i];
                if i + 1 < m {
                    a[(o + i, o + i + 1)] = self.off[j][i];
                    a[(o + i + 1, o + i)] = self.off[j][i];
                }
            }
            for k in 0..2 {
                a[(o + m - 1, 3 * m + k)] = self.couple[j][k];
                a[(3 * m + k, o + m - 1)] = self.couple[j][k];
            }
        }
        for r in 0..2 {
            for c in 0..2 {
                a[(3 * m + r, 3 * m + c)] = self.corner[(r, c)];
            }
        }
        a
    }

    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        let m = self.block_len();
        let z = [x[3 * m], x[3 * m + 1]];
        let mut tail = self.corner * Vector2::new(z[0], z[1]);
        for j in 0..3 {
            let o = j * m;
            for i in 0..m {
                let mut v = self.diag[j][i] * x[o + i];
                if i > 0 {
                    v += self.off[j][i - 1] * x[o + i - 1];
                }
                if i + 1 < m {
                    v += self.off[j][i] * x[o + i + 1];
                }
                out[o + i] = v;
            }
            out[o + m - 1] += self.couple[j][0] * z[0] + self.couple[j][1] * z[1];
            tail[0] += self.couple[j][0] * x[o + m - 1];
            tail[1] += self.couple[j][1] * x[o + m - 1];
        }
        out[3 * m] = tail[0];
        out[3 * m + 1] = tail[1];
    }

    /// Solves `A x = b` by block elimination onto the 2x2 end-value system.
    pub fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let m = self.block_len();
        let mut w: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; m]);
        let mut scratch = vec![0.0; m];
        let mut schur = self.corner;
        let mut rhs = Vector2::new(b[3 * m], b[3 * m + 1]);
        for j in 0..3 {
            let o = j * m;
            let mut lower = vec![0.0; m];
            let mut upper = vec![0.0; m];
            lower[1..].copy_from_slice(&self.off[j]);
            upper[..m - 1].copy_from_slice(&self.off[j]);
            x[o..o + m].copy_from_slice(&b[o..o + m]);
            w[j][m - 1] = 1.0;
            numerics::solve_tridiagonal2(&lower, &self.diag[j], &upper, &mut x[o..o + m], &mut w[j], &mut scratch);
            let c = Vector2::new(self.couple[j][0], self.couple[j][1]);
            schur -= c * c.transpose() * w[j][m - 1];
            rhs -= c * x[o + m - 1];
        }
        let z = schur
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SolverFailure("singular reduced end-value system".into()))?;
        for j in 0..3 {
            let o = j * m;
            let cz = self.couple[j][0] * z[0] + self.couple[j][1] * z[1];
            for i in 0..m {
                x[o + i] -= w[j][i] * cz;
            }
        }
        x[3 * m] = z[0];
        x[3 * m + 1] = z[1];
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverFailure("non-finite solution".into()));
        }
        Ok(())
    }
}

/// Stiffness (`s^3`-weighted) and mass (`s^2`-weighted) matrices on the
/// constrained space. The flux balance at the shared end is the natural
/// condition of the quotient and is not imposed.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub stiffness: ArrowMatrix,
    pub mass: ArrowMatrix,
    /// End value of every segment as a combination of the two retained ones.
    pub end_map: [[f64; 2]; 3],
}

fn assemble_form(problem: &NetworkEigenProblem, stiffness: bool) -> ArrowMatrix {
    let n = problem.nodes_per_segment;
    let m = n - 1;
    let t = problem.end_map();
    let mut diag: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; m]);
    let mut off: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; m - 1]);
    let mut couple = [[0.0; 2]; 3];
    let mut corner = Matrix2::zeros();
    for j in 0..3 {
        let s = problem.weights[j];
        let h = problem.seg_lengths[j] / n as f64;
        // element matrix [[a, b], [b, a]]
        let (a, b) = if stiffness { (s.powi(3) / h, -s.powi(3) / h) } else { (s * s * h / 3.0, s * s * h / 6.0) };
        // every interior node touches two elements
        diag[j].iter_mut().for_each(|d| *d = 2.0 * a);
        off[j].iter_mut().for_each(|o| *o = b);
        couple[j] = [b * t[j][0], b * t[j][1]];
        let tj = Vector2::new(t[j][0], t[j][1]);
        corner += a * tj * tj.transpose();
    }
    ArrowMatrix { diag, off, couple, corner }
}

pub fn assemble(problem: &NetworkEigenProblem) -> Assembly {
    Assembly {
        stiffness: assemble_form(problem, true),
        mass: assemble_form(problem, false),
        end_map: problem.end_map(),
    }
}

/// Smallest eigenvalue and its mode, as nodal values `phi_j(s_i)` on every
/// segment including both ends. The mode is normalized in the mass norm.
pub fn poincare_mode(problem: &NetworkEigenProblem) -> Result<(f64, [Vec<f64>; 3])> {
    let asm = assemble(problem);
    let size = asm.stiffness.size();
    let mut x: Vec<f64> = (0..size).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin()).collect();
    let mut mx = vec![0.0; size];
    let mut kx = vec![0.0; size];
    let mut y = vec![0.0; size];
    let mut lambda = f64::INFINITY;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    for _ in 0..20_000 {
        asm.mass.mul(&x, &mut mx);
        asm.stiffness.solve(&mx, &mut y)?;
        asm.mass.mul(&y, &mut mx);
        let norm = dot(&y, &mx).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::SolverFailure("iterate collapsed".into()));
        }
        x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi = yi / norm);
        asm.stiffness.mul(&x, &mut kx);
        let next = dot(&x, &kx);
        // the quotient decreases monotonically until roundoff takes over
        let change = lambda - next;
        if change.abs() <= 1e-13 * next || (change <= 0.0 && -change <= 1e-11 * next) {
            return Ok((next, nodal_values(problem, &asm, &x)));
        }
        lambda = next;
    }
    Err(Error::SolverFailure(format!("inverse iteration stagnated at {lambda}")))
}

fn nodal_values(problem: &NetworkEigenProblem, asm: &Assembly, x: &[f64]) -> [Vec<f64>; 3] {
    let m = problem.nodes_per_segment - 1;
    let z = [x[3 * m], x[3 * m + 1]];
    std::array::from_fn(|j| {
        let mut v = Vec::with_capacity(m + 2);
        v.push(0.0);
        v.extend_from_slice(&x[j * m..(j + 1) * m]);
        v.push(asm.end_map[j][0] * z[0] + asm.end_map[j][1] * z[1]);
        v
    })
}

/// Smallest generalized eigenvalue of (stiffness, mass): the discrete
/// Poincare constant of the network.
pub fn poincare_constant(problem: &NetworkEigenProblem) -> Result<f64> {
    poincare_mode(problem).map(|(l, _)| l)
}

fn grid(range: (f64, f64), samples: usize) -> Vec<f64> {
    if samples <= 1 || range.0 == range.1 {
        return vec![range.0];
    }
    (0..samples)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (samples - 1) as f64)
        .collect()
}

/// Minimum of [`poincare_constant`] over a tensor grid of `samples` points
/// per axis (ends included) in `[L_lo, L_hi]^3 x [s_lo, s_hi]^3`.
pub fn poincare_constant_over_box(
    length_range: (f64, f64),
    weight_range: (f64, f64),
    samples: usize,
    nodes_per_segment: usize,
) -> Result<f64> {
    if !(length_range.0 > 0.0 && length_range.0 <= length_range.1)
        || !(weight_range.0 > 0.0 && weight_range.0 <= weight_range.1)
    {
        return Err(Error::InvalidInput(format!(
            "ranges must be positive and ordered, got {length_range:?} and {weight_range:?}"
        )));
    }
    let ls = grid(length_range, samples);
    let ss = grid(weight_range, samples);
    let mut points = Vec::new();
    for &l0 in &ls {
        for &l1 in &ls {
            for &l2 in &ls {
                for &s0 in &ss {
                    for &s1 in &ss {
                        for &s2 in &ss {
                            points.push(([l0, l1, l2], [s0, s1, s2]));
                        }
                    }
                }
            }
        }
    }
    points
        .par_iter()
        .map(|(l, s)| poincare_constant(&NetworkEigenProblem::new(*l, *s, nodes_per_segment)?))
        .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Dense generalized symmetric eigenproblem via Cholesky of the mass matrix.
    fn dense_smallest(problem: &NetworkEigenProblem) -> f64 {
        let asm = assemble(problem);
        let k = asm.stiffness.to_dense();
        let m = asm.mass.to_dense();
        let l = m.cholesky().unwrap().l();
        let li = l.clone().try_inverse().unwrap();
        let c = &li * k * li.transpose();
        c.symmetric_eigenvalues().min()
    }

    #[test]
    fn two_element_matrices_match_hand_assembly() {
        let p = NetworkEigenProblem::new([1.0; 3], [1.0; 3], 2).unwrap();
        assert_eq!(p.reduced_size(), 5);
        let asm = assemble(&p);
        // dof order: interior node of each segment, then the first two end values
        let k = DMatrix::from_row_slice(5, 5, &[
            4.0, 0.0, 0.0, -2.0, 0.0,
            0.0, 4.0, 0.0, 0.0, -2.0,
            0.0, 0.0, 4.0, 2.0, 2.0,
            -2.0, 0.0, 2.0, 4.0, 2.0,
            0.0, -2.0, 2.0, 2.0, 4.0,
        ]);
        let (a, b, c) = (1.0 / 3.0, 1.0 / 12.0, 1.0 / 6.0);
        let m = DMatrix::from_row_slice(5, 5, &[
            a, 0.0, 0.0, b, 0.0,
            0.0, a, 0.0, 0.0, b,
            0.0, 0.0, a, -b, -b,
            b, 0.0, -b, a, c,
            0.0, b, -b, c, a,
        ]);
        assert!((asm.stiffness.to_dense() - k).abs().max() < 1e-14);
        assert!((asm.mass.to_dense() - m).abs().max() < 1e-14);
    }

    #[test]
    fn forms_are_symmetric_and_definite() {
        let p = NetworkEigenProblem::new([0.7, 1.3, 2.0], [0.6, 1.1, 1.9], 6).unwrap();
        let asm = assemble(&p);
        let k = asm.stiffness.to_dense();
        let m = asm.mass.to_dense();
        assert_eq!(k, k.transpose());
        assert_eq!(m, m.transpose());
        assert!(k.symmetric_eigenvalues().min() > 0.0);
        assert!(m.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn equal_parameters_are_permutation_symmetric() {
        let p = NetworkEigenProblem::new([1.2; 3], [0.8; 3], 5).unwrap();
        let asm = assemble(&p);
        for mat in [&asm.stiffness, &asm.mass] {
            assert_eq!(mat.diag[0], mat.diag[1]);
            assert_eq!(mat.diag[1], mat.diag[2]);
            assert_eq!(mat.off[0], mat.off[2]);
            assert_eq!(mat.couple[0], [mat.couple[1][1], mat.couple[1][0]]);
        }
        let l = |ls: [f64; 3], ws: [f64; 3]| poincare_constant(&NetworkEigenProblem::new(ls, ws, 40).unwrap()).unwrap();
        let a = l([0.7, 1.0, 1.4], [0.9, 1.2, 1.5]);
        let b = l([1.4, 0.7, 1.0], [1.5, 0.9, 1.2]);
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn structured_solve_matches_dense() {
        let p = NetworkEigenProblem::new([0.7, 1.3, 2.0], [0.6, 1.1, 1.9], 7).unwrap();
        let asm = assemble(&p);
        let n = p.reduced_size();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut x = vec![0.0; n];
        asm.stiffness.solve(&b, &mut x).unwrap();
        let dense = asm.stiffness.to_dense().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..n {
            assert!((x[i] - dense[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_iteration_matches_dense_eigensolver() {
        for (l, s) in [([1.0; 3], [1.0; 3]), ([0.5, 1.7, 1.1], [1.9, 0.6, 1.0]), ([2.0, 2.0, 0.5], [0.5, 2.0, 2.0])] {
            let p = NetworkEigenProblem::new(l, s, 12).unwrap();
            assert_relative_eq!(poincare_constant(&p).unwrap(), dense_smallest(&p), max_relative = 1e-10);
        }
    }

    #[test]
    fn analytic_case_and_refinement() {
        let err = |n: usize| {
            let p = NetworkEigenProblem::new([PI / 2.0; 3], [1.0; 3], n).unwrap();
            poincare_constant(&p).unwrap() - 1.0
        };
        assert!(err(400).abs() < 1e-3);
        let order = (err(50) / err(100)).log2();
        assert!(order > 1.9, "{order}");
    }

    #[test]
    fn doubling_lengths_quarters_the_constant() {
        let a = poincare_constant(&NetworkEigenProblem::new([0.6, 1.0, 1.3], [0.8, 1.0, 1.7], 60).unwrap()).unwrap();
        let b = poincare_constant(&NetworkEigenProblem::new([1.2, 2.0, 2.6], [0.8, 1.0, 1.7], 60).unwrap()).unwrap();
        assert_relative_eq!(a / 4.0, b, max_relative = 1e-6);
    }

    #[test]
    fn natural_flux_condition_is_recovered() {
        let p = NetworkEigenProblem::new([0.9, 1.4, 1.1], [1.3, 0.8, 1.0], 800).unwrap();
        let (_, modes) = poincare_mode(&p).unwrap();
        let flux: Vec<f64> = (0..3)
            .map(|j| {
                let v = &modes[j];
                let n = v.len() - 1;
                let h = p.seg_lengths[j] / n as f64;
                p.weights[j] * (v[n] - v[n - 1]) / h
            })
            .collect();
        let scale = flux.iter().map(|f| f.abs()).fold(0.0, f64::max);
        assert!((flux[0] - flux[1]).abs() < 1e-2 * scale && (flux[1] - flux[2]).abs() < 1e-2 * scale, "{flux:?}");
    }

    #[test]
    fn box_minimum() {
        let point = poincare_constant(&NetworkEigenProblem::new([1.1; 3], [0.9; 3], 32).unwrap()).unwrap();
        assert_eq!(poincare_constant_over_box((1.1, 1.1), (0.9, 0.9), 3, 32).unwrap(), point);
        let wide = poincare_constant_over_box((0.8, 1.1), (0.9, 1.3), 3, 32).unwrap();
        assert!(wide <= point);
        assert!(matches!(poincare_constant_over_box((0.0, 1.0), (1.0, 1.0), 2, 16), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(NetworkEigenProblem::new([1.0, 0.0, 1.0], [1.0; 3], 8).is_err());
        assert!(NetworkEigenProblem::new([1.0; 3], [1.0, 1.0, -1.0], 8).is_err());
    }
}
