//! Operator-norm distance from a matrix to a complex subspace of M_d.
//!
//! The problem min_c ‖x − Σ c_k e_k‖ is the semidefinite program
//!
//! ```text
//!   minimize t   subject to   [[t·1, Y(c)], [Y(c)*, t·1]] ⪰ 0,   Y(c) = x − Σ c_k e_k
//! ```
//!
//! solved here with a log-det barrier path-following method. Variables are
//! t followed by the real and imaginary parts of the coefficients. With
//! barrier weight s the duality gap on the central path is 2d/s, so the
//! outer loop stops once that bound drops below `GAP_TARGET`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::matrix::{CMatrix, I, ONE, ZERO};

const GAP_TARGET: f64 = 1e-10;
const NEWTON_DECREMENT_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 60;
const MAX_OUTER: usize = 40;
const BARRIER_GROWTH: f64 = 8.0;

/// Nearest-point data for a distance computation.
#[derive(Debug, Clone)]
pub struct Nearest {
    /// ‖x − Σ c_k e_k‖ at the returned coefficients.
    pub distance: f64,
    pub coefficients: Vec<Complex64>,
    /// Central-path duality gap bound when the solver stopped.
    pub gap_bound: f64,
}

fn residual(x: &CMatrix, basis: &[CMatrix], coeffs: &[Complex64]) -> CMatrix {
    let mut y = x.clone().into_inner();
    for (e, c) in basis.iter().zip(coeffs) {
        y -= e.inner() * *c;
    }
    CMatrix::from_inner(y)
}

struct Problem<'a> {
    x: &'a CMatrix,
    basis: &'a [CMatrix],
    d: usize,
    /// Derivatives ∂F/∂v_j of the constraint matrix for each variable.
    directions: Vec<DMatrix<Complex64>>,
}

impl<'a> Problem<'a> {
    fn new(x: &'a CMatrix, basis: &'a [CMatrix]) -> Self {
        let d = x.rows();
        let n = 2 * d;
        let mut directions = Vec::with_capacity(1 + 2 * basis.len());
        directions.push(DMatrix::identity(n, n));
        for scale in [ONE, I] {
            for e in basis {
                let se = e.inner() * scale;
                let mut f = DMatrix::zeros(n, n);
                f.view_mut((0, d), (d, d)).copy_from(&(-&se));
                f.view_mut((d, 0), (d, d)).copy_from(&(-se.adjoint()));
                directions.push(f);
            }
        }
        Problem { x, basis, d, directions }
    }

    fn nvars(&self) -> usize {
        self.directions.len()
    }

    fn coeffs(&self, v: &DVector<f64>) -> Vec<Complex64> {
        let m = self.basis.len();
        (0..m).map(|k| Complex64::new(v[1 + k], v[1 + m + k])).collect()
    }

    fn constraint(&self, v: &DVector<f64>) -> DMatrix<Complex64> {
        let d = self.d;
        let y = residual(self.x, self.basis, &self.coeffs(v)).into_inner();
        let t = Complex64::new(v[0], 0.0);
        let mut f = DMatrix::from_diagonal_element(2 * d, 2 * d, t);
        f.view_mut((0, d), (d, d)).copy_from(&y);
        f.view_mut((d, 0), (d, d)).copy_from(&y.adjoint());
        f
    }

    /// s·t − log det F(v), or None outside the open feasible region.
    fn barrier(&self, v: &DVector<f64>, s: f64) -> Option<(f64, Cholesky<Complex64, nalgebra::Dyn>)> {
        let chol = Cholesky::new(self.constraint(v))?;
        let l = chol.l_dirty();
        let mut logdet = 0.0;
        for i in 0..l.nrows() {
            let diag = l[(i, i)].re;
            if diag <= 0.0 || !diag.is_finite() {
                return None;
            }
            logdet += 2.0 * diag.ln();
        }
        Some((s * v[0] - logdet, chol))
    }
}

/// Operator-norm nearest point of span(basis) to `x`. The basis must be
/// orthonormal in the Hilbert–Schmidt inner product.
pub fn nearest_point(x: &CMatrix, basis: &[CMatrix]) -> Nearest {
    let start: Vec<Complex64> = basis.iter().map(|e| e.hs_inner(x)).collect();
    let y0 = residual(x, basis, &start);
    let t0 = y0.op_norm();
    if t0 <= 1e-14 || basis.is_empty() {
        return Nearest { distance: t0, coefficients: start, gap_bound: 0.0 };
    }

    let prob = Problem::new(x, basis);
    let n = prob.nvars();
    let m = basis.len();
    let mut v = DVector::zeros(n);
    v[0] = t0 * 1.1 + 1e-3;
    for k in 0..m {
        v[1 + k] = start[k].re;
        v[1 + m + k] = start[k].im;
    }

    let barrier_param = (2 * prob.d) as f64;
    let mut s = barrier_param / t0;
    let mut best = Nearest { distance: t0, coefficients: start, gap_bound: t0 };

    for _ in 0..MAX_OUTER {
        for _ in 0..MAX_NEWTON {
            let Some((value, chol)) = prob.barrier(&v, s) else { break };
            let w = chol.inverse();
            let g_mats: Vec<DMatrix<Complex64>> = prob.directions.iter().map(|f| &w * f).collect();
            let mut grad = DVector::zeros(n);
            let mut hess = DMatrix::zeros(n, n);
            for j in 0..n {
                grad[j] = -g_mats[j].trace().re;
                for k in 0..=j {
                    // tr(A B) without forming the product
                    let mut acc = ZERO;
                    for p in 0..2 * prob.d {
                        for q in 0..2 * prob.d {
                            acc += g_mats[j][(p, q)] * g_mats[k][(q, p)];
                        }
                    }
                    hess[(j, k)] = acc.re;
                    hess[(k, j)] = acc.re;
                }
            }
            grad[0] += s;
            let step = match hess.clone().cholesky() {
                Some(c) => -c.solve(&grad),
                None => match hess.lu().solve(&(-&grad)) {
                    Some(st) => st,
                    None => break,
                },
            };
            let slope = grad.dot(&step);
            if -slope / 2.0 < NEWTON_DECREMENT_TOL {
                break;
            }
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial = &v + &step * alpha;
                if let Some((tv, _)) = prob.barrier(&trial, s) {
                    if tv <= value + 0.25 * alpha * slope {
                        v = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }

        let coeffs = prob.coeffs(&v);
        let dist = residual(x, basis, &coeffs).op_norm();
        let gap = barrier_param / s;
        if dist < best.distance {
            best.distance = dist;
            best.coefficients = coeffs;
        }
        best.gap_bound = gap;
        if gap < GAP_TARGET {
            break;
        }
        s *= BARRIER_GROWTH;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaled(m: CMatrix, c: f64) -> CMatrix {
        m.scale_real(c)
    }

    #[test]
    fn diagonal_distance_to_offdiagonal_system() {
        // span{I, e12, e21} in Hermitian orthonormal form
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let basis = vec![
            scaled(CMatrix::identity(2), r),
            scaled(CMatrix::unit(2, 0, 1) + CMatrix::unit(2, 1, 0), r),
            scaled(CMatrix::unit(2, 0, 1) - CMatrix::unit(2, 1, 0), r).scale(I),
        ];
        let near = nearest_point(&CMatrix::unit(2, 0, 0), &basis);
        assert!((near.distance - 0.5).abs() < 1e-8, "{near:?}");
    }

    #[test]
    fn scalar_subspace() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let basis = vec![scaled(CMatrix::identity(2), r)];
        let near = nearest_point(&CMatrix::unit(2, 0, 1), &basis);
        assert!((near.distance - 1.0).abs() < 1e-8);
        // diag(1, 3): best scalar is 2, distance 1
        let near = nearest_point(&CMatrix::diag_real(&[1.0, 3.0]), &basis);
        assert!((near.distance - 1.0).abs() < 1e-8);
    }

    #[test]
    fn member_has_zero_distance() {
        let basis = vec![CMatrix::unit(2, 0, 0), CMatrix::unit(2, 1, 1)];
        let near = nearest_point(&CMatrix::diag_real(&[0.3, -2.0]), &basis);
        assert!(near.distance < 1e-12);
    }
}
