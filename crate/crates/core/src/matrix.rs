//! Dense complex matrices and the handful of spectral operations the rest of
//! the crate is built on: operator norm, Hermitian eigenvalues, distance to
//! the positive cone, PSD square roots, block assembly and amplification.
//!
//! Everything is double precision and dense; matrices stay small (at most a
//! few dozen rows), so no effort goes into sparsity or blocking.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Numerical tolerances for eigenvalue decisions and norm computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Absolute tolerance for eigenvalue and positivity decisions.
    pub eig_tol: f64,
    /// Relative tolerance for norm computations.
    pub norm_rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { eig_tol: 1e-10, norm_rtol: 1e-10 }
    }
}

impl Tolerance {
    pub fn new(eig_tol: f64, norm_rtol: f64) -> Result<Self> {
        for (name, v) in [("eig_tol", eig_tol), ("norm_rtol", norm_rtol)] {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(Error::invalid(format!("{name} = {v} outside (0, 1e-2]")));
            }
        }
        Ok(Tolerance { eig_tol, norm_rtol })
    }
}

/// A dense complex matrix with finite entries and at least one row and column.
#[derive(Clone, PartialEq)]
pub struct CMatrix(DMatrix<Complex64>);

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols() {
                let z = self.0[(i, j)];
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:.4}{:+.4}i", z.re, z.im)?;
            }
        }
        write!(f, "]")
    }
}

impl CMatrix {
    /// Builds a matrix from row-major entries, rejecting empty shapes and
    /// non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix must have at least one row and column"));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(CMatrix(DMatrix::from_row_slice(rows, cols, &data)))
    }

    /// Real-valued rows, mostly for fixtures and tests.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        CMatrix(DMatrix::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0)))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        CMatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_inner(m: DMatrix<Complex64>) -> Self {
        debug_assert!(m.nrows() > 0 && m.ncols() > 0);
        CMatrix(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(DMatrix::identity(n, n))
    }

    /// `c` times the n×n identity.
    pub fn scalar_identity(n: usize, c: Complex64) -> Self {
        CMatrix(DMatrix::from_diagonal_element(n, n, c))
    }

    /// Matrix unit e_ij in M_n.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = ONE;
        CMatrix(m)
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        let n = entries.len();
        CMatrix(DMatrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO }))
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        let e: Vec<_> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::diag(&e)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix(self.0.transpose())
    }

    pub fn scale(&self, c: Complex64) -> CMatrix {
        CMatrix(self.0.map(|z| z * c))
    }

    pub fn scale_real(&self, c: f64) -> CMatrix {
        CMatrix(self.0.map(|z| z * c))
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Hilbert–Schmidt inner product tr(self* other).
    pub fn hs_inner(&self, other: &CMatrix) -> Complex64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// (self + self*) / 2
    pub fn hermitian_part(&self) -> CMatrix {
        CMatrix((&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// (self − self*) / 2i, so that self = re + i·im with both Hermitian.
    pub fn skew_part(&self) -> CMatrix {
        CMatrix((&self.0 - self.0.adjoint()) * Complex64::new(0.0, -0.5))
    }

    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        CMatrix(self.0.kronecker(&other.0))
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        // 1x1 and zero matrices are common at the leaves of formulas
        if self.rows() == 1 && self.cols() == 1 {
            return self.0[(0, 0)].norm();
        }
        // largest eigenvalue of the smaller Gram matrix; relative accuracy
        // is that of the eigensolver since only the top of the spectrum is used
        let gram =
            if self.rows() <= self.cols() { &self.0 * self.0.adjoint() } else { self.0.adjoint() * &self.0 };
        gram.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max).sqrt()
    }

    /// Smallest singular value.
    pub fn min_singular_value(&self) -> f64 {
        let svd = self.0.clone().svd(false, false);
        svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Operator-norm size of the anti-Hermitian part ‖M − M*‖.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        CMatrix(&self.0 - self.0.adjoint()).op_norm()
    }

    fn checked_hermitian(&self, tol: &Tolerance) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::invalid(format!(
                "expected a square matrix, got {}x{}",
                self.rows(),
                self.cols()
            )));
        }
        let defect = self.hermiticity_defect();
        if defect > tol.eig_tol {
            return Err(Error::invalid(format!(
                "matrix is not Hermitian: ‖H − H*‖ = {defect:e} > {:e}",
                tol.eig_tol
            )));
        }
        Ok(self.hermitian_part())
    }

    /// Eigen-decomposition of the Hermitian part, eigenvalues ascending.
    /// Columns of the returned matrix are the matching eigenvectors.
    pub fn eigh(&self, tol: &Tolerance) -> Result<(Vec<f64>, CMatrix)> {
        let h = self.checked_hermitian(tol)?;
        Ok(eigh_unchecked(&h))
    }

    pub fn eigenvalues(&self, tol: &Tolerance) -> Result<Vec<f64>> {
        Ok(self.eigh(tol)?.0)
    }

    pub fn lambda_min(&self, tol: &Tolerance) -> Result<f64> {
        let h = self.checked_hermitian(tol)?;
        Ok(hermitian_eigenvalues(&h)[0])
    }

    pub fn lambda_max(&self, tol: &Tolerance) -> Result<f64> {
        let h = self.checked_hermitian(tol)?;
        Ok(*hermitian_eigenvalues(&h).last().unwrap())
    }

    /// Operator-norm distance to the positive semidefinite cone of the full
    /// matrix algebra, max(0, −λ_min).
    pub fn dist_to_psd(&self, tol: &Tolerance) -> Result<f64> {
        Ok((-self.lambda_min(tol)?).max(0.0))
    }

    /// PSD square root. Eigenvalues in [−eig_tol, 0) are clamped to zero.
    pub fn psd_sqrt(&self, tol: &Tolerance) -> Result<CMatrix> {
        self.psd_function(tol, f64::sqrt)
    }

    /// Inverse of the PSD square root; eigenvalues must exceed eig_tol.
    pub fn psd_inverse_sqrt(&self, tol: &Tolerance) -> Result<CMatrix> {
        let (vals, _) = self.eigh(tol)?;
        if vals[0] <= tol.eig_tol {
            return Err(Error::NotPsd { lambda_min: vals[0] });
        }
        self.psd_function(tol, |x| 1.0 / x.sqrt())
    }

    fn psd_function(&self, tol: &Tolerance, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
        let (vals, vecs) = self.eigh(tol)?;
        if vals[0] < -tol.eig_tol {
            return Err(Error::NotPsd { lambda_min: vals[0] });
        }
        let mapped: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(f(v.max(0.0)), 0.0)).collect();
        Ok(spectral_synthesis(&vecs, &mapped))
    }

    /// exp(iH) for Hermitian H, computed through the spectral decomposition so
    /// that the result is unitary to rounding.
    pub fn exp_i_hermitian(&self, tol: &Tolerance) -> Result<CMatrix> {
        let (vals, vecs) = self.eigh(tol)?;
        let phases: Vec<Complex64> = vals.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
        Ok(spectral_synthesis(&vecs, &phases))
    }

    /// Kronecker product M ⊗ I_n.
    pub fn amplify(&self, n: usize) -> Result<CMatrix> {
        if n == 0 {
            return Err(Error::invalid("amplification level must be at least 1"));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        Ok(self.kron(&CMatrix::identity(n)))
    }

    /// Assembles a block matrix. Every block in a grid row must share a row
    /// count and every block in a grid column a column count.
    pub fn block(grid: &[Vec<CMatrix>]) -> Result<CMatrix> {
        if grid.is_empty() || grid[0].is_empty() {
            return Err(Error::invalid("block grid is empty"));
        }
        let ncols = grid[0].len();
        if grid.iter().any(|row| row.len() != ncols) {
            return Err(Error::invalid("block grid rows have different lengths"));
        }
        let heights: Vec<usize> = grid.iter().map(|row| row[0].rows()).collect();
        let widths: Vec<usize> = grid[0].iter().map(|m| m.cols()).collect();
        for (bi, row) in grid.iter().enumerate() {
            for (bj, m) in row.iter().enumerate() {
                if m.rows() != heights[bi] || m.cols() != widths[bj] {
                    return Err(Error::invalid(format!(
                        "block ({bi},{bj}) is {}x{}, expected {}x{}",
                        m.rows(),
                        m.cols(),
                        heights[bi],
                        widths[bj]
                    )));
                }
            }
        }
        let total_r: usize = heights.iter().sum();
        let total_c: usize = widths.iter().sum();
        let mut out = DMatrix::zeros(total_r, total_c);
        let mut r0 = 0;
        for (bi, row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (bj, m) in row.iter().enumerate() {
                out.view_mut((r0, c0), (heights[bi], widths[bj])).copy_from(&m.0);
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        Ok(CMatrix(out))
    }

    /// Extracts the `rows`×`cols` block whose top-left corner is (r0, c0).
    pub fn sub_block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CMatrix {
        CMatrix(self.0.view((r0, c0), (rows, cols)).into_owned())
    }

    pub fn approx_eq(&self, other: &CMatrix, tol: f64) -> bool {
        self.rows() == other.rows() && self.cols() == other.cols() && (self - other).op_norm() <= tol
    }
}

/// Eigen-decomposition of a matrix already known to be Hermitian.
pub(crate) fn eigh_unchecked(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(h.0.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, CMatrix(vecs))
}

fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = h.0.clone().symmetric_eigenvalues().iter().cloned().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// V diag(values) V*
fn spectral_synthesis(vecs: &CMatrix, values: &[Complex64]) -> CMatrix {
    let n = values.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| vecs.0[(i, j)] * values[j]);
    CMatrix(scaled * vecs.0.adjoint())
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                CMatrix(&self.0 $op &rhs.0)
            }
        }
        impl $tr<CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: CMatrix) -> CMatrix {
                CMatrix(self.0 $op rhs.0)
            }
        }
        impl $tr<&CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                CMatrix(self.0 $op &rhs.0)
            }
        }
        impl $tr<CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: CMatrix) -> CMatrix {
                CMatrix(&self.0 $op rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

impl Neg for CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-self.0)
    }
}

/// On-disk matrix layout: `{"rows": r, "cols": c, "data": [[re, im], ...]}`,
/// row-major.
#[derive(Serialize, Deserialize)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixFile {
            rows: self.rows(),
            cols: self.cols(),
            data: self.row_major().into_iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = MatrixFile::deserialize(d)?;
        let data = f.data.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
        CMatrix::from_row_major(f.rows, f.cols, data).map_err(serde::de::Error::custom)
    }
}
