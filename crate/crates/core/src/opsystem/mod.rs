//! Concrete operator systems: unital, adjoint-closed subspaces of M_d.
//!
//! A system is stored through a Hilbert–Schmidt orthonormal basis of
//! Hermitian matrices whose first element is 1/√d. Every element of the span
//! is Σ c_k e_k with complex c_k; the self-adjoint part of the span is the
//! real span of the same basis, which is what unitary parametrizations use.

mod distance;

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use distance::{nearest_point, Nearest};

use crate::error::{Error, Result};
use crate::matrix::CMatrix;

/// Relative residual below which a candidate basis vector is dependent.
const INDEPENDENCE_TOL: f64 = 1e-8;

/// Membership slack used when deciding whether an element lies in a span.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone)]
pub struct OperatorSystem {
    ambient_dim: usize,
    basis: Vec<CMatrix>,
    closure: OnceLock<(bool, f64)>,
}

impl std::fmt::Debug for OperatorSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorSystem")
            .field("ambient_dim", &self.ambient_dim)
            .field("dim", &self.basis.len())
            .finish()
    }
}

impl OperatorSystem {
    /// Smallest unital adjoint-closed subspace of M_d containing `raw`.
    pub fn canonicalize(raw: &[CMatrix], ambient_dim: usize) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::invalid("ambient dimension must be at least 1"));
        }
        if let Some(bad) = raw.iter().find(|m| m.rows() != ambient_dim || m.cols() != ambient_dim) {
            return Err(Error::invalid(format!(
                "basis element is {}x{}, expected {ambient_dim}x{ambient_dim}",
                bad.rows(),
                bad.cols()
            )));
        }
        let mut candidates = Vec::with_capacity(1 + 2 * raw.len());
        candidates.push(CMatrix::identity(ambient_dim));
        for m in raw {
            candidates.push(m.hermitian_part());
            candidates.push(m.skew_part());
        }
        Ok(Self::from_hermitian_candidates(candidates, ambient_dim))
    }

    fn from_hermitian_candidates(candidates: Vec<CMatrix>, ambient_dim: usize) -> Self {
        let max_dim = ambient_dim * ambient_dim;
        let mut basis: Vec<CMatrix> = Vec::new();
        for cand in candidates {
            if basis.len() == max_dim {
                break;
            }
            let norm0 = cand.hs_norm();
            if norm0 == 0.0 {
                continue;
            }
            let mut v = cand;
            // two passes of modified Gram–Schmidt
            for _ in 0..2 {
                for e in &basis {
                    let c = e.hs_inner(&v).re;
                    v = v - e.scale_real(c);
                }
            }
            let r = v.hs_norm();
            if r > INDEPENDENCE_TOL * norm0.max(1.0) {
                basis.push(v.scale_real(1.0 / r).hermitian_part());
            }
        }
        OperatorSystem { ambient_dim, basis, closure: OnceLock::new() }
    }

    /// The full matrix algebra M_d.
    pub fn full(d: usize) -> Self {
        let mut raw = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                raw.push(CMatrix::unit(d, i, j));
            }
        }
        Self::canonicalize(&raw, d).expect("matrix units are d x d")
    }

    /// span{1}
    pub fn scalars(d: usize) -> Self {
        Self::canonicalize(&[], d).expect("empty input")
    }

    /// Diagonal subalgebra of M_d.
    pub fn diagonal(d: usize) -> Self {
        let raw: Vec<_> = (0..d).map(|i| CMatrix::unit(d, i, i)).collect();
        Self::canonicalize(&raw, d).expect("matrix units are d x d")
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Complex dimension of the span.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient_dim * self.ambient_dim
    }

    fn check_dim(&self, x: &CMatrix) -> Result<()> {
        if x.rows() != self.ambient_dim || x.cols() != self.ambient_dim {
            return Err(Error::invalid(format!(
                "element is {}x{}, system lives in M_{}",
                x.rows(),
                x.cols(),
                self.ambient_dim
            )));
        }
        Ok(())
    }

    /// Hilbert–Schmidt coordinates ⟨e_k, x⟩.
    pub fn coordinates(&self, x: &CMatrix) -> Vec<Complex64> {
        self.basis.iter().map(|e| e.hs_inner(x)).collect()
    }

    pub fn element(&self, coeffs: &[Complex64]) -> CMatrix {
        debug_assert_eq!(coeffs.len(), self.dim());
        let mut acc = CMatrix::zeros(self.ambient_dim, self.ambient_dim).into_inner();
        for (e, c) in self.basis.iter().zip(coeffs) {
            acc += e.inner() * *c;
        }
        CMatrix::from_inner(acc)
    }

    /// Real coordinate vector [Re c_1..Re c_m, Im c_1..Im c_m] of the
    /// Hilbert–Schmidt projection of `x`.
    pub fn real_coordinates(&self, x: &CMatrix) -> Vec<f64> {
        let c = self.coordinates(x);
        c.iter().map(|z| z.re).chain(c.iter().map(|z| z.im)).collect()
    }

    pub fn element_from_real(&self, coords: &[f64]) -> CMatrix {
        let m = self.dim();
        debug_assert_eq!(coords.len(), 2 * m);
        let c: Vec<_> = (0..m).map(|k| Complex64::new(coords[k], coords[m + k])).collect();
        self.element(&c)
    }

    /// Σ r_k e_k, a self-adjoint element of the span.
    pub fn hermitian_from_real(&self, coords: &[f64]) -> CMatrix {
        let c: Vec<_> = coords.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        self.element(&c)
    }

    /// Real coordinates of the Hermitian part of `h`.
    pub fn hermitian_coordinates(&self, h: &CMatrix) -> Vec<f64> {
        self.coordinates(h).iter().map(|z| z.re).collect()
    }

    /// Hilbert–Schmidt norm of the component of `x` orthogonal to the span.
    pub fn hs_residual(&self, x: &CMatrix) -> f64 {
        (x - self.element(&self.coordinates(x))).hs_norm()
    }

    pub fn contains(&self, x: &CMatrix, tol: f64) -> bool {
        x.rows() == self.ambient_dim && x.cols() == self.ambient_dim && self.hs_residual(x) <= tol
    }

    /// span(self) ⊆ span(other)
    pub fn is_subsystem_of(&self, other: &OperatorSystem) -> bool {
        self.ambient_dim == other.ambient_dim && self.basis.iter().all(|b| other.contains(b, MEMBERSHIP_TOL))
    }

    /// Product-closure verdict at tolerance 1e-9, computed once.
    pub fn closure_verdict(&self) -> (bool, f64) {
        *self.closure.get_or_init(|| is_product_closed_exact(self, MEMBERSHIP_TOL))
    }

    /// True when the span is closed under products, i.e. a unital
    /// C*-subalgebra of M_d.
    pub fn is_cstar_algebra(&self) -> bool {
        self.closure_verdict().0
    }

    /// Checks unit membership, adjoint closure and basis independence.
    pub fn check_invariants(&self, eig_tol: f64) -> Result<()> {
        let one = CMatrix::identity(self.ambient_dim);
        if self.hs_residual(&one) > eig_tol {
            return Err(Error::invalid("identity is not in the span"));
        }
        for b in &self.basis {
            if self.hs_residual(&b.adjoint()) > eig_tol {
                return Err(Error::invalid("span is not adjoint-closed"));
            }
        }
        let m = self.dim();
        let gram = CMatrix::from_fn(m, m, |i, j| self.basis[i].hs_inner(&self.basis[j]));
        if gram.min_singular_value() < 1e-8 {
            return Err(Error::invalid("basis is numerically dependent"));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SystemFile {
    ambient_dim: usize,
    basis: Vec<CMatrix>,
}

impl Serialize for OperatorSystem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SystemFile { ambient_dim: self.ambient_dim, basis: self.basis.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for OperatorSystem {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = SystemFile::deserialize(d)?;
        OperatorSystem::canonicalize(&f.basis, f.ambient_dim).map_err(serde::de::Error::custom)
    }
}

/// A norm ball of a system; radius 1 and 2 are the ones that show up in the
/// sentences, any positive radius is accepted.
#[derive(Debug, Clone, Copy)]
pub struct BallSpec<'a> {
    pub system: &'a OperatorSystem,
    pub radius: f64,
}

impl<'a> BallSpec<'a> {
    pub fn new(system: &'a OperatorSystem, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(BallSpec { system, radius })
    }

    /// Radial retraction onto the ball.
    pub fn retract(&self, x: CMatrix) -> CMatrix {
        let n = x.op_norm();
        if n > self.radius {
            x.scale_real(self.radius / n)
        } else {
            x
        }
    }
}

/// Operator-norm distance from `x` to span(A).
pub fn dist_to_system(x: &CMatrix, a: &OperatorSystem) -> Result<f64> {
    a.check_dim(x)?;
    if a.is_full() {
        return Ok(0.0);
    }
    if a.hs_residual(x) <= 1e-13 * x.hs_norm().max(1.0) {
        return Ok(0.0);
    }
    Ok(nearest_point(x, a.basis()).distance)
}

/// Exact product-closure oracle: the worst distance of a basis product
/// b_i·b_j* from the span.
pub fn is_product_closed_exact(a: &OperatorSystem, tol: f64) -> (bool, f64) {
    if a.is_full() {
        return (true, 0.0);
    }
    let mut defect: f64 = 0.0;
    for bi in a.basis() {
        for bj in a.basis() {
            let p = bi * bj.adjoint();
            let d = dist_to_system(&p, a).expect("basis elements share the ambient dimension");
            defect = defect.max(d);
        }
    }
    (defect <= tol, defect)
}

/// max(‖u*u − 1‖, ‖uu* − 1‖)
pub fn unitary_defect(u: &CMatrix) -> Result<f64> {
    if !u.is_square() {
        return Err(Error::invalid("unitary defect needs a square matrix"));
    }
    let one = CMatrix::identity(u.rows());
    let a = (u.adjoint() * u - &one).op_norm();
    let b = (u * u.adjoint() - &one).op_norm();
    Ok(a.max(b))
}

/// Deterministic sample of `count` elements of the ball. Coordinates are
/// Gaussian, scaled to a random radius slightly beyond the ball, and
/// retracted when they land outside it.
pub fn sample_ball(spec: &BallSpec<'_>, rng_seed: u64, count: usize) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let m = spec.system.dim();
    (0..count)
        .map(|_| {
            let coeffs: Vec<Complex64> = (0..m)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im)
                })
                .collect();
            let x = spec.system.element(&coeffs);
            let n = x.op_norm();
            let target = spec.radius * 1.2 * rng.gen::<f64>().powf(1.0 / (2 * m) as f64);
            let x = if n > 0.0 { x.scale_real(target / n) } else { x };
            spec.retract(x)
        })
        .collect()
}

/// Haar-random unitary in M_d (QR of a complex Gaussian matrix with the
/// phase correction on R's diagonal).
pub fn random_unitary<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
    let g =
        CMatrix::from_fn(d, d, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = g.into_inner().qr();
    let q = qr.q();
    let r = qr.r();
    let phases: Vec<Complex64> = (0..d)
        .map(|i| {
            let z = r[(i, i)];
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    CMatrix::from_inner(q) * CMatrix::diag(&phases)
}

/// Random matrix with operator norm exactly `norm`.
pub fn random_with_norm<R: Rng>(rows: usize, cols: usize, norm: f64, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let n = g.op_norm();
    g.scale_real(norm / n)
}

/// Random Hermitian matrix with operator norm 1.
pub fn random_hermitian<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
    let h = random_with_norm(d, d, 1.0, rng).hermitian_part();
    let n = h.op_norm();
    h.scale_real(1.0 / n)
}
