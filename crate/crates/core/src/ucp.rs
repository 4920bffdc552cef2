//! Unital completely positive maps between full matrix algebras, stored as
//! Choi matrices, with the Kadison–Schwarz, Cauchy–Schwarz and
//! multiplicative-domain quantities as numerical defects.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, Tolerance};
use crate::opsystem::{random_with_norm, unitary_defect};

/// Defect above which a map is not accepted as u.c.p. by the checks below.
pub const UCP_TOL: f64 = 1e-6;

const MAX_RESAMPLES: usize = 100;

/// A linear map M_d → M_k given by its Choi matrix [φ(E_ij)]_{ij}: entry
/// (i·k + a, j·k + b) is φ(E_ij)[a, b].
#[derive(Debug, Clone, PartialEq)]
pub struct UcpMap {
    dom_dim: usize,
    cod_dim: usize,
    choi: CMatrix,
    cp_defect: f64,
    unital_defect: f64,
}

impl UcpMap {
    /// Wraps a Hermitian Choi matrix and records how far it is from being
    /// completely positive and unital. Non-u.c.p. maps are representable.
    pub fn from_choi(dom_dim: usize, cod_dim: usize, choi: CMatrix) -> Result<Self> {
        if dom_dim == 0 || cod_dim == 0 {
            return Err(Error::invalid("map dimensions must be at least 1"));
        }
        let n = dom_dim * cod_dim;
        if choi.rows() != n || choi.cols() != n {
            return Err(Error::invalid(format!(
                "Choi matrix of a map M_{dom_dim} -> M_{cod_dim} must be {n}x{n}, got {}x{}",
                choi.rows(),
                choi.cols()
            )));
        }
        let tol = Tolerance::default();
        let cp_defect = choi.dist_to_psd(&tol)?;
        let choi = choi.hermitian_part();
        let mut map = UcpMap { dom_dim, cod_dim, choi, cp_defect, unital_defect: 0.0 };
        map.unital_defect =
            (map.apply_unchecked(&CMatrix::identity(dom_dim)) - CMatrix::identity(cod_dim)).op_norm();
        Ok(map)
    }

    /// x ↦ Σ_l K_l x K_l*, each K_l being k×d.
    pub fn from_kraus(kraus: &[CMatrix]) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::invalid("at least one Kraus operator is needed"))?;
        let (k, d) = (first.rows(), first.cols());
        if kraus.iter().any(|m| m.rows() != k || m.cols() != d) {
            return Err(Error::invalid("Kraus operators must share one shape"));
        }
        let choi = CMatrix::from_fn(d * k, d * k, |r, c| {
            let (i, a) = (r / k, r % k);
            let (j, b) = (c / k, c % k);
            kraus.iter().map(|m| m.get(a, i) * m.get(b, j).conj()).sum()
        });
        Self::from_choi(d, k, choi)
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::from_kraus(&[CMatrix::identity(d)])
    }

    /// x ↦ u* x u
    pub fn conjugation(u: &CMatrix) -> Result<Self> {
        if unitary_defect(u)? > UCP_TOL {
            return Err(Error::invalid("conjugation needs a unitary"));
        }
        Self::from_kraus(&[u.adjoint()])
    }

    /// Conditional expectation of M_d onto its diagonal.
    pub fn diagonal_expectation(d: usize) -> Result<Self> {
        let kraus: Vec<CMatrix> = (0..d).map(|i| CMatrix::unit(d, i, i)).collect();
        Self::from_kraus(&kraus)
    }

    /// x ↦ diag(x, …, x) with `copies` blocks.
    pub fn block_embedding(d: usize, copies: usize) -> Result<Self> {
        if copies == 0 {
            return Err(Error::invalid("block embedding needs at least one copy"));
        }
        // e_l ⊗ 1_d: the identity in block row l
        let kraus: Vec<CMatrix> = (0..copies)
            .map(|l| CMatrix::unit(copies, l, 0).kron(&CMatrix::identity(d)).sub_block(0, 0, copies * d, d))
            .collect();
        Self::from_kraus(&kraus)
    }

    /// The transpose map; positive and unital but not 2-positive.
    pub fn transpose_map(d: usize) -> Result<Self> {
        let choi = CMatrix::from_fn(d * d, d * d, |r, c| {
            let (i, a) = (r / d, r % d);
            let (j, b) = (c / d, c % d);
            // φ(E_ij) = E_ji
            if a == j && b == i {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::from_choi(d, d, choi)
    }

    /// `next ∘ self`
    pub fn then(&self, next: &UcpMap) -> Result<Self> {
        if next.dom_dim != self.cod_dim {
            return Err(Error::invalid("composition of maps with mismatched dimensions"));
        }
        let (d, k, m) = (self.dom_dim, self.cod_dim, next.cod_dim);
        let mut grid = Vec::with_capacity(d);
        for i in 0..d {
            let mut row = Vec::with_capacity(d);
            for j in 0..d {
                row.push(next.apply_unchecked(&self.choi.sub_block(i * k, j * k, k, k)));
            }
            grid.push(row);
        }
        let choi = CMatrix::block(&grid)?;
        debug_assert_eq!(choi.rows(), d * m);
        Self::from_choi(d, m, choi)
    }

    pub fn dom_dim(&self) -> usize {
        self.dom_dim
    }

    pub fn cod_dim(&self) -> usize {
        self.cod_dim
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    /// dist_to_psd of the Choi matrix.
    pub fn cp_defect(&self) -> f64 {
        self.cp_defect
    }

    /// ‖φ(1) − 1‖
    pub fn unital_defect(&self) -> f64 {
        self.unital_defect
    }

    pub fn is_ucp(&self, tol: f64) -> bool {
        self.cp_defect <= tol && self.unital_defect <= tol
    }

    fn require_ucp(&self) -> Result<()> {
        if !self.is_ucp(UCP_TOL) {
            return Err(Error::invalid(format!(
                "map is not u.c.p. (cp defect {:.3e}, unital defect {:.3e})",
                self.cp_defect, self.unital_defect
            )));
        }
        Ok(())
    }

    fn apply_unchecked(&self, x: &CMatrix) -> CMatrix {
        let k = self.cod_dim;
        let mut out = CMatrix::zeros(k, k);
        for i in 0..self.dom_dim {
            for j in 0..self.dom_dim {
                let c = x.get(i, j);
                if c != Complex64::new(0.0, 0.0) {
                    out = out + self.choi.sub_block(i * k, j * k, k, k).scale(c);
                }
            }
        }
        out
    }

    /// φ(x) = Σ x_ij φ(E_ij)
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.rows() != self.dom_dim || x.cols() != self.dom_dim {
            return Err(Error::invalid(format!(
                "map is defined on M_{}, got a {}x{} matrix",
                self.dom_dim,
                x.rows(),
                x.cols()
            )));
        }
        Ok(self.apply_unchecked(x))
    }

    /// Matrix of φ acting on row-major vectorizations.
    fn linear_matrix(&self) -> CMatrix {
        let (d, k) = (self.dom_dim, self.cod_dim);
        CMatrix::from_fn(k * k, d * d, |r, c| {
            let (a, b) = (r / k, r % k);
            let (i, j) = (c / d, c % d);
            self.choi.get(i * k + a, j * k + b)
        })
    }

    /// λ_min(φ(x*x) − φ(x)*φ(x)); nonnegative for u.c.p. maps.
    pub fn kadison_schwarz_defect(&self, x: &CMatrix) -> Result<f64> {
        self.require_ucp()?;
        let fx = self.apply(x)?;
        let gap = self.apply(&(x.adjoint() * x))? - fx.adjoint() * &fx;
        gap.hermitian_part().lambda_min(&Tolerance::default())
    }

    /// ‖φ(y*y) − φ(y)*φ(y)‖^½ ‖φ(x*x) − φ(x)*φ(x)‖^½ − ‖φ(y*x) − φ(y)*φ(x)‖
    pub fn cs_inequality_residual(&self, x: &CMatrix, y: &CMatrix) -> Result<f64> {
        self.require_ucp()?;
        let fx = self.apply(x)?;
        let fy = self.apply(y)?;
        let lhs = (self.apply(&(y.adjoint() * x))? - fy.adjoint() * &fx).op_norm();
        let gy = (self.apply(&(y.adjoint() * y))? - fy.adjoint() * &fy).op_norm();
        let gx = (self.apply(&(x.adjoint() * x))? - fx.adjoint() * &fx).op_norm();
        Ok((gy * gx).sqrt() - lhs)
    }

    /// How far a is from the multiplicative domain of φ.
    pub fn mult_domain_defect(&self, a: &CMatrix) -> Result<f64> {
        self.require_ucp()?;
        let fa = self.apply(a)?;
        let fa_star = self.apply(&a.adjoint())?;
        let left = (&fa_star * &fa - self.apply(&(a.adjoint() * a))?).op_norm();
        let right = (&fa * &fa_star - self.apply(&(a * a.adjoint()))?).op_norm();
        Ok(left.max(right))
    }

    /// max ‖φ(xy) − φ(x)φ(y)‖ over the pairs.
    pub fn hom_defect(&self, pairs: &[(CMatrix, CMatrix)]) -> Result<f64> {
        pairs.iter().try_fold(0.0_f64, |acc, (x, y)| {
            let d = (self.apply(&(x * y))? - self.apply(x)? * self.apply(y)?).op_norm();
            Ok(acc.max(d))
        })
    }
}

impl Serialize for UcpMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            dom_dim: usize,
            cod_dim: usize,
            choi: &'a CMatrix,
        }
        Repr { dom_dim: self.dom_dim, cod_dim: self.cod_dim, choi: &self.choi }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for UcpMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            dom_dim: usize,
            cod_dim: usize,
            choi: CMatrix,
        }
        let r = Repr::deserialize(d)?;
        UcpMap::from_choi(r.dom_dim, r.cod_dim, r.choi).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PisierReport {
    /// max unitary_defect(φ(u)) over the trial unitaries
    pub unitary_preservation_defect: f64,
    /// max ‖φ(xy) − φ(x)φ(y)‖ over the trial pairs
    pub hom_defect: f64,
    /// preservation ≤ 1e-6 implies hom ≤ 1e-4
    pub implication_holds: bool,
}

pub fn pisier_check(
    phi: &UcpMap,
    trial_unitaries: &[CMatrix],
    trial_pairs: &[(CMatrix, CMatrix)],
) -> Result<PisierReport> {
    phi.require_ucp()?;
    let mut pres = 0.0_f64;
    for u in trial_unitaries {
        pres = pres.max(unitary_defect(&phi.apply(u)?)?);
    }
    let hom = phi.hom_defect(trial_pairs)?;
    Ok(PisierReport {
        unitary_preservation_defect: pres,
        hom_defect: hom,
        implication_holds: pres > 1e-6 || hom <= 1e-4,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForgetfulReport {
    /// max |‖φ(x)‖ − ‖x‖| over the trial set
    pub isometry_defect: f64,
    /// max ‖φ(xy) − φ(x)φ(y)‖ over pairs from the trial set
    pub hom_defect: f64,
    /// max unitary_defect(φ⁻¹(u)) over the unitaries in the trial set
    pub preimage_unitary_defect: f64,
    pub unitaries_checked: usize,
    /// isometry ≤ 1e-6 implies hom ≤ 1e-4
    pub implication_holds: bool,
}

/// Checks a bijective u.c.p. map for isometry and multiplicativity. Trial
/// elements that are unitary (defect ≤ 1e-9) are also pulled back through
/// φ⁻¹ and tested for unitarity.
pub fn forgetful_check(phi: &UcpMap, trial_set: &[CMatrix]) -> Result<ForgetfulReport> {
    phi.require_ucp()?;
    let d = phi.dom_dim;
    if phi.cod_dim != d {
        return Err(Error::invalid("a bijective map needs equal domain and codomain dimension"));
    }
    let lin = phi.linear_matrix();
    let smax = lin.op_norm();
    if lin.min_singular_value() <= 1e-10 * smax.max(1.0) {
        return Err(Error::invalid("map is not invertible"));
    }
    let lu = lin.into_inner().lu();

    let mut iso = 0.0_f64;
    let mut pre = 0.0_f64;
    let mut checked = 0;
    for x in trial_set {
        iso = iso.max((phi.apply(x)?.op_norm() - x.op_norm()).abs());
        if unitary_defect(x)? <= 1e-9 {
            let v = nalgebra::DVector::from_vec(x.row_major());
            let sol = lu.solve(&v).ok_or_else(|| Error::invalid("map is not invertible"))?;
            let preimage = CMatrix::from_row_major(d, d, sol.iter().cloned().collect())?;
            pre = pre.max(unitary_defect(&preimage)?);
            checked += 1;
        }
    }
    let pairs: Vec<(CMatrix, CMatrix)> =
        trial_set.iter().flat_map(|x| trial_set.iter().map(move |y| (x.clone(), y.clone()))).collect();
    let hom = phi.hom_defect(&pairs)?;
    Ok(ForgetfulReport {
        isometry_defect: iso,
        hom_defect: hom,
        preimage_unitary_defect: pre,
        unitaries_checked: checked,
        implication_holds: iso > 1e-6 || hom <= 1e-4,
    })
}

/// Random u.c.p. map M_d → M_k: a Wishart Choi matrix C = GG*, conjugated
/// by 1_d ⊗ M^{-1/2} where M = Σ_i C_ii, so that φ(1) = 1 exactly.
pub fn random_ucp(dom_dim: usize, cod_dim: usize, rng_seed: u64) -> Result<UcpMap> {
    if dom_dim == 0 || cod_dim == 0 {
        return Err(Error::invalid("map dimensions must be at least 1"));
    }
    let (d, k) = (dom_dim, cod_dim);
    let n = d * k;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let tol = Tolerance::default();
    for _ in 0..MAX_RESAMPLES {
        let g = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let c = (&g * g.adjoint()).hermitian_part();
        let mut marginal = CMatrix::zeros(k, k);
        for i in 0..d {
            marginal = marginal + c.sub_block(i * k, i * k, k, k);
        }
        let Ok(m) = marginal.hermitian_part().psd_inverse_sqrt(&tol) else {
            continue;
        };
        let w = CMatrix::identity(d).kron(&m);
        return UcpMap::from_choi(d, k, &w * c * &w);
    }
    Err(Error::invalid("could not sample a map with an invertible marginal"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationReport {
    pub samples: usize,
    pub min_kadison_schwarz: f64,
    pub min_cs_residual: f64,
    /// max |mult_domain_defect(φ, a) − mult_domain_defect(φ, a*)|
    pub max_mult_domain_asymmetry: f64,
    /// Maps whose clock-and-shift unitaries are preserved within 1e-6.
    pub unitary_preserving: usize,
    /// Among those, maps with hom_defect above 1e-4.
    pub pisier_violations: usize,
    pub max_cp_defect: f64,
    pub max_unital_defect: f64,
}

/// Random u.c.p. maps M_d → M_k for d, k ≤ max_dim (cycled in order),
/// each tested on random contractions x, y.
pub fn population_suite(samples: usize, max_dim: usize, rng_seed: u64) -> Result<PopulationReport> {
    if max_dim == 0 {
        return Err(Error::invalid("max_dim must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut report = PopulationReport {
        samples,
        min_kadison_schwarz: f64::INFINITY,
        min_cs_residual: f64::INFINITY,
        max_mult_domain_asymmetry: 0.0,
        unitary_preserving: 0,
        pisier_violations: 0,
        max_cp_defect: 0.0,
        max_unital_defect: 0.0,
    };
    for s in 0..samples {
        let d = s % max_dim + 1;
        let k = (s / max_dim) % max_dim + 1;
        let phi = random_ucp(d, k, rng.gen())?;
        report.max_cp_defect = report.max_cp_defect.max(phi.cp_defect());
        report.max_unital_defect = report.max_unital_defect.max(phi.unital_defect());
        let x = random_with_norm(d, d, rng.gen_range(0.0..=1.0), &mut rng);
        let y = random_with_norm(d, d, rng.gen_range(0.0..=1.0), &mut rng);
        report.min_kadison_schwarz = report.min_kadison_schwarz.min(phi.kadison_schwarz_defect(&x)?);
        report.min_cs_residual = report.min_cs_residual.min(phi.cs_inequality_residual(&x, &y)?);
        let asym = (phi.mult_domain_defect(&x)? - phi.mult_domain_defect(&x.adjoint())?).abs();
        report.max_mult_domain_asymmetry = report.max_mult_domain_asymmetry.max(asym);
        let p = pisier_check(&phi, &weyl_unitaries(d), &[(x, y)])?;
        if p.unitary_preservation_defect <= 1e-6 {
            report.unitary_preserving += 1;
            if p.hom_defect > 1e-4 {
                report.pisier_violations += 1;
            }
        }
    }
    Ok(report)
}

/// Clock-and-shift unitaries X^a Z^b, an orthogonal basis of M_d.
pub fn weyl_unitaries(d: usize) -> Vec<CMatrix> {
    let shift = CMatrix::from_fn(d, d, |r, c| {
        if r == (c + 1) % d {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let clock = CMatrix::diag(
        &(0..d)
            .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / d as f64))
            .collect::<Vec<_>>(),
    );
    let mut out = Vec::with_capacity(d * d);
    let mut xa = CMatrix::identity(d);
    for _ in 0..d {
        let mut u = xa.clone();
        for _ in 0..d {
            out.push(u.clone());
            u = &u * &clock;
        }
        xa = &shift * &xa;
    }
    out
}
