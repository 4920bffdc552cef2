//! Concrete formulas about products, unitaries and positivity, each with a
//! direct matrix computation next to its continuous-logic form.
//!
//! Scalar blocks such as `1`, `2·1` and `0` inside block matrices always mean
//! multiples of the ambient identity.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clogic::{BlockEvent, Domain, EvalConfig, Evaluator, Formula, Hint, Quantifier, Structures, Term};
use crate::error::{Error, Result};
use crate::matrix::{eigh_unchecked, CMatrix, Tolerance, I};
use crate::opsystem::{unitary_defect, OperatorSystem};

/// Value of ψ_n at unitaries. For unitary u, ‖[u⊗1, x]‖² = ‖1 + xx*‖ =
/// 1 + ‖x‖², and likewise for the column, so the body is identically 1.
pub const PSI_UNITARY_PLATEAU: f64 = 1.0;

/// Slot name of the amplified full matrix algebra that ψ_n's inner variable
/// ranges over.
pub const PSI_SLOT: &str = "amp";

fn same_dims(ms: &[&CMatrix]) -> Result<usize> {
    let d = ms[0].rows();
    if ms.iter().any(|m| m.rows() != d || m.cols() != d) {
        return Err(Error::invalid("arguments must be square matrices of one dimension"));
    }
    Ok(d)
}

fn unit(d: usize, c: f64) -> CMatrix {
    CMatrix::scalar_identity(d, Complex64::new(c, 0.0))
}

// ----- product closure -------------------------------------------------

/// | ‖[[0, y, 1, 0], [2·1, x, z, b]]‖² − ‖[2·1, x, z, b]‖² |
pub fn phi_product(x: &CMatrix, y: &CMatrix, z: &CMatrix, b: &CMatrix) -> Result<f64> {
    let d = same_dims(&[x, y, z, b])?;
    let zero = CMatrix::zeros(d, d);
    let two = unit(d, 2.0);
    let big = CMatrix::block(&[
        vec![zero.clone(), y.clone(), unit(d, 1.0), zero],
        vec![two.clone(), x.clone(), z.clone(), b.clone()],
    ])?;
    let row = CMatrix::block(&[vec![two, x.clone(), z.clone(), b.clone()]])?;
    Ok((big.op_norm().powi(2) - row.op_norm().powi(2)).abs())
}

/// The same quantity as a formula in the free variables x, y, z, b.
pub fn phi_product_formula() -> Formula {
    let v = Term::var;
    let row = || vec![Term::unit(2.0), v("x"), v("z"), v("b")];
    let big = Term::block(vec![vec![Term::unit(0.0), v("y"), Term::unit(1.0), Term::unit(0.0)], row()]);
    Formula::abs_diff(Formula::norm_sq(big), Formula::norm_sq(Term::block(vec![row()])))
}

/// sup_{x,y ∈ A₁} inf_{z ∈ A₁} sup_{b ∈ B₂} φ(x, y, z, b)
pub fn closure_sentence() -> Formula {
    Formula::sup(
        "x",
        Domain::ball("A", 1.0),
        Formula::sup(
            "y",
            Domain::ball("A", 1.0),
            Formula::inf(
                "z",
                Domain::ball("A", 1.0),
                Formula::sup("b", Domain::ball("B", 2.0), phi_product_formula()),
            ),
        ),
    )
}

/// sqrt(‖xx* + zz*‖·1 − xx* − zz*)
pub fn b_witness(x: &CMatrix, z: &CMatrix) -> Result<CMatrix> {
    let d = same_dims(&[x, z])?;
    let p = x * x.adjoint() + z * z.adjoint();
    let s = p.op_norm();
    let tol = Tolerance { eig_tol: 1e-10_f64.max(1e-14 * s), ..Tolerance::default() };
    (unit(d, s) - p).hermitian_part().psd_sqrt(&tol)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosureReport {
    /// Value found for the closure sentence.
    pub defect: f64,
    pub worst_pair: (CMatrix, CMatrix),
    pub best_z: CMatrix,
    /// ‖xy* + z‖ at the witnesses.
    pub bound_check: f64,
    /// Largest ‖xy* + z‖ − 4·sqrt(ε) over every (x, y, z) at which the inner
    /// sup over b was evaluated, ε being that sup.
    pub max_bound_excess: f64,
    pub traced_points: usize,
    pub converged: bool,
}

/// Unit-norm elements of A used as outer starting points: normalized basis
/// elements and the combinations b_i ± i·b_j.
fn closure_candidates(a: &OperatorSystem) -> Vec<CMatrix> {
    let basis = a.basis();
    let mut out: Vec<CMatrix> = basis.iter().map(|b| b.scale_real(1.0 / b.op_norm())).collect();
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            for s in [I, -I] {
                let m = &basis[i] + basis[j].scale(s);
                let n = m.op_norm();
                if n > 1e-12 {
                    out.push(m.scale_real(1.0 / n));
                }
            }
        }
    }
    out
}

/// Evaluates the closure sentence for A inside the C*-algebra B, with the
/// analytic witnesses z = −xy* and b = b_witness(x, z) among the starts.
pub fn product_closure_defect(
    a: &OperatorSystem,
    b: &OperatorSystem,
    config: &EvalConfig,
) -> Result<ClosureReport> {
    if !a.is_subsystem_of(b) {
        return Err(Error::invalid("A is not contained in B"));
    }
    if !b.is_cstar_algebra() {
        return Err(Error::invalid("the ambient structure B must be a C*-algebra"));
    }
    let structures: Structures =
        [("A".to_string(), a.clone()), ("B".to_string(), b.clone())].into_iter().collect();

    let candidates = closure_candidates(a);
    let hints = vec![
        Hint::fixed("x", candidates.clone()),
        Hint::fixed("y", candidates),
        Hint::new("z", |env| match (env.get("x"), env.get("y")) {
            (Some(x), Some(y)) => vec![-(x * y.adjoint())],
            _ => vec![],
        }),
        Hint::new("b", |env| match (env.get("x"), env.get("z")) {
            (Some(x), Some(z)) => b_witness(x, z).into_iter().collect(),
            _ => vec![],
        }),
    ];

    let trace = Arc::new(Mutex::new((f64::NEG_INFINITY, 0usize)));
    let sink = Arc::clone(&trace);
    let observer = Arc::new(move |ev: &BlockEvent<'_>| {
        if ev.kind != Quantifier::Sup || ev.vars != ["b"] {
            return;
        }
        let (Some(x), Some(y), Some(z)) = (ev.bindings.get("x"), ev.bindings.get("y"), ev.bindings.get("z"))
        else {
            return;
        };
        let gap = (x * y.adjoint() + z).op_norm();
        let excess = gap - 4.0 * ev.value.max(0.0).sqrt();
        let mut t = sink.lock().unwrap();
        t.0 = t.0.max(excess);
        t.1 += 1;
    });

    let result = Evaluator::new(&structures, *config)
        .with_hints(hints)
        .with_observer(observer)
        .evaluate(&closure_sentence())?;

    let x = result.witnesses["x"].clone();
    let y = result.witnesses["y"].clone();
    let z = result.witnesses["z"].clone();
    let bound_check = (&x * y.adjoint() + &z).op_norm();
    let (max_bound_excess, traced_points) = *trace.lock().unwrap();
    Ok(ClosureReport {
        defect: result.value,
        worst_pair: (x, y),
        best_z: z,
        bound_check,
        max_bound_excess,
        traced_points,
        converged: result.converged,
    })
}

/// d(x·y, z) = ‖xy − z‖ for x, y, z in a C*-algebra A.
pub fn product_distance(x: &CMatrix, y: &CMatrix, z: &CMatrix, a: &OperatorSystem) -> Result<f64> {
    if !a.is_cstar_algebra() {
        return Err(Error::invalid("product distance needs a C*-algebra"));
    }
    for (name, m) in [("x", x), ("y", y), ("z", z)] {
        if !a.contains(m, 1e-6) {
            return Err(Error::invalid(format!("{name} is not an element of the algebra")));
        }
    }
    Ok((x * y - z).op_norm())
}

// ----- unitaries -------------------------------------------------------

/// ‖[[u, w], [1, −v*]]‖² − 2
pub fn phi_un(u: &CMatrix, v: &CMatrix, w: &CMatrix) -> Result<f64> {
    let d = same_dims(&[u, v, w])?;
    let m = CMatrix::block(&[vec![u.clone(), w.clone()], vec![unit(d, 1.0), -v.adjoint()]])?;
    Ok(m.op_norm().powi(2) - 2.0)
}

/// inf_{‖x‖ ≤ 1} ( min{‖[u⊗1_n, x]‖², ‖[u⊗1_n; x]‖²} ∸ ‖x‖² ), with free
/// variable u and x ranging over the slot [`PSI_SLOT`].
pub fn psi_formula(n: usize) -> Formula {
    let amp = || Term::var("u").amplify(n);
    let row = Term::block(vec![vec![amp(), Term::var("x")]]);
    let col = Term::block(vec![vec![amp()], vec![Term::var("x")]]);
    Formula::inf(
        "x",
        Domain::ball(PSI_SLOT, 1.0),
        Formula::dotminus(
            Formula::min(Formula::norm_sq(row), Formula::norm_sq(col)),
            Formula::norm_sq(Term::var("x")),
        ),
    )
}

fn check_contraction(u: &CMatrix) -> Result<()> {
    if !u.is_square() {
        return Err(Error::invalid("expected a square matrix"));
    }
    let n = u.op_norm();
    if n > 1.0 + Tolerance::default().eig_tol {
        return Err(Error::invalid(format!("‖u‖ = {n} exceeds 1")));
    }
    Ok(())
}

/// Hints for ψ's inner variable: x = sqrt(1 − UU*) makes the row block have
/// norm 1 and the body equal to the smallest squared singular value of U.
fn psi_hints(u_amp: &CMatrix) -> Vec<CMatrix> {
    let d = u_amp.rows();
    let tol = Tolerance::default();
    let mut out = Vec::new();
    for p in [u_amp * u_amp.adjoint(), u_amp.adjoint() * u_amp] {
        if let Ok(s) = (CMatrix::identity(d) - p).hermitian_part().psd_sqrt(&tol) {
            out.push(s);
        }
    }
    out
}

/// Numerical value of ψ_n(u) (an upper estimate of the infimum).
pub fn psi(u: &CMatrix, n: usize, config: &EvalConfig) -> Result<f64> {
    check_contraction(u)?;
    if n == 0 {
        return Err(Error::invalid("amplification level must be at least 1"));
    }
    let d = u.rows();
    let structures: Structures = [(PSI_SLOT.to_string(), OperatorSystem::full(d * n))].into_iter().collect();
    let hints = psi_hints(&u.amplify(n)?);
    let env = vec![("u".to_string(), u.clone())];
    Ok(Evaluator::new(&structures, *config)
        .with_hint(Hint::fixed("x", hints))
        .evaluate_open(&psi_formula(n), &env)?
        .value)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitaryDetection {
    pub is_unitary: bool,
    /// ψ_n(u) for n = 1..=n_max.
    pub psi_values: Vec<f64>,
    pub unitary_defect: f64,
    /// Whether the ψ verdict matches unitary_defect ≤ 1e-9.
    pub agrees_with_defect: bool,
}

/// u is reported unitary when ψ_n(u) ≥ c* − opt_tol for every n ≤ n_max.
pub fn unitary_detect(u: &CMatrix, n_max: usize, config: &EvalConfig) -> Result<UnitaryDetection> {
    check_contraction(u)?;
    if n_max == 0 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    let psi_values = (1..=n_max).map(|n| psi(u, n, config)).collect::<Result<Vec<_>>>()?;
    let is_unitary = psi_values.iter().all(|&p| p >= PSI_UNITARY_PLATEAU - config.opt_tol);
    let defect = unitary_defect(u)?;
    Ok(UnitaryDetection {
        is_unitary,
        psi_values,
        unitary_defect: defect,
        agrees_with_defect: is_unitary == (defect <= 1e-9),
    })
}

/// Hermitian-corrected 3×3 block matrix [[1, u, x], [u*, 1, v], [x*, v*, 1]].
/// For unitaries u, v it is positive exactly when x = uv.
pub fn walter_matrix(u: &CMatrix, v: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    let d = same_dims(&[u, v, x])?;
    let one = unit(d, 1.0);
    CMatrix::block(&[
        vec![one.clone(), u.clone(), x.clone()],
        vec![u.adjoint(), one.clone(), v.clone()],
        vec![x.adjoint(), v.adjoint(), one],
    ])
}

/// The same block matrix with u* in the (3,2) slot, which is Hermitian only
/// when u = v. Kept for comparison with the corrected form.
pub fn walter_matrix_printed(u: &CMatrix, v: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    let d = same_dims(&[u, v, x])?;
    let one = unit(d, 1.0);
    CMatrix::block(&[
        vec![one.clone(), u.clone(), x.clone()],
        vec![u.adjoint(), one.clone(), v.clone()],
        vec![x.adjoint(), u.adjoint(), one],
    ])
}

/// Self-adjoint generators H_1..H_4 with x = ½ Σ exp(iH_k), ‖H_k‖ ≤ π.
///
/// With h = Re x and k = Im x, h = V diag(cos θ) V* and
/// h ± i·sqrt(1 − h²) = V diag(e^{±iθ}) V*; likewise for k, rotated by i.
pub fn unitary_average_generators(x: &CMatrix) -> Result<[CMatrix; 4]> {
    check_contraction(x)?;
    let arcs = |h: &CMatrix| -> (CMatrix, Vec<f64>) {
        let (vals, vecs) = eigh_unchecked(&h.hermitian_part());
        (vecs, vals.iter().map(|l| l.clamp(-1.0, 1.0).acos()).collect())
    };
    let synth = |vecs: &CMatrix, angles: &[f64]| -> CMatrix {
        let diag: Vec<Complex64> = angles.iter().map(|&t| Complex64::new(t, 0.0)).collect();
        vecs * CMatrix::diag(&diag) * vecs.adjoint()
    };
    let wrap = |t: f64| if t > PI { t - 2.0 * PI } else { t };
    let (vh, th) = arcs(&x.hermitian_part());
    let (vk, tk) = arcs(&x.skew_part());
    let neg = |a: &[f64]| a.iter().map(|t| -t).collect::<Vec<_>>();
    let plus_quarter = |a: &[f64]| a.iter().map(|t| wrap(PI / 2.0 + t)).collect::<Vec<_>>();
    let minus_quarter = |a: &[f64]| a.iter().map(|t| wrap(PI / 2.0 - t)).collect::<Vec<_>>();
    Ok([
        synth(&vh, &th),
        synth(&vh, &neg(&th)),
        synth(&vk, &plus_quarter(&tk)),
        synth(&vk, &minus_quarter(&tk)),
    ])
}

/// Four unitaries averaging to x: x = ½(u₁ + u₂ + u₃ + u₄).
pub fn unitary_average_decompose(x: &CMatrix) -> Result<[CMatrix; 4]> {
    let gens = unitary_average_generators(x)?;
    let tol = Tolerance::default();
    let mut out = Vec::with_capacity(4);
    for h in &gens {
        out.push(h.hermitian_part().exp_i_hermitian(&tol)?);
    }
    Ok(out.try_into().expect("four generators"))
}

/// sup_{x ∈ A₁} inf_{u₁..u₄ ∈ U(A)} ‖x − ½(u₁ + u₂ + u₃ + u₄)‖
pub fn axiom_ii_sentence() -> Formula {
    let half = Complex64::new(0.5, 0.0);
    let avg = Term::var("u1").plus(Term::var("u2")).plus(Term::var("u3")).plus(Term::var("u4")).scale(half);
    let mut f = Formula::norm(Term::var("x").minus(avg));
    for name in ["u4", "u3", "u2", "u1"] {
        f = Formula::inf(name, Domain::unitaries("A"), f);
    }
    Formula::sup("x", Domain::ball("A", 1.0), f)
}

/// Value of the unitary-average sentence on a C*-algebra, with the
/// decomposition generators among the inner starts.
pub fn axiom_ii_defect(a: &OperatorSystem, config: &EvalConfig) -> Result<f64> {
    if !a.is_cstar_algebra() {
        return Err(Error::unsupported("unitary quantifiers are only evaluated over C*-algebra structures"));
    }
    let structures: Structures = [("A".to_string(), a.clone())].into_iter().collect();
    let hints = ["u1", "u2", "u3", "u4"].into_iter().enumerate().map(|(k, name)| {
        Hint::new(name, move |env| {
            env.get("x")
                .and_then(|x| unitary_average_generators(&x.scale_real(1.0 / x.op_norm().max(1.0))).ok())
                .map(|g| vec![g[k].clone()])
                .unwrap_or_default()
        })
    });
    Ok(Evaluator::new(&structures, *config).with_hints(hints).evaluate(&axiom_ii_sentence())?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ONE;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::opsystem::{random_unitary, random_with_norm};

    fn s(c: f64) -> CMatrix {
        CMatrix::from_real_rows(&[&[c]])
    }

    #[test]
    fn phi_product_scalar_examples() {
        assert!(phi_product(&s(0.0), &s(0.0), &s(0.0), &s(0.0)).unwrap().abs() < 1e-12);
        assert!(phi_product(&s(1.0), &s(1.0), &s(-1.0), &s(0.0)).unwrap().abs() < 1e-12);
        // λ_max([[2, 2], [2, 6]]) = 4 + 2√2 against 6
        let v = phi_product(&s(1.0), &s(1.0), &s(1.0), &s(0.0)).unwrap();
        assert!((v - (2.0 * 2f64.sqrt() - 2.0)).abs() < 1e-12, "{v}");
        assert!(phi_product(&s(1.0), &CMatrix::identity(2), &s(1.0), &s(0.0)).is_err());
    }

    #[test]
    fn phi_formula_matches_direct_computation() {
        let st: Structures = [("B".to_string(), OperatorSystem::full(2))].into_iter().collect();
        let ev = Evaluator::new(&st, EvalConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m: Vec<CMatrix> = (0..4).map(|_| random_with_norm(2, 2, 0.9, &mut rng)).collect();
            let env: Vec<(String, CMatrix)> =
                ["x", "y", "z", "b"].iter().map(|n| n.to_string()).zip(m.iter().cloned()).collect();
            let via_logic = ev.evaluate_open(&phi_product_formula(), &env).unwrap().value;
            let direct = phi_product(&m[0], &m[1], &m[2], &m[3]).unwrap();
            assert!((via_logic - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn b_witness_examples() {
        assert!(b_witness(&s(0.0), &s(0.0)).unwrap().approx_eq(&s(0.0), 1e-14));
        assert!(b_witness(&s(1.0), &s(0.0)).unwrap().approx_eq(&s(0.0), 1e-7));
        let b = b_witness(&CMatrix::unit(2, 0, 1), &CMatrix::zeros(2, 2)).unwrap();
        assert!(b.approx_eq(&CMatrix::unit(2, 1, 1), 1e-12));
    }

    #[test]
    fn walter_examples() {
        let tol = Tolerance::default();
        let ones = walter_matrix(&s(1.0), &s(1.0), &s(1.0)).unwrap();
        assert!(ones.lambda_min(&tol).unwrap().abs() < 1e-12);
        let m = walter_matrix(&s(1.0), &s(1.0), &s(-1.0)).unwrap();
        let vals = m.eigenvalues(&tol).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
        assert!((m.dist_to_psd(&tol).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn printed_walter_form_is_not_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(2, &mut rng);
        let v = random_unitary(2, &mut rng);
        let x = &u * &v;
        let printed = walter_matrix_printed(&u, &v, &x).unwrap();
        assert!(printed.hermiticity_defect() > 1e-3);
        assert!(printed.lambda_min(&Tolerance::default()).is_err());
        let fixed = walter_matrix(&u, &v, &x).unwrap();
        assert!(fixed.hermiticity_defect() < 1e-14);
        // the two agree when u = v
        assert_eq!(walter_matrix_printed(&u, &u, &x).unwrap(), walter_matrix(&u, &u, &x).unwrap());
    }

    #[test]
    fn phi_un_examples() {
        assert!(phi_un(&s(1.0), &s(1.0), &s(1.0)).unwrap().abs() < 1e-12);
        assert!((phi_un(&s(1.0), &s(1.0), &s(-1.0)).unwrap() - 2.0).abs() < 1e-12);
        let i = CMatrix::scalar_identity(1, I);
        assert!(phi_un(&i, &s(1.0), &i).unwrap().abs() < 1e-12);
    }

    #[test]
    fn product_distance_examples() {
        let m2 = OperatorSystem::full(2);
        let x = CMatrix::from_real_rows(&[&[0.2, 0.5], &[0.1, -0.3]]);
        let y = CMatrix::from_real_rows(&[&[0.7, 0.0], &[0.4, 0.1]]);
        assert!(product_distance(&x, &y, &(&x * &y), &m2).unwrap() < 1e-15);
        let one = CMatrix::identity(2);
        assert!((product_distance(&one, &one, &CMatrix::zeros(2, 2), &m2).unwrap() - 1.0).abs() < 1e-15);
        let d =
            product_distance(&CMatrix::unit(2, 0, 1), &CMatrix::unit(2, 1, 0), &CMatrix::zeros(2, 2), &m2)
                .unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let diag = OperatorSystem::diagonal(2);
        assert!(product_distance(&CMatrix::unit(2, 0, 1), &one, &one, &diag).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let zero = CMatrix::zeros(1, 1);
        let us = unitary_average_decompose(&zero).unwrap();
        let expect = [I, -I, Complex64::new(-1.0, 0.0), ONE];
        for (u, e) in us.iter().zip(expect) {
            assert!((u.get(0, 0) - e).norm() < 1e-14, "{u:?}");
        }
        let us = unitary_average_decompose(&s(1.0)).unwrap();
        let expect = [ONE, ONE, Complex64::new(-1.0, 0.0), ONE];
        for (u, e) in us.iter().zip(expect) {
            assert!((u.get(0, 0) - e).norm() < 1e-7, "{u:?}");
        }
        assert!(unitary_average_decompose(&s(1.5)).is_err());
    }

    #[test]
    fn generators_respect_pi_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in 1..=3 {
            let x = random_with_norm(d, d, 1.0, &mut rng);
            for h in unitary_average_generators(&x).unwrap() {
                assert!(h.op_norm() <= PI + 1e-12);
            }
        }
    }

    #[test]
    fn psi_scalar_examples() {
        let cfg = EvalConfig::default();
        assert!((psi(&s(1.0), 1, &cfg).unwrap() - 1.0).abs() < 1e-12);
        assert!(psi(&s(0.0), 1, &cfg).unwrap().abs() < 1e-12);
        assert!(psi(&CMatrix::diag_real(&[1.0, 0.5]), 1, &cfg).unwrap() < 1.0);
        assert!(psi(&s(1.5), 1, &cfg).is_err());
    }

    #[test]
    fn unitary_detect_examples() {
        let cfg = EvalConfig::default();
        let flip = CMatrix::unit(2, 0, 1) + CMatrix::unit(2, 1, 0);
        let r = unitary_detect(&flip, 2, &cfg).unwrap();
        assert!(r.is_unitary && r.agrees_with_defect);
        let r = unitary_detect(&CMatrix::diag_real(&[1.0, 0.5]), 2, &cfg).unwrap();
        assert!(!r.is_unitary && r.agrees_with_defect);
        let r = unitary_detect(&CMatrix::scalar_identity(2, Complex64::new(0.5, 0.0)), 1, &cfg).unwrap();
        assert!(!r.is_unitary && r.agrees_with_defect);
    }

    #[test]
    fn axiom_ii_rejects_non_algebras() {
        let offdiag = OperatorSystem::canonicalize(&[CMatrix::unit(2, 0, 1)], 2).unwrap();
        assert!(matches!(axiom_ii_defect(&offdiag, &EvalConfig::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn closure_preconditions() {
        let cfg = EvalConfig::default();
        let m2 = OperatorSystem::full(2);
        let m3 = OperatorSystem::full(3);
        assert!(product_closure_defect(&m3, &m2, &cfg).is_err());
        let offdiag = OperatorSystem::canonicalize(&[CMatrix::unit(2, 0, 1)], 2).unwrap();
        assert!(product_closure_defect(&OperatorSystem::scalars(2), &offdiag, &cfg).is_err());
    }
}
