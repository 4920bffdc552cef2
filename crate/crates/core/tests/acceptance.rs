//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit status
//! if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use opsys::clogic::EvalConfig;
use opsys::matrix::{CMatrix, Tolerance};
use opsys::opsystem::{random_hermitian, random_unitary, random_with_norm, unitary_defect, OperatorSystem};
use opsys::predicates::{
    axiom_ii_defect, b_witness, phi_un, product_closure_defect, psi, unitary_average_decompose,
    unitary_detect, walter_matrix, PSI_UNITARY_PLATEAU,
};
use opsys::ucp::{pisier_check, population_suite, weyl_unitaries, UcpMap};

const WITNESS_IDENTITY_TOL: f64 = 1e-8;
const CONVERSE_DEFECT_MAX: f64 = 0.05;
const CONVERSE_RUNTIME: Duration = Duration::from_secs(300);
const FORWARD_DEFECT_MIN: f64 = 1.0 / 64.0;
const FORWARD_BOUND_SLACK: f64 = 1e-3;
const WALTER_PSD_TOL: f64 = 1e-9;
const WALTER_PERTURBATION: f64 = 0.1;
const WALTER_FIXED_TOL: f64 = 1e-10;
const PHI_UN_TOL: f64 = 1e-8;
const DECOMPOSE_TOL: f64 = 1e-9;
const PLATEAU_SEPARATION: f64 = 0.05;
const UNITARY_DEFECT_TOL: f64 = 1e-9;
const APPENDIX_FLOOR: f64 = -1e-9;
const HOMOMORPHISM_TOL: f64 = 1e-8;
const EXPECTATION_PRESERVATION_MIN: f64 = 0.99;

struct Verdict {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Verdict);

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn op_norm_svd(m: &CMatrix) -> f64 {
    m.inner().clone().svd(false, false).singular_values.max()
}

fn witness_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0_f64;
    for i in 0..200 {
        let d = 1 + i % 3;
        let x = random_with_norm(d, d, rng.gen_range(0.0..=1.0), &mut rng);
        let z = random_with_norm(d, d, rng.gen_range(0.0..=1.0), &mut rng);
        let b = b_witness(&x, &z).expect("same dimension");
        let two = CMatrix::scalar_identity(d, Complex64::new(2.0, 0.0));
        let row = CMatrix::block(&[vec![two, x.clone(), z.clone(), b]]).unwrap();
        let s = op_norm_svd(&(&x * x.adjoint() + &z * z.adjoint()));
        worst = worst.max((op_norm_svd(&row).powi(2) - (4.0 + s)).abs());
    }
    verdict(worst <= WITNESS_IDENTITY_TOL, format!("max deviation {worst:.2e} over 200 pairs"))
}

fn closure_converse() -> Verdict {
    let cfg = EvalConfig::default();
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, a) in [
        ("M2", OperatorSystem::full(2)),
        ("diag(M2)", OperatorSystem::diagonal(2)),
        ("M3", OperatorSystem::full(3)),
    ] {
        let b = OperatorSystem::full(a.ambient_dim());
        let r = product_closure_defect(&a, &b, &cfg).expect("preconditions hold");
        pass &= r.defect <= CONVERSE_DEFECT_MAX;
        parts.push(format!("{name} {:.2e}", r.defect));
    }
    let elapsed = start.elapsed();
    pass &= elapsed <= CONVERSE_RUNTIME;
    verdict(pass, format!("defects {} in {:.1}s", parts.join(", "), elapsed.as_secs_f64()))
}

fn closure_forward() -> Verdict {
    let cfg = EvalConfig::default();
    let a = OperatorSystem::canonicalize(
        &[CMatrix::identity(2), CMatrix::unit(2, 0, 1), CMatrix::unit(2, 1, 0)],
        2,
    )
    .unwrap();
    let r = product_closure_defect(&a, &OperatorSystem::full(2), &cfg).expect("preconditions hold");
    let pass = r.defect >= FORWARD_DEFECT_MIN - cfg.opt_tol
        && r.max_bound_excess <= FORWARD_BOUND_SLACK
        && r.traced_points > 0;
    verdict(
        pass,
        format!(
            "defect {:.4} (need >= {:.4}), max ‖xy*+z‖ - 4√ε = {:.2e} over {} inner evaluations",
            r.defect,
            FORWARD_DEFECT_MIN - cfg.opt_tol,
            r.max_bound_excess,
            r.traced_points
        ),
    )
}

fn walter() -> Verdict {
    let tol = Tolerance::default();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_on = 0.0_f64;
    let mut least_off = f64::INFINITY;
    for i in 0..100 {
        let d = 1 + i % 3;
        let u = random_unitary(d, &mut rng);
        let v = random_unitary(d, &mut rng);
        let uv = &u * &v;
        worst_on = worst_on.max(walter_matrix(&u, &v, &uv).unwrap().dist_to_psd(&tol).unwrap());
        let x = &uv + random_hermitian(d, &mut rng).scale_real(WALTER_PERTURBATION);
        least_off = least_off.min(walter_matrix(&u, &v, &x).unwrap().dist_to_psd(&tol).unwrap());
    }
    let one = CMatrix::identity(1);
    let fixed = walter_matrix(&one, &one, &one.scale_real(-1.0)).unwrap().dist_to_psd(&tol).unwrap();
    let pass = worst_on <= WALTER_PSD_TOL && least_off > 0.0 && (fixed - 1.0).abs() <= WALTER_FIXED_TOL;
    verdict(
        pass,
        format!(
            "x=uv max dist {worst_on:.2e}; perturbed min dist {least_off:.3e}; fixed instance {fixed:.12}"
        ),
    )
}

fn phi_un_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0_f64;
    for i in 0..200 {
        let d = 1 + i % 4;
        let u = random_unitary(d, &mut rng);
        let v = random_unitary(d, &mut rng);
        let w = random_unitary(d, &mut rng);
        let direct = op_norm_svd(&(&u - &w * &v));
        worst = worst.max((phi_un(&u, &v, &w).unwrap() - direct).abs());
    }
    verdict(worst <= PHI_UN_TOL, format!("max deviation {worst:.2e} over 200 triples"))
}

fn four_unitaries() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut recon = 0.0_f64;
    let mut defect = 0.0_f64;
    for i in 0..200 {
        let d = 1 + i % 4;
        let norm = if i % 10 == 0 { 1.0 } else { rng.gen_range(0.0..1.0) };
        let x = random_with_norm(d, d, norm, &mut rng);
        let us = unitary_average_decompose(&x).unwrap();
        let sum = us.iter().fold(CMatrix::zeros(d, d), |acc, u| acc + u);
        recon = recon.max(op_norm_svd(&(sum.scale_real(0.5) - &x)));
        for u in &us {
            defect = defect.max(unitary_defect(u).unwrap());
        }
    }
    let cfg = EvalConfig::default();
    let axiom = axiom_ii_defect(&OperatorSystem::full(2), &cfg).unwrap();
    let pass = recon <= DECOMPOSE_TOL && defect <= DECOMPOSE_TOL && axiom <= cfg.opt_tol;
    verdict(
        pass,
        format!("reconstruction {recon:.2e}, unitary defect {defect:.2e}, sentence value on M2 {axiom:.2e}"),
    )
}

/// ψ body evaluated directly, for the plateau oracle.
fn psi_body(u_amp: &DMatrix<Complex64>, x: &DMatrix<Complex64>) -> f64 {
    let n = u_amp.nrows();
    let mut row = DMatrix::zeros(n, 2 * n);
    row.view_mut((0, 0), (n, n)).copy_from(u_amp);
    row.view_mut((0, n), (n, n)).copy_from(x);
    let mut col = DMatrix::zeros(2 * n, n);
    col.view_mut((0, 0), (n, n)).copy_from(u_amp);
    col.view_mut((n, 0), (n, n)).copy_from(x);
    let sq = |m: DMatrix<Complex64>| m.svd(false, false).singular_values.max().powi(2);
    (sq(row).min(sq(col)) - sq(x.clone())).max(0.0)
}

/// Brute-force value of ψ_n at unitaries: the minimum of the body over a
/// cloud of contractions x, for several unitaries u.
fn plateau_oracle() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (d, n) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        for _ in 0..5 {
            let u = random_unitary(d, &mut rng).amplify(n).unwrap();
            for _ in 0..200 {
                let x = random_with_norm(d * n, d * n, rng.gen_range(0.0..=1.0), &mut rng);
                let v = psi_body(u.inner(), x.inner());
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    (lo, hi)
}

fn psi_plateau() -> Verdict {
    let cfg = EvalConfig::default();
    let (lo, hi) = plateau_oracle();
    let c_star = lo;
    let mut rng = ChaCha8Rng::seed_from_u64(708);
    let mut spread = 0.0_f64;
    let mut disagreements = 0;
    for i in 0..20 {
        let d = 1 + i % 2;
        let u = random_unitary(d, &mut rng);
        for n in 1..=2 {
            spread = spread.max((psi(&u, n, &cfg).unwrap() - c_star).abs());
        }
        if !unitary_detect(&u, 2, &cfg).unwrap().is_unitary {
            disagreements += 1;
        }
    }
    for i in 0..10 {
        let d = 1 + i % 2;
        let x = random_with_norm(d, d, rng.gen_range(0.5..0.95), &mut rng);
        let r = unitary_detect(&x, 2, &cfg).unwrap();
        if r.is_unitary != (r.unitary_defect <= UNITARY_DEFECT_TOL) {
            disagreements += 1;
        }
    }
    let strict = psi(&CMatrix::diag_real(&[1.0, 0.5]), 1, &cfg).unwrap();
    let pass = (hi - lo) <= 1e-9
        && (c_star - PSI_UNITARY_PLATEAU).abs() <= 1e-9
        && spread <= 2.0 * cfg.opt_tol
        && strict <= c_star - PLATEAU_SEPARATION
        && disagreements == 0;
    verdict(
        pass,
        format!(
            "oracle c* = {c_star:.12} (body range {:.1e}), spread {spread:.2e}, ψ(diag(1,½)) = {strict:.4}, {disagreements} disagreements",
            hi - lo
        ),
    )
}

fn homomorphism_fixtures(rng: &mut ChaCha8Rng) -> Vec<UcpMap> {
    (0..20)
        .map(|i| {
            let d = 1 + i % 3;
            let copies = 1 + (i / 3) % 2;
            let w = random_unitary(d * copies, rng);
            UcpMap::block_embedding(d, copies).unwrap().then(&UcpMap::conjugation(&w).unwrap()).unwrap()
        })
        .collect()
}

fn appendix() -> Verdict {
    let pop = population_suite(1000, 3, 808).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(809);
    let (mut pres, mut hom) = (0.0_f64, 0.0_f64);
    for phi in homomorphism_fixtures(&mut rng) {
        let d = phi.dom_dim();
        let mut unitaries = weyl_unitaries(d);
        unitaries.extend((0..3).map(|_| random_unitary(d, &mut rng)));
        let pairs: Vec<(CMatrix, CMatrix)> = (0..5)
            .map(|_| (random_with_norm(d, d, 1.0, &mut rng), random_with_norm(d, d, 1.0, &mut rng)))
            .collect();
        let r = pisier_check(&phi, &unitaries, &pairs).unwrap();
        pres = pres.max(r.unitary_preservation_defect);
        hom = hom.max(r.hom_defect);
    }
    let e = pisier_check(&UcpMap::diagonal_expectation(2).unwrap(), &weyl_unitaries(2), &[]).unwrap();
    let pass = pop.min_kadison_schwarz >= APPENDIX_FLOOR
        && pop.min_cs_residual >= APPENDIX_FLOOR
        && pop.pisier_violations == 0
        && pres <= HOMOMORPHISM_TOL
        && hom <= HOMOMORPHISM_TOL
        && e.unitary_preservation_defect >= EXPECTATION_PRESERVATION_MIN;
    verdict(
        pass,
        format!(
            "min KS {:.2e}, min CS {:.2e} over {} maps; homomorphisms ({pres:.1e}, {hom:.1e}); expectation preservation {:.3}",
            pop.min_kadison_schwarz, pop.min_cs_residual, pop.samples, e.unitary_preservation_defect
        ),
    )
}

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn cli_result(args: &[String]) -> Option<String> {
    let out = Command::new(env!("CARGO_BIN_EXE_opsys")).args(args).output().ok()?;
    if !out.status.success() {
        return None;
    }
    let v: Value = serde_json::from_slice(&out.stdout).ok()?;
    Some(serde_json::to_string(&v["result"]).unwrap())
}

fn determinism() -> Verdict {
    let runs: Vec<Vec<String>> = [
        vec!["check-closure", "--system", &fixture("diag2.json"), "--ambient", &fixture("m2.json")],
        vec!["check-closure", "--system", &fixture("m2.json"), "--ambient", &fixture("m2.json")],
        vec![
            "eval",
            "--sentence",
            &fixture("square_distance.json"),
            "--structure",
            &format!("A={}", fixture("m2.json")),
        ],
        vec!["detect-unitary", "--matrix", &fixture("contraction2.json")],
        vec![
            "walter",
            "--u",
            &fixture("flip2.json"),
            "--v",
            &fixture("flip2.json"),
            "--x",
            &fixture("diag_half.json"),
        ],
        vec!["decompose", "--matrix", &fixture("contraction2.json")],
        vec!["ucp-suite", "--samples", "200"],
        vec!["pisier", "--map", &fixture("diag_expectation2.json")],
        vec![
            "eval",
            "--seed",
            "7",
            "--sentence",
            &fixture("square_distance.json"),
            "--structure",
            &format!("A={}", fixture("diag2.json")),
        ],
    ]
    .iter()
    .map(|r| r.iter().map(|s| s.to_string()).collect())
    .collect();
    let mut failures = Vec::new();
    for args in &runs {
        let a = cli_result(args);
        let b = cli_result(args);
        if a.is_none() || a != b {
            failures.push(args[0].clone());
        }
    }
    verdict(failures.is_empty(), format!("{} commands run twice, mismatches: {:?}", runs.len(), failures))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("witness identity", witness_identity),
        ("closure converse", closure_converse),
        ("closure forward bound", closure_forward),
        ("block positivity criterion", walter),
        ("unitary norm identity", phi_un_identity),
        ("four-unitary decomposition", four_unitaries),
        ("unitary plateau", psi_plateau),
        ("u.c.p. inequalities", appendix),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        println!(
            "criterion {} [{}] {name}: {} ({:.1}s)",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
