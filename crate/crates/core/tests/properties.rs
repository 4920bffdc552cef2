use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use opsys::clogic::sexpr::{formula_to_json, parse_formula};
use opsys::clogic::{evaluate, Domain, EvalConfig, Formula, Structures, Term};
use opsys::matrix::{CMatrix, Tolerance};
use opsys::opsystem::{dist_to_system, random_with_norm, unitary_defect, OperatorSystem};
use opsys::predicates::{phi_un, unitary_average_decompose};
use opsys::ucp::random_ucp;

fn matrix(d: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_map(move |v| {
        CMatrix::from_row_major(d, d, v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect()).unwrap()
    })
}

fn sized_matrix() -> impl Strategy<Value = CMatrix> {
    (1usize..=3).prop_flat_map(matrix)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_sandwich(x in sized_matrix()) {
        let op = x.op_norm();
        let hs = x.hs_norm();
        prop_assert!(op <= hs + 1e-12);
        prop_assert!(hs <= (x.rows() as f64).sqrt() * op + 1e-12);
        prop_assert!((op - x.adjoint().op_norm()).abs() <= 1e-12 * op.max(1.0));
    }

    #[test]
    fn canonical_basis_is_valid_and_spans_input(
        raw in prop::collection::vec(matrix(3), 1..4)
    ) {
        let sys = OperatorSystem::canonicalize(&raw, 3).unwrap();
        prop_assert!(sys.check_invariants(1e-10).is_ok());
        for m in &raw {
            prop_assert!(sys.contains(m, 1e-8));
            prop_assert!(sys.contains(&m.adjoint(), 1e-8));
        }
        prop_assert!(sys.contains(&CMatrix::identity(3), 1e-10));
    }

    #[test]
    fn distance_bounds(raw in prop::collection::vec(matrix(2), 1..3), x in matrix(2)) {
        let sys = OperatorSystem::canonicalize(&raw, 2).unwrap();
        let d = dist_to_system(&x, &sys).unwrap();
        prop_assert!(d >= -1e-12);
        prop_assert!(d <= x.op_norm() + 1e-9);
        // never worse than the Hilbert–Schmidt projection
        let proj = sys.element(&sys.coordinates(&x));
        prop_assert!(d <= (&x - &proj).op_norm() + 1e-9);
        prop_assert!(dist_to_system(&proj, &sys).unwrap() <= 1e-9);
    }

    #[test]
    fn psd_sqrt_squares_back(x in sized_matrix()) {
        let p = (&x * x.adjoint()).hermitian_part();
        let r = p.psd_sqrt(&Tolerance::default()).unwrap();
        prop_assert!((&r * &r).approx_eq(&p, 1e-9));
    }

    #[test]
    fn decomposition_reconstructs(x in sized_matrix()) {
        let n = x.op_norm();
        let x = if n > 1.0 { x.scale_real(1.0 / n) } else { x };
        let us = unitary_average_decompose(&x).unwrap();
        let sum = us.iter().fold(CMatrix::zeros(x.rows(), x.cols()), |acc, u| acc + u);
        prop_assert!((sum.scale_real(0.5) - &x).op_norm() <= 1e-9);
        for u in &us {
            prop_assert!(unitary_defect(u).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn phi_un_is_nonnegative_on_contractions(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_with_norm(d, d, 1.0, &mut rng);
        let v = random_with_norm(d, d, 1.0, &mut rng);
        let w = random_with_norm(d, d, 1.0, &mut rng);
        prop_assert!(phi_un(&u, &v, &w).unwrap() >= -1e-12);
    }

    #[test]
    fn ucp_inequalities(seed in any::<u64>(), d in 1usize..=3, k in 1usize..=3) {
        let phi = random_ucp(d, k, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
        let x = random_with_norm(d, d, 1.0, &mut rng);
        let y = random_with_norm(d, d, 0.5, &mut rng);
        prop_assert!(phi.kadison_schwarz_defect(&x).unwrap() >= -1e-9);
        prop_assert!(phi.cs_inequality_residual(&x, &y).unwrap() >= -1e-9);
        prop_assert_eq!(phi.mult_domain_defect(&x).unwrap(), phi.mult_domain_defect(&x.adjoint()).unwrap());
    }
}

fn small_formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        (-2.0f64..2.0).prop_map(Formula::Const),
        Just(Formula::norm(Term::var("x"))),
        Just(Formula::dist(Term::var("x").adj(), "A")),
        Just(Formula::norm_sq(Term::block(vec![vec![Term::var("x"), Term::unit(1.0)]]))),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::max(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::dotminus(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::abs_diff(a, b)),
            (0.0f64..3.0, inner).prop_map(|(c, f)| Formula::scale(c, f).unwrap()),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sentence_json_round_trip_and_determinism(body in small_formula()) {
        let sentence = Formula::sup("x", Domain::ball("A", 1.0), body);
        let back = parse_formula(&formula_to_json(&sentence)).unwrap();
        prop_assert_eq!(&back, &sentence);
        let st: Structures = [("A".to_string(), OperatorSystem::diagonal(2))].into_iter().collect();
        let cfg = EvalConfig { multistart: 4, max_iter: 200, ..EvalConfig::default() };
        let a = evaluate(&sentence, &st, &cfg).unwrap();
        let b = evaluate(&back, &st, &cfg).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
