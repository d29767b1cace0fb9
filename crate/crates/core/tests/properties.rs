//! Invariants checked on randomly drawn instances.

use proptest::prelude::*;

use specshift::calculus::{apply, apply_diff};
use specshift::cbf::{catalog, trace_suite, CbfSpec};
use specshift::linalg::{
    det, operator_norm, singular_values, spectral_norm_power, CMatrix, Lu, NormKind,
};
use specshift::operator::{build_sector, estimate_m, Mode, OperatorInstance};
use specshift::oracle::{
    generate, generate_with, oracle_delta, oracle_trace_diff, oracle_xi, seeded_vector, GenConfig,
};
use specshift::shift::{product_formula, ShiftEvaluator, XI_TOL};
use specshift::trace::{lk_negative, negative_contour};
use specshift::C64;

fn random_matrix(seed: u64, n: usize) -> CMatrix {
    let v = seeded_vector(seed, n * n);
    CMatrix::from_fn(n, |i, j| v[i * n + j])
}

fn pair(seed: u64, n: usize, rank: usize) -> (specshift::oracle::OracleInstance, ShiftEvaluator) {
    let inst = generate(seed, n, Mode::Negative, rank.min(n), 20.0).unwrap();
    let (a, b) = inst.instances(NormKind::L2).unwrap();
    let g = build_sector(&a, &b).unwrap();
    (inst, ShiftEvaluator::new(a, b, g).unwrap())
}

fn shift_identity(m: &CMatrix, eps: f64) -> CMatrix {
    let mut s = m.clone();
    s.axpy(C64::new(-eps, 0.0), &CMatrix::identity(m.n()));
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lu_solve_residual(seed in any::<u64>(), n in 1usize..8) {
        let a = random_matrix(seed, n);
        let x = seeded_vector(seed ^ 1, n);
        let b = a.mat_vec(&x);
        let y = Lu::new(&a).solve_vec(&b).unwrap();
        let r: f64 = a.mat_vec(&y).iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        let scale = a.max_abs() * y.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(r <= 1e-12 * scale.max(1.0) * n as f64);
    }

    #[test]
    fn determinant_is_multiplicative(seed in any::<u64>(), n in 1usize..7) {
        let a = random_matrix(seed, n);
        let b = random_matrix(seed.wrapping_add(7), n);
        let lhs = det(&a.matmul(&b));
        let rhs = det(&a) * det(&b);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
    }

    #[test]
    fn adjoint_swaps_dual_norms(seed in any::<u64>(), n in 1usize..7) {
        let a = random_matrix(seed, n);
        for kind in [NormKind::L1, NormKind::L2, NormKind::Linf] {
            let p = operator_norm(&a, kind).unwrap();
            let q = operator_norm(&a.adjoint(), kind.dual()).unwrap();
            prop_assert!((p - q).abs() <= 1e-12 * p.max(1.0));
        }
    }

    #[test]
    fn svd_matches_power_iteration(seed in any::<u64>(), n in 1usize..7) {
        let a = random_matrix(seed, n);
        let sv = singular_values(&a).unwrap();
        let p = spectral_norm_power(&a).unwrap();
        prop_assert!((sv[0] - p).abs() <= 1e-6 * sv[0]);
        let nuclear: f64 = sv.iter().sum();
        prop_assert!(nuclear >= sv[0]);
    }

    #[test]
    fn herglotz_symmetry_and_sign(k in 0usize..7, re in -20.0f64..20.0, im in 0.01f64..20.0) {
        let f = &catalog()[k];
        let z = C64::new(re, im);
        let v = f.eval(z).unwrap();
        let w = f.eval(z.conj()).unwrap();
        prop_assert!((v.conj() - w).norm() <= 1e-12 * v.norm().max(1.0));
        prop_assert!(v.im >= -1e-12 * v.norm().max(1.0));
    }

    #[test]
    fn closed_form_matches_measure(k in 0usize..7, re in -20.0f64..5.0, im in 0.1f64..10.0) {
        let f = &catalog()[k];
        prop_assume!(f.is_quadrature_eligible());
        let z = C64::new(re, im);
        let a = f.eval(z).unwrap();
        let b = f.eval_by_quadrature(z).unwrap();
        prop_assert!((a - b).norm() <= 1e-8 * a.norm().max(1.0), "{} at {z}: {a} vs {b}", f.name);
    }

    #[test]
    fn derivative_matches_difference_quotient(k in 0usize..7, re in -20.0f64..5.0, im in 0.5f64..10.0) {
        let f = &catalog()[k];
        let z = C64::new(re, im);
        let h = 1e-4 * z.norm().max(1.0);
        let fd = (f.eval(z + h).unwrap() - f.eval(z - h).unwrap()) / (2.0 * h);
        let d = f.eval_derivative(z).unwrap();
        prop_assert!((fd - d).norm() <= 1e-6 * d.norm().max(1.0));
    }

    #[test]
    fn resolvent_constant_is_scale_invariant(seed in any::<u64>(), n in 2usize..6, c in 0.1f64..10.0) {
        let inst = generate(seed, n, Mode::Nonpositive, 1, 10.0).unwrap();
        let m1 = estimate_m(&inst.a, NormKind::L2, Mode::Nonpositive).unwrap().value;
        let m2 = estimate_m(&inst.a.scale_real(c), NormKind::L2, Mode::Nonpositive).unwrap().value;
        prop_assert!(m1 >= 1.0);
        prop_assert!((m1 - m2).abs() <= 1e-3 * m1, "{m1} vs {m2}");
    }

    #[test]
    fn shifting_left_keeps_resolvent_constant(seed in any::<u64>(), n in 2usize..6, eps in 1e-3f64..1.0) {
        let inst = generate(seed, n, Mode::Nonpositive, 1, 10.0).unwrap();
        let m = estimate_m(&inst.a, NormKind::L2, Mode::Nonpositive).unwrap().value;
        let shifted = shift_identity(&inst.a, eps);
        let ms = estimate_m(&shifted, NormKind::L2, Mode::Nonpositive).unwrap().value;
        prop_assert!(ms <= m * (1.0 + 1e-6), "{ms} > {m}");
    }

    #[test]
    fn calculus_is_pointwise_on_diagonals(k in 0usize..6, d in proptest::collection::vec(-20.0f64..-0.01, 1..5)) {
        let f = &catalog()[k];
        let a = OperatorInstance::new(CMatrix::from_real_diag(&d), NormKind::L2).unwrap();
        let v = apply(f, &a, 1e-12).unwrap().value;
        for (i, x) in d.iter().enumerate() {
            let e = f.eval(C64::new(*x, 0.0)).unwrap();
            prop_assert!((v[(i, i)] - e).norm() <= 1e-8 * e.norm().max(1.0));
        }
    }

    #[test]
    fn calculus_difference_and_similarity(seed in any::<u64>(), k in 0usize..6) {
        let f = &catalog()[k];
        let inst = generate(seed, 3, Mode::Negative, 2, 10.0).unwrap();
        let (a, b) = inst.instances(NormKind::L2).unwrap();
        let fa = apply(f, &a, 1e-12).unwrap().value;
        let fb = apply(f, &b, 1e-12).unwrap().value;
        let d = apply_diff(f, &a, &b, 1e-12).unwrap().value;
        prop_assert!((&fa - &fb).max_abs_diff(&d) <= 1e-8 * fa.max_abs().max(1.0));
        let diag = OperatorInstance::new(CMatrix::from_diag(&inst.d_a), NormKind::L2).unwrap();
        let fd = apply(f, &diag, 1e-12).unwrap().value;
        let back = inst.p.matmul(&fd).matmul(&inst.p_inv);
        prop_assert!(back.max_abs_diff(&fa) <= 1e-8 * fa.max_abs().max(1.0));
    }

    #[test]
    fn eta_and_xi_obey_decay_bounds(seed in any::<u64>(), n in 2usize..6, rank in 1usize..3) {
        let (_, ev) = pair(seed, n, rank);
        for z in ev.geom.validation_points().into_iter().step_by(7) {
            let eta = ev.eta(z).unwrap();
            prop_assert!(eta.norm() * (1.0 + z.norm_sqr()) <= 1.05 * ev.c_bound, "eta at {z}");
            if z.re > 0.0 && z.norm() < 1e5 && ev.in_sector(z) {
                let xi = ev.xi_sector(z, XI_TOL).unwrap();
                prop_assert!(xi.norm() * z.re <= 1.05 * ev.c_bound, "xi at {z}");
            }
        }
    }

    #[test]
    fn xi_matches_characteristic_polynomials(seed in any::<u64>(), n in 2usize..6, rank in 1usize..4, pairs in any::<bool>()) {
        let mut cfg = GenConfig::new(n, Mode::Negative, rank.min(n), 20.0);
        cfg.complex_pairs = pairs;
        let inst = generate_with(seed, cfg).unwrap();
        let (a, b) = inst.instances(NormKind::L2).unwrap();
        let g = build_sector(&a, &b).unwrap();
        let ev = ShiftEvaluator::new(a, b, g).unwrap();
        for r in [0.3, 3.0, 30.0] {
            let z = C64::from_polar(r, 0.5 * ev.geom.theta);
            let xi = ev.xi_sector(z, XI_TOL).unwrap();
            let o = oracle_xi(&inst, z).unwrap();
            prop_assert!((xi - o).norm() <= 1e-9 * o.norm().max(1.0));
        }
    }

    #[test]
    fn cauchy_formulas_on_the_contour(seed in any::<u64>(), n in 2usize..5) {
        let (inst, ev) = pair(seed, n, 1);
        let cx = negative_contour(&ev).unwrap();
        for t in [0.0, 1.0, 10.0] {
            let w = move |z: C64| Ok(C64::new(1.0, 0.0) / ((z - t) * (z - t)));
            let eta = cx.integrate(&w, &[], 1e-12).unwrap().value;
            let exact = ev.eta(C64::new(t, 0.0)).unwrap();
            prop_assert!((eta - exact).norm() <= 1e-6 * exact.norm().max(1.0), "eta({t}): {eta} vs {exact}");
        }
        let lam = 5.0;
        let w = move |z: C64| Ok(C64::new(1.0, 0.0) / (z - lam));
        let xi = cx.integrate(&w, &[], 1e-12).unwrap().value;
        let exact = oracle_xi(&inst, C64::new(lam, 0.0)).unwrap();
        prop_assert!((xi - exact).norm() <= 1e-6 * exact.norm().max(1.0), "xi: {xi} vs {exact}");
    }

    #[test]
    fn log_derivative_of_delta_is_eta(seed in any::<u64>(), n in 2usize..5, r in 0.5f64..20.0) {
        let (_, ev) = pair(seed, n, 2);
        let z = C64::from_polar(r, 0.25 * ev.geom.theta);
        let h = 1e-3 * r;
        let d = |k: f64| ev.delta(z + k * h, XI_TOL).unwrap().delta;
        let dd = (d(-2.0) - 8.0 * d(-1.0) + 8.0 * d(1.0) - d(2.0)) / (12.0 * h);
        let eta = ev.eta(z).unwrap();
        let lhs = dd / d(0.0);
        prop_assert!((lhs - eta).norm() <= 1e-5 * eta.norm().max(1e-3), "{lhs} vs {eta}");
    }

    #[test]
    fn reciprocity_and_epsilon_shift(seed in any::<u64>(), n in 2usize..5, eps in 0.01f64..1.0) {
        let (_, ev) = pair(seed, n, 2);
        let rev = ShiftEvaluator::new(ev.b.clone(), ev.a.clone(), ev.geom).unwrap();
        let z = C64::from_polar(2.0, 0.5 * ev.geom.theta);
        let xi = ev.xi_sector(z, XI_TOL).unwrap();
        prop_assert!((xi + rev.xi_sector(z, XI_TOL).unwrap()).norm() <= 1e-10);
        let a = OperatorInstance::new(shift_identity(&ev.a.a, eps), NormKind::L2).unwrap();
        let b = OperatorInstance::new(shift_identity(&ev.b.a, eps), NormKind::L2).unwrap();
        let shifted = ShiftEvaluator::new(a, b, ev.geom).unwrap();
        let lhs = shifted.xi_sector(z - eps, XI_TOL).unwrap();
        prop_assert!((lhs - xi).norm() <= 1e-8 * xi.norm().max(1.0), "{lhs} vs {xi}");
    }

    #[test]
    fn product_formula_on_the_real_axis(seed in any::<u64>(), n in 2usize..6, rank in 1usize..4, k in 1.0f64..50.0) {
        let (inst, ev) = pair(seed, n, rank);
        let l0 = ev.geom.m_prime_b * inst.decomposition.nuclear_bound(NormKind::L2);
        let lam = 2.0 * l0.max(0.5) * k;
        let p = product_formula(&ev.b, ev.geom.m_prime_b, &inst.decomposition, C64::new(lam, 0.0)).unwrap();
        let xi = ev.xi_real(lam, XI_TOL).unwrap();
        prop_assert!((p.total - xi).norm() <= 1e-8);
    }

    #[test]
    fn oracle_is_reproducible_and_consistent(seed in any::<u64>(), n in 2usize..7, rank in 1usize..4) {
        let rank = rank.min(n);
        let a = generate(seed, n, Mode::Negative, rank, 20.0).unwrap();
        let b = generate(seed, n, Mode::Negative, rank, 20.0).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert_eq!(a.measured_rank().unwrap(), rank);
        prop_assert!(a.cond <= 20.0 * (1.0 + 1e-9));
        let z = C64::new(1.5, 0.7);
        let d = oracle_delta(&a, z).unwrap();
        let e = oracle_xi(&a, z).unwrap().exp();
        prop_assert!((d - e).norm() <= 1e-12 * d.norm().max(1.0));
    }

    #[test]
    fn trace_formula_on_random_pairs(seed in any::<u64>(), n in 2usize..5, k in 0usize..5) {
        let f: CbfSpec = trace_suite()[k].clone();
        let (inst, ev) = pair(seed, n, 2);
        let r = lk_negative(&f, &ev, 1e-8).unwrap();
        let o = oracle_trace_diff(&inst, &f).unwrap();
        prop_assert!(r.pass);
        prop_assert!((r.rhs - o).norm() <= 1e-8 * o.norm().max(1.0));
    }
}
