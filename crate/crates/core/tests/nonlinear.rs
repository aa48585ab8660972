use klausmeier::basis::BasisSet;
use klausmeier::nonlinear::{
    p1, p2, project_nonlinear, q1, q2, raw_growth, raw_water, CutoffSpec, NodalFields, NonlinearTerm, ReactionParams,
};
use proptest::prelude::*;

fn params(a: f64, b: f64, m: f64) -> ReactionParams {
    ReactionParams { a, b, cutoff: CutoffSpec::new(m).unwrap() }
}

#[test]
fn sigma_invariants_on_dense_sample() {
    for bound in [0.5, 2.0, 7.0] {
        let c = CutoffSpec::new(bound).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..10_000 {
            let x = -10.0 * bound + 20.0 * bound * i as f64 / 9_999.0;
            let s = c.sigma(x);
            assert!(s.abs() < bound || (s.abs() - bound).abs() < 1e-15 && x.abs() > 5.0 * bound);
            assert!(s.abs() <= x.abs());
            assert!(s * x >= 0.0);
            assert!(s >= prev);
            assert_eq!(c.sigma(-x), -s);
            let d = c.sigma_prime(x);
            assert!((0.0..=1.0).contains(&d));
            if x.abs() <= bound / 2.0 {
                assert_eq!(s, x);
            }
            prev = s;
        }
    }
}

#[test]
fn sigma_prime_is_the_derivative() {
    let c = CutoffSpec::new(2.0).unwrap();
    let h = 1e-5;
    for i in 0..200 {
        let x = -6.0 + 0.06 * i as f64 + 0.0013;
        let fd = (c.sigma(x + h) - c.sigma(x - h)) / (2.0 * h);
        assert!((fd - c.sigma_prime(x)).abs() < 1e-8, "x = {x}");
    }
}

/// `Q1`, `Q2` are the chain-rule derivatives of `P1`, `P2` along smooth profiles,
/// including in the saturated region.
#[test]
fn q_terms_are_chain_rule_derivatives() {
    let p = params(0.3, 0.8, 1.0);
    let u = |x: f64| 1.4 * (2.0 * x).sin();
    let du = |x: f64| 2.8 * (2.0 * x).cos();
    let w = |x: f64| 0.9 * (1.0 + x * x) * (3.0 * x).cos();
    let dw = |x: f64| 0.9 * (2.0 * x * (3.0 * x).cos() - 3.0 * (1.0 + x * x) * (3.0 * x).sin());
    let mut errs = Vec::new();
    for h in [1e-2, 5e-3] {
        let mut worst: f64 = 0.0;
        for i in 0..101 {
            let x = -1.0 + 0.02 * i as f64;
            let fd1 = (p1(u(x + h), w(x + h), &p) - p1(u(x - h), w(x - h), &p)) / (2.0 * h);
            let fd2 = (p2(u(x + h), w(x + h), &p) - p2(u(x - h), w(x - h), &p)) / (2.0 * h);
            worst = worst.max((fd1 - q1(u(x), w(x), du(x), dw(x), &p)).abs());
            worst = worst.max((fd2 - q2(u(x), w(x), du(x), dw(x), &p)).abs());
        }
        errs.push(worst);
    }
    assert!(errs[0] < 5e-2, "{errs:?}");
    // second order in h
    assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
}

#[test]
fn p2_projection_is_affine_in_rainfall() {
    let water = BasisSet::water(6, 1.5).unwrap();
    let quad = water.default_quadrature();
    let mut fields = NodalFields::zeros(quad.len());
    for (i, &x) in quad.nodes().iter().enumerate() {
        fields.u[i] = 0.3 * x.cos();
        fields.w[i] = 0.2 * (x + 0.1).sin();
    }
    let proj = |a: f64| project_nonlinear(NonlinearTerm::P2, &fields, &params(a, 1.0, 2.0), &water, &quad).unwrap();
    let ones = {
        let zero = NodalFields::zeros(quad.len());
        project_nonlinear(NonlinearTerm::P2, &zero, &params(1.0, 1.0, 2.0), &water, &quad).unwrap()
    };
    let slope = proj(3.0) - proj(2.0);
    assert!((slope - ones).amax() < 1e-13);
}

proptest! {
    #[test]
    fn cutoff_is_exact_in_identity_region(u in -0.99f64..0.99, w in -0.99f64..0.99, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let p = params(a, b, 2.0);
        prop_assert_eq!(p1(u, w, &p), raw_growth(u, w, b));
        prop_assert_eq!(p2(u, w, &p), raw_water(u, w, a));
    }

    #[test]
    fn reaction_terms_bounded_by_cutoff(u in -1e3f64..1e3, w in -1e3f64..1e3, v in -10.0f64..10.0, z in -10.0f64..10.0) {
        let bound = 2.0;
        let b = 1.0;
        let p = params(0.5, b, bound);
        let m2 = bound * bound;
        prop_assert!(p1(u, w, &p).abs() <= m2 * bound * (1.0 + b * bound));
        prop_assert!((p2(u, w, &p) - 0.5).abs() <= m2 * bound);
        prop_assert!(q1(u, w, v, z, &p).abs() <= m2 * (2.0 + 3.0 * b * bound) * v.abs() + m2 * (1.0 + b * bound) * z.abs() + 1e-12);
        prop_assert!(q2(u, w, v, z, &p).abs() <= 2.0 * m2 * v.abs() + m2 * z.abs() + 1e-12);
    }

    #[test]
    fn q_terms_vanish_without_gradients(u in -5.0f64..5.0, w in -5.0f64..5.0) {
        let p = params(1.0, 1.0, 2.0);
        prop_assert_eq!(q1(u, w, 0.0, 0.0, &p), 0.0);
        prop_assert_eq!(q2(u, w, 0.0, 0.0, &p), 0.0);
    }
}
