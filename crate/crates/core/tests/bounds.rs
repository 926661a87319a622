mod common;

use proptest::prelude::*;
use sobolev_erm::theory_bounds::{
    lower_isometry_prob, m_eps, moc_bound_exp, moc_bound_prob, noreg_rate, rate_bound_exp, rate_bound_prob, BoundKind,
    ProblemParams,
};
use sobolev_erm::Error;

#[test]
fn every_constant_matches_the_oracle() {
    common::assert_passes(common::constant_audit());
}

#[test]
fn bounds_are_monotone_on_the_grid() {
    common::assert_passes(common::monotonicity_suite());
}

#[test]
fn frozen_values_at_default_parameters() {
    // Independently evaluated at s = 2, dx = dy = 1, theta = 9, delta = 0.05,
    // sigma_w = 1, every scale constant 1, L = 1.
    let p = ProblemParams::default();
    let exp = rate_bound_exp(1e4, 1e-2, &p).unwrap();
    let want_c_i = 8.0 / 0.75 * 8f64.powf(0.3);
    let want_c_ii = 8.0 * 8f64.powf(0.8);
    let want_slow = 13.0 * 10f64.powf(0.2) * (want_c_i + want_c_ii);
    assert!((exp.c_slow - want_slow).abs() <= 1e-12 * want_slow);
    let want_bound = want_slow * 1e-2f64.powf(0.2) / 1e4f64.powf(0.8) + 2.0 / 1e4;
    assert!((exp.bound - want_bound).abs() <= 1e-12 * want_bound);
    // (16 / (3 * 0.25))^(1/3) = 2.77...
    assert_eq!(m_eps(1.0, 2, 1, 0.5).unwrap(), 3);
}

#[test]
fn zero_alignment_is_rejected() {
    let p = ProblemParams::default();
    assert!(matches!(rate_bound_prob(100.0, 0.0, &p), Err(Error::Domain(_))));
    assert!(matches!(rate_bound_exp(100.0, 0.0, &p), Err(Error::Domain(_))));
}

fn params() -> impl Strategy<Value = ProblemParams> {
    (1u32..=2, 1u32..=3, 0.0f64..3.0, 0.001f64..10.0, 8.5f64..30.0, 0.001f64..0.9).prop_map(
        |(dx, dy, extra, sigma_w, theta, delta)| ProblemParams {
            s: 2 * dx + extra as u32,
            dx,
            dy,
            sigma_w,
            theta,
            delta,
            ..ProblemParams::default()
        },
    )
}

proptest! {
    #![proptest_config(common::proptest_config(256))]

    #[test]
    fn rates_exceed_their_fast_terms(p in params(), log_t in 1.0f64..8.0, log_r in -8.0f64..2.0) {
        let (t, r) = (10f64.powf(log_t), 10f64.powf(log_r));
        for b in [rate_bound_prob(t, r, &p).unwrap(), rate_bound_exp(t, r, &p).unwrap()] {
            prop_assert!(b.bound >= b.fast_term && b.slow_term >= 0.0);
            prop_assert!(b.lambda_min > 0.0 && b.r_sq > 0.0);
        }
        for kind in [BoundKind::Probability, BoundKind::Expectation] {
            let n = noreg_rate(t, kind, &p).unwrap();
            prop_assert!(n.bound >= n.fast_term);
        }
    }

    #[test]
    fn moc_bounds_grow_with_the_class(p in params(), log_t in 1.0f64..8.0, rho in 1e-6f64..10.0) {
        let t = 10f64.powf(log_t);
        prop_assert!(moc_bound_prob(t, 2.0 * rho, &p).unwrap().bound >= moc_bound_prob(t, rho, &p).unwrap().bound);
        prop_assert!(moc_bound_exp(t, 2.0 * rho, &p).unwrap().bound >= moc_bound_exp(t, rho, &p).unwrap().bound);
    }

    #[test]
    fn lower_isometry_is_a_probability(p in params(), r in 0.01f64..2.0, log_t in 0.0f64..12.0) {
        let li = lower_isometry_prob(r, 10f64.powf(log_t), &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&li.probability));
    }

    #[test]
    fn covering_size_shrinks_with_resolution(eps in 0.01f64..1.0, s in 2u32..6) {
        prop_assert!(m_eps(1.0, s, 1, eps).unwrap() >= m_eps(1.0, s, 1, 1.5 * eps).unwrap());
    }
}
