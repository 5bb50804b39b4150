use monotone_spde::rates::*;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = GeneralRateParams> {
    (1.1f64..5.0, 0.0f64..1.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(r, u, le, ld)| {
        let lo = 2f64.max(r - 1.0 + 1e-3);
        let theta = lo + u * 8.0;
        GeneralRateParams::new(r, theta, 10f64.powf(le), 10f64.powf(ld)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn lambda_dominates_both_lower_bounds(p in params()) {
        let (lam, _) = lambda_sup_ln(ln_alpha_general(&p).unwrap(), p.r).unwrap();
        let (lp, ls) = ln_lambda_lower_bounds(&p).unwrap();
        let (lp, ls) = (lp.exp(), ls.exp());
        prop_assert!(lam >= lp * (1.0 - 1e-12), "λ = {lam} < {lp}");
        prop_assert!(lp >= ls * (1.0 - 1e-12), "{lp} < {ls}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn split_identity(p in params()) {
        let lhs = ln_alpha_general(&p).unwrap();
        let rhs = ln_c0_constant(&p).unwrap() + ln_split_factor(p.r, p.theta);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn split_exponents_sum(r in 1.05f64..6.0, t in 0.0f64..10.0) {
        let theta = 2f64.max(r - 0.9) + t;
        let (a1, a2) = split_exponents(r, theta);
        prop_assert!((a1 + a2 - (r + 1.0) / (r - 1.0)).abs() < 1e-12 * (a1 + a2));
    }

    #[test]
    fn alpha_strictly_decreasing_in_eta_and_delta(p in params(), f in 1.01f64..100.0) {
        let a = ln_alpha_general(&p).unwrap();
        let up_eta = GeneralRateParams { eta: p.eta * f, ..p };
        let up_delta = GeneralRateParams { delta: p.delta * f, ..p };
        prop_assert!(ln_alpha_general(&up_eta).unwrap() < a);
        prop_assert!(ln_alpha_general(&up_delta).unwrap() < a);
    }

    #[test]
    fn witness_evaluation_equals_primary_bound(p in params()) {
        prop_assume!(ln_alpha_general(&p).unwrap() < 700.0);
        let alpha = alpha_general(&p).unwrap();
        let t = witness_time(alpha, p.r);
        let g = rate_functional(alpha, p.r, t);
        let (lp, _) = lambda_lower_bounds(&p).unwrap();
        prop_assert!((g - lp).abs() <= 1e-12 * lp, "g(t_w) = {g}, lb = {lp}");
    }

    #[test]
    fn porous_rates_agree_with_general(l in 0.5f64..5.0, sigma in 0.2f64..5.0, r in 1.2f64..4.0) {
        let spec = PorousMediumSpec::new(l, sigma, r);
        let pm = porous_medium_rates(&spec).unwrap();
        let general = rate_report(&spec.params(spec.theta()).unwrap()).unwrap();
        prop_assert!((pm.report.alpha / general.alpha - 1.0).abs() < 1e-10);
        prop_assert!((pm.report.lambda / general.lambda - 1.0).abs() < 1e-10);
        let closed = porous_alpha_closed_form(l, sigma, r);
        prop_assert!((closed / general.alpha - 1.0).abs() < 1e-10);
        let (lp, ls) = porous_lower_bounds_closed_form(l, sigma, r);
        prop_assert!((lp / general.lb_primary - 1.0).abs() < 1e-10);
        prop_assert!((ls / general.lb_secondary - 1.0).abs() < 1e-10);
    }

    #[test]
    fn p_laplace_rates_agree_with_general(l in 0.5f64..5.0, sigma in 0.2f64..5.0, p in 2.3f64..6.0) {
        let pl = p_laplace_rates(&PLaplaceSpec::new(l, sigma, p)).unwrap();
        let general = rate_report(&pl.params).unwrap();
        prop_assert!((pl.report.alpha / general.alpha - 1.0).abs() < 1e-10);
        let closed = p_laplace_alpha_closed_form(l, sigma, p);
        prop_assert!((closed / general.alpha - 1.0).abs() < 1e-10);
        let (lp, ls) = p_laplace_lower_bounds_closed_form(l, sigma, p);
        prop_assert!((lp / general.lb_primary - 1.0).abs() < 1e-10);
        prop_assert!((ls / general.lb_secondary - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lambda_is_a_maximum(p in params(), f in prop::sample::select(vec![0.5, 0.9, 0.99, 1.01, 1.1, 2.0])) {
        let ln_alpha = ln_alpha_general(&p).unwrap();
        let (lam, t0) = lambda_sup_ln(ln_alpha, p.r).unwrap();
        prop_assert!(rate_functional_ln(ln_alpha, p.r, t0 * f) <= lam * (1.0 + 1e-12));
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(GeneralRateParams::new(1.0, 3.0, 1.0, 1.0).is_err());
    assert!(GeneralRateParams::new(2.0, 1.5, 1.0, 1.0).is_err());
    assert!(GeneralRateParams::new(4.0, 2.5, 1.0, 1.0).is_err());
    assert!(GeneralRateParams::new(2.0, 3.0, 0.0, 1.0).is_err());
    assert!(GeneralRateParams::new(2.0, 3.0, 1.0, f64::NAN).is_err());
    assert!(lambda_sup(-1.0, 2.0).is_err());
}
