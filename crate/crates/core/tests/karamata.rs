use proptest::prelude::*;
use sel_core::karamata::*;
use sel_core::numerics::ConvergenceVerdict;
use sel_core::ScalarFn;

fn ko(src: &str) -> ConvergenceVerdict {
    keller_osserman(&analyze_nonlinearity(src, DEFAULT_U_MAX).unwrap(), 1e-8).unwrap()
}

#[test]
fn rv_index_examples() {
    let r = rv_index(&ScalarFn::parse("t^3").unwrap(), 1e8).unwrap();
    assert!((r.index - 3.0).abs() < 1e-6 && r.regular);
    // The local index of ln(1+t) is 1/ln u, so the slowly varying verdict
    // needs a far-out sampling scale.
    let r = rv_index(&ScalarFn::parse("ln(1+t)").unwrap(), 1e30).unwrap();
    assert!(r.index.abs() < 0.02, "{r:?}");
    let r = rv_index(&ScalarFn::parse("t^2*ln(1+t)").unwrap(), 1e30).unwrap();
    assert!((r.index - 2.0).abs() < 0.02, "{r:?}");
    assert!(rv_index(&ScalarFn::parse("t").unwrap(), 10.0).is_err());
}

#[test]
fn keller_osserman_battery() {
    assert!(ko("t^2").is_convergent());
    assert!(ko("t").is_divergent());
    assert!(ko("t*ln(1+t)").is_divergent());
    assert!(ko("t*ln(1+t)^4").is_convergent());
}

#[test]
fn necessary_condition_for_entire_solutions() {
    let v = |s: &str| necessary_condition_entire(&analyze_nonlinearity(s, DEFAULT_U_MAX).unwrap(), 1e-8).unwrap();
    let c = v("t^2");
    assert!(c.is_convergent());
    assert!((c.value().unwrap() - 1.0).abs() < 1e-6);
    assert!(v("t").is_divergent());
    assert!(v("t*ln(1+t)^2").is_convergent());
}

#[test]
fn growth_constants_of_a_cube() {
    let nl = analyze_nonlinearity("t^3", DEFAULT_U_MAX).unwrap();
    assert!((nl.theta.finite().unwrap() - 3.0).abs() < 1e-6);
    assert!((nl.gamma.finite().unwrap() - 0.25).abs() < 1e-6);
    assert!((nl.rho.finite().unwrap() - 2.0).abs() < 1e-6);
    assert!(nl.m.is_infinite());
    assert!(nl.lambda_sup.is_none());
    let (d1, d2) = nl.identity_defects().unwrap();
    assert!(d1 < 1e-3 && d2 < 1e-3);
}

#[test]
fn linear_and_exponential_growth() {
    let nl = analyze_nonlinearity("t", DEFAULT_U_MAX).unwrap();
    assert!((nl.m.finite().unwrap() - 1.0).abs() < 1e-9);
    assert!((nl.gamma.finite().unwrap() - 0.5).abs() < 1e-6);
    assert!(nl.rho.finite().unwrap().abs() < 1e-6);
    assert!(keller_osserman(&nl, 1e-8).unwrap().is_divergent());
    let nl = analyze_nonlinearity("exp(t)-1", DEFAULT_U_MAX).unwrap();
    assert!(nl.theta.is_infinite(), "{:?}", nl.theta);
}

#[test]
fn decreasing_f_is_rejected() {
    assert!(analyze_nonlinearity("1/(1+t)", DEFAULT_U_MAX).is_err());
}

#[test]
fn karamata_identities_for_powers() {
    for p in [1.5, 2.0, 3.0, 5.0] {
        let nl = analyze_nonlinearity(&format!("t^{p}"), DEFAULT_U_MAX).unwrap();
        assert!((nl.theta.finite().unwrap() - p).abs() <= 1e-3);
        assert!((nl.gamma.finite().unwrap() - 1.0 / (p + 1.0)).abs() <= 1e-3);
        assert!((nl.rho.finite().unwrap() - (p - 1.0)).abs() <= 0.02);
    }
}

#[test]
fn ell_limits_of_powers() {
    for a in [0.5, 1.0, 2.0, 4.0] {
        let k = KFunction::user(&format!("t^{a}"), 1.0).unwrap();
        assert!((k.ell1 - 1.0 / (a + 1.0)).abs() < 1e-3, "α={a}: {}", k.ell1);
        assert!(k.ell0.abs() < 1e-3);
    }
    let k = KFunction::user("exp(-1/t)", 1.0).unwrap();
    assert!(k.ell1.abs() < 2e-2, "{}", k.ell1);
}

#[test]
fn constructed_weights() {
    let k = make_k(KKind::InvS, "t^2", 1.0).unwrap();
    assert!((k.ell1 - 1.0 / 3.0).abs() < 2e-2);
    let k = make_k(KKind::ExpA, "t", 1.0).unwrap();
    assert!(k.ell1.abs() < 2e-2);
    let k = make_k(KKind::InvLnS, "t^3", 2.0).unwrap();
    assert!((k.ell1 - 1.0).abs() < 2e-2, "{}", k.ell1);
    assert!(make_k(KKind::User, "t", 1.0).is_err());
}

#[test]
fn xi0_closed_form() {
    assert!((xi0_power(2.0, 0.5, 1.0).unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-15);
    assert!((xi0_power(2.0, 0.0, 1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    for (rho, l1) in [(0.7, 0.2), (3.0, 0.9)] {
        let c = (2.0 + l1 * rho) / (2.0 + rho);
        assert!((xi0_power(rho, l1, c).unwrap() - 1.0).abs() < 1e-14);
    }
    assert!(xi0_power(0.0, 0.5, 1.0).is_err());
    assert!(xi0_power(1.0, 1.5, 1.0).is_err());
}

#[test]
fn xi0_through_a() {
    let cube = analyze_nonlinearity("t^3", DEFAULT_U_MAX).unwrap();
    let x = xi0_via_a(&cube, 0.25, 0.5, 1.0).unwrap();
    assert!((x - 0.75f64.sqrt()).abs() < 1e-6);
    let x = xi0_via_a(&cube, 0.25, 1.0, 0.75).unwrap();
    assert!((x - (4.0f64 / 3.0).sqrt()).abs() < 1e-6);
    let sq = analyze_nonlinearity("t^2", DEFAULT_U_MAX).unwrap();
    assert!((xi0_via_a(&sq, 1.0 / 3.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-6);
    assert!(xi0_via_a(&sq, 0.0, 1.0, 1.0).is_err());
    assert!(xi0_via_a(&sq, 1.0 / 3.0, 1.0, 1e-12).is_err());
}

#[test]
fn xi0_routes_agree_for_powers() {
    for rho in [1.0, 2.0, 3.0] {
        let nl = analyze_nonlinearity(&format!("t^{}", rho + 1.0), DEFAULT_U_MAX).unwrap();
        let gamma = 1.0 / (rho + 2.0);
        // ℓ₁ = 1/2 corresponds to K'(0) = 1/2 in the A-form target.
        let a = xi0_via_a(&nl, gamma, 0.5, 1.0).unwrap();
        let b = xi0_power(rho, 0.5, 1.0).unwrap();
        assert!((a - b).abs() <= 1e-6, "ρ={rho}: {a} vs {b}");
    }
}

#[test]
fn two_term_coefficient_branches() {
    let base = TwoTermSpec {
        rho: 2.0,
        zeta: 1.0,
        theta: 0.5,
        ell_star: -1.0,
        ell_sup: None,
        c_tilde: 0.3,
        case: GrowthCase::PurePower,
    };
    let t = chi_two_term(&base).unwrap();
    assert!((t.chi + 0.3 / 2.0).abs() < 1e-15);
    assert_eq!(t.varpi, 0.5);
    let t = chi_two_term(&TwoTermSpec { theta: 2.0, ..base }).unwrap();
    assert!((t.chi - 1.0).abs() < 1e-15);
    assert_eq!(t.varpi, 1.0);

    let s = TwoTermSpec { theta: 2.0, ell_sup: Some(1.0), case: GrowthCase::EtaZeroTau, ..base };
    let t = chi_two_term(&s).unwrap();
    // Independent evaluation: χ₁ − (ℓ^⋆/ρ)(−ρℓ⋆/2)^{τ₁}[1/(ρ+2) + ln ξ₀].
    let xi0 = (2.0f64 / 4.0).sqrt();
    let expect = 1.0 - 0.5 * 1.0f64.powf(1.0) * (0.25 + xi0.ln());
    assert!((t.chi - expect).abs() < 1e-14);
    assert!(chi_two_term(&TwoTermSpec { ell_sup: None, ..s }).is_err());
    let t = chi_two_term(&TwoTermSpec { theta: 1.0, ..base }).unwrap();
    assert_eq!(t.warnings.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identities_hold_for_random_powers(p in 1.1f64..6.0) {
        let nl = analyze_nonlinearity(&format!("t^{p}"), DEFAULT_U_MAX).unwrap();
        let (d1, d2) = nl.identity_defects().unwrap();
        prop_assert!(d1 <= 1e-3 && d2 <= 1e-3);
        prop_assert!(nl.m.is_infinite());
    }

    #[test]
    fn xi0_is_monotone_in_c(rho in 0.2f64..4.0, l1 in 0.0f64..1.0, c in 0.1f64..5.0) {
        let a = xi0_power(rho, l1, c).unwrap();
        let b = xi0_power(rho, l1, 1.1 * c).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn sublinear_m_dominated_by_lambda(s in 0.1f64..0.6) {
        let nl = analyze_nonlinearity(&format!("t^{s}"), DEFAULT_U_MAX).unwrap();
        let m = nl.m.finite().unwrap();
        prop_assert!((0.0..1e-2).contains(&m));
        prop_assert!(nl.lambda_sup.unwrap() >= m);
    }
}
