use sel_core::karamata::{analyze_nonlinearity, analyze_singular, KFunction, DEFAULT_U_MAX};
use sel_core::profile::*;

fn cube_profile() -> BlowupProfile {
    let f = analyze_nonlinearity("t^3", DEFAULT_U_MAX).unwrap();
    let k = KFunction::power(1.0, 1.0).unwrap();
    build_profile(&f, &k, ProfileVariant::KIntegrand, 1.0, &ProfileOptions::default()).unwrap()
}

#[test]
fn cube_profile_is_closed_form() {
    let p = cube_profile();
    let exact = |t: f64| 2.0 * 2f64.sqrt() / (t * t);
    assert!((p.h_at(0.1).unwrap() / 282.842712474619 - 1.0).abs() < 1e-8);
    assert!((p.h_exact(0.1).unwrap() / exact(0.1) - 1.0).abs() < 1e-10);
    for t in [1e-6, 1e-3, 0.05, 0.3] {
        let h = p.h_at(t).unwrap();
        assert!((h / exact(t) - 1.0).abs() < 1e-8, "t={t}");
        assert!((p.tail_map(h).unwrap() / (t * t / 2.0) - 1.0).abs() < 1e-10);
    }
    assert!(p.round_trip < 1e-8);
    assert!((p.xi0.unwrap() - 0.75f64.sqrt()).abs() < 1e-12);
    // Φ(y) = √2/y.
    assert!((p.tail_map(2.0).unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-12);
}

#[test]
fn table_shape() {
    let p = cube_profile();
    assert!(p.t.windows(2).all(|w| w[1] > w[0]));
    assert!(p.h.windows(2).all(|w| w[1] < w[0]));
    assert!(p.hp.iter().all(|&d| d < 0.0));
    let hp = p.h_prime(0.1).unwrap();
    assert!((hp / (-4.0 * 2f64.sqrt() / 1e-3) - 1.0).abs() < 1e-8);
    assert!(p.h_at(0.0).is_err());
}

#[test]
fn second_derivative_ratio_tends_to_its_limit() {
    let p = cube_profile();
    let ratios = p.second_derivative_ratios().unwrap();
    let (_, last) = *ratios.last().unwrap();
    // (2 + ρℓ₁)/(2 + ρ) with ρ = 2, ℓ₁ = 1/2.
    assert!((last / 0.75 - 1.0).abs() < 0.02, "{last}");
    let small = p.smallness_ratios().unwrap();
    let (_, a, b) = small[0];
    assert!(a.abs() < 1e-6 && b.abs() < 1e-6, "{a} {b}");
}

#[test]
fn predicted_rates() {
    let p = cube_profile();
    let one = p.predicted_rate(0.01, RateOrder::One).unwrap();
    assert!((one - p.xi0.unwrap() * p.h_at(0.01).unwrap()).abs() < 1e-9 * one);
    assert!((one / (6f64.sqrt() * 1e4) - 1.0).abs() < 1e-8);
    assert!(p.predicted_rate(0.01, RateOrder::Two).is_err());
    let p = p.with_two_term(0.0, 0.5);
    assert_eq!(p.predicted_rate(0.01, RateOrder::Two).unwrap(), one);
}

#[test]
fn sqrt_variant_round_trip() {
    let f = analyze_nonlinearity("t^2", DEFAULT_U_MAX).unwrap();
    let k = KFunction::user("sqrt(t)", 1.0).unwrap();
    let p = build_profile(&f, &k, ProfileVariant::SqrtKIntegrand, 1.0, &ProfileOptions::default()).unwrap();
    assert!(p.round_trip < 1e-8, "{}", p.round_trip);
}

#[test]
fn divergent_keller_osserman_is_refused() {
    let f = analyze_nonlinearity("t", DEFAULT_U_MAX).unwrap();
    let k = KFunction::power(1.0, 1.0).unwrap();
    assert!(build_profile(&f, &k, ProfileVariant::KIntegrand, 1.0, &ProfileOptions::default()).is_err());
}

#[test]
fn ode_profile_for_inverse_square_root() {
    let g = analyze_singular("t^(-1/2)", 1.0).unwrap();
    let p = profile_ode_g(&g, 1.0).unwrap();
    let c = (9.0f64 / 4.0).powf(2.0 / 3.0);
    for (t, h) in p.t.iter().zip(&p.h).skip(1) {
        if *t >= 1e-4 {
            assert!((h / (c * t.powf(4.0 / 3.0)) - 1.0).abs() < 1e-4, "t={t}");
        }
    }
    let checks = p.check(&g, &[0.5, 1.0, 1.5, 2.0]).unwrap();
    assert!(checks.all_hold(), "{checks:?}");
    assert!((checks.power_constant / c - 1.0).abs() < 1e-4);
    assert!(p.to_csv().starts_with("t,h,h_prime\n"));
}

#[test]
fn ode_profile_rejects_nonintegrable_g() {
    let g = analyze_singular("1/t", 1.0).unwrap();
    assert!(profile_ode_g(&g, 1.0).is_err());
}
