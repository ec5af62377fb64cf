use sel_core::karamata::{analyze_nonlinearity, KFunction, DEFAULT_U_MAX};
use sel_core::numerics::{Classification, RadialSolution};
use sel_core::profile::{build_profile, BlowupProfile, ProfileOptions, ProfileVariant, RateOrder};
use sel_core::radial::*;
use sel_core::ScalarFn;

fn sf(s: &str) -> ScalarFn {
    ScalarFn::parse(s).unwrap()
}

fn sqrt_f() -> sel_core::karamata::Nonlinearity {
    analyze_nonlinearity("t^(1/2)", DEFAULT_U_MAX).unwrap()
}

fn cube_profile(alpha: f64) -> BlowupProfile {
    let f = analyze_nonlinearity("t^3", DEFAULT_U_MAX).unwrap();
    let k = KFunction::power(alpha, 1.0).unwrap();
    build_profile(&f, &k, ProfileVariant::KIntegrand, 1.0, &ProfileOptions::default()).unwrap()
}

#[test]
fn residual_examples() {
    let grid: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
    let alpha: f64 = 0.5;
    let rhs = move |r: f64, u: f64, du: f64| Ok(u - 2f64.powf(alpha - 2.0) * r.powf(alpha) * du.abs().powf(2.0 - alpha));
    assert!(residual(&sf("t^2+6"), &rhs, 3, &grid).unwrap() <= 1e-10);
    assert_eq!(residual(&sf("1"), &|_, _, _| Ok(0.0), 3, &grid).unwrap(), 0.0);
    assert!(residual(&sf("sin(t)"), &|_, u, _| Ok(-u), 1, &grid).unwrap() <= 1e-12);
    // A wrong candidate is visibly wrong.
    assert!(residual(&sf("t^2+5"), &rhs, 3, &grid).unwrap() > 0.5);
}

#[test]
fn slow_variation_examples() {
    assert_eq!(check_slow_variation(&RadialPotential::parse("1/(1+t)").unwrap(), 1.0, 1e-8).unwrap().value(), Some(0.0));
    let pot = RadialPotential::envelopes(sf("(t^2+1)/((t^2+1)^2+1)"), sf("1/(t^2+2)"));
    let v = check_slow_variation(&pot, 1.0, 1e-8).unwrap();
    assert!(v.is_convergent());
    assert!((v.slope() + 2.0).abs() < 0.1, "{v:?}");
    let pot = RadialPotential::radial(sf("0")).with_gap(sf("1/(1+t)"));
    assert!(check_slow_variation(&pot, 1.0, 1e-8).unwrap().is_divergent());
}

#[test]
fn large_condition_examples() {
    assert!(check_large_condition(&sf("1"), 3, 1e-8).unwrap().verdict.is_divergent());
    let c = check_large_condition(&sf("(1+t)^(-3)"), 3, 1e-8).unwrap();
    assert!(c.verdict.is_convergent());
    assert!((c.bound.unwrap() - 0.5).abs() < 1e-8);
    assert_eq!(c.bound_holds, Some(true));
    let z = check_large_condition(&sf("0"), 3, 1e-8).unwrap();
    assert_eq!(z.verdict.value(), Some(0.0));
}

#[test]
fn picard_with_zero_potential_is_constant() {
    let s = picard_gradient_entire(&RadialPotential::parse("0").unwrap(), &sqrt_f(), 2.0, 5.0, 3, &PicardOptions::default()).unwrap();
    assert!(s.u.iter().all(|w| (w - 2.0).abs() < 1e-14));
    assert!(s.meta.iterations <= 2);
}

#[test]
fn picard_dichotomy() {
    let f = sqrt_f();
    let big = picard_gradient_entire(&RadialPotential::parse("1").unwrap(), &f, 1.0, 10.0, 3, &PicardOptions::default()).unwrap();
    assert_eq!(big.classification, Classification::EntireLarge);
    assert!(big.u.windows(2).all(|w| w[1] >= w[0]));
    assert!(big.meta.values["growth_margin"] >= 0.0);
    let big20 = picard_gradient_entire(&RadialPotential::parse("1").unwrap(), &f, 1.0, 20.0, 3, &PicardOptions::default()).unwrap();
    assert!(big20.u.last().unwrap() > big.u.last().unwrap());

    let lim = |r: f64| {
        let s = picard_gradient_entire(&RadialPotential::parse("(1+t)^(-3)").unwrap(), &f, 1.0, r, 3, &PicardOptions::default())
            .unwrap();
        assert_eq!(s.classification, Classification::Bounded);
        s.meta.values["limit"]
    };
    assert!((lim(50.0) - lim(100.0)).abs() < 1e-6);
}

#[test]
fn picard_rejects_superlinear_f() {
    let f = analyze_nonlinearity("t^2", DEFAULT_U_MAX).unwrap();
    assert!(picard_gradient_entire(&RadialPotential::parse("1").unwrap(), &f, 1.0, 5.0, 3, &PicardOptions::default()).is_err());
}

fn system(p: &str, a: f64) -> SystemProblem {
    SystemProblem { p: sf(p), q: sf(p), f: sqrt_f(), g: sqrt_f(), sigma: None, a, b: a }
}

#[test]
fn system_dichotomy_and_lower_bound() {
    let s = solve_system(&system("1", 1.0), 10.0, 3, &PicardOptions::default()).unwrap();
    assert_eq!(s.classification, Classification::EntireLarge);
    assert!(s.meta.values["lower_bound_defect"] <= 0.0);
    for (r, u) in s.r.iter().zip(&s.u) {
        assert!(*u >= 1.0 + r * r / 6.0 - 1e-9);
    }
    let lim = |r: f64| {
        let s = solve_system(&system("(1+t^2)^(-2)", 1.0), r, 3, &PicardOptions::default()).unwrap();
        assert_eq!(s.classification, Classification::Bounded);
        s.meta.values["u_limit"]
    };
    assert!((lim(50.0) - lim(100.0)).abs() < 1e-6);
}

#[test]
fn system_with_zero_potentials() {
    let s = solve_system(&system("0", 1.5), 5.0, 3, &PicardOptions::default()).unwrap();
    assert!(s.u.iter().all(|u| *u == 1.5));
    assert!(s.v.unwrap().iter().all(|v| *v == 1.5));
}

#[test]
fn lipschitz_bound_for_paired_runs() {
    assert_eq!(lipschitz_constant(3.0, 2.0, 0.0), 1.0);
    assert!((lipschitz_constant(1.0, 1.0, 1.0) - 2.0 * 1f64.exp()).abs() < 1e-15);
    let a = solve_system(&system("(1+t^2)^(-2)", 1.0), 20.0, 3, &PicardOptions::default()).unwrap();
    let b = solve_system(&system("(1+t^2)^(-2)", 1.01), 20.0, 3, &PicardOptions::default()).unwrap();
    let cp = a.meta.values["moment_p"];
    // √t is 1/2-Lipschitz on [1, ∞), where both solutions live.
    let bound = lipschitz_constant(cp, cp, 0.5) * 0.01;
    let diff = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff <= bound, "{diff} > {bound}");
}

fn x2u3() -> LogisticProblem {
    LogisticProblem {
        a_lin: 0.0,
        b: sf("t^2"),
        f: analyze_nonlinearity("t^3", DEFAULT_U_MAX).unwrap(),
        domain: Domain::Exterior { r0: 0.0, r: 1.0, outer_value: 6f64.sqrt() },
        dim: 1,
        vanishing_radius: None,
        normalization: ProfileVariant::KIntegrand,
    }
}

fn quad_levels() -> Vec<f64> {
    (0..=8).map(|j| 10.0 * 4f64.powi(j)).collect()
}

#[test]
fn blowup_rate_for_x2u3() {
    let sol = boundary_blowup(&x2u3(), &BlowupOptions { n_levels: quad_levels(), ..Default::default() }).unwrap();
    assert_eq!(sol.classification, Classification::BoundaryBlowup(0.0));
    let table = measure_boundary_rate(&sol, &cube_profile(1.0)).unwrap();
    assert!((table.limit - 1.0).abs() < 0.02, "{}", table.limit);
    // u·x² → √6 at the grid points the rate table uses.
    let near = table.rows.first().unwrap();
    assert!((near.ratio_xi0 - 1.0).abs() < 0.01);
}

#[test]
fn blowup_on_the_interval_with_constant_weight() {
    let prob = LogisticProblem {
        b: sf("1"),
        domain: Domain::Ball { r: 1.0 },
        ..x2u3()
    };
    let sol = boundary_blowup(&prob, &BlowupOptions { n_levels: quad_levels(), ..Default::default() }).unwrap();
    let table = measure_boundary_rate(&sol, &cube_profile(0.0)).unwrap();
    assert!((table.limit - 1.0).abs() < 0.02, "{}", table.limit);
}

#[test]
fn blowup_levels_are_monotone_and_single_level_is_undetermined() {
    let one = boundary_blowup(&x2u3(), &BlowupOptions { n_levels: vec![40.0], ..Default::default() }).unwrap();
    assert_eq!(one.classification, Classification::Undetermined);
    let two = boundary_blowup(&x2u3(), &BlowupOptions { n_levels: vec![160.0], ..Default::default() }).unwrap();
    assert!(one.u.iter().zip(&two.u).all(|(a, b)| b >= a));
}

#[test]
fn whole_space_is_rejected() {
    let prob = LogisticProblem { domain: Domain::WholeSpace { r_max: 10.0 }, ..x2u3() };
    assert!(boundary_blowup(&prob, &BlowupOptions::default()).is_err());
}

#[test]
fn rate_table_of_the_prediction_is_one() {
    let p = cube_profile(1.0);
    let r: Vec<f64> = (1..=50).map(|i| 0.002 * i as f64).collect();
    let u: Vec<f64> = r.iter().map(|d| p.predicted_rate(*d, RateOrder::One).unwrap()).collect();
    let sol = RadialSolution::new(1, r.clone(), u, vec![0.0; r.len()], Classification::BoundaryBlowup(0.0));
    let t = measure_boundary_rate(&sol, &p).unwrap();
    assert!(t.rows.iter().all(|row| (row.ratio_xi0 - 1.0).abs() < 1e-12));
    assert!((t.limit - 1.0).abs() < 1e-12);
}

#[test]
fn rate_table_rejects_mismatched_variant() {
    let sol = boundary_blowup(&x2u3(), &BlowupOptions { n_levels: quad_levels(), ..Default::default() }).unwrap();
    let f = analyze_nonlinearity("t^3", DEFAULT_U_MAX).unwrap();
    let k = KFunction::power(2.0, 1.0).unwrap();
    let p = build_profile(&f, &k, ProfileVariant::SqrtKIntegrand, 1.0, &ProfileOptions::default()).unwrap();
    assert!(measure_boundary_rate(&sol, &p).is_err());
}
