//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use sel_core::bifurcation::*;
use sel_core::karamata::*;
use sel_core::numerics::{integrate_radial_ivp, Classification, RadialIvp};
use sel_core::profile::*;
use sel_core::radial::*;
use sel_core::ScalarFn;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn sf(s: &str) -> ScalarFn {
    ScalarFn::parse(s).unwrap()
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn explicit_solution() -> Outcome {
    let (alpha, n) = (0.5f64, 3usize);
    let rhs = move |r: f64, u: f64, du: f64| Ok(u - 2f64.powf(alpha - 2.0) * r.powf(alpha) * du.abs().powf(2.0 - alpha));
    let grid: Vec<f64> = (0..=200).map(|i| 0.05 * i as f64).collect();
    let res = residual(&sf("t^2+6"), &rhs, n, &grid).map_err(|e| e.to_string())?;
    ensure(res <= 1e-10, format!("residual {res:e}"))?;
    let sol = integrate_radial_ivp(&rhs, &RadialIvp { tol: 1e-12, ..RadialIvp::new(6.0, n, 10.0) }).map_err(|e| e.to_string())?;
    ensure(*sol.r.last().unwrap() >= 10.0 - 1e-12, "IVP stopped early")?;
    let worst = sol.r.iter().zip(&sol.u).map(|(r, u)| (u / (r * r + 6.0) - 1.0).abs()).fold(0.0, f64::max);
    ensure(worst <= 1e-6, format!("IVP relative error {worst:e}"))?;
    Ok(format!("residual={res:.1e} ivp_rel_err={worst:.1e}"))
}

fn ko_battery() -> Outcome {
    let cases = [("t^2", true), ("t", false), ("t*ln(1+t)", false), ("t*ln(1+t)^4", true)];
    let mut right = 0;
    for (f, conv) in cases {
        let nl = analyze_nonlinearity(f, DEFAULT_U_MAX).map_err(|e| e.to_string())?;
        let v = keller_osserman(&nl, 1e-8).map_err(|e| e.to_string())?;
        if (conv && v.is_convergent()) || (!conv && v.is_divergent()) {
            right += 1;
        }
    }
    ensure(right == 4, format!("{right}/4 correct"))?;
    Ok("4/4 correct".into())
}

fn karamata_identities() -> Outcome {
    let mut worst = [0.0f64; 3];
    for p in [1.5, 2.0, 3.0, 5.0] {
        let nl = analyze_nonlinearity(&format!("t^{p}"), DEFAULT_U_MAX).map_err(|e| e.to_string())?;
        let get = |l: &Limit, what: &str| l.finite().ok_or(format!("{what} not finite for p={p}"));
        let d = [
            (get(&nl.theta, "ϑ")? - p).abs(),
            (get(&nl.gamma, "γ")? - 1.0 / (p + 1.0)).abs(),
            (get(&nl.rho, "ρ")? - (p - 1.0)).abs(),
        ];
        for i in 0..3 {
            worst[i] = worst[i].max(d[i]);
        }
    }
    ensure(worst[0] <= 1e-3 && worst[1] <= 1e-3 && worst[2] <= 0.02, format!("deviations {worst:?}"))?;
    Ok(format!("max |Δϑ|={:.1e} |Δγ|={:.1e} |Δρ|={:.1e}", worst[0], worst[1], worst[2]))
}

fn ell1_battery() -> Outcome {
    let mut worst_pow = 0.0f64;
    for a in [0.5, 1.0, 2.0, 4.0] {
        let k = KFunction::user(&format!("t^{a}"), 1.0).map_err(|e| e.to_string())?;
        worst_pow = worst_pow.max((k.ell1 - 1.0 / (a + 1.0)).abs());
    }
    ensure(worst_pow <= 1e-3, format!("power ℓ₁ off by {worst_pow:e}"))?;
    let mut worst_cons = 0.0f64;
    for m in [1.0, 2.0] {
        for (kind, want) in [(KKind::ExpA, 0.0), (KKind::InvS, 1.0 / (m + 1.0)), (KKind::InvLnS, 1.0)] {
            let k = make_k(kind, &format!("t^{m}"), 1.0).map_err(|e| format!("{kind:?}, m={m}: {e}"))?;
            worst_cons = worst_cons.max((k.ell1 - want).abs());
        }
    }
    ensure(worst_cons <= 2e-2, format!("constructed ℓ₁ off by {worst_cons:e}"))?;
    Ok(format!("powers {worst_pow:.1e}, constructors {worst_cons:.1e}"))
}

fn blowup_rate() -> Outcome {
    let t0 = Instant::now();
    let f = analyze_nonlinearity("t^3", DEFAULT_U_MAX).map_err(|e| e.to_string())?;
    let prob = LogisticProblem {
        a_lin: 0.0,
        b: sf("t^2"),
        f: f.clone(),
        domain: Domain::Exterior { r0: 0.0, r: 1.0, outer_value: 6f64.sqrt() },
        dim: 1,
        vanishing_radius: None,
        normalization: ProfileVariant::KIntegrand,
    };
    let levels = (0..=8).map(|j| 10.0 * 4f64.powi(j)).collect();
    let sol = boundary_blowup(&prob, &BlowupOptions { n_levels: levels, ..Default::default() }).map_err(|e| e.to_string())?;
    let k = KFunction::power(1.0, 1.0).map_err(|e| e.to_string())?;
    let profile = build_profile(&f, &k, ProfileVariant::KIntegrand, 1.0, &ProfileOptions::default()).map_err(|e| e.to_string())?;
    let h_err = (profile.h_at(0.1).map_err(|e| e.to_string())? / (2.0 * 2f64.sqrt() / 0.01) - 1.0).abs();
    ensure(h_err < 1e-8, format!("profile h off by {h_err:e}"))?;
    let xi0 = profile.xi0.unwrap_or(f64::NAN);
    ensure((xi0 - 0.75f64.sqrt()).abs() < 1e-12, format!("ξ₀ = {xi0}"))?;
    let table = measure_boundary_rate(&sol, &profile).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    ensure((table.limit - 1.0).abs() <= 0.02, format!("ratio limit {}", table.limit))?;
    ensure(secs < 5.0, format!("took {secs:.2} s"))?;
    Ok(format!("u/(ξ₀h) → {:.6} in {secs:.2} s", table.limit))
}

fn system_dichotomy() -> Outcome {
    let sqrt = analyze_nonlinearity("t^(1/2)", DEFAULT_U_MAX).map_err(|e| e.to_string())?;
    let sys = |p: &str, a: f64| SystemProblem { p: sf(p), q: sf(p), f: sqrt.clone(), g: sqrt.clone(), sigma: None, a, b: a };
    let opts = PicardOptions::default();
    let large = solve_system(&sys("1", 1.0), 10.0, 3, &opts).map_err(|e| e.to_string())?;
    ensure(large.classification == Classification::EntireLarge, format!("p≡1 gave {}", large.classification.label()))?;
    let below = large.r.iter().zip(&large.u).map(|(r, u)| 1.0 + r * r / 6.0 - u).fold(f64::NEG_INFINITY, f64::max);
    ensure(below <= 1e-12, format!("lower bound violated by {below:e}"))?;

    let bounded = |r: f64, a: f64| solve_system(&sys("(1+t^2)^(-2)", a), r, 3, &opts).map_err(|e| e.to_string());
    let s50 = bounded(50.0, 1.0)?;
    let s100 = bounded(100.0, 1.0)?;
    for s in [&s50, &s100] {
        ensure(s.classification == Classification::Bounded, format!("decaying p gave {}", s.classification.label()))?;
    }
    let drift = (s50.meta.values["u_limit"] - s100.meta.values["u_limit"]).abs();
    ensure(drift < 1e-6, format!("plateau drift {drift:e}"))?;

    let shifted = bounded(50.0, 1.01)?;
    let cp = s50.meta.values["moment_p"];
    // √t is 1/2-Lipschitz on [1, ∞), which contains both solutions.
    let bound = lipschitz_constant(cp, cp, 0.5) * 0.01;
    let diff = s50.u.iter().zip(&shifted.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(diff <= bound, format!("paired-run difference {diff:e} > {bound:e}"))?;
    Ok(format!("drift={drift:.1e} paired diff={diff:.4} ≤ {bound:.4}"))
}

fn picard_properties() -> Outcome {
    let f = analyze_nonlinearity("t^(1/2)", DEFAULT_U_MAX).map_err(|e| e.to_string())?;
    let opts = PicardOptions::default();
    // Iterates that decrease in k are reported as errors by the solver.
    let mut margin = f64::INFINITY;
    for (psi, r) in [("1", 10.0), ("(1+t)^(-3)", 50.0), ("1/(t^2+2)", 20.0)] {
        let s = picard_gradient_entire(&RadialPotential::parse(psi).map_err(|e| e.to_string())?, &f, 1.0, r, 3, &opts)
            .map_err(|e| format!("ψ = {psi}: {e}"))?;
        margin = margin.min(s.meta.values["growth_margin"]);
        ensure(s.u.windows(2).all(|w| w[1] >= w[0]), format!("ψ = {psi}: w not nondecreasing in r"))?;
    }
    ensure(margin >= 0.0, format!("growth bound violated (margin {margin:e})"))?;
    let pot = RadialPotential::envelopes(sf("(t^2+1)/((t^2+1)^2+1)"), sf("1/(t^2+2)"));
    let v = check_slow_variation(&pot, 1.0, 1e-8).map_err(|e| e.to_string())?;
    ensure(v.is_convergent(), format!("example potential is {}", v.label()))?;
    ensure((v.slope() + 2.0).abs() <= 0.1, format!("slope {}", v.slope()))?;
    Ok(format!("growth margin {margin:.2e}, slope {:.4}", v.slope()))
}

/// `J₀` by its power series and its first zero by bisection.
fn bessel_j0_zero() -> f64 {
    let j0 = |x: f64| {
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        for k in 1..60 {
            term *= -(x * x / 4.0) / (k as f64 * k as f64);
            sum += term;
        }
        sum
    };
    let (mut a, mut b) = (2.0f64, 3.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if j0(a) * j0(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

fn eigenvalues() -> Outcome {
    let pi2 = PI * PI;
    let e = |r: sel_core::Result<EigenResult>| r.map(|e| e.lambda1).map_err(|e| e.to_string());
    let checks = [
        ("N=1 symmetric", e(lambda1_ball(1, 1.0))?, pi2 / 4.0, 1e-8),
        ("N=1 interval", e(lambda1_interval(1.0))?, pi2, 1e-8),
        ("N=3", e(lambda1_ball(3, 1.0))?, pi2, 1e-8),
        ("N=2", e(lambda1_ball(2, 1.0))?, bessel_j0_zero().powi(2), 1e-6),
    ];
    for (what, got, want, tol) in checks {
        ensure((got - want).abs() <= tol, format!("{what}: {got} vs {want}"))?;
    }
    let mut scale = 0.0f64;
    for n in [1, 2, 3] {
        let base = e(lambda1_ball(n, 1.0))?;
        for r in [0.5, 2.0] {
            scale = scale.max((e(lambda1_ball(n, r))? * r * r - base).abs());
        }
    }
    ensure(scale <= 1e-8, format!("R-scaling defect {scale:e}"))?;
    Ok(format!("N=2 λ₁={:.10}, scaling defect {scale:.1e}", checks[3].1))
}

fn bifurcation_threshold() -> Outcome {
    let pi2 = PI * PI;
    let mut p = LefProblem::new(1, DomainMode::Interval);
    p.f = Some(sf("t"));
    p.g = Some(sf("t^(-1/2)"));
    let fr = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.05, 1.1];
    let grid: Vec<f64> = fr.iter().map(|x| x * pi2).collect();
    let d = sweep(&p, &grid, &LefOptions::default()).map_err(|e| e.to_string())?;
    for pt in &d.points {
        let below = pt.lambda <= 0.95 * pi2 * (1.0 + 1e-12);
        let ok = match &pt.status {
            SweepStatus::Solved { .. } => below,
            SweepStatus::NoSolution => !below,
            SweepStatus::Failed { reason } => return Err(format!("λ = {}: {reason}", pt.lambda)),
        };
        ensure(ok, format!("λ/π² = {}: {:?}", pt.lambda / pi2, pt.status))?;
    }
    ensure(d.monotone, "centre values not increasing")?;
    let mut c = (f64::INFINITY, 0.0f64);
    for lam in [0.0, 0.5 * pi2] {
        let out = solve_lef(&LefProblem { lambda: lam, ..p.clone() }, &LefOptions::default()).map_err(|e| e.to_string())?;
        let (c1, c2) = (out.c1.ok_or("no c₁")?, out.c2.ok_or("no c₂")?);
        ensure(c1 > 0.0 && c2.is_finite(), format!("c₁={c1}, c₂={c2}"))?;
        let sol = out.solution.ok_or("no solution")?;
        for (x, u) in sol.r.iter().zip(&sol.u) {
            let dist = x.min(1.0 - x);
            if dist > 0.0 && dist < 0.2 {
                ensure(c1 * dist <= u * (1.0 + 1e-12) && *u <= c2 * dist * (1.0 + 1e-12), format!("d-bound fails at x={x}"))?;
            }
        }
        c = (c.0.min(c1), c.1.max(c2));
    }
    Ok(format!("λ* ∈ (0.95π², 1.05π²], c₁={:.3}, c₂={:.3}", c.0, c.1))
}

fn gelfand_criterion() -> Outcome {
    let lams: Vec<f64> = (1..=10).map(|i| 0.25 * i as f64).collect();
    let mus: Vec<f64> = (1..=10).map(|i| 2.0 * i as f64).collect();
    let pts = gelfand_scan(&sf("exp(-t)"), 0.0, &lams, &mus, 1, DomainMode::Interval, 1.0, &LefOptions::default())
        .map_err(|e| e.to_string())?;
    let decisive: Vec<_> = pts.iter().filter(|p| p.margin.abs() > 0.05).collect();
    let bad = decisive.iter().filter(|p| p.predicted != p.solved).count();
    ensure(bad == 0, format!("{bad} of {} decisive points disagree", decisive.len()))?;
    let y = young_constant(0.0, 1.5, PI * PI).map_err(|e| e.to_string())?;
    ensure(y.inq_holds, format!("sampled inequality fails by {:e} at C = {}", y.inq_excess, y.c))?;
    Ok(format!("{}/{} decisive points agree, Young C = {}", decisive.len() - bad, decisive.len(), y.c))
}

fn profile_ode() -> Outcome {
    let g = analyze_singular("t^(-1/2)", 1.0).map_err(|e| e.to_string())?;
    let p = profile_ode_g(&g, 1.0).map_err(|e| e.to_string())?;
    let c = (9.0f64 / 4.0).powf(2.0 / 3.0);
    let worst = p
        .t
        .iter()
        .zip(&p.h)
        .filter(|(t, _)| **t >= 1e-4)
        .map(|(t, h)| (h / (c * t.powf(4.0 / 3.0)) - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-4, format!("h/(C t^(4/3)) off by {worst:e}"))?;
    let checks = p.check(&g, &[0.5, 1.0, 1.5, 2.0]).map_err(|e| e.to_string())?;
    ensure(checks.has_excess <= 1e-9, format!("t h' ≤ 2h fails by {:e}", checks.has_excess))?;
    ensure(checks.lemma_excess.iter().all(|(_, e)| *e <= 0.0), format!("gradient bound fails: {:?}", checks.lemma_excess))?;
    Ok(format!("power-law rel err {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("explicit entire large solution", explicit_solution),
        ("Keller-Osserman battery", ko_battery),
        ("regular-variation identities", karamata_identities),
        ("boundary weight limits", ell1_battery),
        ("boundary blow-up rate", blowup_rate),
        ("system dichotomy", system_dichotomy),
        ("Picard properties", picard_properties),
        ("first eigenvalues", eigenvalues),
        ("bifurcation threshold", bifurcation_threshold),
        ("gradient-term criterion", gelfand_criterion),
        ("profile ODE invariants", profile_ode),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
