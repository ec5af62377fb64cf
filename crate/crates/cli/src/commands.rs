use std::collections::BTreeMap;

use sel_core::bifurcation::{
    gelfand_scan, lambda1_ball, lambda1_interval, solve_lef, sweep, young_constant, DomainMode, LefOptions,
    LefProblem, LefStatus, SweepStatus,
};
use sel_core::karamata::{
    analyze_fn, analyze_singular, chi_two_term, ell_limits, keller_osserman, make_k, xi0_power, xi0_via_a,
    GrowthCase, KFunction, KKind, Nonlinearity, TwoTermSpec,
};
use sel_core::numerics::{classify_origin_integral, classify_tail_integral, ConvergenceVerdict, RadialSolution};
use sel_core::profile::{build_profile, profile_ode_g, BlowupProfile, ProfileOptions, ProfileVariant};
use sel_core::radial::{
    boundary_blowup, measure_boundary_rate, picard_gradient_entire, solve_system,
    BlowupOptions, Domain, LogisticProblem, PicardOptions, RadialPotential, SystemProblem,
};
use sel_core::ScalarFn;
use serde_json::{json, Value};

use crate::config::{require, Config};
use crate::error::CliError;
use crate::output::{num_json, Report};

type Fns = BTreeMap<&'static str, ScalarFn>;

const DEFAULT_U_MAX: f64 = 1e8;

pub fn run(cfg: &Config) -> Result<Report, CliError> {
    let fns = cfg.parse_functions()?;
    let mut rep = Report::default();
    rep.text("command", cfg.command());
    match cfg.command() {
        "check-ko" => check_ko(cfg, &fns, &mut rep)?,
        "classify" => classify(cfg, &fns, &mut rep)?,
        "analyze-f" => analyze(cfg, &fns, &mut rep)?,
        "ell" => ell(cfg, &fns, &mut rep)?,
        "make-k" => make_k_cmd(cfg, &mut rep)?,
        "profile" => profile(cfg, &fns, &mut rep)?,
        "xi0" => xi0(cfg, &fns, &mut rep)?,
        "chi" => chi(cfg, &mut rep)?,
        "solve-entire" => solve_entire(cfg, &fns, &mut rep)?,
        "solve-system" => system(cfg, &fns, &mut rep)?,
        "blowup" => blowup(cfg, &fns, &mut rep, false)?,
        "rate" => blowup(cfg, &fns, &mut rep, true)?,
        "eigen" => eigen(cfg, &mut rep)?,
        "lef" => lef(cfg, &fns, &mut rep)?,
        "sweep" => sweep_cmd(cfg, &fns, &mut rep)?,
        "gelfand" => gelfand(cfg, &fns, &mut rep)?,
        "young" => young(cfg, &mut rep)?,
        other => return Err(CliError::Config(format!("unknown command `{other}`"))),
    }
    Ok(rep)
}

fn func<'a>(fns: &'a Fns, name: &str) -> Result<&'a ScalarFn, CliError> {
    fns.get(name)
        .ok_or_else(|| CliError::Config(format!("missing required key `functions.{name}`")))
}

fn nonlinearity(cfg: &Config, fns: &Fns, name: &str) -> Result<Nonlinearity, CliError> {
    Ok(analyze_fn(func(fns, name)?.clone(), cfg.numerics.u_max.unwrap_or(DEFAULT_U_MAX))?)
}

fn tol(cfg: &Config, default: f64) -> f64 {
    cfg.numerics.tol.unwrap_or(default)
}

fn verdict(rep: &mut Report, prefix: &str, v: &ConvergenceVerdict) {
    rep.text(&format!("{prefix}verdict"), v.label());
    if let Some(x) = v.value() {
        rep.num(&format!("{prefix}value"), x);
    }
    rep.num(&format!("{prefix}slope"), v.slope());
    if let ConvergenceVerdict::Inconclusive { diagnostics, .. } = v {
        rep.notes.push(diagnostics.clone());
    }
}

fn mode(cfg: &Config) -> Result<DomainMode, CliError> {
    match require(&cfg.problem.mode, "mode")?.as_str() {
        "ball" => Ok(DomainMode::Ball),
        "interval" => Ok(DomainMode::Interval),
        m => Err(CliError::Config(format!("mode must be `ball` or `interval`, got `{m}`"))),
    }
}

fn variant(cfg: &Config) -> Result<ProfileVariant, CliError> {
    match cfg.problem.variant.as_deref().unwrap_or("k") {
        "k" => Ok(ProfileVariant::KIntegrand),
        "sqrt-k" => Ok(ProfileVariant::SqrtKIntegrand),
        v => Err(CliError::Config(format!("variant must be `k` or `sqrt-k`, got `{v}`"))),
    }
}

fn k_function(cfg: &Config, fns: &Fns) -> Result<Option<KFunction>, CliError> {
    let nu = cfg.problem.nu.unwrap_or(1.0);
    Ok(match (fns.get("k"), cfg.problem.alpha) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("give either `functions.k` or `alpha`, not both".into()))
        }
        (Some(k), None) => Some(KFunction::from_fn(k.clone(), nu, KKind::User)?),
        (None, Some(a)) => Some(KFunction::power(a, nu)?),
        (None, None) => None,
    })
}

fn check_ko(cfg: &Config, fns: &Fns, rep: &mut Report) -> Result<(), CliError> {
    let f = nonlinearity(cfg, fns, "f")?;
    let v = keller_osserman(&f, tol(cfg, 1e-8))?;
    verdict(rep, "", &v);
    rep.notes.extend(f.warnings.iter().cloned());
    Ok(())
}

fn classify(cfg: &Config, fns: &Fns, rep: &mut Report) -> Result<(), CliError> {
    let f = func(fns, "f")?;
    let t = tol(cfg, 1e-8);
    let g = |x: f64| Ok(f.eval(x)?);
    let v = match cfg.problem.end.as_deref().unwrap_or("tail") {
        "tail" => classify_tail_integral(g, cfg.problem.lower.unwrap_or(1.0), t)?,
        "origin" => classify_origin_integral(g, cfg.problem.upper.unwrap_or(1.0), t)?,
        e => return Err(CliError::Config(format!("end must be `tail` or `origin`, got `{e}`"))),
    };
    verdict(rep, "", &v);
    Ok(())
}

fn analyze(cfg: &Config, fns: &Fns, rep: &mut Report) -> Result<(), CliError> {
    let f = nonlinearity(cfg, fns, "f")?;
    rep.text("theta", &f.theta.label());
    rep.text("gamma", &f.gamma.label());
    rep.text("rho", &f.rho.label());
    rep.text("m", &f.m.label());
    match f.lambda_sup {
        Some(l) => rep.num("lambda_sup", l),
        None => rep.text("lambda_sup", "none"),
    }
    if let Some((a, b)) = f.identity_defects() {
        rep.num("theta_gamma_defect", a);
        rep.num("rho_theta_defect", b);
    }
    let ko = keller_osserman(&f, tol(cfg, 1e-8))?;
    rep.text("keller_osserman", ko.label());
    rep.detail("limits", json!({ "theta": f.theta, "gamma": f.gamma, "rho": f.rho, "m": f.m }));
    rep.notes.extend(f.warnings.iter().cloned());
    Ok(())
}

fn ell(cfg: &Config, fns: &Fns, rep: &mut Report) -> Result<(), CliError> {
    let k = func(fns, "k")?;
    let e = ell_limits(k, cfg.problem.nu.unwrap_or(1.0))?;
    rep.num("ell0", e.ell0);
    rep.num("ell1", e.ell1);
    rep.num("ell0_err", e.ell0_err);
    rep.num("ell1_err", e.ell1_err);
    rep.num("t_min", e.t_min);
    Ok(())
}

fn make_k_cmd(cfg: &Config, rep: &mut Report) -> Result<(), CliError> {
    let kind = match require(&cfg.problem.kind, "kind")?.as_str() {
        "exp-a" => KKind::ExpA,
        "inv-s" => KKind::InvS,
        "inv-ln-s" => KKind::InvLnS,
        k => return Err(CliError::Config(format!("kind must be exp-a, inv-s or inv-ln-s, got `{k}`"))),
    };
    let s = require(&cfg.functions.s, "functions.S")?;
    let k = make_k(kind, &s, require(&cfg.problem.d, "D")?)?;
    rep.text("k", &k.k.to_string());
    rep.num("nu", k.nu);
    rep.num("ell0", k.ell0);
    rep.num("ell1", k.ell1);
    if let Some(p) = k.predicted_ell1 {
        rep.num("predicted_ell1", p);
    }
    Ok(())
}

fn profile(cfg: &Config, fns: &Fns, rep: &mut Report) -> Result<(), CliError> {
    if cfg.problem.variant.as_deref() == Some("ode") {
        let src = require(&cfg.functions.g, "functions.g")?;
        let g = analyze_singular(&src, 1.0)?;
        let p = profile_ode_g(&g, cfg.numerics.t_max.unwrap_or(1.0))?;
        let powers = cfg.problem.powers.clone().unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.0]);
        let c = p.check(&g, &powers)?;
        rep.num("alpha", p.alpha);
        rep.num("beta", p.beta);
        rep.num("c_start", p.c_start);
        rep.num("has_excess", c.has_excess);
        rep.num("lemma_c1", c.lemma_c1);
        rep.num("lemma_c2", c.lemma_c2);
        rep.put("checks_hold", c.all_hold());
        rep.detail("checks", serde_json::to_value(&c).expect("json"));
        rep.table("", p.to_csv());
        return Ok(());
    }
    let p = build(cfg, fns)?;
    match p.xi0 {
        Some(x) => rep.num("xi0", x),
        None => rep.text("xi0", "none"),
    }
    rep.num("round_trip", p.round_trip);
    rep.text("variant", p.variant.label());
    rep.notes.extend(p.warnings.iter().cloned());
    rep.table("", p.to_csv());
    Ok(())
}

fn build(cfg: &Config, fns: &Fns) -> Result<BlowupProfile, CliError> {
    let f = nonlinearity(cfg, fns, "f")?;
    let k = k_function(cfg, fns)?
        .ok_or_else(|| CliError::Config("missing required key `functions.k` (or `alpha`)".into()))?;
    Ok(build_profile(&f, &k, variant(cfg)?, cfg.problem.c.unwrap_or(1.0), &ProfileOptions::default())?)
}

fn xi0(cfg: &Config, fns: &Fns, rep: &mut Report) -> Result<(), CliError> {
    let c = cfg.problem.c.unwrap_or(1.0);
    if let Some(rho) = cfg.problem.rho {
        let x = xi0_power(rho, require(&cfg.problem.ell1, "ell1")?, c)?;
        rep.num("xi0", x);
        return Ok(());
    }
    let f = nonlinearity(cfg, fns, "f")?;
    let ell1 = match (cfg.problem.ell1, k_function(cfg, fns)?) {
        (Some(l), _) => l,
        (None, Some(k)) => k.ell1,
        (None, None) => return Err(CliError::Config("missing required key `ell1` (or `functions.k`)".into())),
    };
    let gamma = f
        .gamma
        .finite()
        .ok_or_else(|| sel_core::Error::Numerical(format!("γ of `{}` has no finite limit", f.f)))?;
    rep.num("gamma", gamma);
    rep.num("ell1", ell1);
    rep.num("xi0", xi0_via_a(&f, gamma, ell1, c)?);
    Ok(())
}

fn chi(cfg: &Config, rep: &mut Report) -> Result<(), CliError> {
    let p = &cfg.problem;
    let case = match p.case.as_deref().unwrap_or("pure-power") {
        "pure-power" => GrowthCase::PurePower,
        "eta-nonzero" => GrowthCase::EtaNonzero,
        "eta-zero-tau" => GrowthCase::EtaZeroTau,
        c => return Err(CliError::Config(format!("unknown case `{c}`"))),
    };
    let inputs = TwoTermSpec {
        rho: require(&p.rho, "rho")?,
        zeta: require(&p.zeta, "zeta")?,
        theta: require(&p.theta, "theta")?,
        ell_star: require(&p.ell_star, "ell_star")?,
        ell_sup: p.ell_sup,
        c_tilde: require(&p.c_tilde, "c_tilde")?,
        case,
    };
    let t = chi_two_term(&inputs)?;
    rep.num("varpi", t.varpi);
    rep.num("chi", t.chi);
    rep.num("tau1", t.tau1);
    rep.num("xi0", t.xi0);
    rep.notes.extend(t.warnings);
    Ok(())
}

fn picard_options(cfg: &Config) -> PicardOptions {
    let d = PicardOptions::default();
    PicardOptions { panels: cfg.numerics.panels.unwrap_or(d.panels), tol: tol(cfg, d.tol) }
}

fn solution_report(rep: &mut Report, sol: &RadialSolution) {
    rep.text("classification", &sol.classification.label());
    for (k, v) in &sol.meta.values {
        rep.num(k, *v);
    }
    for (k, v) in &sol.meta.tags {
        rep.text(k, v);
    }
    rep.notes.extend(sol.meta.notes.iter().cloned());
    rep.table("", sol.to_csv());
}

fn solve_entire(cfg: &Config, fns: &Fns, rep: &mut Report) -> Result<(), CliError> {
    let psi = fns
        .get("psi")
        .or_else(|| fns.get("p"))
        .ok_or_else(|| CliError::Config("missing required key `functions.psi` (or `functions.p`)".into()))?
        .clone();
    let mut pot = match fns.get("phi") {
        Some(phi) => RadialPotential::envelopes(phi.clone(), psi.clone()),
        None => RadialPotential::radial(psi.clone()),
    };
    if let Some(gap) = fns.get("gap") {
        pot = pot.with_gap(gap.clone());
    }
    let f = nonlinearity(cfg, fns, "f")?;
    let dim = require(&cfg.problem.dim, "N")?;
    let r = require(&cfg.problem.radius, "R")?;
    let sol = picard_gradient_entire(&pot, &f, cfg.problem.b0.unwrap_or(1.0), r, dim, &picard_options(cfg))?;
    solution_report(rep, &sol);
    Ok(())
}

fn system(cfg: &Config, fns: &Fns, rep: &mut Report) -> Result<(), CliError> {
    let sys = SystemProblem {
        p: func(fns, "p")?.clone(),
        q: func(fns, "q")?.clone(),
        f: nonlinearity(cfg, fns, "f")?,
        g: nonlinearity(cfg, fns, "g")?,
        sigma: cfg.problem.sigma,
        a: require(&cfg.problem.a, "a")?,
        b: require(&cfg.problem.b, "b")?,
    };
    let sol = solve_system(
        &sys,
        require(&cfg.problem.radius, "R")?,
        require(&cfg.problem.dim, "N")?,
        &picard_options(cfg),
    )?;
    solution_report(rep, &sol);
    Ok(())
}

fn blowup(cfg: &Config, fns: &Fns, rep: &mut Report, rate_only: bool) -> Result<(), CliError> {
    let p = &cfg.problem;
    let r = require(&p.radius, "R")?;
    let domain = match p.domain.as_deref().unwrap_or("ball") {
        "ball" => Domain::Ball { r },
        "annulus" => Domain::Annulus { r0: require(&p.r0, "R0")?, r },
        "exterior" => Domain::Exterior { r0: p.r0.unwrap_or(0.0), r, outer_value: require(&p.outer_value, "outer_value")? },
        d => return Err(CliError::Config(format!("domain must be ball, annulus or exterior, got `{d}`"))),
    };
    let prob = LogisticProblem {
        a_lin: p.a.unwrap_or(0.0),
        b: fns.get("b").cloned().unwrap_or_else(|| ScalarFn::parse("1").expect("constant")),
        f: nonlinearity(cfg, fns, "f")?,
        domain,
        dim: require(&p.dim, "N")?,
        vanishing_radius: p.vanishing_radius,
        normalization: variant(cfg)?,
    };
    let d = BlowupOptions::default();
    let opts = BlowupOptions {
        n_levels: p.levels.clone().unwrap_or(d.n_levels),
        grid: cfg.numerics.grid.unwrap_or(d.grid),
        tol: tol(cfg, d.tol),
    };
    let k = k_function(cfg, fns)?;
    if rate_only && k.is_none() {
        return Err(CliError::Config("missing required key `functions.k` (or `alpha`)".into()));
    }
    let sol = boundary_blowup(&prob, &opts)?;
    let table = match k {
        Some(k) => {
            let prof = build_profile(&prob.f, &k, variant(cfg)?, p.c.unwrap_or(1.0), &ProfileOptions::default())?;
            Some(measure_boundary_rate(&sol, &prof)?)
        }
        None => None,
    };
    if !rate_only {
        solution_report(rep, &sol);
    } else {
        rep.text("classification", &sol.classification.label());
    }
    if let Some(t) = table {
        rep.num("rate_ratio", t.limit);
        rep.num("rate_drift", t.drift);
        rep.table(if rate_only { "" } else { "_rate" }, t.to_csv());
    }
    Ok(())
}

fn eigen(cfg: &Config, rep: &mut Report) -> Result<(), CliError> {
    let r = require(&cfg.problem.radius, "R")?;
    let e = match mode(cfg)? {
        DomainMode::Ball => lambda1_ball(require(&cfg.problem.dim, "N")?, r)?,
        DomainMode::Interval => {
            if cfg.problem.dim.is_some_and(|n| n != 1) {
                return Err(CliError::Config("interval mode needs N = 1".into()));
            }
            lambda1_interval(r)?
        }
    };
    rep.num("lambda1", e.lambda1);
    rep.num("residual", e.residual);
    rep.num("scaling_defect", e.scaling_defect);
    rep.table("", e.to_csv());
    Ok(())
}

fn lef_problem(cfg: &Config, fns: &Fns) -> Result<LefProblem, CliError> {
    let p = &cfg.problem;
    let m = mode(cfg)?;
    let dim = match m {
        DomainMode::Interval => p.dim.unwrap_or(1),
        DomainMode::Ball => require(&p.dim, "N")?,
    };
    let mut prob = LefProblem::new(dim, m);
    prob.size = p.radius.unwrap_or(1.0);
    prob.lambda = p.lambda.unwrap_or(0.0);
    prob.mu = p.mu.unwrap_or(0.0);
    prob.grad_coef = p.grad_coef.unwrap_or(0.0);
    prob.grad_p = p.grad_p.unwrap_or(0.0);
    prob.f = fns.get("f").cloned();
    prob.g = fns.get("g").cloned();
    if let Some(a) = fns.get("a") {
        prob.a_pot = a.clone();
    }
    prob.k_pot = fns.get("K").cloned();
    prob.source = fns.get("source").cloned();
    Ok(prob)
}

fn lef_options(cfg: &Config) -> LefOptions {
    let d = LefOptions::default();
    let n = &cfg.numerics;
    LefOptions {
        eps_b: n.eps_b.unwrap_or(d.eps_b),
        s_min: n.s_min.unwrap_or(d.s_min),
        s_max: n.s_max.unwrap_or(d.s_max),
        probes: n.probes.unwrap_or(d.probes),
        grid: n.grid.unwrap_or(d.grid),
        tol: n.tol.unwrap_or(d.tol),
        ..d
    }
}

fn lef(cfg: &Config, fns: &Fns, rep: &mut Report) -> Result<(), CliError> {
    let prob = lef_problem(cfg, fns)?;
    let out = solve_lef(&prob, &lef_options(cfg))?;
    let status = match out.status {
        LefStatus::Solved => "solved",
        LefStatus::NoSolution => "no-solution",
    };
    rep.text("status", status);
    if let Some(c) = out.center {
        rep.num("center", c);
    }
    if let (Some(a), Some(b)) = (out.c1, out.c2) {
        rep.num("c1", a);
        rep.num("c2", b);
    }
    rep.detail("regularized", json!(out.regularized));
    rep.notes.extend(out.flags.iter().cloned());
    let mut probes = String::from("s,zero\n");
    for p in &out.probes {
        probes.push_str(&format!("{},{}\n", sel_core::fmt17(p.s), sel_core::fmt17(p.zero)));
    }
    match &out.solution {
        Some(sol) => {
            rep.table("", sol.to_csv());
            rep.table("_probes", probes);
        }
        None => rep.table("_probes", probes),
    }
    Ok(())
}

fn lambda_grid(cfg: &Config, key: &str) -> Result<Vec<f64>, CliError> {
    let v = match key {
        "lambdas" => require(&cfg.problem.lambdas, "lambdas")?,
        _ => require(&cfg.problem.mus, "mus")?,
    };
    Ok(v)
}

fn sweep_cmd(cfg: &Config, fns: &Fns, rep: &mut Report) -> Result<(), CliError> {
    let prob = lef_problem(cfg, fns)?;
    let grid = lambda_grid(cfg, "lambdas")?;
    let d = sweep(&prob, &grid, &lef_options(cfg))?;
    let (lo, hi) = d.lambda_star_bracket;
    let show = |x: Option<f64>| x.map_or("none".to_string(), crate::output::fmt);
    rep.put("lambda_star_bracket", format!("[{},{}]", show(lo), show(hi)));
    rep.detail("lambda_star_bracket", json!([lo.map(num_json), hi.map(num_json)]));
    match d.lambda_star_theory {
        Some(t) => rep.num("lambda_star_theory", t),
        None => rep.text("lambda_star_theory", "none"),
    }
    rep.put("monotone", d.monotone);
    rep.json.insert("monotone".into(), Value::Bool(d.monotone));
    let solved = d.points.iter().filter(|p| matches!(p.status, SweepStatus::Solved { .. })).count();
    rep.put("solved", solved);
    rep.json.insert("solved".into(), json!(solved));
    for p in &d.points {
        if let SweepStatus::Failed { reason } = &p.status {
            rep.notes.push(format!("λ = {}: {reason}", p.lambda));
        }
    }
    rep.table("", d.to_csv());
    Ok(())
}

fn gelfand(cfg: &Config, fns: &Fns, rep: &mut Report) -> Result<(), CliError> {
    let g = func(fns, "g")?;
    let m = mode(cfg)?;
    let dim = match m {
        DomainMode::Interval => 1,
        DomainMode::Ball => require(&cfg.problem.dim, "N")?,
    };
    let a_lim = require(&cfg.problem.a_lim, "a_lim")?;
    let pts = gelfand_scan(
        g,
        a_lim,
        &lambda_grid(cfg, "lambdas")?,
        &lambda_grid(cfg, "mus")?,
        dim,
        m,
        cfg.problem.radius.unwrap_or(1.0),
        &lef_options(cfg),
    )?;
    let decisive: Vec<_> = pts.iter().filter(|p| p.margin.abs() > 0.05).collect();
    let agree = decisive.iter().filter(|p| p.predicted == p.solved).count();
    rep.put("points", pts.len());
    rep.put("decisive", decisive.len());
    rep.put("agree", agree);
    rep.json.insert("points".into(), json!(pts.len()));
    rep.json.insert("decisive".into(), json!(decisive.len()));
    rep.json.insert("agree".into(), json!(agree));
    let mut csv = String::from("lambda,mu,margin,predicted,solved\n");
    for p in &pts {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            sel_core::fmt17(p.lambda),
            sel_core::fmt17(p.mu),
            sel_core::fmt17(p.margin),
            p.predicted,
            p.solved
        ));
    }
    rep.table("", csv);
    Ok(())
}

fn young(cfg: &Config, rep: &mut Report) -> Result<(), CliError> {
    let p = &cfg.problem;
    let lambda1 = match p.lambda1 {
        Some(l) => l,
        None if p.mode.is_some() => {
            let r = p.radius.unwrap_or(1.0);
            match mode(cfg)? {
                DomainMode::Interval => lambda1_interval(r)?.lambda1,
                DomainMode::Ball => lambda1_ball(require(&p.dim, "N")?, r)?.lambda1,
            }
        }
        None => return Err(CliError::Config("missing required key `lambda1` (or `mode` with `R`)".into())),
    };
    let y = young_constant(p.a_lim.unwrap_or(0.0), require(&p.p, "p")?, lambda1)?;
    rep.num("C", y.c);
    rep.num("lhs", y.lhs);
    rep.num("lambda1", lambda1);
    rep.num("inq_excess", y.inq_excess);
    rep.put("inq_holds", y.inq_holds);
    rep.json.insert("inq_holds".into(), Value::Bool(y.inq_holds));
    rep.num("inq_swapped_excess", y.inq_swapped_excess);
    Ok(())
}
