//! Regular variation at infinity, growth constants of a nonlinearity, the
//! Keller–Osserman test, the class of boundary weights `k` with their
//! limits `ℓ₀, ℓ₁`, and the closed-form rate constants `ξ₀` and `χ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, Func, ScalarFn};
use crate::numerics::{
    aitken, classify_origin_integral, classify_tail_integral, find_root_bracketed, integrate_relative,
    Antiderivative, ConvergenceVerdict,
};

pub const DEFAULT_U_MAX: f64 = 1e8;
const ANTIDERIVATIVE_TOL: f64 = 1e-13;
const LIMIT_STABLE: f64 = 1e-3;

/// Regular-variation index estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RvIndex {
    pub index: f64,
    /// max − min of the nine ratio estimates.
    pub spread: f64,
    /// False when the spread exceeds 0.05: not regularly varying at this scale.
    pub regular: bool,
}

/// Estimate `q` with `fn(ξu)/fn(u) → ξ^q` from ξ ∈ {2,4,8} and
/// u ∈ {u_max/8, u_max/4, u_max/2}.
pub fn rv_index(f: &ScalarFn, u_max: f64) -> Result<RvIndex> {
    if !(u_max > 16.0) {
        return Err(Error::Precondition(format!("u_max must exceed 16, got {u_max}")));
    }
    let mut est = Vec::with_capacity(9);
    for du in [8.0, 4.0, 2.0] {
        let u = u_max / du;
        let lu = f.eval_ln(u)?;
        for xi in [2.0f64, 4.0, 8.0] {
            let lx = f.eval_ln(xi * u)?;
            est.push((lx - lu) / xi.ln());
        }
    }
    if est.iter().any(|v| !v.is_finite()) {
        return Ok(RvIndex { index: f64::INFINITY, spread: f64::INFINITY, regular: false });
    }
    let index = est.iter().sum::<f64>() / est.len() as f64;
    let lo = est.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = est.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    Ok(RvIndex { index, spread, regular: spread <= 0.05 })
}

/// A limit estimated from samples at three consecutive decades.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status")]
pub enum Limit {
    Finite { value: f64, err: f64 },
    Infinite,
    /// Samples did not settle; `last` is the value at the largest sample point.
    Unstable { last: f64, spread: f64 },
}

impl Limit {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Limit::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Limit::Infinite)
    }

    pub fn label(&self) -> String {
        match self {
            Limit::Finite { value, .. } => crate::fmt17(*value),
            Limit::Infinite => "inf".into(),
            Limit::Unstable { last, .. } => format!("unstable({})", crate::fmt17(*last)),
        }
    }
}

/// Extrapolate `e0, e1, e2` (samples at growing arguments) to the limit.
/// Growth that does not slow down geometrically is reported as infinite.
fn limit_from(e: [f64; 3]) -> Limit {
    let [e0, e1, e2] = e;
    if !e2.is_finite() && e2 > 0.0 {
        return Limit::Infinite;
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Limit::Unstable { last: e2, spread: f64::NAN };
    }
    let d1 = e1 - e0;
    let d2 = e2 - e1;
    let scale = e2.abs().max(1.0);
    if d2 > LIMIT_STABLE * scale && d1 > 0.0 && d2 >= 0.9 * d1 {
        return Limit::Infinite;
    }
    if d2.abs() <= LIMIT_STABLE * scale {
        let acc = aitken(e0, e1, e2);
        let value = if (acc - e2).abs() <= 10.0 * d2.abs() { acc } else { e2 };
        return Limit::Finite { value, err: d2.abs().max((value - e2).abs()) };
    }
    Limit::Unstable { last: e2, spread: d2.abs() }
}

/// Power-type singularity `g(s) ≤ C₀·s^{-α}` on `(0, η₀]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OriginSingularity {
    pub alpha: f64,
    pub c0: f64,
    pub eta0: f64,
}

/// A nonlinearity with its antiderivative and growth constants.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    pub f: ScalarFn,
    antiderivative: Option<Antiderivative>,
    /// `lim f(s)/s` at infinity.
    pub m: Limit,
    /// `sup_{s≥1} f(s)/s` on the sampled range; `None` when still rising.
    pub lambda_sup: Option<f64>,
    /// `lim u f'(u)/f(u)`.
    pub theta: Limit,
    /// `lim (F/f)'`.
    pub gamma: Limit,
    /// Index of `f'`, `ϑ − 1`.
    pub rho: Limit,
    pub singular: Option<OriginSingularity>,
    pub u_max: f64,
    pub warnings: Vec<String>,
}

impl Nonlinearity {
    pub fn eval(&self, u: f64) -> Result<f64> {
        Ok(self.f.eval(u)?)
    }

    pub fn eval_derivative(&self, u: f64) -> Result<f64> {
        Ok(self.f.eval_derivative(u)?)
    }

    /// `F(u) = ∫₀ᵘ f`.
    pub fn antiderivative(&self, u: f64) -> Result<f64> {
        match &self.antiderivative {
            Some(a) => a.eval(&|s: f64| Ok(self.f.eval(s)?), u),
            None => Err(Error::Precondition(format!(
                "`{}` is not integrable at the origin; F is unavailable",
                self.f
            ))),
        }
    }

    /// Argument past which `F` overflows, if it does within the table.
    pub fn antiderivative_overflow(&self) -> Option<f64> {
        self.antiderivative.as_ref().filter(|a| a.saturated()).map(|a| a.x_max())
    }

    pub fn has_antiderivative(&self) -> bool {
        self.antiderivative.is_some()
    }

    /// Check the identities γ = 1/(ρ+2) = 1/(ϑ+1) when all three limits are finite.
    pub fn identity_defects(&self) -> Option<(f64, f64)> {
        let g = self.gamma.finite()?;
        let r = self.rho.finite()?;
        let t = self.theta.finite()?;
        Some(((g - 1.0 / (r + 2.0)).abs(), (g - 1.0 / (t + 1.0)).abs()))
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Largest decade `10^j ≤ u_max` at which `f`, `f'` and `F` are all finite.
fn usable_top(nl: &Nonlinearity) -> f64 {
    let mut top = 10f64.powi(nl.u_max.log10().floor() as i32);
    while top > 10.0 {
        let ok = [nl.eval(top), nl.eval_derivative(top), nl.antiderivative(top)]
            .iter()
            .all(|v| matches!(v, Ok(x) if x.is_finite()));
        if ok {
            break;
        }
        top /= 10.0;
    }
    top
}

/// Parse and analyse `f`: antiderivative, `m`, `Λ`, `ϑ`, `γ`, `ρ = ϑ − 1`.
///
/// `f` must be non-negative and nondecreasing on the sampled part of
/// `(0, u_max]`. Limits are sampled at the three top decades below `u_max`
/// (lower if `f` or `F` overflow first) and accepted when the last two
/// samples agree to 1e-3.
pub fn analyze_nonlinearity(f_src: &str, u_max: f64) -> Result<Nonlinearity> {
    let f = ScalarFn::parse(f_src)?;
    analyze_fn(f, u_max)
}

pub fn analyze_fn(f: ScalarFn, u_max: f64) -> Result<Nonlinearity> {
    if !(u_max >= 1e3) {
        return Err(Error::Precondition(format!("u_max must be at least 1e3, got {u_max}")));
    }
    let grid = log_grid(1e-6, u_max, 400);
    let mut prev = f64::NEG_INFINITY;
    for &u in &grid {
        let v = f.eval(u)?;
        if v.is_nan() || v < 0.0 {
            return Err(Error::NonPositive { t: u, value: v });
        }
        if v < prev - 1e-12 * prev.abs() {
            return Err(Error::NonMonotone(format!("f = `{f}` decreases near u = {u:e}")));
        }
        prev = v;
    }
    let ff = |s: f64| Ok(f.eval(s)?);
    let anti = Antiderivative::new(&ff, 1e300, ANTIDERIVATIVE_TOL)?;
    let mut nl = Nonlinearity {
        f,
        antiderivative: Some(anti),
        m: Limit::Unstable { last: f64::NAN, spread: f64::NAN },
        lambda_sup: None,
        theta: Limit::Unstable { last: f64::NAN, spread: f64::NAN },
        gamma: Limit::Unstable { last: f64::NAN, spread: f64::NAN },
        rho: Limit::Unstable { last: f64::NAN, spread: f64::NAN },
        singular: None,
        u_max,
        warnings: vec![],
    };

    let top = usable_top(&nl);
    if top < 1e-2 * u_max {
        nl.warnings.push(format!("f or F overflows; limits sampled up to {top:e}"));
    }
    let us = [top * 1e-2, top * 1e-1, top];
    let mut ms = [0.0; 3];
    let mut ths = [0.0; 3];
    let mut gs = [0.0; 3];
    for (i, &u) in us.iter().enumerate() {
        let v = nl.eval(u)?;
        let d = nl.eval_derivative(u)?;
        let big = nl.antiderivative(u)?;
        ms[i] = v / u;
        ths[i] = u * d / v;
        // (F/f)' = 1 − F f'/f², with the ratios formed before the product.
        gs[i] = 1.0 - (big / v) * (d / v);
    }
    nl.m = match limit_from(ms) {
        // f ≥ 0, so an extrapolation that overshoots below zero means m = 0.
        Limit::Finite { value, err } => Limit::Finite { value: value.max(0.0), err },
        other => other,
    };
    nl.theta = if top < u_max && ths[2] > 1e2 { Limit::Infinite } else { limit_from(ths) };
    nl.gamma = limit_from(gs);
    nl.rho = match &nl.theta {
        Limit::Finite { value, err } => Limit::Finite { value: value - 1.0, err: *err },
        Limit::Infinite => Limit::Infinite,
        Limit::Unstable { last, spread } => Limit::Unstable { last: last - 1.0, spread: *spread },
    };

    // Λ on a log grid of 200 points from 1 to min(u_max, 1e8).
    let lam_top = u_max.min(1e8);
    let lgrid = log_grid(1.0, lam_top, 200);
    let mut best = f64::NEG_INFINITY;
    let mut best_i = 0;
    for (i, &s) in lgrid.iter().enumerate() {
        let r = nl.eval(s)? / s;
        if r > best {
            best = r;
            best_i = i;
        }
    }
    let decade_start = lgrid.iter().position(|&s| s >= lam_top / 10.0).unwrap_or(0);
    let rising = best_i == lgrid.len() - 1 && {
        let r0 = nl.eval(lgrid[decade_start])? / lgrid[decade_start];
        best > r0 * (1.0 + 1e-3)
    };
    nl.lambda_sup = if rising || !best.is_finite() { None } else { Some(best) };

    if let Some((d1, d2)) = nl.identity_defects() {
        if d1.max(d2) > 1e-3 {
            nl.warnings.push(format!(
                "regular-variation identities off by {:.3e} / {:.3e}",
                d1, d2
            ));
        }
    }
    Ok(nl)
}

/// Analyse a nonlinearity that may be singular at the origin, such as
/// `g(s) = s^{-1/2}`: fits `α` from the log-log slope near 0, takes `C₀` as
/// the sup of `s^α g(s)` over `(0, η₀]`, and builds `F` only when `g` is
/// integrable at 0. No monotonicity requirement.
pub fn analyze_singular(g_src: &str, eta0: f64) -> Result<Nonlinearity> {
    let g = ScalarFn::parse(g_src)?;
    if !(eta0 > 0.0) {
        return Err(Error::Precondition(format!("η₀ must be positive, got {eta0}")));
    }
    let xs: Vec<f64> = (30..=40).map(|j| eta0 * 2f64.powi(-j)).collect();
    let mut ls = Vec::with_capacity(xs.len());
    for &s in &xs {
        ls.push(g.eval_ln(s)?);
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let mut alpha = -crate::numerics::linear_slope(&lx, &ls);
    if alpha.abs() < 1e-9 {
        alpha = 0.0;
    }
    let mut c0 = 0.0f64;
    for s in log_grid(eta0 * 1e-12, eta0, 200) {
        let v = g.eval(s)?;
        if v.is_nan() || v < 0.0 {
            return Err(Error::NonPositive { t: s, value: v });
        }
        c0 = c0.max(s.powf(alpha) * v);
    }
    let gg = |s: f64| Ok(g.eval(s)?);
    let integrable = classify_origin_integral(gg, eta0.min(1.0), 1e-10)
        .map(|v| v.is_convergent())
        .unwrap_or(false);
    let antiderivative =
        if integrable { Some(Antiderivative::new(&gg, 1e300, ANTIDERIVATIVE_TOL)?) } else { None };
    let a_lim = g.eval(1e8).ok().filter(|v| v.is_finite());
    let mut warnings = vec![];
    if !integrable {
        warnings.push(format!("`{g}` is not integrable at the origin"));
    }
    Ok(Nonlinearity {
        f: g,
        antiderivative,
        m: match a_lim {
            Some(v) => Limit::Finite { value: v / 1e8, err: 0.0 },
            None => Limit::Unstable { last: f64::NAN, spread: f64::NAN },
        },
        lambda_sup: None,
        theta: Limit::Unstable { last: f64::NAN, spread: f64::NAN },
        gamma: Limit::Unstable { last: f64::NAN, spread: f64::NAN },
        rho: Limit::Unstable { last: f64::NAN, spread: f64::NAN },
        singular: Some(OriginSingularity { alpha, c0, eta0 }),
        u_max: 1e8,
        warnings,
    })
}

/// `∫₁^∞ F(t)^{-1/2} dt`: convergent exactly when large solutions exist.
pub fn keller_osserman(f: &Nonlinearity, tol: f64) -> Result<ConvergenceVerdict> {
    if !f.has_antiderivative() {
        return Err(Error::Precondition("Keller–Osserman test needs F".into()));
    }
    classify_tail_integral(|t| Ok(f.antiderivative(t)?.powf(-0.5)), 1.0, tol)
}

/// `∫₁^∞ dt/f(t)`, necessary for entire solutions.
pub fn necessary_condition_entire(f: &Nonlinearity, tol: f64) -> Result<ConvergenceVerdict> {
    classify_tail_integral(|t| Ok(1.0 / f.eval(t)?), 1.0, tol)
}

/// Limits of `r(t) = ∫₀ᵗ k / k(t)` and of `r'(t)` as `t → 0⁺`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllLimits {
    pub ell0: f64,
    pub ell1: f64,
    pub ell0_err: f64,
    pub ell1_err: f64,
    /// Smallest sample point actually used.
    pub t_min: f64,
}

/// `r(t) = ∫₀ᵗ k(s)/k(t) ds`, integrated in log space so that
/// `k = exp(-1/t)` does not underflow.
///
/// The difference of logarithms carries absolute noise `ε·|ln k(t)|`, so the
/// relative target is loosened accordingly; past 1e-6 the point is refused.
fn r_value(k: &ScalarFn, t: f64) -> Result<f64> {
    let lkt = k.eval_ln(t)?;
    let mut tol = 1e-12f64.max(64.0 * f64::EPSILON * lkt.abs());
    loop {
        if tol > 1e-6 {
            return Err(Error::Numerical(format!("ln k too large at t = {t:e} for a reliable ratio")));
        }
        match integrate_relative(|s: f64| Ok((k.eval_ln(s)? - lkt).exp()), 0.0, t, tol) {
            Err(Error::MaxSubdivision { .. }) => tol *= 100.0,
            other => return Ok(other?.value),
        }
    }
}

fn r_prime(k: &ScalarFn, t: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> {
        Ok((r_value(k, t * (1.0 + h))? - r_value(k, t * (1.0 - h))?) / (2.0 * t * h))
    };
    let coarse = d(0.05)?;
    let fine = d(0.025)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Evaluate `r` and `r'` at `t = 10^{-j}`, `j = 1..8` (restricted to
/// `t < ν`), and extrapolate. Points where `k` cannot be evaluated end the
/// sequence early and widen the error bar.
pub fn ell_limits(k: &ScalarFn, nu: f64) -> Result<EllLimits> {
    if !(nu > 0.0) {
        return Err(Error::Precondition(format!("ν must be positive, got {nu}")));
    }
    let mut r0 = vec![];
    let mut r1 = vec![];
    let mut ts = vec![];
    let mut t_min = f64::NAN;
    let mut truncated = false;
    for j in 1..=8 {
        let t = 10f64.powi(-j);
        if t * 1.05 >= nu {
            continue;
        }
        match (r_value(k, t), r_prime(k, t)) {
            (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => {
                r0.push(a);
                r1.push(b);
                ts.push(t);
                t_min = t;
            }
            _ => {
                truncated = true;
                break;
            }
        }
    }
    if r1.len() < 3 {
        return Err(Error::Numerical(format!(
            "k = `{k}` could be evaluated at only {} sample points below ν = {nu}",
            r1.len()
        )));
    }
    // Geometric convergence (power corrections in t) goes through Aitken.
    // When successive differences shrink slower than 1/2 the corrections are
    // powers of 1/ln(1/t); fit a quadratic in that variable instead.
    let extrap = |v: &[f64]| -> (f64, f64) {
        let n = v.len();
        let (a, b, c) = (v[n - 3], v[n - 2], v[n - 1]);
        let slow = (b - a).abs() > 0.0 && (c - b).abs() > 0.5 * (b - a).abs();
        if slow {
            let x: Vec<f64> = ts[n - 3..].iter().map(|t| 1.0 / (1.0 / t).ln()).collect();
            let (x0, x1, x2) = (x[0], x[1], x[2]);
            // Lagrange through the last three points, evaluated at x = 0.
            let quad = a * x1 * x2 / ((x0 - x1) * (x0 - x2))
                + b * x0 * x2 / ((x1 - x0) * (x1 - x2))
                + c * x0 * x1 / ((x2 - x0) * (x2 - x1));
            let lin = (b * x2 - c * x1) / (x2 - x1);
            return (quad, (quad - lin).abs());
        }
        let monotone = (b - a) * (c - b) > 0.0 && (c - b).abs() < (b - a).abs();
        let acc = if monotone { aitken(a, b, c) } else { c };
        let err = (acc - c).abs() + (c - b).abs() * if monotone { 0.1 } else { 1.0 };
        (acc, err)
    };
    let (ell0, mut e0) = extrap(&r0);
    let (ell1, mut e1) = extrap(&r1);
    if truncated {
        e0 *= 10.0;
        e1 *= 10.0;
    }
    Ok(EllLimits { ell0, ell1, ell0_err: e0, ell1_err: e1, t_min })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KKind {
    User,
    /// `exp(-S(1/t))`
    ExpA,
    /// `1/S(1/t)`
    InvS,
    /// `1/ln S(1/t)`
    InvLnS,
    Power(f64),
}

/// A boundary weight `k` on `(0, ν)` with its limits.
#[derive(Debug, Clone)]
pub struct KFunction {
    pub k: ScalarFn,
    pub nu: f64,
    pub ell0: f64,
    pub ell1: f64,
    pub ell1_err: f64,
    pub zeta: Option<f64>,
    pub ell_star: Option<f64>,
    pub kind: KKind,
    pub predicted_ell1: Option<f64>,
}

impl KFunction {
    /// Wrap a user-supplied `k`, checking positivity and monotonicity on a
    /// sampled grid and measuring `ℓ₀, ℓ₁`.
    pub fn from_fn(k: ScalarFn, nu: f64, kind: KKind) -> Result<KFunction> {
        check_increasing(&k, nu)?;
        let lim = ell_limits(&k, nu)?;
        Ok(KFunction {
            k: k.with_domain(0.0, nu),
            nu,
            ell0: lim.ell0,
            ell1: lim.ell1,
            ell1_err: lim.ell1_err,
            zeta: None,
            ell_star: None,
            kind,
            predicted_ell1: None,
        })
    }

    pub fn user(src: &str, nu: f64) -> Result<KFunction> {
        KFunction::from_fn(ScalarFn::parse(src)?, nu, KKind::User)
    }

    /// `k = t^α`, for which `ℓ₁ = 1/(α+1)` exactly.
    pub fn power(alpha: f64, nu: f64) -> Result<KFunction> {
        if !(alpha >= 0.0) {
            return Err(Error::Precondition(format!("k = t^α needs α ≥ 0, got {alpha}")));
        }
        let body = if alpha == 0.0 {
            Expr::Const(1.0)
        } else {
            Expr::Pow(Box::new(Expr::Var), Box::new(Expr::Const(alpha)))
        };
        let mut kf = KFunction {
            k: ScalarFn::from_expr(body).with_domain(0.0, nu),
            nu,
            ell0: 0.0,
            ell1: 1.0 / (alpha + 1.0),
            ell1_err: 0.0,
            zeta: None,
            ell_star: None,
            kind: KKind::Power(alpha),
            predicted_ell1: Some(1.0 / (alpha + 1.0)),
        };
        if alpha > 0.0 {
            check_increasing(&kf.k, nu)?;
        }
        kf.ell1_err = 0.0;
        Ok(kf)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.k.eval(t)?)
    }

    /// `∫₀ᵗ k`.
    pub fn integral(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if let KKind::Power(a) = self.kind {
            return Ok(t.powf(a + 1.0) / (a + 1.0));
        }
        Ok(r_value(&self.k, t)? * self.k.eval(t)?)
    }

    /// `∫₀ᵗ √k`.
    pub fn sqrt_integral(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if let KKind::Power(a) = self.kind {
            return Ok(t.powf(0.5 * a + 1.0) / (0.5 * a + 1.0));
        }
        let lkt = self.k.eval_ln(t)?;
        let q = integrate_relative(|s: f64| Ok((0.5 * (self.k.eval_ln(s)? - lkt)).exp()), 0.0, t, 1e-12)?;
        Ok(q.value * (0.5 * lkt).exp())
    }
}

fn check_increasing(k: &ScalarFn, nu: f64) -> Result<()> {
    let mut prev = 0.0;
    for t in log_grid(nu * 1e-8, nu * (1.0 - 1e-9), 120) {
        let v = k.eval(t)?;
        if !(v > 0.0) && !(v == 0.0 && k.eval_ln(t).map(|l| l.is_finite()).unwrap_or(false)) {
            return Err(Error::NonPositive { t, value: v });
        }
        if v < prev {
            return Err(Error::NonMonotone(format!("k = `{k}` decreases near t = {t:e}")));
        }
        prev = v;
    }
    Ok(())
}

/// Build `k` from `S` by one of the three constructions, on `(0, 1/D)`.
/// `S'` must be regularly varying with index `q > −1`; the predicted
/// `ℓ₁ ∈ {0, 1/(q+2), 1}` is compared with the measured value.
pub fn make_k(kind: KKind, s_src: &str, d: f64) -> Result<KFunction> {
    let s = ScalarFn::parse(s_src)?;
    if !(d > 0.0) {
        return Err(Error::Precondition(format!("D must be positive, got {d}")));
    }
    let q = rv_index(s.derivative(), DEFAULT_U_MAX)?;
    if !q.regular {
        return Err(Error::Precondition(format!(
            "S' is not regularly varying at the sampled scale (spread {:.3})",
            q.spread
        )));
    }
    if q.index <= -1.0 {
        return Err(Error::Precondition(format!("S' has index q = {:.4} ≤ −1", q.index)));
    }
    let inv_t = Expr::Div(Box::new(Expr::Const(1.0)), Box::new(Expr::Var));
    let s_inv = s.body().substitute(&inv_t);
    let one = Box::new(Expr::Const(1.0));
    let (body, predicted) = match kind {
        KKind::ExpA => (Expr::Call(Func::Exp, Box::new(Expr::Neg(Box::new(s_inv)))), 0.0),
        KKind::InvS => (Expr::Div(one, Box::new(s_inv)), 1.0 / (q.index + 2.0)),
        KKind::InvLnS => (Expr::Div(one, Box::new(Expr::Call(Func::Ln, Box::new(s_inv)))), 1.0),
        _ => return Err(Error::Precondition("make_k builds only ExpA, InvS and InvLnS".into())),
    };
    let mut kf = KFunction::from_fn(ScalarFn::from_expr(body), 1.0 / d, kind)?;
    kf.predicted_ell1 = Some(predicted);
    let allowed = (3.0 * kf.ell1_err).max(2e-2);
    if (kf.ell1 - predicted).abs() > allowed {
        return Err(Error::Numerical(format!(
            "measured ℓ₁ = {:.6} disagrees with predicted {predicted:.6} (allowed {allowed:.1e})",
            kf.ell1
        )));
    }
    Ok(kf)
}

/// `ξ₀ = ((2+ℓ₁ρ)/(c(2+ρ)))^{1/ρ}`.
pub fn xi0_power(rho: f64, ell1: f64, c: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Precondition(format!("ξ₀ needs ρ > 0, got {rho}")));
    }
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("ξ₀ needs c > 0, got {c}")));
    }
    if !(0.0..=1.0).contains(&ell1) {
        return Err(Error::Precondition(format!("ℓ₁ must lie in [0, 1], got {ell1}")));
    }
    Ok(((2.0 + ell1 * rho) / (c * (2.0 + rho))).powf(1.0 / rho))
}

/// `A(ξ) = lim f(ξu)/(ξ f(u))`, sampled at u = 10⁶, 10⁷, 10⁸.
pub fn a_function(f: &Nonlinearity, xi: f64) -> Result<Limit> {
    let mut e = [0.0; 3];
    for (i, u) in [1e6, 1e7, 1e8].into_iter().enumerate() {
        e[i] = (f.f.eval_ln(xi * u)? - f.f.eval_ln(u)? - xi.ln()).exp();
    }
    Ok(limit_from(e))
}

/// Solve `A(ξ) = (K'(0)(1−2γ)+2γ)/c` for `ξ ∈ (1e-6, 1e6)`.
pub fn xi0_via_a(f: &Nonlinearity, gamma: f64, kprime0: f64, c: f64) -> Result<f64> {
    if gamma == 0.0 {
        return Err(Error::Precondition("ξ₀ via A needs γ ≠ 0".into()));
    }
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("ξ₀ needs c > 0, got {c}")));
    }
    let target = (kprime0 * (1.0 - 2.0 * gamma) + 2.0 * gamma) / c;
    let a_at = |lx: f64| -> Result<f64> {
        a_function(f, lx.exp())?.finite().ok_or_else(|| {
            Error::Numerical(format!("A(ξ) did not stabilise at ξ = {:e}", lx.exp()))
        })
    };
    let (lo, hi) = (1e-6f64.ln(), 1e6f64.ln());
    let mut prev = f64::NEG_INFINITY;
    let mut vals = vec![];
    for i in 0..=24 {
        let lx = lo + (hi - lo) * i as f64 / 24.0;
        let v = a_at(lx)?;
        if v <= prev {
            return Err(Error::NonMonotone(format!("A is not increasing near ξ = {:e}", lx.exp())));
        }
        prev = v;
        vals.push(v);
    }
    if target < vals[0] || target > vals[24] {
        return Err(Error::OutOfRange(format!(
            "target {target} outside the sampled range of A [{:e}, {:e}]",
            vals[0], vals[24]
        )));
    }
    let lx = find_root_bracketed(a_at, target, lo, hi, 1e-14, 1e-14 * target.abs())?;
    Ok(lx.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GrowthCase {
    /// `f = C u^{ρ+1}` near infinity.
    PurePower,
    /// Normalised regular variation with a nonzero secondary index.
    EtaNonzero,
    /// Secondary index zero with logarithmic decay rate `τ₁ = ϖ/ζ`.
    EtaZeroTau,
}

/// Inputs of the two-term boundary expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoTermSpec {
    pub rho: f64,
    pub zeta: f64,
    pub theta: f64,
    pub ell_star: f64,
    /// Required for [`GrowthCase::EtaZeroTau`].
    pub ell_sup: Option<f64>,
    pub c_tilde: f64,
    pub case: GrowthCase,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoTerm {
    pub varpi: f64,
    pub chi: f64,
    pub tau1: f64,
    pub xi0: f64,
    pub warnings: Vec<String>,
}

fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// `ϖ = min{θ, ζ}` and the second-term coefficient `χ`.
/// The step function is taken as 1/2 at θ = ζ (with a warning).
pub fn chi_two_term(s: &TwoTermSpec) -> Result<TwoTerm> {
    if !(s.rho > 0.0 && s.zeta > 0.0 && s.theta > 0.0) {
        return Err(Error::Precondition(format!(
            "two-term expansion needs ρ, ζ, θ > 0 (got {}, {}, {})",
            s.rho, s.zeta, s.theta
        )));
    }
    let mut warnings = vec![];
    let mut gap = s.theta - s.zeta;
    if gap.abs() < 1e-9 {
        warnings.push("θ = ζ: step function taken as 1/2".to_string());
        gap = 0.0;
    }
    let varpi = s.theta.min(s.zeta);
    let tau1 = varpi / s.zeta;
    let xi0 = (2.0 / (2.0 + s.rho)).powf(1.0 / s.rho);
    let chi1 = -(1.0 + s.zeta) * s.ell_star / (2.0 * s.zeta) * heaviside(gap)
        - s.c_tilde / s.rho * heaviside(-gap);
    let chi = match s.case {
        GrowthCase::PurePower | GrowthCase::EtaNonzero => chi1,
        GrowthCase::EtaZeroTau => {
            let ell_sup = s
                .ell_sup
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Precondition("this case needs a finite ℓ^⋆".into()))?;
            let base = -s.rho * s.ell_star / 2.0;
            if base < 0.0 && tau1.fract() != 0.0 {
                return Err(Error::Precondition(format!(
                    "(−ρℓ⋆/2)^τ₁ undefined for base {base} and τ₁ = {tau1}"
                )));
            }
            chi1 - ell_sup / s.rho * base.powf(tau1) * (1.0 / (s.rho + 2.0) + xi0.ln())
        }
    };
    Ok(TwoTerm { varpi, chi, tau1, xi0, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_classes() {
        assert!(matches!(limit_from([1.0, 1.0, 1.0]), Limit::Finite { value, .. } if value == 1.0));
        assert!(limit_from([1.0, 10.0, 100.0]).is_infinite());
        assert!(limit_from([13.8, 16.1, 18.4]).is_infinite());
        assert!(matches!(limit_from([1.01, 1.001, 1.0001]), Limit::Finite { value, .. } if (value - 1.0).abs() < 1e-6));
    }

    #[test]
    fn heaviside_half() {
        assert_eq!(heaviside(0.0), 0.5);
    }
}
