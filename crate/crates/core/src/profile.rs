//! Boundary blow-up profiles.
//!
//! [`build_profile`] inverts `∫_{h(t)}^∞ ds/√(2F(s)) = ∫₀ᵗ k` (or `∫₀ᵗ √k`)
//! on a geometric table of `t`; [`profile_ode_g`] integrates `h'' = g(h)`,
//! `h(0) = h'(0) = 0` for a nonlinearity that may be singular at 0.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, Func, ScalarFn};
use crate::karamata::{ell_limits, keller_osserman, xi0_power, xi0_via_a, KFunction, KKind, Nonlinearity};
use crate::numerics::ode::{integrate, OdeOptions};
use crate::numerics::{
    classify_origin_integral, find_root_bracketed, integrate_relative, linear_slope, MonotoneCubic, Quadrature,
};

/// Which integral of `k` the profile equates with the tail map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProfileVariant {
    /// `∫₀ᵗ k`, for potentials `b ~ c·k²(d)`.
    KIntegrand,
    /// `∫₀ᵗ √k`, for potentials `b ~ c·k(d)`.
    SqrtKIntegrand,
}

impl ProfileVariant {
    pub fn label(self) -> &'static str {
        match self {
            ProfileVariant::KIntegrand => "k",
            ProfileVariant::SqrtKIntegrand => "sqrt-k",
        }
    }
}

const KNOT_LO: i32 = -60;

fn quad_rel<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64) -> Result<Quadrature> {
    let mut tol = 1e-12;
    loop {
        match integrate_relative(&f, a, b, tol) {
            Err(Error::MaxSubdivision { .. }) if tol < 1e-9 => tol *= 10.0,
            other => return other,
        }
    }
}

/// The tail map `Φ(y) = ∫_y^∞ (2F(s))^{-1/2} ds`, tabulated at dyadic knots.
#[derive(Debug, Clone)]
struct TailMap {
    lo_exp: i32,
    /// `Φ(2^{lo_exp + i})`, decreasing.
    knots: Vec<f64>,
}

fn weight(f: &Nonlinearity, s: f64) -> Result<f64> {
    let big = f.antiderivative(s)?;
    if big == f64::INFINITY {
        return Ok(0.0);
    }
    if !(big > 0.0) {
        return Err(Error::NonPositive { t: s, value: big });
    }
    Ok((2.0 * big).powf(-0.5))
}

impl TailMap {
    fn new(f: &Nonlinearity) -> Result<TailMap> {
        let mut top = 996;
        while top > KNOT_LO + 1 {
            match f.antiderivative(2f64.powi(top)) {
                Ok(v) if v.is_finite() => break,
                _ => top -= 8,
            }
        }
        let y_top = 2f64.powi(top);
        let mut knots = vec![Self::beyond(f, y_top)?];
        let mut k = top;
        while k > KNOT_LO {
            let lo = 2f64.powi(k - 1);
            let q = quad_rel(|s| weight(f, s), lo, 2.0 * lo)?;
            let v = knots.last().unwrap() + q.value;
            if !v.is_finite() {
                break;
            }
            knots.push(v);
            k -= 1;
        }
        knots.reverse();
        Ok(TailMap { lo_exp: k, knots })
    }

    /// `∫_y^∞` through `s = y/σ`, σ ∈ (0, 1]. Where `F` overflows at `S`
    /// the integral stops there and the remainder is taken from the local
    /// power decay of the integrand at `S`.
    fn beyond(f: &Nonlinearity, y: f64) -> Result<f64> {
        let end = f.antiderivative_overflow();
        let body = match end {
            Some(s_end) if s_end <= y => 0.0,
            _ => {
                let sig_lo = end.map(|s_end| y / s_end).unwrap_or(0.0);
                quad_rel(|sig| Ok(weight(f, y / sig)? * y / (sig * sig)), sig_lo, 1.0)?.value
            }
        };
        let rest = match end {
            Some(s_end) => {
                let (w1, w2) = (weight(f, 0.5 * s_end)?, weight(f, s_end)?);
                let p = (w1 / w2).log2();
                if w2 > 0.0 && p > 1.0 { w2 * s_end / (p - 1.0) } else { 0.0 }
            }
            None => 0.0,
        };
        Ok(body + rest)
    }

    fn y_top(&self) -> f64 {
        2f64.powi(self.lo_exp + self.knots.len() as i32 - 1)
    }

    fn eval(&self, f: &Nonlinearity, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::Precondition(format!("tail map needs y > 0, got {y}")));
        }
        if y >= self.y_top() {
            return Self::beyond(f, y);
        }
        let first = 2f64.powi(self.lo_exp);
        if y < first {
            return Ok(self.knots[0] + quad_rel(|s| weight(f, s), y, first)?.value);
        }
        let mut k = y.log2().floor() as i32;
        while 2f64.powi(k) > y {
            k -= 1;
        }
        while 2f64.powi(k + 1) <= y {
            k += 1;
        }
        let idx = (k + 1 - self.lo_exp) as usize;
        let upper = 2f64.powi(k + 1);
        Ok(self.knots[idx] + quad_rel(|s| weight(f, s), y, upper)?.value)
    }

    /// Solve `Φ(y) = target` for `y`, in `ln y`.
    fn invert(&self, f: &Nonlinearity, target: f64) -> Result<f64> {
        if !(target > 0.0) || !target.is_finite() {
            return Err(Error::Precondition(format!("tail-map target must be positive, got {target}")));
        }
        let phi = |ly: f64| self.eval(f, ly.exp());
        // Bracket on the dyadic knots, extending past either end if needed.
        let n = self.knots.len();
        let (mut lo, mut hi);
        if target > self.knots[0] {
            hi = self.lo_exp as f64 * std::f64::consts::LN_2;
            lo = hi - 1.0;
            while phi(lo)? < target {
                hi = lo;
                lo -= (hi.abs()).max(1.0);
                if lo < -740.0 {
                    return Err(Error::NoBracket { target, lo: lo.exp(), hi: hi.exp() });
                }
            }
        } else if target < self.knots[n - 1] {
            let ceiling = f.antiderivative_overflow().map(|s| s.ln()).unwrap_or(709.0);
            lo = self.y_top().ln();
            hi = lo + 1.0;
            while phi(hi.min(ceiling))? > target {
                if hi >= ceiling {
                    return Err(Error::OutOfRange(format!(
                        "h exceeds {:e}, past which F is not representable",
                        ceiling.exp()
                    )));
                }
                lo = hi;
                hi += hi.abs().max(1.0);
            }
            hi = hi.min(ceiling);
        } else {
            let i = self.knots.partition_point(|v| *v > target).clamp(1, n - 1);
            lo = ((self.lo_exp + i as i32 - 1) as f64) * std::f64::consts::LN_2;
            hi = lo + std::f64::consts::LN_2;
        }
        let ly = find_root_bracketed(phi, target, lo, hi, 1e-15, 1e-13 * target)?;
        Ok(ly.exp())
    }
}

/// Options for [`build_profile`].
#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    /// Table points `t_j = ν·2^{-j}`, `j = 1..=levels`.
    pub levels: usize,
    /// Tolerance of the Keller–Osserman gate.
    pub ko_tol: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions { levels: 48, ko_tol: 1e-10 }
    }
}

/// The profile `h` with its table and rate constants.
#[derive(Debug, Clone)]
pub struct BlowupProfile {
    pub variant: ProfileVariant,
    /// `b ~ c·k²` (or `c·k`) normalisation constant.
    pub c: f64,
    pub xi0: Option<f64>,
    /// `(χ, ϖ)` for the two-term rate.
    pub two_term: Option<(f64, f64)>,
    /// Increasing `t` with matching decreasing `h` and `h' < 0`.
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub hp: Vec<f64>,
    /// Worst relative defect of `Φ(h(t)) = ∫₀ᵗ k` on the table.
    pub round_trip: f64,
    pub warnings: Vec<String>,
    pub f: Nonlinearity,
    pub k: KFunction,
    tail: TailMap,
    interp: MonotoneCubic,
}

fn k_side(k: &KFunction, variant: ProfileVariant, t: f64) -> Result<f64> {
    match variant {
        ProfileVariant::KIntegrand => k.integral(t),
        ProfileVariant::SqrtKIntegrand => k.sqrt_integral(t),
    }
}

/// `K'(0)` for the square-root variant: `ℓ₁` of `√k`.
fn sqrt_k_ell1(k: &KFunction) -> Result<f64> {
    if let KKind::Power(a) = k.kind {
        return Ok(1.0 / (0.5 * a + 1.0));
    }
    let sq = ScalarFn::from_expr(Expr::Call(Func::Sqrt, Box::new(k.k.body().clone())));
    Ok(ell_limits(&sq, k.nu)?.ell1)
}

/// Build the profile on `t_j = ν·2^{-j}`. Fails unless the Keller–Osserman
/// integral of `f` converges.
pub fn build_profile(
    f: &Nonlinearity,
    k: &KFunction,
    variant: ProfileVariant,
    c: f64,
    opts: &ProfileOptions,
) -> Result<BlowupProfile> {
    let ko = keller_osserman(f, opts.ko_tol)?;
    if !ko.is_convergent() {
        return Err(Error::Precondition(format!(
            "the Keller–Osserman integral of `{}` is {}: no blow-up profile exists",
            f.f,
            ko.label()
        )));
    }
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("c must be positive, got {c}")));
    }
    let mut warnings = vec![];
    let xi0 = match variant {
        ProfileVariant::KIntegrand => match f.rho.finite() {
            Some(rho) if rho > 0.0 => Some(xi0_power(rho, k.ell1.clamp(0.0, 1.0), c)?),
            _ => None,
        },
        ProfileVariant::SqrtKIntegrand => match f.gamma.finite() {
            Some(g) if g != 0.0 => Some(xi0_via_a(f, g, sqrt_k_ell1(k)?, c)?),
            _ => None,
        },
    };
    if xi0.is_none() {
        warnings.push("ξ₀ unavailable: the growth index of f did not stabilise".into());
    }

    let tail = TailMap::new(f)?;
    let mut t = vec![];
    let mut h = vec![];
    let mut hp = vec![];
    let mut round_trip = 0.0f64;
    let mut skipped = 0;
    let mut last_skip = String::new();
    for j in (1..=opts.levels).rev() {
        let tj = k.nu * 2f64.powi(-(j as i32));
        let target = k_side(k, variant, tj)?;
        if !(target > 0.0) || !target.is_finite() {
            continue;
        }
        let hj = match tail.invert(f, target) {
            Ok(v) => v,
            Err(Error::OutOfRange(msg)) => {
                skipped += 1;
                last_skip = msg;
                continue;
            }
            Err(e) => return Err(e),
        };
        let back = tail.eval(f, hj)?;
        round_trip = round_trip.max(((back - target) / target).abs());
        let big = f.antiderivative(hj)?;
        let kk = k.eval(tj)?;
        let w = match variant {
            ProfileVariant::KIntegrand => kk,
            ProfileVariant::SqrtKIntegrand => kk.sqrt(),
        };
        t.push(tj);
        h.push(hj);
        hp.push(-w * (2.0 * big).sqrt());
    }
    if skipped > 0 {
        warnings.push(format!("{skipped} smallest table points dropped: {last_skip}"));
    }
    if t.len() < 4 {
        return Err(Error::Numerical(format!("profile table has only {} usable points", t.len())));
    }
    if let Some(i) = h.windows(2).position(|p| !(p[1] < p[0])) {
        return Err(Error::NonMonotone(format!(
            "profile h is not decreasing in t: h({:e}) = {:e}, h({:e}) = {:e}",
            t[i], h[i], t[i + 1], h[i + 1]
        )));
    }
    let lt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let lh: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let interp = MonotoneCubic::new(lt, lh)?;
    Ok(BlowupProfile {
        variant,
        c,
        xi0,
        two_term: None,
        t,
        h,
        hp,
        round_trip,
        warnings,
        f: f.clone(),
        k: k.clone(),
        tail,
        interp,
    })
}

/// Order of the predicted boundary rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateOrder {
    One,
    Two,
}

impl BlowupProfile {
    /// `h(t)` by monotone interpolation of the table; extrapolation is refused.
    pub fn h_at(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::OutOfRange(format!("h needs t > 0, got {t}")));
        }
        Ok(self.interp.eval(t.ln())?.exp())
    }

    /// `h(t)` by direct inversion of the tail map (no table).
    pub fn h_exact(&self, t: f64) -> Result<f64> {
        self.tail.invert(&self.f, k_side(&self.k, self.variant, t)?)
    }

    /// `Φ(y)`.
    pub fn tail_map(&self, y: f64) -> Result<f64> {
        self.tail.eval(&self.f, y)
    }

    /// `h'(t)` from `h' = −k√(2F(h))` (or `−√k√(2F(h))`).
    pub fn h_prime(&self, t: f64) -> Result<f64> {
        let hv = self.h_at(t)?;
        let w = match self.variant {
            ProfileVariant::KIntegrand => self.k.eval(t)?,
            ProfileVariant::SqrtKIntegrand => self.k.eval(t)?.sqrt(),
        };
        Ok(-w * (2.0 * self.f.antiderivative(hv)?).sqrt())
    }

    /// `h''(t)` from differentiating the first-order identity.
    pub fn h_second(&self, t: f64) -> Result<f64> {
        let hv = self.h_at(t)?;
        let s = (2.0 * self.f.antiderivative(hv)?).sqrt();
        let kk = self.k.eval(t)?;
        let dk = self.k.k.eval_derivative(t)?;
        let fh = self.f.eval(hv)?;
        Ok(match self.variant {
            ProfileVariant::KIntegrand => -dk * s + kk * kk * fh,
            ProfileVariant::SqrtKIntegrand => -dk / (2.0 * kk.sqrt()) * s + kk * fh,
        })
    }

    pub fn with_two_term(mut self, chi: f64, varpi: f64) -> Self {
        self.two_term = Some((chi, varpi));
        self
    }

    /// `ξ₀·h(d)` or `ξ₀·h(d)·(1 + χ d^ϖ)`.
    pub fn predicted_rate(&self, d: f64, order: RateOrder) -> Result<f64> {
        let xi0 = self
            .xi0
            .ok_or_else(|| Error::Precondition("ξ₀ is unavailable for this profile".into()))?;
        let base = xi0 * self.h_at(d)?;
        match order {
            RateOrder::One => Ok(base),
            RateOrder::Two => {
                let (chi, varpi) = self
                    .two_term
                    .ok_or_else(|| Error::Precondition("two-term rate needs (χ, ϖ)".into()))?;
                Ok(base * (1.0 + chi * d.powf(varpi)))
            }
        }
    }

    /// `h''/(k² f(h))` at `t = 10^{-j}` inside the table; tends to
    /// `(2+ρℓ₁)/(2+ρ)` as `t → 0`.
    pub fn second_derivative_ratios(&self) -> Result<Vec<(f64, f64)>> {
        let (lo, hi) = (self.t[0], self.t[self.t.len() - 1]);
        let mut out = vec![];
        for j in 1..=12 {
            let t = 10f64.powi(-j);
            if t < lo || t > hi {
                continue;
            }
            let hv = self.h_at(t)?;
            let kk = self.k.eval(t)?;
            let w = match self.variant {
                ProfileVariant::KIntegrand => kk * kk,
                ProfileVariant::SqrtKIntegrand => kk,
            };
            out.push((t, self.h_second(t)? / (w * self.f.eval(hv)?)));
        }
        Ok(out)
    }

    /// `(t, h/h'', h'/h'')` on the table; both ratios tend to 0.
    pub fn smallness_ratios(&self) -> Result<Vec<(f64, f64, f64)>> {
        let mut out = vec![];
        for (i, &t) in self.t.iter().enumerate() {
            let h2 = self.h_second(t)?;
            out.push((t, self.h[i] / h2, self.hp[i] / h2));
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,h,h_prime\n");
        for i in 0..self.t.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                crate::fmt17(self.t[i]),
                crate::fmt17(self.h[i]),
                crate::fmt17(self.hp[i])
            ));
        }
        s
    }
}

/// Solution of `h'' = g(h)`, `h(0) = h'(0) = 0`, on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct OdeProfile {
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub hp: Vec<f64>,
    /// Singularity exponent of `g` at 0.
    pub alpha: f64,
    /// Start `h ≈ C t^β` with `β = 2/(1+α)`.
    pub beta: f64,
    pub c_start: f64,
}

/// Fitted `(α, C₀)` with `g(s) ≈ C₀ s^{-α}` as `s → 0`.
fn origin_power(g: &ScalarFn) -> Result<(f64, f64)> {
    let xs: Vec<f64> = (60..=70).map(|j| 2f64.powi(-j)).collect();
    let mut ls = vec![];
    for &s in &xs {
        ls.push(g.eval_ln(s)?);
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let mut alpha = -linear_slope(&lx, &ls);
    if alpha.abs() < 1e-9 {
        alpha = 0.0;
    }
    let s = xs[xs.len() - 1];
    let c0 = (ls[ls.len() - 1] + alpha * s.ln()).exp();
    Ok((alpha, c0))
}

/// Integrate `h'' = g(h)` from the local power start `h ≈ C t^β` to `t_max`.
/// `g` must be positive near 0 and integrable there; otherwise `h'(0)`
/// is not finite and the problem is refused.
pub fn profile_ode_g(g: &Nonlinearity, t_max: f64) -> Result<OdeProfile> {
    if !(t_max > 0.0) {
        return Err(Error::Precondition(format!("t_max must be positive, got {t_max}")));
    }
    let gf = |s: f64| Ok(g.f.eval(s)?);
    let v = classify_origin_integral(gf, 1.0, 1e-10)?;
    if !v.is_convergent() {
        return Err(Error::Precondition(format!(
            "∫₀¹ g is {} for g = `{}`: h'(0) would not be finite",
            v.label(),
            g.f
        )));
    }
    let (alpha, c0) = origin_power(&g.f)?;
    if !(0.0..1.0).contains(&alpha) || !(c0 > 0.0) {
        return Err(Error::Precondition(format!(
            "g must behave like C₀ s^(-α) with C₀ > 0, 0 ≤ α < 1 near 0 (fitted α = {alpha}, C₀ = {c0})"
        )));
    }
    let beta = 2.0 / (1.0 + alpha);
    let c = if alpha == 0.0 { 0.5 * c0 } else { (c0 / (beta * (beta - 1.0))).powf(1.0 / (1.0 + alpha)) };
    let t0 = 1e-8 * t_max;
    let y0 = [c * t0.powf(beta), c * beta * t0.powf(beta - 1.0)];
    let rhs = |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> { Ok([y[1], g.f.eval(y[0])?]) };
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-300, ..Default::default() };
    let tr = integrate(rhs, t0, y0, t_max, &opts, &[])?;
    let n = 600;
    let mut t = vec![0.0];
    let mut h = vec![0.0];
    let mut hp = vec![0.0];
    let (a, b) = (t0.ln(), t_max.ln());
    for i in 0..=n {
        let ti = if i == n { t_max } else { (a + (b - a) * i as f64 / n as f64).exp() };
        let y = tr.eval(ti);
        t.push(ti);
        h.push(y[0]);
        hp.push(y[1]);
    }
    Ok(OdeProfile { t, h, hp, alpha, beta, c_start: c })
}

/// Outcome of the invariant checks on an [`OdeProfile`].
#[derive(Debug, Clone, Serialize)]
pub struct OdeProfileChecks {
    /// Largest `(t h' − 2h)/(2h)`; must be ≤ 0 up to rounding.
    pub has_excess: f64,
    pub h_increasing: bool,
    pub hp_increasing: bool,
    pub hpp_nonincreasing: bool,
    /// `sup h/t^β` over the first decade of the grid.
    pub power_constant: f64,
    pub lemma_c1: f64,
    pub lemma_c2: f64,
    /// Largest `(h')^p − c₁g(h) − c₂` over the grid for each tested `p`.
    pub lemma_excess: Vec<(f64, f64)>,
}

impl OdeProfileChecks {
    pub fn all_hold(&self) -> bool {
        self.has_excess <= 1e-9
            && self.h_increasing
            && self.hp_increasing
            && self.hpp_nonincreasing
            && self.lemma_excess.iter().all(|(_, e)| *e <= 0.0)
    }
}

impl OdeProfile {
    pub fn check(&self, g: &Nonlinearity, powers: &[f64]) -> Result<OdeProfileChecks> {
        let n = self.t.len();
        let mut has_excess = f64::NEG_INFINITY;
        let mut hpp = Vec::with_capacity(n);
        for i in 1..n {
            has_excess = has_excess.max((self.t[i] * self.hp[i] - 2.0 * self.h[i]) / (2.0 * self.h[i]));
            hpp.push(g.eval(self.h[i])?);
        }
        let slack = |a: f64, b: f64| b >= a - 1e-12 * a.abs();
        let h_increasing = self.h.windows(2).all(|w| w[1] > w[0]);
        let hp_increasing = self.hp.windows(2).all(|w| slack(w[0], w[1]));
        let hpp_nonincreasing = hpp.windows(2).all(|w| slack(w[1], w[0]));
        let t_first = self.t[1] * 10.0;
        let power_constant = (1..n)
            .filter(|&i| self.t[i] <= t_first)
            .map(|i| self.h[i] / self.t[i].powf(self.beta))
            .fold(0.0f64, f64::max);
        let c1 = 2.0 * self.h[n - 1];
        let c2 = self.hp[n - 1].powi(2) + 1.0;
        let mut lemma_excess = vec![];
        for &p in powers {
            if !(p > 0.0 && p <= 2.0) {
                return Err(Error::Precondition(format!("gradient power must lie in (0, 2], got {p}")));
            }
            let mut worst = f64::NEG_INFINITY;
            for i in 1..n {
                worst = worst.max(self.hp[i].powf(p) - c1 * hpp[i - 1] - c2);
            }
            lemma_excess.push((p, worst));
        }
        Ok(OdeProfileChecks {
            has_excess,
            h_increasing,
            hp_increasing,
            hpp_nonincreasing,
            power_constant,
            lemma_c1: c1,
            lemma_c2: c2,
            lemma_excess,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,h,h_prime\n");
        for i in 0..self.t.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                crate::fmt17(self.t[i]),
                crate::fmt17(self.h[i]),
                crate::fmt17(self.hp[i])
            ));
        }
        s
    }
}
