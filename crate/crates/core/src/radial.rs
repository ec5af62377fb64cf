//! Constructive solvers in radial symmetry.
//!
//! * Picard iteration for entire solutions of `Δw + |∇w| = ψ(|x|) f(w)` and
//!   for the coupled system `Δu = p g(v)`, `Δv = q f(u)`, on a graded mesh
//!   with product quadrature and Richardson extrapolation across refinements.
//! * Convergence checks on the potential (slow variation of a non-radial
//!   potential, the large-solution integral).
//! * Boundary blow-up solutions as limits of Dirichlet problems `u = n` on
//!   the boundary, extrapolated across `n` by Aitken's Δ².
//! * Residuals of closed-form candidates and boundary-rate measurement.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::karamata::{keller_osserman, Nonlinearity};
use crate::numerics::ode::{integrate, OdeOptions, Stop, Trajectory};
use crate::numerics::radial_ivp::interp;
use crate::numerics::{
    aitken, classify_tail_integral, classify_tail_integral_until, integrate_finite, integrate_relative,
    linear_fit, Antiderivative, Classification, ConvergenceVerdict, RadialRhs, RadialSolution,
};
use crate::profile::{BlowupProfile, ProfileVariant};

/// Default number of mesh panels for the Picard solvers.
pub const DEFAULT_PANELS: usize = 2048;
const MAX_PANELS: usize = 1 << 16;
const MAX_PICARD: usize = 200;
/// `u(R)/u(R/2)` above which a computed solution counts as growing.
pub const GROWTH_RATIO: f64 = 1.05;

fn is_zero(f: &ScalarFn) -> bool {
    f.is_constant() && matches!(f.eval(1.0), Ok(v) if v == 0.0)
}

fn zero_verdict() -> ConvergenceVerdict {
    ConvergenceVerdict::Convergent { value: 0.0, err: 0.0, slope: f64::NEG_INFINITY }
}

/// `∫₀^∞ f` as `∫₀¹ f` plus a classified tail.
fn half_line<F: Fn(f64) -> Result<f64>>(f: F, cap: f64, tol: f64) -> Result<ConvergenceVerdict> {
    let head = integrate_finite(&f, 0.0, 1.0, tol * 1e-2)?;
    Ok(match classify_tail_integral_until(&f, 1.0, cap, tol)? {
        ConvergenceVerdict::Convergent { value, err, slope } => {
            ConvergenceVerdict::Convergent { value: value + head.value, err: err + head.err, slope }
        }
        other => other,
    })
}

/// A potential given by its spherical envelopes.
#[derive(Debug, Clone)]
pub struct RadialPotential {
    /// `ψ(r) = min_{|x|=r} p`; the potential itself when it is radial.
    pub psi: ScalarFn,
    /// `φ(r) = max_{|x|=r} p`; `None` for a radial potential.
    pub phi: Option<ScalarFn>,
    /// Closed form of `φ − ψ`, which avoids cancellation at large `r`.
    pub gap: Option<ScalarFn>,
}

impl RadialPotential {
    pub fn radial(p: ScalarFn) -> Self {
        RadialPotential { psi: p, phi: None, gap: None }
    }

    pub fn parse(p: &str) -> Result<Self> {
        Ok(Self::radial(ScalarFn::parse(p)?))
    }

    pub fn envelopes(phi: ScalarFn, psi: ScalarFn) -> Self {
        RadialPotential { psi, phi: Some(phi), gap: None }
    }

    pub fn with_gap(mut self, gap: ScalarFn) -> Self {
        self.gap = Some(gap);
        self
    }

    pub fn is_radial(&self) -> bool {
        match (&self.phi, &self.gap) {
            (None, None) => true,
            (_, Some(g)) => is_zero(g),
            (Some(phi), None) => phi == &self.psi,
        }
    }

    pub fn psi_at(&self, r: f64) -> Result<f64> {
        Ok(self.psi.eval(r)?)
    }

    pub fn phi_at(&self, r: f64) -> Result<f64> {
        match (&self.phi, &self.gap) {
            (Some(phi), _) => Ok(phi.eval(r)?),
            (None, Some(g)) => Ok(self.psi.eval(r)? + g.eval(r)?),
            (None, None) => self.psi_at(r),
        }
    }

    /// `φ(r) − ψ(r)`.
    pub fn gap_at(&self, r: f64) -> Result<f64> {
        match (&self.gap, &self.phi) {
            (Some(g), _) => Ok(g.eval(r)?),
            (None, Some(phi)) => Ok(phi.eval(r)? - self.psi.eval(r)?),
            (None, None) => Ok(0.0),
        }
    }

    /// Largest `r = 2^j` at which `φ − ψ` still carries nine digits; the
    /// closed-form gap has no limit.
    fn gap_cap(&self) -> Result<f64> {
        if self.gap.is_some() || self.phi.is_none() {
            return Ok(f64::INFINITY);
        }
        let mut cap = 1.0;
        for j in 0..=60 {
            let r = 2f64.powi(j);
            let (p, s) = (self.phi_at(r)?, self.psi_at(r)?);
            let scale = p.abs().max(s.abs());
            if scale == 0.0 || (p - s).abs() < 1e-9 * scale {
                break;
            }
            cap = r;
        }
        Ok(cap)
    }

    /// Check `φ ≥ ψ ≥ 0` on 400 points of `[0, r_max]`.
    pub fn check_envelopes(&self, r_max: f64) -> Result<()> {
        for i in 0..=400 {
            let r = r_max * i as f64 / 400.0;
            let (p, s) = (self.phi_at(r)?, self.psi_at(r)?);
            if s < 0.0 || p < s - 1e-12 * p.abs().max(1.0) {
                return Err(Error::Precondition(format!(
                    "envelopes must satisfy φ ≥ ψ ≥ 0; at r = {r} φ = {p}, ψ = {s}"
                )));
            }
        }
        Ok(())
    }

    /// `Ψ(r) = exp(Λ_N ∫₀^r s ψ(s) ds)`.
    pub fn growth_weight(&self, lambda_n: f64) -> Result<GrowthWeight> {
        let anti = if is_zero(&self.psi) {
            None
        } else {
            let psi = self.psi.clone();
            Some(Antiderivative::new(&move |s: f64| Ok(s * psi.eval(s)?), 1e300, 1e-13)?)
        };
        Ok(GrowthWeight { lambda_n, psi: self.psi.clone(), anti })
    }
}

/// `Ψ(r) = exp(Λ_N ∫₀^r s ψ(s) ds)` backed by an antiderivative table.
#[derive(Debug, Clone)]
pub struct GrowthWeight {
    pub lambda_n: f64,
    psi: ScalarFn,
    anti: Option<Antiderivative>,
}

impl GrowthWeight {
    pub fn eval(&self, r: f64) -> Result<f64> {
        match &self.anti {
            None => Ok(1.0),
            Some(a) => {
                let psi = &self.psi;
                let i = a.eval(&|s: f64| Ok(s * psi.eval(s)?), r)?;
                Ok((self.lambda_n * i).exp())
            }
        }
    }
}

/// Classify `∫₀^∞ r·gap(r)·Ψ(r) dr`. A radial potential gives `Convergent(0)`.
///
/// When the gap is only available as `φ − ψ`, sampling stops where the
/// difference loses its digits to cancellation.
pub fn check_slow_variation(pot: &RadialPotential, lambda_n: f64, tol: f64) -> Result<ConvergenceVerdict> {
    if pot.is_radial() {
        return Ok(zero_verdict());
    }
    let weight = pot.growth_weight(lambda_n)?;
    let cap = pot.gap_cap()?;
    half_line(|r: f64| Ok(r * pot.gap_at(r)? * weight.eval(r)?), cap, tol)
}

/// Verdict on the large-solution integral with the elementary bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LargeCondition {
    pub verdict: ConvergenceVerdict,
    /// `(N−2)^{-1} ∫₀^∞ t ψ(t) dt` when `N ≥ 3` and the integral converges.
    pub bound: Option<f64>,
    /// Whether the computed value respects the bound.
    pub bound_holds: Option<bool>,
}

/// `e^{-t} t^{1-N} ∫₀ᵗ e^s s^{N-1} ψ(s) ds`, written as
/// `∫₀ᵗ e^{-x} (1 − x/t)^{N−1} ψ(t − x) dx` (cut at `x = 750`).
pub fn large_condition_inner(psi: &ScalarFn, dim: usize, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let n = dim as f64;
    if t < 1e-6 {
        return Ok(psi.eval(0.0)? * t / n);
    }
    let k = dim as i32 - 1;
    let upper = t.min(750.0);
    let g = |x: f64| -> Result<f64> { Ok((-x).exp() * (1.0 - x / t).powi(k) * psi.eval(t - x)?) };
    let mut tol = 1e-12;
    loop {
        match integrate_relative(g, 0.0, upper, tol) {
            Err(Error::MaxSubdivision { .. }) if tol < 1e-7 => tol *= 100.0,
            other => return Ok(other?.value),
        }
    }
}

/// Classify `∫₁^∞ e^{-t} t^{1-N} ∫₀ᵗ e^s s^{N-1} ψ(s) ds dt`: divergence is
/// the condition for entire large solutions.
pub fn check_large_condition(psi: &ScalarFn, dim: usize, tol: f64) -> Result<LargeCondition> {
    if dim == 0 {
        return Err(Error::Precondition("dimension N must be ≥ 1".into()));
    }
    if is_zero(psi) {
        return Ok(LargeCondition {
            verdict: zero_verdict(),
            bound: (dim >= 3).then_some(0.0),
            bound_holds: (dim >= 3).then_some(true),
        });
    }
    for i in 0..=200 {
        let s = 1e-3 * 1e7f64.powf(i as f64 / 200.0);
        if psi.eval(s)? < 0.0 {
            return Err(Error::Precondition(format!("ψ must be non-negative, ψ({s:e}) < 0")));
        }
    }
    let verdict = classify_tail_integral(|t: f64| large_condition_inner(psi, dim, t), 1.0, tol)?;
    let mut bound = None;
    let mut bound_holds = None;
    if dim >= 3 {
        if let ConvergenceVerdict::Convergent { value, .. } =
            half_line(|t: f64| Ok(t * psi.eval(t)?), f64::INFINITY, tol)?
        {
            let b = value / (dim as f64 - 2.0);
            bound = Some(b);
            if let ConvergenceVerdict::Convergent { value: v, err, .. } = &verdict {
                bound_holds = Some(*v <= b * (1.0 + 1e-9) + err);
            }
        }
    }
    Ok(LargeCondition { verdict, bound, bound_holds })
}

// Gauss–Legendre, 8 nodes (positive half).
const GL_X: [f64; 4] = [0.1834346424956498, 0.525_532_409_916_329, 0.7966664774136267, 0.9602898564975363];
const GL_W: [f64; 4] = [0.362_683_783_378_362, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

/// Mesh `t_i = exp(q·i/n) − 1` refining towards the origin, with exact
/// product weights for `J(t) = ∫₀ᵗ K(s,t) g(s) ds` and `g` linear per panel.
///
/// `K(s,t) = (s/t)^{N−1}`, times `e^{s−t}` when `drift` is set.
#[derive(Debug, Clone)]
struct Mesh {
    t: Vec<f64>,
    decay: Vec<f64>,
    w0: Vec<f64>,
    w1: Vec<f64>,
}

impl Mesh {
    fn new(r_max: f64, panels: usize, dim: usize, drift: bool) -> Mesh {
        let q = r_max.ln_1p();
        let t: Vec<f64> = (0..=panels)
            .map(|i| if i == panels { r_max } else { (q * i as f64 / panels as f64).exp_m1() })
            .collect();
        let k = dim as i32 - 1;
        let mut decay = Vec::with_capacity(panels);
        let mut w0 = Vec::with_capacity(panels);
        let mut w1 = Vec::with_capacity(panels);
        for i in 0..panels {
            let (a, b) = (t[i], t[i + 1]);
            let h = b - a;
            let kern = |s: f64| {
                let p = if k == 0 { 1.0 } else { (s / b).powi(k) };
                if drift {
                    p * (s - b).exp()
                } else {
                    p
                }
            };
            let (mut s0, mut s1) = (0.0, 0.0);
            for j in 0..4 {
                for sign in [-1.0, 1.0] {
                    let s = a + 0.5 * h * (1.0 + sign * GL_X[j]);
                    let kw = 0.5 * h * GL_W[j] * kern(s);
                    s0 += kw * (b - s) / h;
                    s1 += kw * (s - a) / h;
                }
            }
            decay.push(kern(a));
            w0.push(s0);
            w1.push(s1);
        }
        Mesh { t, decay, w0, w1 }
    }

    fn len(&self) -> usize {
        self.t.len()
    }

    /// `(base + ∫₀^r J, J)` at the nodes.
    fn apply(&self, base: f64, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut j = vec![0.0; n];
        let mut w = vec![base; n];
        for i in 0..n - 1 {
            j[i + 1] = self.decay[i] * j[i] + self.w0[i] * g[i] + self.w1[i] * g[i + 1];
            w[i + 1] = w[i] + 0.5 * (self.t[i + 1] - self.t[i]) * (j[i] + j[i + 1]);
        }
        (w, j)
    }
}

fn sources(coef: &[f64], w: &[f64], f: &Nonlinearity) -> Result<Vec<f64>> {
    coef.iter()
        .zip(w)
        .map(|(c, w)| if *c == 0.0 { Ok(0.0) } else { Ok(c * f.eval(*w)?) })
        .collect()
}

fn check_step(prev: &[f64], next: &[f64], what: &str, k: usize) -> Result<f64> {
    let mut change = 0.0f64;
    for (i, (a, b)) in prev.iter().zip(next).enumerate() {
        if *b < a - 1e-12 * a.abs().max(1.0) {
            return Err(Error::NonMonotone(format!(
                "{what} iterate {k} decreased at node {i}: {a:e} -> {b:e}"
            )));
        }
        change = change.max((b - a).abs() / b.abs().max(1e-300));
    }
    Ok(change)
}

/// Fixed point of the scalar scheme on one mesh.
struct Fixed {
    w: Vec<f64>,
    j: Vec<f64>,
    iterations: usize,
    settled: bool,
    /// Smallest `ln b + M r − ln w_k(r)` seen over all iterates.
    growth_margin: f64,
}

fn picard_fixed(
    mesh: &Mesh,
    base: f64,
    coef: &[f64],
    f: &Nonlinearity,
    tol: f64,
    growth: Option<f64>,
) -> Result<Fixed> {
    let mut w = vec![base; mesh.len()];
    let mut margin = f64::INFINITY;
    for k in 1..=MAX_PICARD {
        let (next, j) = mesh.apply(base, &sources(coef, &w, f)?);
        let change = check_step(&w, &next, "Picard", k)?;
        if let Some(m) = growth {
            for (t, v) in mesh.t.iter().zip(&next) {
                let slack = base.ln() + m * t - v.ln();
                margin = margin.min(slack);
                if slack < -1e-9 * (1.0 + v.ln().abs()) {
                    return Err(Error::Numerical(format!(
                        "growth bound w ≤ b·e^(M r) violated at r = {t}: ln w = {}, bound {}",
                        v.ln(),
                        base.ln() + m * t
                    )));
                }
            }
        }
        w = next;
        if change < tol {
            return Ok(Fixed { w, j, iterations: k, settled: true, growth_margin: margin });
        }
        if k == MAX_PICARD {
            return Ok(Fixed { w, j, iterations: k, settled: false, growth_margin: margin });
        }
    }
    unreachable!()
}

/// Richardson-extrapolated values on the coarse nodes and the error estimate.
fn richardson(coarse: &[f64], fine: &[f64]) -> (Vec<f64>, f64) {
    let mut err = 0.0f64;
    let out = coarse
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let f = fine[2 * i];
            err = err.max((f - c).abs() / 3.0 / f.abs().max(1e-300));
            f + (f - c) / 3.0
        })
        .collect();
    (out, err)
}

/// `E_N(s) = ∫₀^∞ e^{-x} (1 + x/s)^{1−N} dx`.
fn kernel_mass(dim: usize, s: f64) -> Result<f64> {
    if dim == 1 {
        return Ok(1.0);
    }
    let k = 1 - dim as i32;
    Ok(integrate_relative(|x: f64| Ok((-x).exp() * (1.0 + x / s).powi(k)), 0.0, 60.0, 1e-13)?.value)
}

/// Options for the Picard solvers.
#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    /// Initial panel count; doubled until the extrapolated solution settles.
    pub panels: usize,
    pub tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { panels: DEFAULT_PANELS, tol: 1e-10 }
    }
}

struct Refined {
    t: Vec<f64>,
    w: Vec<f64>,
    j: Vec<f64>,
    err: f64,
    panels: usize,
    iterations: usize,
    settled: bool,
    growth_margin: f64,
}

fn picard_refined(
    r_max: f64,
    dim: usize,
    base: f64,
    coef: &ScalarFn,
    f: &Nonlinearity,
    growth: Option<f64>,
    opts: &PicardOptions,
) -> Result<Refined> {
    let solve = |panels: usize| -> Result<(Mesh, Fixed)> {
        let mesh = Mesh::new(r_max, panels, dim, true);
        let c: Vec<f64> = mesh.t.iter().map(|t| coef.eval(*t)).collect::<std::result::Result<_, _>>()?;
        if let Some(bad) = c.iter().position(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Precondition(format!("ψ must be finite and non-negative; ψ({}) = {}", mesh.t[bad], c[bad])));
        }
        let fx = picard_fixed(&mesh, base, &c, f, opts.tol, growth)?;
        Ok((mesh, fx))
    };
    let mut n = opts.panels.max(16);
    let (mut mesh, mut coarse) = solve(n)?;
    loop {
        let (fine_mesh, fine) = solve(2 * n)?;
        let (w, err) = richardson(&coarse.w, &fine.w);
        if err < opts.tol || 2 * n >= MAX_PANELS {
            let (j, _) = richardson(&coarse.j, &fine.j);
            return Ok(Refined {
                t: mesh.t,
                w,
                j,
                err,
                panels: n,
                iterations: coarse.iterations.max(fine.iterations),
                settled: coarse.settled && fine.settled,
                growth_margin: coarse.growth_margin.min(fine.growth_margin),
            });
        }
        mesh = fine_mesh;
        coarse = fine;
        n *= 2;
    }
}

fn node_value(t: &[f64], w: &[f64], r: f64) -> f64 {
    interp(t, w, r).unwrap_or(f64::NAN)
}

/// `lim w` estimated at node `i` by continuing the scheme past `t_i` with
/// `f(w)` frozen: `w + J·E_N + f(w) ∫_t^∞ ψ E_N`.
fn entire_limit(dim: usize, psi: &ScalarFn, f: &Nonlinearity, t: f64, w: f64, j: f64, tol: f64) -> Result<Option<f64>> {
    let head = w + j * kernel_mass(dim, t)?;
    if is_zero(psi) {
        return Ok(Some(head));
    }
    let tail = classify_tail_integral(|s: f64| Ok(psi.eval(s)? * kernel_mass(dim, s)?), t, tol)?;
    Ok(tail.value().map(|v| head + f.eval(w).unwrap_or(f64::NAN) * v))
}

/// Picard iteration `w_{k+1}(r) = b₀ + ∫₀^r e^{-t} t^{1-N} ∫₀ᵗ e^s s^{N-1} ψ(s) f(w_k(s)) ds dt`
/// from `w₁ ≡ b₀` on `[0, R]`.
///
/// Every iterate is checked to be nondecreasing in `k` and, for `N ≥ 3`, to
/// satisfy `w_k(r) ≤ b₀ e^{Mr}` with `M = Λ/(N−2)·max t ψ(t)`. The result is
/// classified entire-large when it grows (`w(R)/w(R/2) > 1.05`) and the
/// large-solution integral diverges, bounded when neither holds, and
/// undetermined otherwise. With an upper envelope `φ` the ordering constant
/// `b* = 1 + K Λ_N ∫ s·gap·Ψ` is computed and the solution `v` started
/// from 1 with `φ` is compared against `w`.
pub fn picard_gradient_entire(
    pot: &RadialPotential,
    f: &Nonlinearity,
    b0: f64,
    r_max: f64,
    dim: usize,
    opts: &PicardOptions,
) -> Result<RadialSolution> {
    if dim == 0 {
        return Err(Error::Precondition("dimension N must be ≥ 1".into()));
    }
    if !(b0 > 0.0) || !(r_max > 0.0) {
        return Err(Error::Precondition(format!("need b₀ > 0 and R > 0, got b₀ = {b0}, R = {r_max}")));
    }
    let lambda = f.lambda_sup.ok_or_else(|| {
        Error::Precondition(format!("`{}` is not sublinear: sup f(s)/s over s ≥ 1 is not finite", f.f))
    })?;
    let mut notes = vec![];
    if b0 < 1.0 {
        notes.push(format!("b₀ = {b0} < 1: the growth bound and the ordering argument assume b₀ ≥ 1"));
    }
    let psi = &pot.psi;
    let lambda_n = if dim >= 3 { Some(lambda / (dim as f64 - 2.0)) } else { None };
    let growth = match lambda_n {
        Some(ln) if b0 >= 1.0 => {
            let mut mx = 0.0f64;
            for i in 0..=4000 {
                let t = r_max * i as f64 / 4000.0;
                mx = mx.max(t * psi.eval(t)?);
            }
            Some(ln * mx)
        }
        _ => {
            notes.push("growth bound not checked (needs N ≥ 3 and b₀ ≥ 1)".into());
            None
        }
    };
    let sol = picard_refined(r_max, dim, b0, psi, f, growth, opts)?;
    if !sol.settled {
        notes.push(format!("Picard iteration stopped after {MAX_PICARD} iterations"));
    }
    let n = sol.t.len();
    let w_end = sol.w[n - 1];
    let ratio = w_end / node_value(&sol.t, &sol.w, 0.5 * r_max);
    let cond = check_large_condition(psi, dim, 1e-8)?;
    let growing = ratio > GROWTH_RATIO;
    let class = match (&cond.verdict, growing) {
        (ConvergenceVerdict::Divergent { .. }, true) => Classification::EntireLarge,
        (ConvergenceVerdict::Convergent { .. }, false) => Classification::Bounded,
        _ => {
            notes.push(format!(
                "large-solution integral is {} but w(R)/w(R/2) = {ratio:.6}",
                cond.verdict.label()
            ));
            Classification::Undetermined
        }
    };
    let mut out = RadialSolution::new(dim, sol.t.clone(), sol.w.clone(), sol.j.clone(), class);
    let m = &mut out.meta;
    m.iterations = sol.iterations;
    m.values.insert("panels".into(), sol.panels as f64);
    m.values.insert("discretization_err".into(), sol.err);
    m.values.insert("end_ratio".into(), ratio);
    m.values.insert("lambda".into(), lambda);
    if let Some(ln) = lambda_n {
        m.values.insert("lambda_n".into(), ln);
    }
    if let Some(g) = growth {
        m.values.insert("growth_rate_m".into(), g);
        m.values.insert("growth_margin".into(), sol.growth_margin);
    }
    m.tags.insert("large_condition".into(), cond.verdict.label().into());
    if class == Classification::Bounded {
        let half = sol.t.partition_point(|t| *t < 0.5 * r_max).min(n - 1);
        let l_end = entire_limit(dim, psi, f, sol.t[n - 1], w_end, sol.j[n - 1], 1e-10)?;
        let l_half = entire_limit(dim, psi, f, sol.t[half], sol.w[half], sol.j[half], 1e-10)?;
        if let (Some(a), Some(b)) = (l_end, l_half) {
            m.values.insert("limit".into(), a);
            m.values.insert("plateau_drift".into(), (a - b).abs());
        }
    }
    if let (Some(ln), false) = (lambda_n, pot.is_radial()) {
        let slow = check_slow_variation(pot, ln, 1e-8)?;
        let cap = pot.gap_cap()?;
        let tg = half_line(|t: f64| Ok(t * pot.gap_at(t)?), cap, 1e-8)?;
        let b_star = match (slow.value(), tg.value()) {
            (Some(s), Some(g)) => 1.0 + (ln * g).exp() * ln * s,
            _ => f64::INFINITY,
        };
        m.values.insert("b_star".into(), b_star);
        if b0 <= b_star {
            m.notes.push(format!("b₀ = {b0} does not exceed b* = {b_star}: ordering not guaranteed"));
        }
        let phi = ScalarFn::from_expr(match (&pot.phi, &pot.gap) {
            (Some(phi), _) => phi.body().clone(),
            (None, Some(g)) => crate::expr::Expr::Add(Box::new(psi.body().clone()), Box::new(g.body().clone())),
            (None, None) => psi.body().clone(),
        });
        let upper = picard_refined(r_max, dim, 1.0, &phi, f, None, &PicardOptions { panels: sol.panels, ..*opts })?;
        let defect = upper
            .t
            .iter()
            .zip(&upper.w)
            .map(|(t, v)| v - node_value(&sol.t, &sol.w, *t))
            .fold(f64::NEG_INFINITY, f64::max);
        m.values.insert("ordering_defect".into(), defect);
        m.values.insert("ordering_holds".into(), if defect <= 0.0 { 1.0 } else { 0.0 });
    }
    m.notes.extend(notes);
    Ok(out)
}

/// Data of the coupled system `Δu = p(r) g(v)`, `Δv = q(r) f(u)` with
/// central values `u(0) = a`, `v(0) = b`.
#[derive(Debug, Clone)]
pub struct SystemProblem {
    pub p: ScalarFn,
    pub q: ScalarFn,
    pub f: Nonlinearity,
    pub g: Nonlinearity,
    /// `liminf f/g`, when known.
    pub sigma: Option<f64>,
    pub a: f64,
    pub b: f64,
}

/// `∫₀^∞ t·p(t) dt`; the zero potential gives `Convergent(0)`.
pub fn potential_moment(p: &ScalarFn, tol: f64) -> Result<ConvergenceVerdict> {
    if is_zero(p) {
        return Ok(zero_verdict());
    }
    half_line(|t: f64| Ok(t * p.eval(t)?), f64::INFINITY, tol)
}

fn growth_condition_h3(f: &Nonlinearity, g: &Nonlinearity) -> Result<Option<String>> {
    for c in [1.0, 10.0] {
        let vals: Vec<f64> = [1e6, 1e7, 1e8]
            .iter()
            .map(|t| Ok(g.eval(c * f.eval(*t)?)? / t))
            .collect::<Result<_>>()?;
        if !(vals[2] <= vals[1] && vals[1] <= vals[0] && vals[2] < 1e-2) {
            return Ok(Some(format!(
                "g(c f(t))/t does not clearly tend to 0 at c = {c}: {:.3e}, {:.3e}, {:.3e} at t = 1e6, 1e7, 1e8",
                vals[0], vals[1], vals[2]
            )));
        }
    }
    Ok(None)
}

struct SystemFixed {
    u: Vec<f64>,
    ju: Vec<f64>,
    v: Vec<f64>,
    jv: Vec<f64>,
    iterations: usize,
    settled: bool,
}

fn system_fixed(mesh: &Mesh, sys: &SystemProblem, cp: &[f64], cq: &[f64], tol: f64) -> Result<SystemFixed> {
    let n = mesh.len();
    let mut u = vec![sys.a; n];
    let mut v = vec![sys.b; n];
    for k in 1..=MAX_PICARD {
        let (nu, ju) = mesh.apply(sys.a, &sources(cp, &v, &sys.g)?);
        let (nv, jv) = mesh.apply(sys.b, &sources(cq, &nu, &sys.f)?);
        let cu = check_step(&u, &nu, "system u", k)?;
        let cv = check_step(&v, &nv, "system v", k)?;
        u = nu;
        v = nv;
        if cu.max(cv) < tol || k == MAX_PICARD {
            return Ok(SystemFixed { u, ju, v, jv, iterations: k, settled: k < MAX_PICARD || cu.max(cv) < tol });
        }
    }
    unreachable!()
}

/// `lim u` from node `i` with `g(v)` frozen: `u + J r/(N−2) + g(v)/(N−2) ∫_r^∞ s p`.
fn system_limit(dim: usize, p: &ScalarFn, g: &Nonlinearity, r: f64, u: f64, j: f64, v: f64) -> Result<Option<f64>> {
    let n2 = dim as f64 - 2.0;
    let head = u + j * r / n2;
    if is_zero(p) {
        return Ok(Some(head));
    }
    let tail = classify_tail_integral(|s: f64| Ok(s * p.eval(s)?), r, 1e-10)?;
    Ok(tail.value().map(|t| head + g.eval(v).unwrap_or(f64::NAN) * t / n2))
}

/// Alternating Picard iteration for the system on `[0, R]`:
/// `u_k = a + ∫∫ p g(v_{k−1})`, `v_k = b + ∫∫ q f(u_k)`, from `v₀ ≡ b`.
///
/// Both moments `∫ t p`, `∫ t q` divergent predicts entire-large solutions
/// (confirmed by growth of `u` on `[R/2, R]`); both convergent predicts
/// bounded ones. Mixed verdicts are undetermined. The lower bounds
/// `u ≥ a + g(b) A`, `v ≥ b + f(a) B` are reported as defects.
pub fn solve_system(sys: &SystemProblem, r_max: f64, dim: usize, opts: &PicardOptions) -> Result<RadialSolution> {
    if dim == 0 || !(r_max > 0.0) {
        return Err(Error::Precondition("need N ≥ 1 and R > 0".into()));
    }
    if !(sys.a > 0.0 && sys.b > 0.0) {
        return Err(Error::Precondition(format!("central values must be positive, got a = {}, b = {}", sys.a, sys.b)));
    }
    let mut notes = vec![];
    if let Some(w) = growth_condition_h3(&sys.f, &sys.g)? {
        notes.push(w);
    }
    let coefs = |mesh: &Mesh, p: &ScalarFn| -> Result<Vec<f64>> {
        let c: Vec<f64> = mesh.t.iter().map(|t| p.eval(*t)).collect::<std::result::Result<_, _>>()?;
        if c.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Precondition(format!("potential `{p}` must be finite and non-negative")));
        }
        Ok(c)
    };
    let solve = |panels: usize| -> Result<(Mesh, SystemFixed)> {
        let mesh = Mesh::new(r_max, panels, dim, false);
        let (cp, cq) = (coefs(&mesh, &sys.p)?, coefs(&mesh, &sys.q)?);
        let fx = system_fixed(&mesh, sys, &cp, &cq, opts.tol)?;
        Ok((mesh, fx))
    };
    let mut n = opts.panels.max(16);
    let (mut mesh, mut coarse) = solve(n)?;
    let (u, ju, v, jv, err, iterations, settled) = loop {
        let (fine_mesh, fine) = solve(2 * n)?;
        let (u, eu) = richardson(&coarse.u, &fine.u);
        let (v, ev) = richardson(&coarse.v, &fine.v);
        if eu.max(ev) < opts.tol || 2 * n >= MAX_PANELS {
            let (ju, _) = richardson(&coarse.ju, &fine.ju);
            let (jv, _) = richardson(&coarse.jv, &fine.jv);
            break (
                u,
                ju,
                v,
                jv,
                eu.max(ev),
                coarse.iterations.max(fine.iterations),
                coarse.settled && fine.settled,
            );
        }
        mesh = fine_mesh;
        coarse = fine;
        n *= 2;
    };
    if !settled {
        notes.push(format!("alternating iteration stopped after {MAX_PICARD} iterations"));
    }
    let t = mesh.t.clone();
    let last = t.len() - 1;

    // Lower bounds from one application of the operators to constants.
    let ones = vec![1.0; t.len()];
    let (a_fun, _) = mesh.apply(0.0, &coefs(&mesh, &sys.p)?.iter().zip(&ones).map(|(c, o)| c * o).collect::<Vec<_>>());
    let (b_fun, _) = mesh.apply(0.0, &coefs(&mesh, &sys.q)?);
    let (gb, fa) = (sys.g.eval(sys.b)?, sys.f.eval(sys.a)?);
    let mut lower_defect = f64::NEG_INFINITY;
    for i in 0..t.len() {
        lower_defect = lower_defect.max(sys.a + gb * a_fun[i] - u[i]).max(sys.b + fa * b_fun[i] - v[i]);
    }

    let mp = potential_moment(&sys.p, 1e-8)?;
    let mq = potential_moment(&sys.q, 1e-8)?;
    let half = t.partition_point(|x| *x < 0.5 * r_max).min(last);
    let ratio = u[last] / u[half];
    let mut limits = None;
    let class = if mp.is_divergent() && mq.is_divergent() {
        if ratio > GROWTH_RATIO {
            Classification::EntireLarge
        } else {
            notes.push(format!("both moments diverge but u(R)/u(R/2) = {ratio:.6}"));
            Classification::Undetermined
        }
    } else if mp.is_convergent() && mq.is_convergent() {
        if dim >= 3 {
            let lu = system_limit(dim, &sys.p, &sys.g, t[last], u[last], ju[last], v[last])?;
            let lv = system_limit(dim, &sys.q, &sys.f, t[last], v[last], jv[last], u[last])?;
            let hu = system_limit(dim, &sys.p, &sys.g, t[half], u[half], ju[half], v[half])?;
            let hv = system_limit(dim, &sys.q, &sys.f, t[half], v[half], jv[half], u[half])?;
            if let (Some(lu), Some(lv), Some(hu), Some(hv)) = (lu, lv, hu, hv) {
                limits = Some((lu, lv, (lu - hu).abs().max((lv - hv).abs())));
            }
        }
        if ratio <= GROWTH_RATIO {
            Classification::Bounded
        } else {
            notes.push(format!("both moments converge but u(R)/u(R/2) = {ratio:.6}"));
            Classification::Undetermined
        }
    } else {
        notes.push(format!("mixed moment verdicts: ∫t·p {}, ∫t·q {}", mp.label(), mq.label()));
        Classification::Undetermined
    };

    let mut out = RadialSolution::new(dim, t, u, ju, class);
    out.v = Some(v);
    out.dv = Some(jv);
    let m = &mut out.meta;
    m.iterations = iterations;
    m.values.insert("panels".into(), n as f64);
    m.values.insert("discretization_err".into(), err);
    m.values.insert("end_ratio".into(), ratio);
    m.values.insert("lower_bound_defect".into(), lower_defect);
    if let Some(c) = mp.value() {
        m.values.insert("moment_p".into(), c);
    }
    if let Some(c) = mq.value() {
        m.values.insert("moment_q".into(), c);
    }
    if let Some((lu, lv, drift)) = limits {
        m.values.insert("u_limit".into(), lu);
        m.values.insert("v_limit".into(), lv);
        m.values.insert("plateau_drift".into(), drift);
    }
    m.tags.insert("moment_p".into(), mp.label().into());
    m.tags.insert("moment_q".into(), mq.label().into());
    m.notes.extend(notes);
    Ok(out)
}

/// `(1 + m C_q) e^{m² C_p C_q}`: bound on `sup |u₁ − u₂|, |v₁ − v₂|` per unit
/// difference of central values, with `C_p = (N−2)^{-1} ∫ t p`.
pub fn lipschitz_constant(cp: f64, cq: f64, m_lip: f64) -> f64 {
    (1.0 + m_lip * cq) * (m_lip * m_lip * cp * cq).exp()
}

/// Domain of a radial boundary blow-up problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Domain {
    Ball { r: f64 },
    Annulus { r0: f64, r: f64 },
    /// `(R₀, R]` with blow-up at `R₀` and `u(R) = outer_value`.
    Exterior { r0: f64, r: f64, outer_value: f64 },
    /// Rejected by the boundary blow-up solver.
    WholeSpace { r_max: f64 },
}

/// `Δu + a u = b(|x|) f(u)` with `u = ∞` on the blow-up boundary.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    pub a_lin: f64,
    pub b: ScalarFn,
    pub f: Nonlinearity,
    pub domain: Domain,
    pub dim: usize,
    /// Radius of the concentric ball where `b` vanishes, if any.
    pub vanishing_radius: Option<f64>,
    /// How `b` is normalised against the profile: `b ~ c k²` or `b ~ c k`.
    pub normalization: ProfileVariant,
}

/// Options for [`boundary_blowup`].
#[derive(Debug, Clone)]
pub struct BlowupOptions {
    /// Boundary values `n`, increasing.
    pub n_levels: Vec<f64>,
    /// Number of output grid intervals.
    pub grid: usize,
    pub tol: f64,
}

/// `10·2^j`, `j = 0..=8`.
pub fn default_levels() -> Vec<f64> {
    (0..=8).map(|j| 10.0 * 2f64.powi(j)).collect()
}

impl Default for BlowupOptions {
    fn default() -> Self {
        BlowupOptions { n_levels: default_levels(), grid: 200, tol: 1e-11 }
    }
}

struct Shot {
    g: f64,
    traj: Option<Trajectory<2>>,
    defect: f64,
}

struct Level<'a> {
    prob: &'a LogisticProblem,
    n: f64,
    tol: f64,
}

impl Level<'_> {
    fn rhs(&self, r: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        let p = self.prob;
        let drag = if p.dim > 1 && r != 0.0 { (p.dim as f64 - 1.0) / r * y[1] } else { 0.0 };
        let fu = if y[0] > 0.0 { p.f.eval(y[0])? } else { 0.0 };
        Ok([y[1], p.b.eval(r)? * fu - p.a_lin * y[0] - drag])
    }

    fn start(&self, param: f64) -> Result<(f64, [f64; 2], f64)> {
        let p = self.prob;
        Ok(match p.domain {
            Domain::Ball { r } => {
                if p.dim > 1 {
                    let eps = 1e-6 * r;
                    let g0 = p.b.eval(0.0)? * p.f.eval(param)? - p.a_lin * param;
                    let nn = p.dim as f64;
                    (eps, [param + g0 * eps * eps / (2.0 * nn), g0 * eps / nn], r)
                } else {
                    (0.0, [param, 0.0], r)
                }
            }
            Domain::Annulus { r0, r } => (r0, [self.n, param], r),
            Domain::Exterior { r0, r, outer_value } => (r, [outer_value, -param], r0),
            Domain::WholeSpace { .. } => unreachable!(),
        })
    }

    /// Shooting map, increasing in `param`, zero when `u = n` is reached
    /// exactly at the far boundary.
    fn shoot(&self, param: f64) -> Result<Shot> {
        let high = Shot { g: 1.0, traj: None, defect: f64::INFINITY };
        match self.prob.domain {
            Domain::Ball { .. } if param >= self.n => return Ok(high),
            Domain::Annulus { .. } if param >= 0.0 => return Ok(high),
            _ => {}
        }
        let (x0, y0, x1) = self.start(param)?;
        let n = self.n;
        let annulus = matches!(self.prob.domain, Domain::Annulus { .. });
        let ev_high = move |_r: f64, y: &[f64; 2]| {
            if annulus && y[1] <= 0.0 {
                -1.0
            } else {
                y[0] - n
            }
        };
        let ev_low = |_r: f64, y: &[f64; 2]| -y[0];
        let opts = OdeOptions { rtol: self.tol, atol: self.tol * 1e-6, max_steps: 400_000, ..Default::default() };
        let tr = integrate(|r, y| self.rhs(r, y), x0, y0, x1, &opts, &[&ev_high, &ev_low])?;
        let span = (x1 - x0).abs();
        Ok(match tr.stop {
            Stop::Event { index: 0, x } => Shot { g: (x1 - x).abs() / span, traj: None, defect: f64::INFINITY },
            Stop::Event { x, .. } => Shot { g: -1.0 - (x1 - x).abs() / span, traj: None, defect: f64::INFINITY },
            Stop::Reached => {
                let e = (tr.y_end[0] - n) / n;
                Shot { g: e, defect: e.abs(), traj: Some(tr) }
            }
        })
    }

    /// Bracket and bisect the shooting parameter; returns the reached shot
    /// on the low side of the root.
    fn solve(&self) -> Result<(f64, Shot)> {
        let ball = matches!(self.prob.domain, Domain::Ball { .. });
        // Ball: bisection in ln u(0). Otherwise linear in the slope.
        let to_param = |x: f64| if ball { x.exp() } else { x };
        let (mut lo, mut hi);
        match self.prob.domain {
            Domain::Ball { .. } => {
                hi = (self.n * (1.0 - 1e-12)).ln();
                lo = (0.5 * self.n).ln();
                let mut k = 0;
                while self.shoot(to_param(lo))?.g >= 0.0 {
                    hi = lo;
                    lo -= 2f64.ln() * 2.0;
                    k += 1;
                    if k > 400 {
                        return Err(Error::NoBracket { target: self.n, lo: to_param(lo), hi: self.n });
                    }
                }
            }
            Domain::Annulus { .. } => {
                hi = 0.0;
                lo = -1.0;
                let mut k = 0;
                while self.shoot(lo)?.g >= 0.0 {
                    hi = lo;
                    lo *= 2.0;
                    k += 1;
                    if k > 200 {
                        return Err(Error::NoBracket { target: self.n, lo, hi });
                    }
                }
            }
            _ => {
                let g0 = self.shoot(0.0)?.g;
                let mut k = 0;
                if g0 < 0.0 {
                    lo = 0.0;
                    hi = 1.0;
                    while self.shoot(hi)?.g < 0.0 {
                        lo = hi;
                        hi *= 2.0;
                        k += 1;
                        if k > 200 {
                            return Err(Error::NoBracket { target: self.n, lo, hi });
                        }
                    }
                } else {
                    hi = 0.0;
                    lo = -1.0;
                    while self.shoot(lo)?.g >= 0.0 {
                        hi = lo;
                        lo *= 2.0;
                        k += 1;
                        if k > 200 {
                            return Err(Error::NoBracket { target: self.n, lo, hi });
                        }
                    }
                }
            }
        }
        let mut best = self.shoot(to_param(lo))?;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || best.defect < 1e-14 {
                break;
            }
            let s = self.shoot(to_param(mid))?;
            if s.g < 0.0 {
                lo = mid;
                best = s;
            } else {
                hi = mid;
            }
        }
        if best.traj.is_none() {
            return Err(Error::Numerical(format!("shooting at level n = {} never reached the boundary", self.n)));
        }
        Ok((to_param(lo), best))
    }
}

fn blowup_grid(domain: &Domain, m: usize) -> (Vec<f64>, f64) {
    match *domain {
        Domain::Ball { r } => ((0..m).map(|i| r * i as f64 / m as f64).collect(), r),
        Domain::Annulus { r0, r } => ((1..m).map(|i| r0 + (r - r0) * i as f64 / m as f64).collect(), r),
        Domain::Exterior { r0, r, .. } => ((1..=m).map(|i| r0 + (r - r0) * i as f64 / m as f64).collect(), r0),
        Domain::WholeSpace { .. } => (vec![], f64::NAN),
    }
}

/// Boundary blow-up solution as the limit of Dirichlet problems `u = n` on
/// the blow-up boundary. Each level is solved by shooting (on the centre
/// value for a ball, on the boundary slope otherwise); the levels must be
/// nondecreasing in `n` at every grid point, and with at least four levels
/// the limit is estimated pointwise by Aitken's Δ² on the last three, with
/// the difference of the last two accelerated values as error estimate.
/// With fewer levels the last level is returned as undetermined.
pub fn boundary_blowup(prob: &LogisticProblem, opts: &BlowupOptions) -> Result<RadialSolution> {
    if prob.dim == 0 {
        return Err(Error::Precondition("dimension N must be ≥ 1".into()));
    }
    match prob.domain {
        Domain::WholeSpace { .. } => {
            return Err(Error::Precondition(
                "boundary blow-up needs a domain with a boundary (ball, annulus or exterior shell)".into(),
            ))
        }
        Domain::Ball { r } if !(r > 0.0) => return Err(Error::Precondition(format!("ball radius must be positive, got {r}"))),
        Domain::Annulus { r0, r } | Domain::Exterior { r0, r, .. } if !(0.0 <= r0 && r0 < r) => {
            return Err(Error::Precondition(format!("radii must satisfy 0 ≤ R₀ < R, got {r0}, {r}")))
        }
        Domain::Annulus { r0: 0.0, .. } => {
            return Err(Error::Precondition("an annulus needs R₀ > 0; use a ball".into()))
        }
        Domain::Exterior { r0, .. } if r0 == 0.0 && prob.dim > 1 => {
            return Err(Error::Precondition("blow-up at the origin is only supported for N = 1".into()))
        }
        _ => {}
    }
    if opts.n_levels.is_empty() || opts.n_levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("n_levels must be a non-empty increasing list".into()));
    }
    if let Domain::Exterior { outer_value, .. } = prob.domain {
        if !(opts.n_levels[0] > outer_value && outer_value > 0.0) {
            return Err(Error::Precondition(format!(
                "levels must exceed the positive outer boundary value {outer_value}"
            )));
        }
    }
    let ko = keller_osserman(&prob.f, 1e-8)?;
    if !ko.is_convergent() {
        return Err(Error::Precondition(format!(
            "the Keller–Osserman integral of `{}` is {}: boundary blow-up solutions exist if and only if it converges",
            prob.f.f,
            ko.label()
        )));
    }
    if let Some(r0) = prob.vanishing_radius {
        let lam = crate::bifurcation::lambda_inf_1(prob.dim, r0)?;
        if !(prob.a_lin < lam) {
            return Err(Error::Precondition(format!(
                "a = {} must lie below λ_∞,1 = {lam} of the ball where b vanishes",
                prob.a_lin
            )));
        }
    }

    let (grid, boundary) = blowup_grid(&prob.domain, opts.grid.max(4));
    let levels: Vec<(f64, Vec<f64>, Vec<f64>, f64)> = opts
        .n_levels
        .par_iter()
        .map(|&n| -> Result<_> {
            let lv = Level { prob, n, tol: opts.tol };
            let (param, shot) = lv.solve()?;
            let tr = shot.traj.expect("reached shot");
            let mut u = Vec::with_capacity(grid.len());
            let mut du = Vec::with_capacity(grid.len());
            for &r in &grid {
                let y = if matches!(prob.domain, Domain::Ball { .. }) && r < tr.x_start {
                    let nn = prob.dim as f64;
                    let g0 = prob.b.eval(0.0)? * prob.f.eval(param)? - prob.a_lin * param;
                    [param + g0 * r * r / (2.0 * nn), g0 * r / nn]
                } else {
                    tr.eval(r)
                };
                u.push(y[0]);
                du.push(y[1]);
            }
            Ok((n, u, du, shot.defect))
        })
        .collect::<Result<_>>()?;

    for w in levels.windows(2) {
        for (i, r) in grid.iter().enumerate() {
            let (a, b) = (w[0].1[i], w[1].1[i]);
            if b < a - 1e-8 * a.abs().max(1.0) {
                return Err(Error::NonMonotone(format!(
                    "u_n decreased from n = {} to n = {} at r = {r}: {a:e} -> {b:e}",
                    w[0].0, w[1].0
                )));
            }
        }
    }
    let max_defect = levels.iter().map(|l| l.3).fold(0.0f64, f64::max);
    let nl = levels.len();
    let last = &levels[nl - 1];
    let mut sol;
    if nl < 4 {
        sol = RadialSolution::new(prob.dim, grid.clone(), last.1.clone(), last.2.clone(), Classification::Undetermined);
        sol.meta.notes.push(format!("{nl} level(s): at least four are needed to extrapolate in n"));
    } else {
        let mut u = Vec::with_capacity(grid.len());
        let mut du = Vec::with_capacity(grid.len());
        let mut err = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let x: Vec<f64> = levels.iter().map(|l| l.1[i]).collect();
            let d: Vec<f64> = levels.iter().map(|l| l.2[i]).collect();
            let a1 = aitken(x[nl - 3], x[nl - 2], x[nl - 1]);
            let a0 = aitken(x[nl - 4], x[nl - 3], x[nl - 2]);
            u.push(a1);
            err.push((a1 - a0).abs());
            du.push(aitken(d[nl - 3], d[nl - 2], d[nl - 1]));
        }
        sol = RadialSolution::new(prob.dim, grid.clone(), u, du, Classification::BoundaryBlowup(boundary));
        sol.meta.values.insert("max_extrapolation_err".into(), err.iter().cloned().fold(0.0, f64::max));
        sol.u_err = Some(err);
    }
    sol.meta.iterations = nl;
    sol.meta.values.insert("levels".into(), nl as f64);
    sol.meta.values.insert("max_shot_defect".into(), max_defect);
    sol.meta.values.insert("top_level".into(), last.0);
    sol.meta.tags.insert("normalization".into(), prob.normalization.label().into());
    sol.meta.tags.insert("construction".into(), "dirichlet-levels".into());
    if max_defect > 1e-6 {
        sol.meta.notes.push(format!("largest relative boundary defect of a level: {max_defect:.2e}"));
    }
    Ok(sol)
}

/// `sup |u'' + (N−1)/r·u' − G(r, u, u')|` over `r_grid`, with exact
/// derivatives of `u`. At `r = 0` the drag term is its limit `(N−1) u''(0)`.
pub fn residual(u: &ScalarFn, rhs: &RadialRhs<'_>, dim: usize, r_grid: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &r in r_grid {
        let v = u.eval(r)?;
        let d1 = u.eval_derivative(r)?;
        let d2 = u.derivative().eval_derivative(r)?;
        let drag = if dim <= 1 {
            0.0
        } else if r == 0.0 {
            (dim as f64 - 1.0) * d2
        } else {
            (dim as f64 - 1.0) / r * d1
        };
        let res = (d2 + drag - rhs(r, v, d1)?).abs();
        if !res.is_finite() {
            return Err(Error::Numerical(format!("residual is not finite at r = {r}")));
        }
        worst = worst.max(res);
    }
    Ok(worst)
}

/// Residual of a tabulated solution in divergence form: the largest
/// `|r^{N−1}u'(r) − r₀^{N−1}u'(r₀) − ∫_{r₀}^r s^{N−1} G(s, u, u') ds|` over
/// the even nodes of a uniform grid (composite Simpson). Needs no second
/// derivatives, so it applies to shooting output.
pub fn integrated_residual(sol: &RadialSolution, rhs: &RadialRhs<'_>) -> Result<f64> {
    let n = sol.r.len();
    if n < 3 || sol.u.len() != n || sol.du.len() != n {
        return Err(Error::Precondition("integrated residual needs at least three matching grid points".into()));
    }
    let h = sol.r[1] - sol.r[0];
    if sol.r.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1e-300)) {
        return Err(Error::Precondition("integrated residual needs a uniform grid".into()));
    }
    let k = sol.dim.max(1) as i32 - 1;
    let flux = |i: usize| sol.r[i].powi(k) * sol.du[i];
    let weighted = |i: usize| -> Result<f64> { Ok(sol.r[i].powi(k) * rhs(sol.r[i], sol.u[i], sol.du[i])?) };
    let (mut acc, mut worst) = (0.0, 0.0f64);
    let mut i = 0;
    while i + 2 < n {
        acc += h / 3.0 * (weighted(i)? + 4.0 * weighted(i + 1)? + weighted(i + 2)?);
        i += 2;
        let res = (flux(i) - flux(0) - acc).abs();
        if !res.is_finite() {
            return Err(Error::Numerical(format!("integrated residual is not finite at r = {}", sol.r[i])));
        }
        worst = worst.max(res);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    /// Distance to the blow-up boundary.
    pub d: f64,
    /// `u / h(d)`.
    pub ratio_h: f64,
    /// `u / (ξ₀ h(d))`.
    pub ratio_xi0: f64,
}

/// Boundary-rate table with its extrapolation to `d = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// Linear extrapolation of `u/(ξ₀h)` to `d = 0`.
    pub limit: f64,
    /// `|limit − ratio at the nearest point|`.
    pub drift: f64,
}

impl RateTable {
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# limit={} drift={}\nd,u_over_h,u_over_xi0_h\n",
            crate::fmt17(self.limit),
            crate::fmt17(self.drift)
        );
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", crate::fmt17(r.d), crate::fmt17(r.ratio_h), crate::fmt17(r.ratio_xi0)));
        }
        s
    }
}

/// Ratios `u/h(d)` and `u/(ξ₀h(d))` at the ten grid points nearest the
/// blow-up boundary (skipping points whose extrapolation error exceeds
/// `1e-4·u` or which lie outside the profile table), with a linear
/// extrapolation to `d = 0`.
pub fn measure_boundary_rate(sol: &RadialSolution, profile: &BlowupProfile) -> Result<RateTable> {
    let Classification::BoundaryBlowup(rb) = sol.classification else {
        return Err(Error::Precondition(format!(
            "rate measurement needs a boundary blow-up solution, got {}",
            sol.classification.label()
        )));
    };
    if let Some(norm) = sol.meta.tags.get("normalization") {
        if norm != profile.variant.label() {
            return Err(Error::Precondition(format!(
                "the problem is normalised as b ~ c·{} but the profile uses the {} variant",
                if norm == "k" { "k²" } else { "k" },
                profile.variant.label()
            )));
        }
    }
    let xi0 = profile
        .xi0
        .ok_or_else(|| Error::Precondition("the profile carries no ξ₀".into()))?;
    let (t_lo, t_hi) = (profile.t[0], profile.t[profile.t.len() - 1]);
    let mut cand: Vec<(f64, f64)> = sol
        .r
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let d = (r - rb).abs();
            let u = sol.u[i];
            let ok_err = sol.u_err.as_ref().is_none_or(|e| e[i] <= 1e-4 * u.abs());
            (d >= t_lo && d <= t_hi && ok_err && u.is_finite()).then_some((d, u))
        })
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0));
    cand.truncate(10);
    if cand.len() < 3 {
        return Err(Error::Precondition(format!(
            "only {} usable grid points near the boundary (need 3)",
            cand.len()
        )));
    }
    let rows: Vec<RateRow> = cand
        .iter()
        .map(|(d, u)| {
            let h = profile.h_at(*d)?;
            Ok(RateRow { d: *d, ratio_h: u / h, ratio_xi0: u / (xi0 * h) })
        })
        .collect::<Result<_>>()?;
    let ds: Vec<f64> = rows.iter().map(|r| r.d).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio_xi0).collect();
    let (limit, _) = linear_fit(&ds, &ys);
    Ok(RateTable { drift: (limit - ys[0]).abs(), limit, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_weights_integrate_linear_data_exactly() {
        // g ≡ 1, no drift, N = 3: J(t) = t/3 and ∫₀^r J = r²/6.
        let m = Mesh::new(5.0, 64, 3, false);
        let (w, j) = m.apply(0.0, &vec![1.0; m.len()]);
        let n = m.len() - 1;
        assert!((j[n] - 5.0 / 3.0).abs() < 1e-13);
        assert!((w[n] - 25.0 / 6.0).abs() < 1e-10, "{}", w[n]);
    }

    #[test]
    fn lipschitz_formula() {
        assert_eq!(lipschitz_constant(3.0, 4.0, 0.0), 1.0);
        assert!((lipschitz_constant(1.0, 1.0, 1.0) - 2.0 * std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn kernel_mass_limits() {
        assert_eq!(kernel_mass(1, 3.0).unwrap(), 1.0);
        // N = 2: E_2(s) = s e^s E₁(s) → 1 − 1/s + … for large s.
        let e = kernel_mass(2, 1e3).unwrap();
        assert!((e - (1.0 - 1e-3 + 2e-6)).abs() < 1e-8, "{e}");
    }
}
