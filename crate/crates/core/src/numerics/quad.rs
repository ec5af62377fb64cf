//! Adaptive double-exponential (tanh-sinh) quadrature.
//!
//! Nodes are placed by their distance to the nearest endpoint, so a
//! singularity sitting at `a = 0` is resolved down to subnormal distances.
//! Callers with a singular endpoint should arrange for it to be the left
//! endpoint at the origin.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    pub err: f64,
    pub evals: usize,
}

const TAU_MAX: f64 = 6.5;
const MAX_LEVEL: u32 = 6;
const MAX_INTERVALS: usize = 600;

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

/// One tanh-sinh level: `odd_only` skips nodes already summed at coarser levels.
fn level_sum<F>(f: &F, a: f64, b: f64, h: f64, odd_only: bool, evals: &mut usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let hw = 0.5 * (b - a);
    let mut sum = 0.0;
    if !odd_only {
        let x = a + hw;
        sum += hw * FRAC_PI_2 * f(x)?;
        *evals += 1;
    }
    let step = if odd_only { 2 } else { 1 };
    for side in [1.0f64, -1.0] {
        let mut k = 1usize;
        let mut small = 0;
        loop {
            let tau = k as f64 * h;
            if tau > TAU_MAX {
                break;
            }
            let u = FRAC_PI_2 * tau.sinh();
            let e = (-2.0 * u).exp();
            let delta = 2.0 * hw * e / (1.0 + e);
            let w = hw * FRAC_PI_2 * tau.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
            let x = if side > 0.0 { b - delta } else { a + delta };
            if delta <= 0.0 || x <= a || x >= b || w == 0.0 {
                break;
            }
            let fx = f(x)?;
            *evals += 1;
            let term = w * fx;
            if !term.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite integrand contribution at t = {x:e}"
                )));
            }
            sum += term;
            if tau > 1.0 && term.abs() <= 1e-18 * sum.abs() {
                small += 1;
                if small >= 3 {
                    break;
                }
            } else {
                small = 0;
            }
            k += step;
        }
    }
    Ok(sum)
}

fn tanh_sinh<F>(f: &F, a: f64, b: f64, tol: f64, abs_floor: f64, evals: &mut usize) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut h = 1.0;
    let mut raw = level_sum(f, a, b, h, false, evals)?;
    let mut prev = raw * h;
    let mut err = f64::INFINITY;
    for _ in 1..=MAX_LEVEL {
        h *= 0.5;
        raw += level_sum(f, a, b, h, true, evals)?;
        let cur = raw * h;
        err = (cur - prev).abs();
        prev = cur;
        if err <= tol * (abs_floor + cur.abs()) * 0.1 {
            break;
        }
    }
    Ok((prev, err))
}

fn local_power<F>(f: &F, x1: f64, x2: f64, d1: f64, d2: f64) -> Option<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let v1 = f(x1).ok()?;
    let v2 = f(x2).ok()?;
    if v1 == 0.0 || v2 == 0.0 || v1.signum() != v2.signum() || !v1.is_finite() || !v2.is_finite() {
        return None;
    }
    Some((v2.abs() / v1.abs()).ln() / (d2 / d1).ln())
}

/// Integrate `f` over `[a, b]`; `err ≤ tol·(1+|value|)` on success.
pub fn integrate_finite<F>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<f64>,
{
    integrate_impl(&f, a, b, tol, 1.0)
}

/// Like [`integrate_finite`] but with a purely relative target
/// `err ≤ rtol·|value|`, for integrals that may be tiny.
pub fn integrate_relative<F>(f: F, a: f64, b: f64, rtol: f64) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<f64>,
{
    integrate_impl(&f, a, b, rtol, 0.0)
}

fn integrate_impl<F>(f: &F, a: f64, b: f64, tol: f64, abs_floor: f64) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Precondition("finite endpoints required".into()));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, err: 0.0, evals: 0 });
    }
    if a > b {
        return Err(Error::Precondition(format!("need a < b, got [{a}, {b}]")));
    }
    let tol = tol.max(1e-15);
    let len = b - a;
    // An endpoint blow-up of power ≤ -1 would make the truncated node sum
    // converge to a meaningless finite number, so reject it up front.
    let (d1, d2) = (1e-13 * len, 1e-10 * len);
    for (x1, x2, at) in [(a + d1, a + d2, a), (b - d1, b - d2, b)] {
        if let Some(p) = local_power(f, x1, x2, d1, d2) {
            if p <= -1.0 + 1e-6 {
                return Err(Error::NonIntegrable { at, power: p });
            }
        }
    }

    let mut evals = 0;
    let (v, e) = tanh_sinh(f, a, b, tol, abs_floor, &mut evals)?;
    let mut panels = vec![Panel { a, b, value: v, err: e }];
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        let scale: f64 = panels.iter().map(|p| p.value.abs()).sum();
        // Node positions carry rounding of order ε·max(|a|,|b|), which is
        // large relative to a short interval far from the origin.
        let placement = a.abs().max(b.abs()) / len;
        let floor = f64::EPSILON * scale * (64.0 + 16.0 * placement);
        let target = (tol * (abs_floor + total.abs())).max(floor);
        if err <= target {
            return Ok(Quadrature { value: total, err, evals });
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(Error::MaxSubdivision { a, b, err });
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.err > best.1 { (i, p.err) } else { best });
        let p = panels.swap_remove(idx);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::MaxSubdivision { a, b, err });
        }
        let sub_tol = tol * 0.5;
        let (v1, e1) = tanh_sinh(f, p.a, mid, sub_tol, abs_floor, &mut evals)?;
        let (v2, e2) = tanh_sinh(f, mid, p.b, sub_tol, abs_floor, &mut evals)?;
        panels.push(Panel { a: p.a, b: mid, value: v1, err: e1 });
        panels.push(Panel { a: mid, b: p.b, value: v2, err: e2 });
    }
}

/// Relative-accuracy integration that relaxes the target when the integrand
/// is too noisy (cancellation in its evaluation) to meet it.
fn integrate_tolerant<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut t = tol;
    loop {
        match integrate_relative(f, a, b, t) {
            Err(Error::MaxSubdivision { .. }) if t < 1e-6 => t *= 1e3,
            other => return other,
        }
    }
}

/// Antiderivative `F(x) = ∫₀ˣ f` backed by a table of partial integrals at
/// dyadic knots, so each evaluation costs one short quadrature.
#[derive(Debug, Clone)]
pub struct Antiderivative {
    lo_exp: i32,
    knots: Vec<f64>,
    tol: f64,
    /// The table stopped because the integral overflowed or `f` failed.
    saturated: bool,
}

const KNOT_LO: i32 = -60;

impl Antiderivative {
    /// `f` must be integrable at 0 and finite on `(0, ∞)` up to where its
    /// integral overflows. `x_max` bounds the tabulated range.
    pub fn new<F>(f: &F, x_max: f64, tol: f64) -> Result<Antiderivative>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let first = 2f64.powi(KNOT_LO);
        let q = integrate_tolerant(f, 0.0, first, tol)?;
        let mut knots = vec![q.value];
        let mut k = KNOT_LO;
        let mut acc = q.value;
        let mut saturated = false;
        while 2f64.powi(k) < x_max && k < 1022 {
            let lo = 2f64.powi(k);
            let hi = 2f64.powi(k + 1);
            match integrate_tolerant(f, lo, hi, tol) {
                Ok(q) if (acc + q.value).is_finite() => {
                    acc += q.value;
                    knots.push(acc);
                }
                _ => {
                    saturated = true;
                    break;
                }
            }
            k += 1;
        }
        Ok(Antiderivative { lo_exp: KNOT_LO, knots, tol, saturated })
    }

    /// Largest argument covered by the table.
    pub fn x_max(&self) -> f64 {
        2f64.powi(self.lo_exp + self.knots.len() as i32 - 1)
    }

    /// True when the table ended early because the integral overflowed;
    /// evaluations past the end then return `+∞`.
    pub fn saturated(&self) -> bool {
        self.saturated
    }

    pub fn eval<F>(&self, f: &F, x: f64) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        if x <= 0.0 {
            if x == 0.0 {
                return Ok(0.0);
            }
            return Err(Error::Precondition(format!("antiderivative needs x ≥ 0, got {x}")));
        }
        if x > self.x_max() * 2.0 {
            if self.saturated {
                return Ok(f64::INFINITY);
            }
            return Err(Error::OutOfRange(format!(
                "antiderivative table ends at {:e}, requested {x:e}",
                self.x_max()
            )));
        }
        let first = 2f64.powi(self.lo_exp);
        if x <= first {
            return Ok(integrate_tolerant(f, 0.0, x, self.tol)?.value);
        }
        let mut k = x.log2().floor() as i32;
        while 2f64.powi(k) > x {
            k -= 1;
        }
        while 2f64.powi(k + 1) <= x {
            k += 1;
        }
        let idx = (k - self.lo_exp) as usize;
        if idx >= self.knots.len() && self.saturated {
            return Ok(f64::INFINITY);
        }
        if idx >= self.knots.len() {
            return Err(Error::OutOfRange(format!(
                "antiderivative table ends at {:e}, requested {x:e}",
                self.x_max()
            )));
        }
        let knot = 2f64.powi(k);
        if x == knot {
            return Ok(self.knots[idx]);
        }
        let rest = integrate_tolerant(f, knot, x, self.tol);
        if idx + 1 == self.knots.len() && self.saturated {
            return Ok(match rest {
                Ok(q) if (self.knots[idx] + q.value).is_finite() => self.knots[idx] + q.value,
                _ => f64::INFINITY,
            });
        }
        Ok(self.knots[idx] + rest?.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_integrals() {
        let q = integrate_finite(Ok, 0.0, 1.0, 1e-12).unwrap();
        assert!((q.value - 0.5).abs() < 1e-12);
        let q = integrate_finite(|t: f64| Ok(t.sin()), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((q.value - 2.0).abs() < 1e-12);
        let q = integrate_finite(|t: f64| Ok(t.powf(-0.5)), 0.0, 1.0, 1e-12).unwrap();
        assert!((q.value - 2.0).abs() < 1e-10, "{q:?}");
    }

    #[test]
    fn rejects_non_integrable() {
        let e = integrate_finite(|t: f64| Ok(1.0 / t), 0.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(e, Error::NonIntegrable { .. }), "{e:?}");
    }

    #[test]
    fn antiderivative_matches_closed_form() {
        let f = |t: f64| Ok(t.powi(3));
        let a = Antiderivative::new(&f, 1e60, 1e-13).unwrap();
        for x in [1e-20, 0.3, 1.0, 7.5, 1e5, 3.3e40] {
            let got = a.eval(&f, x).unwrap();
            let want = x.powi(4) / 4.0;
            assert!(((got - want) / want).abs() < 1e-11, "{x} {got} {want}");
        }
    }
}
