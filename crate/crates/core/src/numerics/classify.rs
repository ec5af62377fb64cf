//! Convergence classification of improper integrals of positive functions.

use serde::Serialize;

use super::quad::integrate_finite;
use crate::error::{Error, Result};

/// Half-width of the slope band around -1 in which the power test is not trusted.
pub const SLOPE_BAND: f64 = 0.05;
const MAX_DOUBLINGS: usize = 48;
const FIT_POINTS: usize = 10;
const MODEL_WINDOW: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status")]
pub enum ConvergenceVerdict {
    /// `slope` is the fitted log-log slope of the integrand at the far end.
    Convergent { value: f64, err: f64, slope: f64 },
    Divergent { slope: f64 },
    Inconclusive { slope: f64, diagnostics: String },
}

impl ConvergenceVerdict {
    pub fn is_convergent(&self) -> bool {
        matches!(self, ConvergenceVerdict::Convergent { .. })
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, ConvergenceVerdict::Divergent { .. })
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            ConvergenceVerdict::Convergent { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn slope(&self) -> f64 {
        match self {
            ConvergenceVerdict::Convergent { slope, .. }
            | ConvergenceVerdict::Divergent { slope }
            | ConvergenceVerdict::Inconclusive { slope, .. } => *slope,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ConvergenceVerdict::Convergent { .. } => "convergent",
            ConvergenceVerdict::Divergent { .. } => "divergent",
            ConvergenceVerdict::Inconclusive { .. } => "inconclusive",
        }
    }
}

fn slope_fit(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Least squares for `y ≈ c0 + c1·x + c2·ln x`, solved on centred, scaled
/// regressors. Returns `(c0, c1, c2)`.
fn log_power_fit(xs: &[f64], ys: &[f64], fix_linear: bool) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    if fix_linear {
        let b = slope_fit(&lx, ys);
        let c0 = ys.iter().sum::<f64>() / n - b * lx.iter().sum::<f64>() / n;
        return (c0, 0.0, b);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (mx, ml, my) = (mean(xs), mean(&lx), mean(ys));
    let sx = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>().sqrt().max(1e-300);
    let sl = lx.iter().map(|x| (x - ml).powi(2)).sum::<f64>().sqrt().max(1e-300);
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..xs.len() {
        let p = (xs[i] - mx) / sx;
        let q = (lx[i] - ml) / sl;
        let y = ys[i] - my;
        a11 += p * p;
        a12 += p * q;
        a22 += q * q;
        b1 += p * y;
        b2 += q * y;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-14 {
        return log_power_fit(xs, ys, true);
    }
    let c1 = (a22 * b1 - a12 * b2) / det / sx;
    let c2 = (a11 * b2 - a12 * b1) / det / sl;
    let c0 = my - c1 * mx - c2 * ml;
    (c0, c1, c2)
}

/// Tail `Σ_{i≥0} exp(c0 + c1·x_i + c2·ln x_i)` with `x_i = x0 + i·ln 2`:
/// explicit summation, then the midpoint-rule integral for the remainder.
fn model_tail(c0: f64, c1: f64, c2: f64, x0: f64) -> Result<f64> {
    let ln2 = std::f64::consts::LN_2;
    if c1 > 0.0 || (c1 == 0.0 && c2 >= -1.0) {
        return Ok(f64::INFINITY);
    }
    let term = |x: f64| (c0 + c1 * x + c2 * x.ln()).exp();
    let mut sum = 0.0;
    let mut i = 0usize;
    while i < 4000 {
        let t = term(x0 + i as f64 * ln2);
        sum += t;
        i += 1;
        if t <= 1e-17 * sum {
            return Ok(sum);
        }
    }
    // x = x_start/σ maps [x_start, ∞) to σ ∈ (0, 1].
    let x_start = x0 + (i as f64 - 0.5) * ln2;
    let g = |s: f64| -> Result<f64> {
        let x = x_start / s;
        Ok((c0 + c1 * x + c2 * x.ln() + x_start.ln() - 2.0 * s.ln()).exp())
    };
    Ok(sum + integrate_finite(g, 0.0, 1.0, 1e-12)?.value / ln2)
}

struct Samples {
    t: Vec<f64>,
    f: Vec<f64>,
    underflow: bool,
    overflow: bool,
}

fn sample<F>(f: &F, a: f64, t_cap: f64) -> Result<Samples>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut s = Samples { t: vec![], f: vec![], underflow: false, overflow: false };
    for j in 0..=MAX_DOUBLINGS {
        let t = a * 2f64.powi(j as i32);
        if !t.is_finite() || t > t_cap {
            break;
        }
        let v = f(t)?;
        if v.is_nan() || v < 0.0 || (v == 0.0 && s.f.is_empty()) {
            return Err(Error::NonPositive { t, value: v });
        }
        if v == 0.0 {
            s.underflow = true;
            break;
        }
        if v == f64::INFINITY {
            s.overflow = true;
            break;
        }
        s.t.push(t);
        s.f.push(v);
    }
    Ok(s)
}

/// Classify `∫_a^∞ f` for positive `f`.
///
/// Samples `f(a·2^j)`, fits the log-log slope `s` on the last ten points and
/// branches: clear decay faster than `1/t` is summed panel by panel with a
/// tail estimate; clear decay slower than `1/t` is divergent; the band in
/// between is decided by fitting `ln P_j ≈ c + σ·x_j − β·ln x_j` to the panel
/// integrals `P_j` (with `x_j = ln t_j`), which separates `t^{-1}(ln t)^{-β}`
/// tails with β above or below one.
pub fn classify_tail_integral<F>(f: F, a: f64, tol: f64) -> Result<ConvergenceVerdict>
where
    F: Fn(f64) -> Result<f64>,
{
    classify_tail_integral_until(f, a, f64::INFINITY, tol)
}

/// [`classify_tail_integral`] with sampling stopped at `t_cap`, for
/// integrands that can only be evaluated reliably on a bounded range
/// (for instance differences of nearly equal functions).
pub fn classify_tail_integral_until<F>(f: F, a: f64, t_cap: f64, tol: f64) -> Result<ConvergenceVerdict>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(a > 0.0) {
        return Err(Error::Precondition(format!("tail classification needs a > 0, got {a}")));
    }
    let s = sample(&f, a, t_cap)?;
    if s.overflow {
        return Ok(ConvergenceVerdict::Divergent { slope: f64::INFINITY });
    }
    let n = s.t.len();
    let k = n.min(FIT_POINTS);
    let slope = if k >= 2 {
        let xs: Vec<f64> = s.t[n - k..].iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = s.f[n - k..].iter().map(|v| v.ln()).collect();
        slope_fit(&xs, &ys)
    } else {
        f64::NEG_INFINITY
    };

    if !s.underflow && slope > -1.0 + SLOPE_BAND {
        return Ok(ConvergenceVerdict::Divergent { slope });
    }

    let panel_tol = tol * 1e-2;
    let mut panels: Vec<f64> = Vec::with_capacity(n);
    let mut total = 0.0;
    let mut qerr = 0.0;
    for j in 0..n.saturating_sub(1) {
        let q = integrate_finite(&f, s.t[j], s.t[j + 1], panel_tol)?;
        panels.push(q.value);
        total += q.value;
        qerr += q.err;
        if s.underflow {
            continue;
        }
        if slope < -1.0 - SLOPE_BAND {
            let local = (s.f[j + 1] / s.f[j]).ln() / (s.t[j + 1] / s.t[j]).ln();
            if local < -1.0 - 1e-3 {
                let tail = s.f[j + 1] * s.t[j + 1] / (-local - 1.0);
                if tail <= 0.25 * tol * (1.0 + total.abs()) {
                    return Ok(ConvergenceVerdict::Convergent {
                        value: total + tail,
                        err: qerr + tail,
                        slope,
                    });
                }
            }
        }
    }
    if s.underflow {
        // The integrand fell below the smallest double: the remaining tail is negligible.
        if n >= 1 {
            let t_last = *s.t.last().unwrap_or(&a);
            let q = integrate_finite(&f, t_last, 2.0 * t_last, panel_tol)?;
            total += q.value;
            qerr += q.err;
        }
        return Ok(ConvergenceVerdict::Convergent { value: total, err: qerr, slope });
    }

    let m = panels.len();
    if m < 8 {
        return Ok(ConvergenceVerdict::Inconclusive {
            slope,
            diagnostics: format!("only {m} panels before the sample range ended"),
        });
    }
    let ln2 = std::f64::consts::LN_2;
    let x_of = |j: usize| s.t[j].ln() + 0.5 * ln2;
    // Three-parameter fit; when the linear coefficient is indistinguishable
    // from zero it is pinned there so β is not polluted by collinearity.
    let fit_window = |end: usize, width: usize| {
        let w = width.min(end);
        let start = end - w;
        let xs: Vec<f64> = (start..end).map(x_of).collect();
        let ys: Vec<f64> = panels[start..end].iter().map(|p| p.ln()).collect();
        let full = log_power_fit(&xs, &ys, false);
        if full.1.abs() <= 0.01 {
            (log_power_fit(&xs, &ys, true), full.1)
        } else {
            (full, full.1)
        }
    };
    // Error bar: disagreement with a fit that ends four panels earlier and
    // with a half-width fit, scaled up since both share the model bias.
    let tail_pair = |c: (f64, f64, f64), d: (f64, f64, f64), e: (f64, f64, f64)| -> Result<(f64, f64)> {
        let tail = model_tail(c.0, c.1, c.2, x_of(m))?;
        let shifted = model_tail(d.0, d.1, d.2, x_of(m - 4))?
            - panels[m - 4..m].iter().sum::<f64>();
        let narrow = model_tail(e.0, e.1, e.2, x_of(m))?;
        let spread = if shifted.is_finite() && narrow.is_finite() {
            4.0 * (tail - shifted).abs().max((tail - narrow).abs())
        } else {
            tail
        };
        Ok((tail, spread))
    };
    let (c, sigma) = fit_window(m, MODEL_WINDOW);
    let (d, _) = fit_window(m - 4, MODEL_WINDOW);
    let (e, _) = fit_window(m, MODEL_WINDOW / 2);
    let beta = -c.2;
    let diag = format!("panel model σ={sigma:.5}, β={beta:.4} over {m} panels");

    if slope < -1.0 - SLOPE_BAND {
        let (tail, spread) = tail_pair(c, d, e)?;
        if tail.is_finite() {
            return Ok(ConvergenceVerdict::Convergent {
                value: total + tail,
                err: qerr + spread,
                slope,
            });
        }
        return Ok(ConvergenceVerdict::Inconclusive {
            slope,
            diagnostics: format!("power test says convergent but the {diag} diverges"),
        });
    }

    // Slope inside the band: decide from the panel model.
    if c.1 > 0.0 || (c.1 == 0.0 && beta < 1.0 - SLOPE_BAND) {
        return Ok(ConvergenceVerdict::Divergent { slope });
    }
    if c.1 < 0.0 || beta > 1.0 + SLOPE_BAND {
        let (tail, spread) = tail_pair(c, d, e)?;
        if tail.is_finite() {
            return Ok(ConvergenceVerdict::Convergent {
                value: total + tail,
                err: qerr + spread,
                slope,
            });
        }
    }
    Ok(ConvergenceVerdict::Inconclusive { slope, diagnostics: diag })
}

/// Classify `∫_0^b f` for `f` positive on `(0, b]`, by the change of
/// variables `t = b²/τ` which maps it to a tail integral sampled at
/// `τ = b·2^j`, i.e. at `t = b·2^{-j}`. Reported slopes refer to `f` near 0.
pub fn classify_origin_integral<F>(f: F, b: f64, tol: f64) -> Result<ConvergenceVerdict>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(b > 0.0) {
        return Err(Error::Precondition(format!("origin classification needs b > 0, got {b}")));
    }
    let b2 = b * b;
    let mirrored = |tau: f64| -> Result<f64> {
        let t = b2 / tau;
        Ok(f(t)? * b2 / (tau * tau))
    };
    let v = classify_tail_integral(mirrored, b, tol)?;
    let back = |s: f64| -s - 2.0;
    Ok(match v {
        ConvergenceVerdict::Convergent { value, err, slope } => {
            ConvergenceVerdict::Convergent { value, err, slope: back(slope) }
        }
        ConvergenceVerdict::Divergent { slope } => ConvergenceVerdict::Divergent { slope: back(slope) },
        ConvergenceVerdict::Inconclusive { slope, diagnostics } => {
            ConvergenceVerdict::Inconclusive { slope: back(slope), diagnostics }
        }
    })
}
