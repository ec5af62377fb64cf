//! Quadrature, improper-integral classification, root finding and the
//! radial initial-value integrator shared by the solvers.

pub mod classify;
pub mod interp;
pub mod ode;
pub mod quad;
pub mod radial_ivp;
pub mod roots;

pub use classify::{
    classify_origin_integral, classify_tail_integral, classify_tail_integral_until, ConvergenceVerdict,
};
pub use interp::MonotoneCubic;
pub use quad::{integrate_finite, integrate_relative, Antiderivative, Quadrature};
pub use radial_ivp::{
    integrate_radial_ivp, radial_trajectory, Classification, RadialIvp, RadialRhs, RadialSolution,
    SolutionMeta, DEFAULT_BLOWUP,
};
pub use roots::{find_root_bracketed, find_root_monotone};

/// Least-squares slope of `ys` against `xs`.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Least-squares line `y ≈ c0 + c1·x`, returning `(c0, c1)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let c1 = linear_slope(xs, ys);
    let c0 = ys.iter().sum::<f64>() / n - c1 * xs.iter().sum::<f64>() / n;
    (c0, c1)
}

/// Aitken Δ² acceleration of the last three terms; falls back to the last
/// term when the second difference vanishes.
pub fn aitken(x0: f64, x1: f64, x2: f64) -> f64 {
    let d2 = x2 - 2.0 * x1 + x0;
    if d2.abs() <= 1e-14 * (x0.abs() + x1.abs() + x2.abs()) || !d2.is_finite() {
        return x2;
    }
    x2 - (x2 - x1) * (x2 - x1) / d2
}
