use std::collections::BTreeMap;

use serde::Serialize;

use super::ode::{integrate, OdeOptions, Stop, Trajectory};
use crate::error::{Error, Result};

pub const DEFAULT_BLOWUP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Classification {
    Bounded,
    EntireLarge,
    BoundaryBlowup(f64),
    NoSolution,
    Undetermined,
}

impl Classification {
    pub fn label(&self) -> String {
        match self {
            Classification::Bounded => "bounded".into(),
            Classification::EntireLarge => "entire-large".into(),
            Classification::BoundaryBlowup(r) => format!("boundary-blowup({r:.17e})"),
            Classification::NoSolution => "no-solution".into(),
            Classification::Undetermined => "undetermined".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolutionMeta {
    pub iterations: usize,
    pub residual: f64,
    /// Named scalar diagnostics (drift, error bars, constants).
    pub values: BTreeMap<String, f64>,
    /// Named labels (construction used, normalisation of the potential).
    pub tags: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

/// Grid solution of a radial problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialSolution {
    pub dim: usize,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub v: Option<Vec<f64>>,
    pub dv: Option<Vec<f64>>,
    /// Pointwise error estimate of `u`, when the solver produces one.
    pub u_err: Option<Vec<f64>>,
    pub classification: Classification,
    pub meta: SolutionMeta,
}

impl RadialSolution {
    pub fn new(dim: usize, r: Vec<f64>, u: Vec<f64>, du: Vec<f64>, classification: Classification) -> Self {
        RadialSolution {
            dim,
            r,
            u,
            du,
            v: None,
            dv: None,
            u_err: None,
            classification,
            meta: SolutionMeta::default(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Linear interpolation of `u` on the grid.
    pub fn u_at(&self, r: f64) -> Option<f64> {
        interp(&self.r, &self.u, r)
    }

    /// CSV with columns r,u,[v,]u_prime[,u_err] and the classification in a header comment.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# classification={}\n", self.classification.label());
        s.push_str(if self.v.is_some() { "r,u,v,u_prime" } else { "r,u,u_prime" });
        s.push_str(if self.u_err.is_some() { ",u_err\n" } else { "\n" });
        for i in 0..self.r.len() {
            s.push_str(&crate::fmt17(self.r[i]));
            s.push(',');
            s.push_str(&crate::fmt17(self.u[i]));
            if let Some(v) = &self.v {
                s.push(',');
                s.push_str(&crate::fmt17(v[i]));
            }
            s.push(',');
            s.push_str(&crate::fmt17(self.du[i]));
            if let Some(e) = &self.u_err {
                s.push(',');
                s.push_str(&crate::fmt17(e[i]));
            }
            s.push('\n');
        }
        s
    }
}

pub(crate) fn interp(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let (lo, hi) = if xs[0] <= xs[n - 1] { (xs[0], xs[n - 1]) } else { (xs[n - 1], xs[0]) };
    if x < lo || x > hi {
        return None;
    }
    if n == 1 {
        return Some(ys[0]);
    }
    let inc = xs[0] < xs[n - 1];
    let i = if inc {
        xs.partition_point(|v| *v < x)
    } else {
        xs.partition_point(|v| *v > x)
    }
    .clamp(1, n - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = if x1 == x0 { 0.0 } else { (x - x0) / (x1 - x0) };
    Some(ys[i - 1] + w * (ys[i] - ys[i - 1]))
}

/// Right-hand side `G(r, u, u')` of `u'' + (N-1)/r·u' = G`.
pub type RadialRhs<'a> = dyn Fn(f64, f64, f64) -> Result<f64> + Sync + 'a;

#[derive(Debug, Clone, Copy)]
pub struct RadialIvp {
    pub u0: f64,
    pub du0: f64,
    pub dim: usize,
    pub r_max: f64,
    pub tol: f64,
    pub blowup_threshold: f64,
    /// Allow non-positive `u0`.
    pub signed: bool,
    /// Output grid points (uniform in r).
    pub n_out: usize,
}

impl RadialIvp {
    pub fn new(u0: f64, dim: usize, r_max: f64) -> Self {
        RadialIvp {
            u0,
            du0: 0.0,
            dim,
            r_max,
            tol: 1e-10,
            blowup_threshold: DEFAULT_BLOWUP,
            signed: false,
            n_out: 1001,
        }
    }
}

/// Radius of the series start away from the `(N-1)/r` singularity.
pub fn series_radius(r_max: f64) -> f64 {
    1e-6 * r_max
}

/// Integrate and keep the dense trajectory in the variables `[u, u']`.
pub fn radial_trajectory(rhs: &RadialRhs<'_>, p: &RadialIvp) -> Result<Trajectory<2>> {
    if p.dim == 0 {
        return Err(Error::Precondition("dimension N must be ≥ 1".into()));
    }
    if !(p.r_max > 0.0) {
        return Err(Error::Precondition(format!("r_max must be positive, got {}", p.r_max)));
    }
    if !p.signed && !(p.u0 > 0.0) {
        return Err(Error::Precondition(format!("u0 must be positive (got {}); use signed mode", p.u0)));
    }
    if p.dim > 1 && p.du0 != 0.0 {
        return Err(Error::Precondition("a regular radial solution needs u'(0) = 0 when N > 1".into()));
    }
    let n = p.dim as f64;
    let (r0, start) = if p.dim > 1 {
        let eps = series_radius(p.r_max);
        let g0 = rhs(0.0, p.u0, 0.0)?;
        (eps, [p.u0 + g0 * eps * eps / (2.0 * n), g0 * eps / n])
    } else {
        (0.0, [p.u0, p.du0])
    };
    let f = |r: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let g = rhs(r, y[0], y[1])?;
        let drag = if p.dim > 1 { (n - 1.0) / r * y[1] } else { 0.0 };
        Ok([y[1], g - drag])
    };
    let thr = p.blowup_threshold;
    let blow = move |_r: f64, y: &[f64; 2]| y[0].abs().max(y[1].abs()) - thr;
    let opts = OdeOptions { rtol: p.tol, atol: p.tol * 1e-2, ..Default::default() };
    let mut tr = integrate(f, r0, start, p.r_max, &opts, &[&blow])?;
    if p.dim > 1 {
        tr.x_start = r0;
    }
    Ok(tr)
}

/// Integrate `u'' + (N-1)/r·u' = G(r,u,u')`, `u(0)=u0`, `u'(0)=du0`.
pub fn integrate_radial_ivp(rhs: &RadialRhs<'_>, p: &RadialIvp) -> Result<RadialSolution> {
    let tr = radial_trajectory(rhs, p)?;
    let (r_stop, class) = match tr.stop {
        Stop::Event { x, .. } => (x, Classification::BoundaryBlowup(x)),
        Stop::Reached => (p.r_max, Classification::Bounded),
    };
    let m = p.n_out.max(2);
    let mut r = Vec::with_capacity(m);
    let mut u = Vec::with_capacity(m);
    let mut du = Vec::with_capacity(m);
    r.push(0.0);
    u.push(p.u0);
    du.push(p.du0);
    for i in 1..m {
        let ri = r_stop * i as f64 / (m - 1) as f64;
        let y = if ri < tr.x_start { series_at(rhs, p, ri)? } else { tr.eval(ri) };
        r.push(ri);
        u.push(y[0]);
        du.push(y[1]);
    }
    let mut sol = RadialSolution::new(p.dim, r, u, du, class);
    sol.meta.iterations = tr.steps.len();
    sol.meta.values.insert("rejected_steps".into(), tr.rejected as f64);
    Ok(sol)
}

fn series_at(rhs: &RadialRhs<'_>, p: &RadialIvp, r: f64) -> Result<[f64; 2]> {
    let n = p.dim as f64;
    let g0 = rhs(0.0, p.u0, 0.0)?;
    Ok([p.u0 + g0 * r * r / (2.0 * n), g0 * r / n])
}
