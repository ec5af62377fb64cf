//! Dormand–Prince 5(4) with the 5th-order continuous extension.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Take steps of exactly this size (no error control) when set.
    pub fixed_step: Option<f64>,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, fixed_step: None, max_steps: 200_000, h_max: f64::INFINITY }
    }
}

#[derive(Debug, Clone)]
pub struct DenseStep<const D: usize> {
    pub x0: f64,
    pub h: f64,
    rcont: [[f64; D]; 5],
}

impl<const D: usize> DenseStep<D> {
    pub fn x1(&self) -> f64 {
        self.x0 + self.h
    }

    pub fn eval(&self, x: f64) -> [f64; D] {
        let th = (x - self.x0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        let mut y = [0.0; D];
        for i in 0..D {
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// Reached the requested end point.
    Reached,
    /// Event `index` crossed zero at `x`.
    Event { index: usize, x: f64 },
}

/// Accepted steps with dense output.
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    pub x_start: f64,
    pub y_start: [f64; D],
    pub steps: Vec<DenseStep<D>>,
    pub stop: Stop,
    pub x_end: f64,
    pub y_end: [f64; D],
    pub rejected: usize,
}

impl<const D: usize> Trajectory<D> {
    /// Dense evaluation anywhere between the start and the final point.
    pub fn eval(&self, x: f64) -> [f64; D] {
        if self.steps.is_empty() || x == self.x_start {
            return self.y_start;
        }
        let forward = self.steps[0].h > 0.0;
        let key = |s: &DenseStep<D>| if forward { s.x1() } else { -s.x1() };
        let probe = if forward { x } else { -x };
        let idx = self.steps.partition_point(|s| key(s) < probe).min(self.steps.len() - 1);
        if x == self.x_end {
            return self.y_end;
        }
        self.steps[idx].eval(x)
    }
}

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] += h * s;
    }
    out
}

fn finite<const D: usize>(y: &[f64; D]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn norm<const D: usize>(v: &[f64; D], sc: &[f64; D]) -> f64 {
    (v.iter().zip(sc).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / D as f64).sqrt()
}

/// Integrate `y' = rhs(x, y)` from `x0` to `x_end` (either direction).
///
/// `events[i](x, y)` are checked after every accepted step; the first one to
/// change sign from negative to non-negative stops the integration and its
/// root is located on the dense output by bisection.
pub fn integrate<const D: usize, F>(
    rhs: F,
    x0: f64,
    y0: [f64; D],
    x_end: f64,
    opts: &OdeOptions,
    events: &[&dyn Fn(f64, &[f64; D]) -> f64],
) -> Result<Trajectory<D>>
where
    F: Fn(f64, &[f64; D]) -> Result<[f64; D]>,
{
    let dir = if x_end >= x0 { 1.0 } else { -1.0 };
    let span = (x_end - x0).abs();
    let mut traj = Trajectory {
        x_start: x0,
        y_start: y0,
        steps: Vec::new(),
        stop: Stop::Reached,
        x_end: x0,
        y_end: y0,
        rejected: 0,
    };
    if span == 0.0 {
        return Ok(traj);
    }
    let mut x = x0;
    let mut y = y0;
    let mut k1 = rhs(x, &y)?;
    let mut ev_prev: Vec<f64> = events.iter().map(|e| e(x, &y)).collect();

    let mut h = match opts.fixed_step {
        Some(h) => h.abs().min(span),
        None => initial_step(&rhs, x, &y, &k1, dir, span, opts)?,
    };
    let min_step = |x: f64| 1e-14 * x.abs().max(span) + 1e-300;

    let mut steps = 0;
    let mut last_err = 1e-4f64;
    loop {
        if steps >= opts.max_steps {
            return Err(Error::Numerical(format!("step budget exhausted at x = {x:e}")));
        }
        steps += 1;
        let remaining = (x_end - x) * dir;
        if remaining <= min_step(x) * 0.5 {
            break;
        }
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        let hs = h * dir;
        let attempt = (|| -> Result<([f64; D], [f64; D], [[f64; D]; 6])> {
            let k2 = rhs(x + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]))?;
            let k3 = rhs(x + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = rhs(x + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = rhs(
                x + C5 * hs,
                &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = rhs(
                x + hs,
                &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            )?;
            let y1 = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = rhs(x + hs, &y1)?;
            Ok((y1, k7, [k2, k3, k4, k5, k6, k7]))
        })();

        let (y1, k7, ks) = match attempt {
            Ok(v) if finite(&v.0) && finite(&v.1) => v,
            other => {
                if opts.fixed_step.is_some() || h * 0.25 < min_step(x) {
                    return match other {
                        Err(e) => Err(e),
                        Ok(_) => Err(Error::StepUnderflow { r: x }),
                    };
                }
                h *= 0.25;
                traj.rejected += 1;
                continue;
            }
        };
        let [_k2, k3, k4, k5, k6, _] = ks;

        let err = if opts.fixed_step.is_some() {
            0.0
        } else {
            let mut e = [0.0; D];
            let mut sc = [0.0; D];
            for i in 0..D {
                e[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                sc[i] = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            }
            norm(&e, &sc)
        };

        if err > 1.0 {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            h *= fac;
            traj.rejected += 1;
            if h < min_step(x) {
                return Err(Error::StepUnderflow { r: x });
            }
            continue;
        }

        let mut rcont = [[0.0; D]; 5];
        for i in 0..D {
            let ydiff = y1[i] - y[i];
            let bspl = hs * k1[i] - ydiff;
            rcont[0][i] = y[i];
            rcont[1][i] = ydiff;
            rcont[2][i] = bspl;
            rcont[3][i] = ydiff - hs * k7[i] - bspl;
            rcont[4][i] = hs
                * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let step = DenseStep { x0: x, h: hs, rcont };
        let x1 = if last { x_end } else { x + hs };

        // Event detection on the accepted step.
        let ev_now: Vec<f64> = events.iter().map(|e| e(x1, &y1)).collect();
        let mut hit: Option<(usize, f64)> = None;
        for (i, ev) in events.iter().enumerate() {
            if ev_prev[i] < 0.0 && ev_now[i] >= 0.0 {
                let (mut lo, mut hi) = (x, x1);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid == lo || mid == hi {
                        break;
                    }
                    if ev(mid, &step.eval(mid)) >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let xe = hi;
                let earlier = match hit {
                    None => true,
                    Some((_, xh)) => (xe - xh) * dir < 0.0,
                };
                if earlier {
                    hit = Some((i, xe));
                }
            }
        }
        traj.steps.push(step);
        if let Some((index, xe)) = hit {
            let ye = traj.steps.last().map(|s| s.eval(xe)).unwrap_or(y1);
            traj.stop = Stop::Event { index, x: xe };
            traj.x_end = xe;
            traj.y_end = ye;
            return Ok(traj);
        }
        ev_prev = ev_now;
        x = x1;
        y = y1;
        k1 = k7;
        if last {
            break;
        }
        if opts.fixed_step.is_none() {
            // PI controller on the error norm.
            let e = err.max(1e-10);
            let fac = 0.9 * e.powf(-0.7 / 5.0) * last_err.powf(0.4 / 5.0);
            h *= fac.clamp(0.2, 5.0);
            h = h.min(opts.h_max);
            last_err = e;
        }
    }
    traj.x_end = x;
    traj.y_end = y;
    Ok(traj)
}

fn initial_step<const D: usize, F>(
    rhs: &F,
    x: f64,
    y: &[f64; D],
    f0: &[f64; D],
    dir: f64,
    span: f64,
    opts: &OdeOptions,
) -> Result<f64>
where
    F: Fn(f64, &[f64; D]) -> Result<[f64; D]>,
{
    let mut sc = [0.0; D];
    for i in 0..D {
        sc[i] = opts.atol + opts.rtol * y[i].abs();
    }
    let d0 = norm(y, &sc);
    let d1 = norm(f0, &sc);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = axpy(y, h0 * dir, &[(1.0, f0)]);
    let f1 = match rhs(x + h0 * dir, &y1) {
        Ok(v) if finite(&v) => v,
        _ => return Ok((h0 * 1e-3).max(1e-12 * span)),
    };
    let mut diff = [0.0; D];
    for i in 0..D {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = norm(&diff, &sc) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6 * span)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span).min(opts.h_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_and_dense_output() {
        let rhs = |_x: f64, y: &[f64; 2]| Ok([y[1], -y[0]]);
        let opts = OdeOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        let tr = integrate(rhs, 0.0, [0.0, 1.0], 10.0, &opts, &[]).unwrap();
        assert!((tr.y_end[0] - 10f64.sin()).abs() < 1e-9);
        for x in [0.3, 2.7, 5.55, 9.99] {
            assert!((tr.eval(x)[0] - x.sin()).abs() < 1e-9, "{x}");
        }
        let back = integrate(rhs, 10.0, tr.y_end, 0.0, &opts, &[]).unwrap();
        assert!(back.y_end[0].abs() < 1e-8 && (back.y_end[1] - 1.0).abs() < 1e-8);
        assert!((back.eval(4.0)[0] - 4f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn event_locates_blowup() {
        // y' = y², y(0) = 1 blows up at x = 1; stop when y reaches 1e8.
        let rhs = |_x: f64, y: &[f64; 1]| Ok([y[0] * y[0]]);
        let ev = |_x: f64, y: &[f64; 1]| y[0] - 1e8;
        let tr = integrate(rhs, 0.0, [1.0], 2.0, &OdeOptions::default(), &[&ev]).unwrap();
        match tr.stop {
            Stop::Event { x, .. } => assert!((x - (1.0 - 1e-8)).abs() < 1e-10, "{x}"),
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn fixed_step_order() {
        let rhs = |_x: f64, y: &[f64; 1]| Ok([-y[0]]);
        let err = |h: f64| {
            let o = OdeOptions { fixed_step: Some(h), ..Default::default() };
            (integrate(rhs, 0.0, [1.0], 1.0, &o, &[]).unwrap().y_end[0] - (-1f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 24.0, "{ratio}");
    }
}
