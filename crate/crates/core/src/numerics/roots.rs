use crate::error::{Error, Result};

const MAX_EXPANSIONS: usize = 60;
const MAX_ITER: usize = 400;

/// Solve `fn(x) = target` for monotone `fn` by an Illinois false-position /
/// bisection hybrid. If `[lo, hi]` does not bracket the target, `hi` is
/// pushed outward by doubling its distance from `lo`, at most 60 times.
///
/// Stops when `|fn(x) − target| ≤ tol` or the bracket is narrower than
/// `tol·(1+|x|)`.
pub fn find_root_monotone<F>(f: F, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    solve(&f, target, lo, hi, tol, tol, true)
}

/// Variant with separate tolerances: `xtol` is relative on the bracket width,
/// `ftol` absolute on the residual. No bracket expansion.
pub fn find_root_bracketed<F>(f: F, target: f64, lo: f64, hi: f64, xtol: f64, ftol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    solve(&f, target, lo, hi, xtol, ftol, false)
}

fn solve<F>(f: &F, target: f64, lo: f64, hi: f64, xtol: f64, ftol: f64, expand: bool) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(lo < hi) {
        return Err(Error::Precondition(format!("root bracket needs lo < hi, got [{lo}, {hi}]")));
    }
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a)? - target;
    let mut fb = f(b)? - target;
    if fa == 0.0 {
        return Ok(a);
    }
    let mut tries = 0;
    while fa.signum() == fb.signum() {
        if !expand || tries >= MAX_EXPANSIONS {
            return Err(Error::NoBracket { target, lo, hi: b });
        }
        let width = b - a;
        a = b;
        fa = fb;
        b += 2.0 * width;
        fb = f(b)? - target;
        tries += 1;
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut side = 0i8;
    let mut x = a;
    for _ in 0..MAX_ITER {
        let width = (b - a).abs();
        // False position, falling back to bisection when the step is poor.
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c)? - target;
        x = c;
        if fc.abs() <= ftol || fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        let new_width = (b - a).abs();
        if new_width <= xtol * (1.0 + c.abs()) {
            return Ok(0.5 * (a + b));
        }
        if new_width > 0.5 * width {
            // Slow false-position progress: force a bisection step.
            let m = 0.5 * (a + b);
            let fm = f(m)? - target;
            x = m;
            if fm == 0.0 || fm.abs() <= ftol {
                return Ok(m);
            }
            if fm.signum() == fb.signum() {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
            side = 0;
            if (b - a).abs() <= xtol * (1.0 + m.abs()) {
                return Ok(0.5 * (a + b));
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_roots() {
        let x = find_root_monotone(|t| Ok(t * t), 4.0, 0.0, 10.0, 1e-12).unwrap();
        assert!((x - 2.0).abs() < 1e-10);
        let x = find_root_monotone(|t: f64| Ok(t.exp()), 1.0, -1.0, 1.0, 1e-14).unwrap();
        assert!(x.abs() < 1e-12);
        let x = find_root_monotone(Ok, 1e6, 0.0, 1.0, 1e-12).unwrap();
        assert!((x - 1e6).abs() < 1e-5);
        let x = find_root_monotone(|h: f64| Ok(2f64.sqrt() / h), 0.005, 1.0, 10.0, 1e-15).unwrap();
        assert!((x - 2.0 * 2f64.sqrt() * 100.0).abs() < 1e-9);
        assert!(find_root_monotone(|_| Ok(1.0), 2.0, 0.0, 1.0, 1e-12).is_err());
    }
}
