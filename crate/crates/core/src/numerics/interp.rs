use crate::error::{Error, Result};

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
/// Evaluation outside the knot range is refused.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    /// `x` strictly increasing, `y` monotone.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<MonotoneCubic> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Precondition("interpolation needs at least two matching knots".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("interpolation knots must increase strictly".into()));
        }
        let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            m[i] = if d[i - 1] * d[i] <= 0.0 { 0.0 } else { 0.5 * (d[i - 1] + d[i]) };
        }
        for i in 0..n - 1 {
            if d[i] == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let a = m[i] / d[i];
            let b = m[i + 1] / d[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m[i] = tau * a * d[i];
                m[i + 1] = tau * b * d[i];
            }
        }
        Ok(MonotoneCubic { x, y, m })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfRange(format!("{x:e} outside the table [{lo:e}, {hi:e}]")));
        }
        let i = self.x.partition_point(|v| *v <= x).clamp(1, self.x.len() - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let s = (x - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * self.y[i]
            + (s3 - 2.0 * s2 + s) * h * self.m[i]
            + (-2.0 * s3 + 3.0 * s2) * self.y[i + 1]
            + (s3 - s2) * h * self.m[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_and_stays_monotone() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| if *v < 5.0 { 0.0 } else { 1.0 }).collect();
        let c = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for i in 0..10 {
            assert_eq!(c.eval(x[i]).unwrap(), y[i]);
        }
        let mut prev = -1.0;
        for j in 0..=900 {
            let v = c.eval(j as f64 * 0.01).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(c.eval(9.5).is_err());
    }
}
