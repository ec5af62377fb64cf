//! Numerical laboratory for singular and blow-up semilinear elliptic
//! problems in radial symmetry.
//!
//! * [`expr`]: parsed scalar functions of `t` with exact derivatives.
//! * [`numerics`]: quadrature, improper-integral classification, root
//!   finding and a radial Runge–Kutta integrator with blow-up detection.
//! * [`karamata`]: regular-variation indices, Keller–Osserman tests and
//!   closed-form boundary-rate constants.
//! * [`profile`]: the boundary blow-up profile `h` and the `h'' = g(h)` profile.
//! * [`radial`]: Picard iterations for entire solutions and systems,
//!   boundary blow-up solutions, residuals and rate measurement.
//! * [`bifurcation`]: first eigenvalues, Lane–Emden–Fowler shooting, λ-sweeps,
//!   the Gelfand substitution and the Young constant.

// `!(x > 0.0)` rejects NaN along with the bad values; it is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod bifurcation;
pub mod error;
pub mod expr;
pub mod karamata;
pub mod numerics;
pub mod profile;
pub mod radial;

pub use error::{Error, Result};
pub use expr::{parse_expression, Expr, ScalarFn};

/// Fixed 17-significant-digit formatting used by every CSV writer.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
