//! Scalar root finding on a sign-change bracket.

use crate::error::{Error, Result};

/// Newton iteration safeguarded by bisection.
///
/// `f` returns `(value, derivative)`. Requires `f(lo)` and `f(hi)` of opposite
/// sign; Newton steps that leave the current bracket, or that fail to halve
/// the residual, are replaced by bisection. Stops once `|f| ≤ ftol` or the
/// bracket has collapsed to a few ulps.
pub fn safeguarded_newton(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    ftol: f64,
    what: &'static str,
) -> Result<f64> {
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::BracketNotFound(what));
    }
    let lo_sign = flo.signum();
    let mut x = 0.5 * (lo + hi);
    let (mut fx, mut dfx) = f(x);
    let mut last_abs = f64::INFINITY;
    for _ in 0..400 {
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx.signum() == lo_sign {
            lo = x;
        } else {
            hi = x;
        }
        if (hi - lo).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
        let newton = x - fx / dfx;
        let inside = newton.is_finite() && newton > lo.min(hi) && newton < lo.max(hi);
        x = if inside && fx.abs() < 0.5 * last_abs {
            newton
        } else {
            0.5 * (lo + hi)
        };
        last_abs = fx.abs();
        (fx, dfx) = f(x);
    }
    Ok(x)
}
