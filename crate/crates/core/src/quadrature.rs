//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[lo, hi]` to absolute tolerance `tol`.
///
/// Returns an error when the recursion depth limit is hit before the
/// local error estimate drops below its share of `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    if !(lo.is_finite() && hi.is_finite() && tol > 0.0) {
        return Err(Error::Domain("quadrature bounds must be finite and tol positive"));
    }
    let fa = f(lo);
    let fb = f(hi);
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    let value = recurse(&f, lo, hi, fa, fm, fb, whole, tol, MAX_DEPTH)
        .ok_or(Error::QuadratureNonConvergence { lo, hi })?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::QuadratureNonConvergence { lo, hi })
    }
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 || !delta.is_finite() {
        return None;
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Some(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 0.0).abs() < 1e-13);
    }

    #[test]
    fn sine_density_matches_antiderivative() {
        let v = adaptive_simpson(|x| 2.0 + libm::sin(x), 0.0, 0.1, 1e-12).unwrap();
        let exact = 0.2 + (1.0 - libm::cos(0.1));
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let fwd = adaptive_simpson(libm::exp, 0.0, 1.0, 1e-12).unwrap();
        let back = adaptive_simpson(libm::exp, 1.0, 0.0, 1e-12).unwrap();
        assert!((fwd + back).abs() < 1e-13);
    }

    #[test]
    fn singular_integrand_reports_failure() {
        let r = adaptive_simpson(|x| 1.0 / x, 0.0, 1.0, 1e-12);
        assert!(r.is_err());
    }
}
