//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

/// Integrates `f` over `[a, b]` with adaptive Simpson refinement.
///
/// `rel_tol` is relative to the magnitude of the running estimate; the
/// recursion depth is capped at `max_levels`. Panels whose estimate stops
/// changing at the cap are reported as a failure.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, rel_tol: f64, max_levels: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    adaptive_simpson_floor(f, a, b, rel_tol, 0.0, max_levels)
}

/// As [`adaptive_simpson`], but panels are also accepted once their error
/// estimate drops below a share of the absolute floor `abs_tol`. Nested
/// integrals use the floor so that nearly empty inner slices do not demand
/// full relative accuracy.
pub fn adaptive_simpson_floor<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64, max_levels: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    // Seed on a uniform split so that narrow features are not skipped by
    // the first five-point estimate.
    const SEED_PANELS: usize = 16;
    let w = (b - a) / SEED_PANELS as f64;
    let mut panels = Vec::with_capacity(SEED_PANELS);
    let mut coarse = 0.0;
    for i in 0..SEED_PANELS {
        let lo = a + w * i as f64;
        let hi = if i + 1 == SEED_PANELS { b } else { lo + w };
        let (flo, fmid, fhi) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        coarse += whole.abs();
        panels.push((lo, hi, flo, fmid, fhi, whole));
    }
    let abs_tol = (rel_tol * coarse).max(abs_tol).max(f64::MIN_POSITIVE) / SEED_PANELS as f64;
    let mut total = 0.0;
    for (lo, hi, flo, fmid, fhi, whole) in panels {
        total += recurse(&f, lo, hi, flo, fmid, fhi, whole, abs_tol, max_levels)
            .ok_or(Error::QuadratureFailed { a, b, levels: max_levels })?;
    }
    Ok(total)
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
    if depth == 0 || m <= a || m >= b {
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
    fn polynomial_exact() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12, 30).unwrap();
        assert!((v - 0.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_and_kinked() {
        let v = adaptive_simpson(f64::sin, 0.0, std::f64::consts::PI, 1e-12, 30).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(|x: f64| (1.0 - x * x).max(0.0).powf(1.5), -2.0, 2.0, 1e-11, 30)
            .unwrap();
        assert!((v - 3.0 * std::f64::consts::PI / 8.0).abs() < 1e-9);
    }

    #[test]
    fn nonconvergence_reported() {
        let r = adaptive_simpson(|x: f64| (1.0 / x).sin() / x, 1e-9, 1.0, 1e-14, 4);
        assert!(r.is_err());
    }
}
