//! The same measurements evaluated on Barenblatt closed forms by nested
//! adaptive quadrature instead of grid sums. These serve as oracles for the
//! grid versions and reach time scales no grid can resolve.

use super::norms::DistanceParts;
use super::weak::BumpFunction;
use crate::error::{Error, Result};
use crate::exact::{radial_integral, shell, BarenblattSpec, QUADRATURE_LEVELS};
use crate::quadrature::{adaptive_simpson, adaptive_simpson_floor};

/// Relative tolerance of the outer (time) quadratures.
pub const TIME_TOL: f64 = 1e-8;
/// Relative tolerance of the inner (space) quadratures.
pub const SPACE_TOL: f64 = 1e-12;

fn check_times(t0: f64, t1: f64) -> Result<()> {
    if !(t0 > 0.0 && t0 < t1 && t1.is_finite()) {
        return Err(Error::InvalidParameter(format!("time interval ({t0}, {t1})")));
    }
    Ok(())
}

/// `int_{t0}^{t1} g(t) dt` in the variable `s = ln t`.
fn log_time_integral<G: Fn(f64) -> Result<f64>>(g: G, t0: f64, t1: f64) -> Result<f64> {
    let err = std::cell::Cell::new(None);
    let v = adaptive_simpson(
        |s| {
            let t = s.exp();
            match g(t) {
                Ok(v) => v * t,
                Err(e) => {
                    err.set(Some(e));
                    0.0
                }
            }
        },
        t0.ln(),
        t1.ln(),
        TIME_TOL,
        QUADRATURE_LEVELS,
    )?;
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
    }
    Ok(())
}

/// `(int_{t0}^{t1} int_{R^n} B^q dx dt)^{1/q}`.
pub fn barenblatt_lq_spacetime(spec: &BarenblattSpec, q: f64, t0: f64, t1: f64) -> Result<f64> {
    check_q(q)?;
    check_times(t0, t1)?;
    let n = spec.exps.n;
    let total = log_time_integral(
        |t| radial_integral(n, spec.support_radius(t), |r| spec.radial_value(r, t).powf(q)),
        t0,
        t1,
    )?;
    Ok(total.powf(1.0 / q))
}

/// `(int_{t0}^{t1} int_{R^n} |grad B|^q dx dt)^{1/q}`.
pub fn barenblatt_grad_lq_spacetime(spec: &BarenblattSpec, q: f64, t0: f64, t1: f64) -> Result<f64> {
    check_q(q)?;
    check_times(t0, t1)?;
    let n = spec.exps.n;
    let total = log_time_integral(
        |t| {
            radial_integral(n, spec.support_radius(t), |r| {
                spec.radial_derivative(r, t).abs().powf(q)
            })
        },
        t0,
        t1,
    )?;
    Ok(total.powf(1.0 / q))
}

/// Radius of `{B(., t) >= j}`, or `None` when the set is empty.
fn level_radius(spec: &BarenblattSpec, j: f64, t: f64) -> Option<f64> {
    let e = &spec.exps;
    let b = (j * t.powf(e.alpha)).powf(1.0 / e.profile_power());
    if b > spec.constant {
        return None;
    }
    let ratio = (spec.constant - b) / spec.radial_coefficient();
    Some(t.powf(1.0 / e.lambda) * ratio.powf(1.0 / e.radial_power()))
}

fn ball_volume(n: usize, r: f64) -> f64 {
    if n == 1 {
        2.0 * r
    } else {
        std::f64::consts::PI * r * r
    }
}

/// Space-time measure of `{B >= j}` over `R^n x (t0, t1)`.
pub fn barenblatt_superlevel_measure(spec: &BarenblattSpec, j: f64, t0: f64, t1: f64) -> Result<f64> {
    check_times(t0, t1)?;
    if !(j > 0.0) {
        return Err(Error::InvalidParameter(format!("level {j} must be positive")));
    }
    let e = &spec.exps;
    let n = e.n;
    // The set is nonempty exactly for t <= t_star.
    let t_star = (spec.constant.powf(e.profile_power()) / j).powf(1.0 / e.alpha);
    let end = t_star.min(t1);
    if end <= t0 {
        return Ok(0.0);
    }
    let vol = |t: f64| ball_volume(n, level_radius(spec, j, t.min(t_star)).unwrap_or(0.0));
    if end < t_star {
        return log_time_integral(|t| Ok(vol(t)), t0, end);
    }
    // The radius vanishes like a fractional power of t_star - t: integrate
    // the last stretch in w = sqrt(t_star - t), which makes it smooth.
    let mid = t0.max(0.5 * t_star);
    let head = if mid > t0 {
        log_time_integral(|t| Ok(vol(t)), t0, mid)?
    } else {
        0.0
    };
    let tail = adaptive_simpson(
        |w| 2.0 * w * vol(t_star - w * w),
        0.0,
        (t_star - mid).sqrt(),
        TIME_TOL,
        QUADRATURE_LEVELS,
    )?;
    Ok(head + tail)
}

/// Space-time measure of `{j <= B < 2j}` over `R^n x (t0, t1)`.
pub fn barenblatt_level_set_measure(spec: &BarenblattSpec, j: f64, t0: f64, t1: f64) -> Result<f64> {
    Ok(barenblatt_superlevel_measure(spec, j, t0, t1)? - barenblatt_superlevel_measure(spec, 2.0 * j, t0, t1)?)
}

/// Integrates `f` over `[lo, hi]` split at the given breakpoints.
fn piecewise<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, breaks: &[f64], tol: f64, floor: f64) -> Result<f64> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    // Profiles behave like fractional powers at the center and at support
    // edges. The quintic change of variables `x = a + w s(u)` with
    // `s' = 30 u^2 (1 - u)^2` turns an endpoint power `d^k` into `u^{3k+2}`.
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, width) = (w[0], w[1] - w[0]);
        total += adaptive_simpson_floor(
            |u| {
                let s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
                let ds = 30.0 * u * u * (1.0 - u) * (1.0 - u);
                f(a + width * s) * width * ds
            },
            0.0,
            1.0,
            tol,
            floor,
            QUADRATURE_LEVELS,
        )?;
    }
    Ok(total)
}

/// `int_0^R shell(r) g(r) dr` split at the given radii.
fn radial_piecewise<F: Fn(f64) -> f64>(n: usize, radius: f64, g: F, breaks: &[f64], floor: f64) -> Result<f64> {
    piecewise(|r| shell(n, r) * g(r), 0.0, radius, breaks, SPACE_TOL, floor)
}

/// `int min(B(., t), j)^2 dx`.
fn truncated_l2(spec: &BarenblattSpec, j: f64, t: f64) -> Result<f64> {
    let rho = level_radius(spec, j, t).unwrap_or(0.0);
    radial_piecewise(
        spec.exps.n,
        spec.support_radius(t),
        |r| spec.radial_value(r, t).min(j).powi(2),
        &[rho],
        1e-15 * j * j,
    )
}

/// Closed-form truncation energy of a Barenblatt solution over
/// `R^n x (t0, t1)`: `(max_t int min(B,j)^2, int int |grad min(B,j)|^p)`.
pub fn barenblatt_truncation_energy(spec: &BarenblattSpec, j: f64, t0: f64, t1: f64) -> Result<(f64, f64)> {
    check_times(t0, t1)?;
    if !(j > 0.0) {
        return Err(Error::InvalidParameter(format!("level {j} must be positive")));
    }
    let e = &spec.exps;
    let n = e.n;
    // The sup over time: scan in ln t, then refine by golden section.
    const SCAN: usize = 240;
    let (a, b) = (t0.ln(), t1.ln());
    let s_at = |k: usize| a + (b - a) * k as f64 / SCAN as f64;
    let mut vals = Vec::with_capacity(SCAN + 1);
    for k in 0..=SCAN {
        vals.push(truncated_l2(spec, j, s_at(k).exp())?);
    }
    let best = (0..=SCAN).max_by(|&x, &y| vals[x].total_cmp(&vals[y])).unwrap_or(0);
    let mut sup = vals[best];
    let (mut lo, mut hi) = (s_at(best.saturating_sub(1)), s_at((best + 1).min(SCAN)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        let (f1, f2) = (truncated_l2(spec, j, m1.exp())?, truncated_l2(spec, j, m2.exp())?);
        sup = sup.max(f1).max(f2);
        if f1 >= f2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    // The gradient of min(B, j) lives on the shell between the level radius
    // and the support edge; the level radius is born at t_star.
    let t_star = (spec.constant.powf(e.profile_power()) / j).powf(1.0 / e.alpha);
    let grad_at = |t: f64| {
        let rho = level_radius(spec, j, t).unwrap_or(0.0);
        let r = spec.support_radius(t);
        let scale = spec.sup_norm(t).powi(2);
        let inner = |s: f64| {
            if s < rho {
                0.0
            } else {
                spec.radial_derivative(s, t).abs().powf(e.p)
            }
        };
        radial_piecewise(n, r, inner, &[rho], 1e-15 * scale)
    };
    let mut grad = 0.0;
    let mut edges = vec![t0];
    if t_star > t0 && t_star < t1 {
        edges.push(t_star);
    }
    edges.push(t1);
    for w in edges.windows(2) {
        grad += log_time_integral(grad_at, w[0], w[1])?;
    }
    Ok((sup, grad))
}

/// Value and gradient parts of the `W^{1,q}` distance between two line
/// Barenblatt solutions over `(-half, half) x (t0, t1)`.
pub fn barenblatt_distance_parts(
    a: &BarenblattSpec,
    b: &BarenblattSpec,
    q: f64,
    half: f64,
    t0: f64,
    t1: f64,
) -> Result<DistanceParts> {
    check_q(q)?;
    check_times(t0, t1)?;
    if a.exps.n != 1 || b.exps.n != 1 {
        return Err(Error::Incompatible("closed-form distance is implemented on the line".into()));
    }
    let breaks = |t: f64| {
        let (ra, rb) = (a.support_radius(t), b.support_radius(t));
        let (ca, cb) = (a.center[0], b.center[0]);
        [ca, cb, ca - ra, ca + ra, cb - rb, cb + rb]
    };
    let values = log_time_integral(
        |t| piecewise(|x| (a.value(&[x], t) - b.value(&[x], t)).abs().powf(q), -half, half, &breaks(t), SPACE_TOL, 0.0),
        t0,
        t1,
    )?;
    let gradients = log_time_integral(
        |t| {
            piecewise(
                |x| (a.gradient(&[x], t)[0] - b.gradient(&[x], t)[0]).abs().powf(q),
                -half,
                half,
                &breaks(t),
                SPACE_TOL,
                0.0,
            )
        },
        t0,
        t1,
    )?;
    Ok(DistanceParts { values, gradients, q })
}

/// `|int B(x, t) phi(x) dx - mass phi(center)|`.
pub fn barenblatt_trace_gap(spec: &BarenblattSpec, phi: &BumpFunction, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t = {t} must be positive")));
    }
    let n = spec.exps.n;
    let c = spec.center;
    let r = spec.support_radius(t);
    let target = spec.mass * phi.value(&c[..n]);
    let lo = |i: usize| (c[i] - r).max(phi.center[i] - phi.radius);
    let hi = |i: usize| (c[i] + r).min(phi.center[i] + phi.radius);
    if lo(0) >= hi(0) || (n == 2 && lo(1) >= hi(1)) {
        return Ok(target.abs());
    }
    let integral = if n == 1 {
        piecewise(|x| spec.value(&[x], t) * phi.value(&[x]), lo(0), hi(0), &[c[0]], SPACE_TOL, 0.0)?
    } else {
        // Inner slices are accepted to an absolute floor tied to the scale
        // of the whole integral, `mass * max phi`.
        let floor = 1e-15 * spec.mass;
        let err = std::cell::Cell::new(None);
        let v = piecewise(
            |y| {
                // Chord of the support disk at height y.
                let dy = y - c[1];
                let half = (r * r - dy * dy).max(0.0).sqrt();
                let (a, b) = ((c[0] - half).max(lo(0)), (c[0] + half).min(hi(0)));
                if a >= b {
                    return 0.0;
                }
                piecewise(|x| spec.value(&[x, y], t) * phi.value(&[x, y]), a, b, &[c[0]], SPACE_TOL, floor)
                    .unwrap_or_else(|e| {
                        err.set(Some(e));
                        0.0
                    })
            },
            lo(1),
            hi(1),
            &[c[1]],
            TIME_TOL,
            0.0,
        )?;
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        v
    };
    Ok((integral - target).abs())
}
