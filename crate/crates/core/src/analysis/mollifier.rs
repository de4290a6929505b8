//! Exponential time mollification
//! `u_sigma(x, t) = (1/sigma) int_eps^t exp((s - t)/sigma) u(x, s) ds`.
//!
//! The kernel is integrated exactly against the piecewise-linear
//! interpolant of the snapshots (product trapezoid rule), which makes the
//! result exact for data linear in time and gives the recurrence
//! `u_sigma(t_{k+1}) = e^{-x} u_sigma(t_k) + w0 u(t_k) + w1 u(t_{k+1})`
//! with `x = dt / sigma`.

use crate::error::{Error, Result};
use crate::grid::{Field, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMollifier {
    pub sigma: f64,
    /// Anchor time where `u_sigma` vanishes.
    pub eps: f64,
}

impl TimeMollifier {
    pub fn new(sigma: f64, eps: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} must be positive")));
        }
        if !(eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("anchor eps = {eps} must be >= 0")));
        }
        Ok(Self { sigma, eps })
    }

    /// Weights `(w0, w1, decay)` for a step of length `dt`.
    fn weights(&self, dt: f64) -> (f64, f64, f64) {
        let x = dt / self.sigma;
        let decay = (-x).exp();
        // (1 - e^{-x} - x e^{-x}) / x and (x - 1 + e^{-x}) / x, written with
        // expm1 to stay accurate for small x.
        let em1 = (-x).exp_m1();
        let w1 = (x + em1) / x;
        let w0 = -em1 - w1;
        (w0, w1, decay)
    }
}

/// Applies the mollifier to every snapshot at or after `m.eps`.
pub fn time_mollify(traj: &Trajectory, m: &TimeMollifier) -> Result<Trajectory> {
    let tol = 1e-9 * m.eps.abs().max(1.0);
    let snaps: Vec<&Field> = traj
        .snapshots()
        .iter()
        .filter(|f| f.time >= m.eps - tol)
        .collect();
    if snaps.len() < 2 || (snaps[0].time - m.eps).abs() > tol {
        return Err(Error::InsufficientSnapshots(format!(
            "time mollifier needs snapshots starting at eps = {}",
            m.eps
        )));
    }
    let dt = snaps[1].time - snaps[0].time;
    for w in snaps.windows(2) {
        let d = w[1].time - w[0].time;
        if (d - dt).abs() > 1e-6 * dt {
            return Err(Error::InvalidParameter(
                "time mollifier needs uniformly spaced snapshots".into(),
            ));
        }
    }
    if dt > 0.25 * m.sigma {
        return Err(Error::MollifierUnderResolved {
            spacing: dt,
            limit: 0.25 * m.sigma,
        });
    }
    let (w0, w1, decay) = m.weights(dt);
    let grid = *traj.grid();
    let mut out = Trajectory::new(grid);
    let mut acc = vec![0.0; grid.len()];
    out.push(Field::new(grid, acc.clone(), snaps[0].time)?)?;
    for w in snaps.windows(2) {
        for ((a, u0), u1) in acc.iter_mut().zip(&w[0].values).zip(&w[1].values) {
            *a = decay * *a + w0 * u0 + w1 * u1;
        }
        out.push(Field::new(grid, acc.clone(), w[1].time)?)?;
    }
    Ok(out)
}

/// Largest violation of the identity `d/dt u_sigma = (u - u_sigma) / sigma`
/// over interior snapshots of the mollified trajectory.
///
/// The centered difference `(u_sigma(t+dt) - u_sigma(t-dt)) / 2dt` is
/// compared with the Simpson average of the right-hand side over the same
/// stencil, i.e. with the identity integrated over `[t-dt, t+dt]`. A
/// pointwise comparison would add the `dt^2/6` times third-derivative error
/// of the difference quotient, which is of size `u/sigma^3` in the layer
/// right after the anchor time.
pub fn derivative_identity_defect(raw: &Trajectory, mollified: &Trajectory, sigma: f64) -> Result<f64> {
    let s = mollified.snapshots();
    if s.len() < 3 {
        return Err(Error::InsufficientSnapshots("need three mollified snapshots".into()));
    }
    let find = |t: f64| {
        raw.snapshots()
            .iter()
            .find(|f| (f.time - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| Error::Incompatible(format!("no raw snapshot at t = {t}")))
    };
    let mut worst: f64 = 0.0;
    for k in 1..s.len() - 1 {
        let dt2 = s[k + 1].time - s[k - 1].time;
        let (ra, rb, rc) = (find(s[k - 1].time)?, find(s[k].time)?, find(s[k + 1].time)?);
        for node in 0..s[k].values.len() {
            let d = (s[k + 1].values[node] - s[k - 1].values[node]) / dt2;
            let g = |r: &Field, m: &Field| (r.values[node] - m.values[node]) / sigma;
            let avg = (g(ra, &s[k - 1]) + 4.0 * g(rb, &s[k]) + g(rc, &s[k + 1])) / 6.0;
            worst = worst.max((d - avg).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{lq_spacetime, uniform_times, Window};
    use crate::grid::Grid;

    fn traj_from<F: Fn(f64, f64) -> f64>(g: Grid, times: &[f64], u: F) -> Trajectory {
        let snaps = times.iter().map(|&t| Field::from_fn(g, t, |x| u(x[0], t))).collect();
        Trajectory::from_snapshots(snaps).unwrap()
    }

    #[test]
    fn constant_in_time_is_exact() {
        let g = Grid::centered(1, 0.25, 2.0).unwrap();
        let (sigma, eps) = (0.2, 0.1);
        let times = uniform_times(eps, 1.1, 51);
        let traj = traj_from(g, &times, |_, _| 3.0);
        let out = time_mollify(&traj, &TimeMollifier::new(sigma, eps).unwrap()).unwrap();
        for f in out.snapshots() {
            let exact = 3.0 * (1.0 - (-(f.time - eps) / sigma).exp());
            assert!(f.values.iter().all(|v| (v - exact).abs() < 1e-13));
        }
        assert!(out.snapshots()[0].values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_coarse_or_misaligned_snapshots() {
        let g = Grid::centered(1, 0.25, 2.0).unwrap();
        let traj = traj_from(g, &uniform_times(0.0, 1.0, 5), |_, _| 1.0);
        let m = TimeMollifier::new(0.5, 0.0).unwrap();
        assert!(matches!(time_mollify(&traj, &m), Err(Error::MollifierUnderResolved { .. })));
        let m = TimeMollifier::new(5.0, 0.1).unwrap();
        assert!(time_mollify(&traj, &m).is_err());
        assert!(TimeMollifier::new(0.0, 0.0).is_err());
    }

    #[test]
    fn linear_in_data() {
        let g = Grid::centered(1, 0.25, 2.0).unwrap();
        let times = uniform_times(0.0, 1.0, 41);
        let u = traj_from(g, &times, |x, t| (1.0 + x).max(0.0) * (t * 3.0).sin().abs());
        let v = traj_from(g, &times, |x, t| x * x * (1.0 + t));
        let sum = traj_from(g, &times, |x, t| {
            (1.0 + x).max(0.0) * (t * 3.0).sin().abs() + x * x * (1.0 + t)
        });
        let m = TimeMollifier::new(0.1, 0.0).unwrap();
        let (mu, mv, ms) = (
            time_mollify(&u, &m).unwrap(),
            time_mollify(&v, &m).unwrap(),
            time_mollify(&sum, &m).unwrap(),
        );
        for ((a, b), c) in mu.snapshots().iter().zip(mv.snapshots()).zip(ms.snapshots()) {
            for k in 0..g.len() {
                assert!((a.values[k] + b.values[k] - c.values[k]).abs() <= 1e-12 * c.values[k].max(1.0));
            }
        }
    }

    #[test]
    fn derivative_identity_and_contraction() {
        let g = Grid::centered(1, 0.125, 2.0).unwrap();
        let sigma = 0.1;
        let defect = |dt: f64| {
            let times: Vec<f64> = (0..=(2.0 / dt).round() as usize).map(|k| k as f64 * dt).collect();
            let u = traj_from(g, &times, |x, t| (1.0 - x * x / 4.0) * (1.5 + t.sin()));
            let us = time_mollify(&u, &TimeMollifier::new(sigma, 0.0).unwrap()).unwrap();
            (derivative_identity_defect(&u, &us, sigma).unwrap(), u, us)
        };
        let (coarse, _, _) = defect(sigma / 10.0);
        let (fine, u, us) = defect(sigma / 20.0);
        assert!(coarse < 1e-4, "{coarse}");
        let order = (coarse / fine).log2();
        assert!((order - 2.0).abs() < 0.2, "{order}");
        let w = Window::full(&g, 0.0, 2.0).unwrap();
        for q in [1.0, 2.0, 3.0] {
            assert!(lq_spacetime(&us, q, &w).unwrap() <= lq_spacetime(&u, q, &w).unwrap() + 1e-10);
        }
    }

    #[test]
    fn converges_linearly_as_sigma_shrinks() {
        let g = Grid::centered(1, 0.125, 2.0).unwrap();
        let times = uniform_times(0.0, 1.0, 801);
        let u = traj_from(g, &times, |x, t| (1.0 - x * x / 4.0) * (1.5 + (3.0 * t).sin()));
        let w = Window::full(&g, 0.0, 1.0).unwrap();
        let dist = |sigma: f64| {
            let us = time_mollify(&u, &TimeMollifier::new(sigma, 0.0).unwrap()).unwrap();
            crate::analysis::sobolev_distance_parts(&u, &us, 1.0, &w).unwrap().values
        };
        let (a, b) = (dist(0.04), dist(0.02));
        assert!((b / a - 0.5).abs() < 0.05, "{}", b / a);
    }
}
