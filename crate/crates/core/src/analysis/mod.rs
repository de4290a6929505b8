//! Measurements on trajectories and on closed forms.
//!
//! Space-time integrals use the node sum `h^n sum` in space and the
//! trapezoid rule over snapshots in time, so their accuracy depends on the
//! snapshot density as well as on the grid.

pub mod closed_form;
pub mod fit;
pub mod inequalities;
pub mod levels;
pub mod mollifier;
pub mod norms;
pub mod propagation;
pub mod weak;

pub use fit::{loglog_fit, LineFit};
pub use inequalities::{monotonicity_gap_check, power_diff_bound_check};
pub use levels::{level_set_measure, sobolev_ratio, truncation_energy};
pub use mollifier::{derivative_identity_defect, time_mollify, TimeMollifier};
pub use norms::{gradient_field, lq_spacetime, sobolev_distance, sobolev_distance_parts, DistanceParts};
pub use propagation::{dead_zone_radius, smoothing_ratio};
pub use weak::{trace_pairing, weak_residual, BumpFunction, SpaceTimeBump, WeakResidual};

use crate::error::{Error, Result};
use crate::exact::Point;
use crate::grid::{Field, Grid, Trajectory};

/// Space-time region `U x [t0, t1]` with `U` an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: Point,
    pub hi: Point,
    pub t0: f64,
    pub t1: f64,
}

impl Window {
    pub fn new(lo: &[f64], hi: &[f64], t0: f64, t1: f64) -> Result<Self> {
        if !(t0 >= 0.0 && t0 < t1) {
            return Err(Error::InvalidParameter(format!("window times [{t0}, {t1}]")));
        }
        let mut l = [0.0; 2];
        let mut u = [0.0; 2];
        for i in 0..lo.len().min(2) {
            if !(hi[i] > lo[i]) {
                return Err(Error::InvalidParameter("empty window box".into()));
            }
            l[i] = lo[i];
            u[i] = hi[i];
        }
        Ok(Self { lo: l, hi: u, t0, t1 })
    }

    /// The whole grid box over `[t0, t1]`.
    pub fn full(grid: &Grid, t0: f64, t1: f64) -> Result<Self> {
        let n = grid.n();
        Self::new(&grid.lo()[..n], &grid.hi()[..n], t0, t1)
    }

    /// `[-half, half]^n x [t0, t1]`.
    pub fn centered(n: usize, half: f64, t0: f64, t1: f64) -> Result<Self> {
        Self::new(&[-half; 2][..n], &[half; 2][..n], t0, t1)
    }

    pub fn contains(&self, x: &[f64], h: f64) -> bool {
        let tol = 1e-9 * h;
        x.iter()
            .enumerate()
            .all(|(i, &xi)| xi >= self.lo[i] - tol && xi <= self.hi[i] + tol)
    }

    fn check_inside(&self, grid: &Grid) -> Result<()> {
        let n = grid.n();
        if !grid.contains_point(&self.lo[..n]) || !grid.contains_point(&self.hi[..n]) {
            return Err(Error::InvalidParameter("window box exceeds the grid".into()));
        }
        Ok(())
    }

    /// Node indices of `grid` inside the box.
    pub fn nodes(&self, grid: &Grid) -> Vec<usize> {
        let n = grid.n();
        (0..grid.len())
            .filter(|&k| self.contains(&grid.node(k)[..n], grid.h()))
            .collect()
    }
}

/// Truncation level `j > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationLevel(f64);

impl TruncationLevel {
    pub fn new(j: f64) -> Result<Self> {
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::InvalidParameter(format!("truncation level {j} must be positive")));
        }
        Ok(Self(j))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Snapshots inside `[t0, t1]`, which must start at `t0` and end at `t1`
/// and contain at least four samples.
pub(crate) fn window_snapshots<'a>(traj: &'a Trajectory, w: &Window) -> Result<Vec<&'a Field>> {
    w.check_inside(traj.grid())?;
    let tol = 1e-9 * w.t1.abs().max(1.0);
    let snaps: Vec<&Field> = traj
        .snapshots()
        .iter()
        .filter(|f| f.time >= w.t0 - tol && f.time <= w.t1 + tol)
        .collect();
    if snaps.len() < 4 {
        return Err(Error::InsufficientSnapshots(format!(
            "{} snapshots in [{}, {}], need at least 4",
            snaps.len(),
            w.t0,
            w.t1
        )));
    }
    let first = snaps[0].time;
    let last = snaps[snaps.len() - 1].time;
    if (first - w.t0).abs() > tol || (last - w.t1).abs() > tol {
        return Err(Error::InsufficientSnapshots(format!(
            "snapshots span [{first}, {last}] but the window is [{}, {}]",
            w.t0, w.t1
        )));
    }
    Ok(snaps)
}

/// Trapezoid rule on `(t, value)` samples.
pub(crate) fn trapezoid(samples: &[(f64, f64)]) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

/// Time-trapezoid of a per-snapshot spatial quantity over the window.
pub(crate) fn spacetime_integral<F>(traj: &Trajectory, w: &Window, per_field: F) -> Result<f64>
where
    F: Fn(&Field, &[usize]) -> f64,
{
    let snaps = window_snapshots(traj, w)?;
    let nodes = w.nodes(traj.grid());
    let samples: Vec<(f64, f64)> = snaps.iter().map(|f| (f.time, per_field(f, &nodes))).collect();
    Ok(trapezoid(&samples))
}

/// `count` times geometrically spaced over `[t0, t1]`.
pub fn geometric_times(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    let (a, b) = (t0.ln(), t1.ln());
    (0..count)
        .map(|k| {
            if k + 1 == count {
                t1
            } else if k == 0 {
                t0
            } else {
                (a + (b - a) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// `count` times equally spaced over `[t0, t1]`.
pub fn uniform_times(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| if k + 1 == count { t1 } else { t0 + (t1 - t0) * k as f64 / (count - 1) as f64 })
        .collect()
}
