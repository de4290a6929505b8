//! Truncation energies, level-set measures and the parabolic Sobolev ratio.

use super::norms::gradient_field;
use super::{spacetime_integral, window_snapshots, trapezoid, TruncationLevel, Window};
use crate::error::{Error, Result};
use crate::grid::{Field, Trajectory};
use crate::params::Exponents;

/// `sum_k h^n min(u,j)^2` and `sum_k h^n |grad min(u,j)|^p` on one snapshot.
///
/// The gradient of the truncation is `1{u < j} grad u` node by node.
fn truncated_terms(f: &Field, nodes: &[usize], j: f64, p: f64) -> (f64, f64) {
    let vol = f.grid.cell_volume();
    let grad = gradient_field(f);
    let mut l2 = 0.0;
    let mut energy = 0.0;
    for &k in nodes {
        let u = f.values[k];
        l2 += u.min(j).powi(2);
        if u < j {
            let g = grad[k];
            energy += (g[0] * g[0] + g[1] * g[1]).sqrt().powf(p);
        }
    }
    (vol * l2, vol * energy)
}

/// `(max_t int min(u,j)^2, int int |grad min(u,j)|^p)` over the window.
pub fn truncation_energy(
    traj: &Trajectory,
    exps: &Exponents,
    j: TruncationLevel,
    w: &Window,
) -> Result<(f64, f64)> {
    let snaps = window_snapshots(traj, w)?;
    let nodes = w.nodes(traj.grid());
    let mut sup: f64 = 0.0;
    let mut samples = Vec::with_capacity(snaps.len());
    for f in snaps {
        let (l2, e) = truncated_terms(f, &nodes, j.get(), exps.p);
        sup = sup.max(l2);
        samples.push((f.time, e));
    }
    Ok((sup, trapezoid(&samples)))
}

/// Space-time measure of `{j <= u < 2j}` in the window.
pub fn level_set_measure(traj: &Trajectory, j: TruncationLevel, w: &Window) -> Result<f64> {
    let j = j.get();
    let vol = traj.grid().cell_volume();
    spacetime_integral(traj, w, |f, nodes| {
        vol * nodes
            .iter()
            .filter(|&&k| f.values[k] >= j && f.values[k] < 2.0 * j)
            .count() as f64
    })
}

/// Space-time measure of `{u >= j}` in the window.
pub fn superlevel_measure(traj: &Trajectory, j: TruncationLevel, w: &Window) -> Result<f64> {
    let j = j.get();
    let vol = traj.grid().cell_volume();
    spacetime_integral(traj, w, |f, nodes| {
        vol * nodes.iter().filter(|&&k| f.values[k] >= j).count() as f64
    })
}

/// `int int v^{kappa p} / (int int |grad v|^p (max_t int v^2)^{p/n})` for
/// `v = min(u, j)`.
pub fn sobolev_ratio(traj: &Trajectory, exps: &Exponents, w: &Window, j: TruncationLevel) -> Result<f64> {
    let snaps = window_snapshots(traj, w)?;
    let nodes = w.nodes(traj.grid());
    let vol = traj.grid().cell_volume();
    let power = exps.kappa * exps.p;
    let mut sup: f64 = 0.0;
    let mut lhs = Vec::with_capacity(snaps.len());
    let mut energy = Vec::with_capacity(snaps.len());
    for f in snaps {
        let (l2, e) = truncated_terms(f, &nodes, j.get(), exps.p);
        sup = sup.max(l2);
        energy.push((f.time, e));
        let s: f64 = nodes.iter().map(|&k| f.values[k].min(j.get()).powf(power)).sum();
        lhs.push((f.time, vol * s));
    }
    let denom = trapezoid(&energy) * sup.powf(exps.p / exps.n as f64);
    if denom == 0.0 {
        return Err(Error::ZeroDenominator("truncated field vanishes on the window".into()));
    }
    Ok(trapezoid(&lhs) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{geometric_times, uniform_times};
    use crate::exact::BarenblattSpec;
    use crate::grid::{sample_exact_trajectory, Grid};
    use crate::params::derive_exponents;

    fn barenblatt_traj(p: f64, h: f64, times: &[f64]) -> (Trajectory, BarenblattSpec) {
        let s = BarenblattSpec::unit(derive_exponents(p, 1).unwrap()).unwrap();
        let g = Grid::centered(1, h, 4.0).unwrap();
        (sample_exact_trajectory(&s, &g, times).unwrap(), s)
    }

    fn lvl(j: f64) -> TruncationLevel {
        TruncationLevel::new(j).unwrap()
    }

    #[test]
    fn truncation_limits() {
        let times = uniform_times(0.1, 1.0, 10);
        let (traj, s) = barenblatt_traj(3.0, 1.0 / 128.0, &times);
        let w = Window::full(traj.grid(), 0.1, 1.0).unwrap();
        let big = lvl(2.0 * s.sup_norm(0.1));
        let (sup, grad) = truncation_energy(&traj, &s.exps, big, &w).unwrap();
        let (sup_u, grad_u) = truncation_energy(&traj, &s.exps, lvl(1e300), &w).unwrap();
        assert_eq!((sup, grad), (sup_u, grad_u));
        let (a, b) = truncation_energy(&traj, &s.exps, lvl(1e-12), &w).unwrap();
        assert!(a < 1e-20 && b < 1e-3 * grad);
        assert!(TruncationLevel::new(0.0).is_err());
    }

    #[test]
    fn dyadic_shells_partition_the_superlevel_set() {
        let times = geometric_times(0.01, 1.0, 20);
        let (traj, s) = barenblatt_traj(3.0, 1.0 / 128.0, &times);
        let w = Window::full(traj.grid(), 0.01, 1.0).unwrap();
        let j_min = 0.01;
        let mut total = 0.0;
        let mut j = j_min;
        while j <= s.sup_norm(0.01) {
            total += level_set_measure(&traj, lvl(j), &w).unwrap();
            j *= 2.0;
        }
        let whole = superlevel_measure(&traj, lvl(j_min), &w).unwrap();
        assert!((total - whole).abs() <= 1e-12 * whole);
        assert_eq!(level_set_measure(&traj, lvl(2.0 * s.sup_norm(0.01)), &w).unwrap(), 0.0);
    }

    #[test]
    fn sobolev_ratio_is_homogeneous() {
        let times = uniform_times(0.1, 1.0, 10);
        let (traj, s) = barenblatt_traj(3.0, 1.0 / 128.0, &times);
        let w = Window::full(traj.grid(), 0.1, 1.0).unwrap();
        let j = 0.3;
        let base = sobolev_ratio(&traj, &s.exps, &w, lvl(j)).unwrap();
        let scale = 3.7;
        let scaled: Vec<Field> = traj
            .snapshots()
            .iter()
            .map(|f| Field::new(f.grid, f.values.iter().map(|v| v * scale).collect(), f.time).unwrap())
            .collect();
        let st = Trajectory::from_snapshots(scaled).unwrap();
        let other = sobolev_ratio(&st, &s.exps, &w, lvl(j * scale)).unwrap();
        assert!((base - other).abs() <= 1e-10 * base);
        let zeros: Vec<Field> = times.iter().map(|&t| Field::zeros(*traj.grid(), t)).collect();
        let zt = Trajectory::from_snapshots(zeros).unwrap();
        assert!(matches!(
            sobolev_ratio(&zt, &s.exps, &w, lvl(j)),
            Err(Error::ZeroDenominator(_))
        ));
    }

    #[test]
    fn sobolev_ratio_bounded_over_levels() {
        let times = geometric_times(0.05, 1.0, 30);
        let (traj, s) = barenblatt_traj(3.0, 1.0 / 256.0, &times);
        let w = Window::full(traj.grid(), 0.05, 1.0).unwrap();
        let top = s.sup_norm(0.05);
        let ratios: Vec<f64> = (1..=6)
            .map(|k| sobolev_ratio(&traj, &s.exps, &w, lvl(top / 2f64.powi(k))).unwrap())
            .collect();
        let full = sobolev_ratio(&traj, &s.exps, &w, lvl(1e300)).unwrap();
        // Truncation never lifts the ratio far above the untruncated one.
        assert!(ratios.iter().all(|&r| r > 0.0 && r <= 1.25 * full), "{full} {ratios:?}");
    }
}
