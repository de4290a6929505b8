//! Dead zones, support extents and the scaled sup norm.

use crate::grid::{Field, Trajectory};
use crate::params::Exponents;

/// Values below `DEAD_ZONE_REL * max(u)` count as zero.
pub const DEAD_ZONE_REL: f64 = 1e-12;

fn threshold(f: &Field) -> f64 {
    DEAD_ZONE_REL * f.max()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Largest `r` such that every node in `B(x0, r)` is below the threshold,
/// capped by the distance from `x0` to the grid boundary.
pub fn dead_zone_radius(f: &Field, x0: &[f64]) -> f64 {
    let g = &f.grid;
    let n = g.n();
    let (lo, hi) = (g.lo(), g.hi());
    let mut r = (0..n)
        .map(|i| (x0[i] - lo[i]).min(hi[i] - x0[i]))
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let thr = threshold(f);
    if f.max() == 0.0 {
        return r;
    }
    for (k, &v) in f.values.iter().enumerate() {
        if v >= thr {
            r = r.min(distance(&g.node(k)[..n], &x0[..n]));
        }
    }
    r
}

/// Largest distance from `center` to a node above the threshold.
pub fn support_extent(f: &Field, center: &[f64]) -> f64 {
    let g = &f.grid;
    let n = g.n();
    let thr = threshold(f);
    if f.max() == 0.0 {
        return 0.0;
    }
    f.values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= thr)
        .map(|(k, _)| distance(&g.node(k)[..n], &center[..n]))
        .fold(0.0, f64::max)
}

/// `(t, ||u(t)||_inf t^alpha / mass^sigma)` per snapshot with `t > 0`.
pub fn smoothing_ratio(traj: &Trajectory, exps: &Exponents, mass: f64) -> Vec<(f64, f64)> {
    traj.snapshots()
        .iter()
        .filter(|f| f.time > 0.0)
        .map(|f| (f.time, f.max() * f.time.powf(exps.alpha) / mass.powf(exps.sigma)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::BarenblattSpec;
    use crate::grid::{sample_exact, sample_exact_trajectory, Grid};
    use crate::params::derive_exponents;

    #[test]
    fn zero_field_reaches_boundary() {
        let g = Grid::new(1, 0.125, &[-1.0], &[2.0]).unwrap();
        let f = Field::zeros(g, 1.0);
        assert_eq!(dead_zone_radius(&f, &[0.5]), 1.5);
        assert_eq!(dead_zone_radius(&f, &[1.5]), 0.5);
    }

    #[test]
    fn barenblatt_dead_zone() {
        let e = derive_exponents(3.0, 1).unwrap();
        let s = BarenblattSpec::unit(e).unwrap();
        let h = 1.0 / 256.0;
        let g = Grid::centered(1, h, 6.0).unwrap();
        for t in [0.1, 0.5, 1.0] {
            let f = sample_exact(&s, &g, t).unwrap();
            let r = s.support_radius(t);
            let d = 3.5;
            assert!((dead_zone_radius(&f, &[d]) - (d - r)).abs() <= 2.0 * h);
            assert!((support_extent(&f, &[0.0]) - r).abs() <= 2.0 * h);
            assert_eq!(dead_zone_radius(&f, &[0.0]), 0.0);
        }
    }

    #[test]
    fn exact_smoothing_ratio_is_constant() {
        let e = derive_exponents(3.0, 1).unwrap();
        let s = BarenblattSpec::unit(e).unwrap();
        let g = Grid::centered(1, 1.0 / 64.0, 4.0).unwrap();
        let traj = sample_exact_trajectory(&s, &g, &[1e-3, 1e-2, 0.1, 1.0, 4.0]).unwrap();
        let c = s.constant.powf(e.profile_power());
        for (_, r) in smoothing_ratio(&traj, &e, 1.0) {
            assert!((r - c).abs() <= 1e-10 * c);
        }
    }
}
