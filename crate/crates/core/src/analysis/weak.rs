//! Weak-form residuals and pairings with smooth test functions.

use super::norms::gradient_field;
use super::trapezoid;
use crate::error::{Error, Result};
use crate::exact::Point;
use crate::grid::{bump, InitialTrace, Trajectory};
use crate::params::Exponents;

/// Smooth bump `exp(-1/(1 - |x - c|^2 / r^2))` supported in `B(c, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpFunction {
    pub center: Point,
    pub radius: f64,
}

impl BumpFunction {
    pub fn new(center: &[f64], radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("bump radius {radius}")));
        }
        let mut c = [0.0; 2];
        c[..center.len().min(2)].copy_from_slice(&center[..center.len().min(2)]);
        Ok(Self { center: c, radius })
    }

    fn z2(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, xi)| ((xi - self.center[i]) / self.radius).powi(2))
            .sum()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        bump(self.z2(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Point {
        let z2 = self.z2(x);
        let mut g = [0.0; 2];
        if z2 >= 1.0 {
            return g;
        }
        // d/dz2 exp(-1/(1-z2)) = -exp(..) / (1-z2)^2
        let d = -bump(z2) / (1.0 - z2).powi(2);
        for (i, xi) in x.iter().enumerate() {
            g[i] = d * 2.0 * (xi - self.center[i]) / (self.radius * self.radius);
        }
        g
    }
}

/// Space-time test function `psi(x) chi(t)` with bumps in space and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeBump {
    pub space: BumpFunction,
    pub t_center: f64,
    pub t_radius: f64,
}

impl SpaceTimeBump {
    fn chi(&self, t: f64) -> (f64, f64) {
        let z = (t - self.t_center) / self.t_radius;
        let z2 = z * z;
        if z2 >= 1.0 {
            return (0.0, 0.0);
        }
        let v = bump(z2);
        (v, -v / (1.0 - z2).powi(2) * 2.0 * z / self.t_radius)
    }
}

/// Signed weak residual and the magnitude of the terms it balances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakResidual {
    pub residual: f64,
    /// `int int (|F . grad phi| + |u phi_t|)`
    pub scale: f64,
}

impl WeakResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.residual.abs() / self.scale
        }
    }
}

/// `int int |grad u|^{p-2} grad u . grad phi - u phi_t`.
pub fn weak_residual(traj: &Trajectory, exps: &Exponents, phi: &SpaceTimeBump) -> Result<WeakResidual> {
    let grid = traj.grid();
    let n = grid.n();
    let snaps = traj.snapshots();
    let (first, last) = match (snaps.first(), snaps.last()) {
        (Some(a), Some(b)) => (a.time, b.time),
        _ => return Err(Error::InsufficientSnapshots("empty trajectory".into())),
    };
    if phi.t_center - phi.t_radius <= first || phi.t_center + phi.t_radius >= last {
        return Err(Error::SupportViolation(format!(
            "time support [{}, {}] not inside ({first}, {last})",
            phi.t_center - phi.t_radius,
            phi.t_center + phi.t_radius
        )));
    }
    if !grid.contains_ball(&phi.space.center[..n], phi.space.radius) {
        return Err(Error::SupportViolation("space support leaves the grid interior".into()));
    }
    let vol = grid.cell_volume();
    let nodes: Vec<usize> = (0..grid.len())
        .filter(|&k| phi.space.value(&grid.node(k)[..n]) > 0.0)
        .collect();
    let mut res = Vec::with_capacity(snaps.len());
    let mut mag = Vec::with_capacity(snaps.len());
    for f in snaps {
        let (chi, chi_t) = phi.chi(f.time);
        if chi == 0.0 && chi_t == 0.0 {
            res.push((f.time, 0.0));
            mag.push((f.time, 0.0));
            continue;
        }
        let grad = gradient_field(f);
        let (mut r, mut m) = (0.0, 0.0);
        for &k in &nodes {
            let x = grid.node(k);
            let psi = phi.space.value(&x[..n]);
            let dpsi = phi.space.gradient(&x[..n]);
            let g = grad[k];
            let a = (g[0] * g[0] + g[1] * g[1]).sqrt().powf(exps.p - 2.0);
            let flux = a * (g[0] * dpsi[0] + g[1] * dpsi[1]) * chi;
            let time = f.values[k] * psi * chi_t;
            r += flux - time;
            m += flux.abs() + time.abs();
        }
        res.push((f.time, r * vol));
        mag.push((f.time, m * vol));
    }
    Ok(WeakResidual {
        residual: trapezoid(&res),
        scale: trapezoid(&mag),
    })
}

/// `(t, |int u(t) phi - int phi d nu|)` per snapshot for an arbitrary `phi`.
pub fn trace_pairing_with<F: Fn(&[f64]) -> f64>(
    traj: &Trajectory,
    phi: F,
    trace: &InitialTrace,
) -> Vec<(f64, f64)> {
    let grid = traj.grid();
    let n = grid.n();
    let target = trace.pair(&phi);
    let weights: Vec<f64> = (0..grid.len()).map(|k| phi(&grid.node(k)[..n])).collect();
    let vol = grid.cell_volume();
    traj.snapshots()
        .iter()
        .map(|f| {
            let s: f64 = f.values.iter().zip(&weights).map(|(u, w)| u * w).sum();
            (f.time, (s * vol - target).abs())
        })
        .collect()
}

/// Pairing gap against a bump test function.
pub fn trace_pairing(traj: &Trajectory, phi: &BumpFunction, trace: &InitialTrace) -> Vec<(f64, f64)> {
    trace_pairing_with(traj, |x| phi.value(x), trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::uniform_times;
    use crate::exact::BarenblattSpec;
    use crate::grid::{sample_exact_trajectory, Field, Grid};
    use crate::params::derive_exponents;
    use crate::solver::{solve, SolverConfig};

    #[test]
    fn bump_gradient_matches_differences() {
        let b = BumpFunction::new(&[0.2, -0.1], 0.7).unwrap();
        let x = [0.4, 0.15];
        let g = b.gradient(&x);
        let h = 1e-6;
        for i in 0..2 {
            let mut a = x;
            let mut c = x;
            a[i] += h;
            c[i] -= h;
            let fd = (b.value(&a) - b.value(&c)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8);
        }
        assert_eq!(b.value(&[2.0, 0.0]), 0.0);
    }

    fn phi(c: f64, r: f64, tc: f64, tr: f64) -> SpaceTimeBump {
        SpaceTimeBump {
            space: BumpFunction::new(&[c], r).unwrap(),
            t_center: tc,
            t_radius: tr,
        }
    }

    #[test]
    fn zero_trajectory_has_zero_residual() {
        let e = derive_exponents(3.0, 1).unwrap();
        let g = Grid::centered(1, 1.0 / 32.0, 2.0).unwrap();
        let snaps = uniform_times(0.0, 1.0, 11).iter().map(|&t| Field::zeros(g, t)).collect();
        let traj = Trajectory::from_snapshots(snaps).unwrap();
        let r = weak_residual(&traj, &e, &phi(0.0, 0.5, 0.5, 0.3)).unwrap();
        assert_eq!(r.residual, 0.0);
        assert!(weak_residual(&traj, &e, &phi(0.0, 0.5, 0.9, 0.3)).is_err());
        assert!(weak_residual(&traj, &e, &phi(1.8, 0.5, 0.5, 0.3)).is_err());
    }

    #[test]
    fn exact_and_numerical_solutions_are_weak_solutions() {
        let e = derive_exponents(3.0, 1).unwrap();
        let s = BarenblattSpec::unit(e).unwrap();
        let g = Grid::centered(1, 1.0 / 256.0, 4.0).unwrap();
        let times = uniform_times(0.2, 1.0, 161);
        let exact = sample_exact_trajectory(&s, &g, &times).unwrap();
        let cfg = SolverConfig::new(e, 1.0, times.clone()).unwrap();
        let tr = InitialTrace::atom(1, [0.0; 2], 1.0).unwrap();
        let num = solve(&tr, &g, 0.05, &cfg).unwrap();
        for test in [phi(0.8, 1.0, 0.6, 0.3), phi(-1.5, 1.2, 0.55, 0.3), phi(0.0, 2.8, 0.6, 0.35)] {
            let a = weak_residual(&exact, &e, &test).unwrap();
            let b = weak_residual(&num, &e, &test).unwrap();
            assert!(a.relative() < 1e-3 && b.relative() < 1e-3, "{a:?} {b:?}");
        }
    }

    #[test]
    fn pairing_with_constant_phi_is_mass_defect() {
        let e = derive_exponents(3.0, 1).unwrap();
        let g = Grid::centered(1, 1.0 / 64.0, 4.0).unwrap();
        let cfg = SolverConfig::new(e, 0.5, vec![0.01, 0.1, 0.5]).unwrap();
        let tr = InitialTrace::atom(1, [0.0; 2], 1.0).unwrap();
        let traj = solve(&tr, &g, 0.05, &cfg).unwrap();
        for (_, gap) in trace_pairing_with(&traj, |_| 1.0, &tr) {
            assert!(gap <= 1e-8);
        }
        // Test function supported where neither the trace nor the solution lives.
        let far = BumpFunction::new(&[3.3], 0.4).unwrap();
        for (_, gap) in trace_pairing(&traj, &far, &tr) {
            assert_eq!(gap, 0.0);
        }
    }
}
