//! Explicit conservative finite-difference integrator for
//! `u_t = div(|grad u|^{p-2} grad u)`.
//!
//! Each face carries the flux `a_face (u_nbr - u_i) / h`, so node updates
//! telescope and the discrete mass is conserved. The time step is chosen
//! from the largest face diffusivity; with the extra factor `p - 1` used by
//! [`solve`] the one-dimensional update is a monotone map of the old values,
//! which is what makes the comparison principle hold node by node.

use crate::error::{Error, Result};
use crate::grid::{mollify_trace, Field, Grid, InitialTrace, Trajectory};
use crate::params::Exponents;

/// Deliberate flux corruptions used by the self-test to prove that its
/// checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxFault {
    #[default]
    None,
    /// Uses `| |g|^2 - eps^2 |` instead of `|g|^2 + eps^2`, which keeps the
    /// diffusivity away from zero at critical points.
    MisSignedRegularization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub exps: Exponents,
    pub eps_reg: f64,
    pub cfl_safety: f64,
    pub end_time: f64,
    pub output_times: Vec<f64>,
    pub max_steps: usize,
    pub fault: FluxFault,
}

impl SolverConfig {
    pub const DEFAULT_CFL: f64 = 0.9;
    pub const DEFAULT_MAX_STEPS: usize = 50_000_000;

    pub fn new(exps: Exponents, end_time: f64, output_times: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            exps,
            eps_reg: 0.0,
            cfl_safety: Self::DEFAULT_CFL,
            end_time,
            output_times,
            max_steps: Self::DEFAULT_MAX_STEPS,
            fault: FluxFault::None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `count` equally spaced output times ending at `end_time`.
    pub fn uniform(exps: Exponents, end_time: f64, count: usize) -> Result<Self> {
        let times = (1..=count).map(|k| end_time * k as f64 / count as f64).collect();
        Self::new(exps, end_time, times)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.end_time > 0.0 && self.end_time.is_finite()) {
            return Err(Error::InvalidParameter(format!("end time {}", self.end_time)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl_safety {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        if !(self.eps_reg >= 0.0) {
            return Err(Error::InvalidParameter(format!("eps_reg {} must be >= 0", self.eps_reg)));
        }
        if self.output_times.is_empty() {
            return Err(Error::InvalidParameter("no output times".into()));
        }
        let mut prev = 0.0;
        for &t in &self.output_times {
            if !(t > prev) || t > self.end_time {
                return Err(Error::InvalidParameter(format!(
                    "output time {t} must be increasing within (0, {}]",
                    self.end_time
                )));
            }
            prev = t;
        }
        Ok(())
    }

    fn diffusivity(&self, g2: f64) -> f64 {
        let half = 0.5 * (self.exps.p - 2.0);
        let e2 = self.eps_reg * self.eps_reg;
        let s = match self.fault {
            FluxFault::None => g2 + e2,
            FluxFault::MisSignedRegularization => (g2 - e2).abs(),
        };
        if s == 0.0 {
            0.0
        } else {
            s.powf(half)
        }
    }
}

/// `(|grad|^2 + eps^2)^{(p-2)/2}`.
pub fn flux_diffusivity(grad: &[f64], exps: &Exponents, eps_reg: f64) -> f64 {
    let g2: f64 = grad.iter().map(|g| g * g).sum::<f64>() + eps_reg * eps_reg;
    if g2 == 0.0 {
        0.0
    } else {
        g2.powf(0.5 * (exps.p - 2.0))
    }
}

/// Node index range (inclusive) touched by the next update: the bounding box
/// of the nonzero values grown by one node and clipped to the grid.
fn active_box(f: &Field) -> Option<[[usize; 2]; 2]> {
    let g = &f.grid;
    let shape = g.shape();
    let mut lo = [usize::MAX; 2];
    let mut hi = [0usize; 2];
    let mut any = false;
    for (k, &v) in f.values.iter().enumerate() {
        if v != 0.0 {
            let (i, j) = g.ij(k);
            lo[0] = lo[0].min(i);
            lo[1] = lo[1].min(j);
            hi[0] = hi[0].max(i);
            hi[1] = hi[1].max(j);
            any = true;
        }
    }
    if !any {
        return None;
    }
    for a in 0..2 {
        lo[a] = lo[a].saturating_sub(1);
        hi[a] = (hi[a] + 1).min(shape[a] - 1);
    }
    Some([lo, hi])
}

/// Face fluxes and the largest face diffusivity over the active box.
struct Fluxes {
    /// `a * (u_{i+1,j} - u_{i,j})` on x-faces, indexed by the left node.
    x: Vec<f64>,
    /// `a * (u_{i,j+1} - u_{i,j})` on y-faces, indexed by the lower node.
    y: Vec<f64>,
    a_max: f64,
}

fn face_fluxes(f: &Field, cfg: &SolverConfig, bx: [[usize; 2]; 2]) -> Fluxes {
    let g = &f.grid;
    let n = g.n();
    let h = g.h();
    let shape = g.shape();
    let u = &f.values;
    let at = |i: i64, j: i64| -> f64 {
        if i < 0 || j < 0 || i >= shape[0] as i64 || j >= shape[1] as i64 {
            0.0
        } else {
            u[g.index(i as usize, j as usize)]
        }
    };
    let mut fx = vec![0.0; g.len()];
    let mut fy = if n == 2 { vec![0.0; g.len()] } else { Vec::new() };
    let mut a_max: f64 = 0.0;
    let [lo, hi] = bx;
    for j in lo[1]..=hi[1] {
        for i in lo[0]..hi[0] {
            let (ii, jj) = (i as i64, j as i64);
            let du = at(ii + 1, jj) - at(ii, jj);
            let mut g2 = (du / h).powi(2);
            if n == 2 {
                let t = (at(ii, jj + 1) - at(ii, jj - 1) + at(ii + 1, jj + 1) - at(ii + 1, jj - 1))
                    / (4.0 * h);
                g2 += t * t;
            }
            let a = cfg.diffusivity(g2);
            a_max = a_max.max(a);
            fx[g.index(i, j)] = a * du;
        }
    }
    if n == 2 {
        for j in lo[1]..hi[1] {
            for i in lo[0]..=hi[0] {
                let (ii, jj) = (i as i64, j as i64);
                let du = at(ii, jj + 1) - at(ii, jj);
                let t = (at(ii + 1, jj) - at(ii - 1, jj) + at(ii + 1, jj + 1) - at(ii - 1, jj + 1))
                    / (4.0 * h);
                let a = cfg.diffusivity((du / h).powi(2) + t * t);
                a_max = a_max.max(a);
                fy[g.index(i, j)] = a * du;
            }
        }
    }
    Fluxes { x: fx, y: fy, a_max }
}

/// Largest face diffusivity of `f`.
pub fn max_face_diffusivity(f: &Field, cfg: &SolverConfig) -> f64 {
    active_box(f).map_or(0.0, |bx| face_fluxes(f, cfg, bx).a_max)
}

/// `cfl_safety * h^2 / (2 n a_max)`, the bound enforced by [`step`].
pub fn cfl_bound(f: &Field, cfg: &SolverConfig) -> f64 {
    let a = max_face_diffusivity(f, cfg);
    bound_from(f.grid, cfg, a)
}

fn bound_from(g: Grid, cfg: &SolverConfig, a_max: f64) -> f64 {
    if a_max == 0.0 {
        f64::INFINITY
    } else {
        cfg.cfl_safety * g.h() * g.h() / (2.0 * g.n() as f64 * a_max)
    }
}

fn apply(f: &Field, dt: f64, fl: &Fluxes, bx: [[usize; 2]; 2]) -> Result<Field> {
    let g = &f.grid;
    let n = g.n();
    let c = dt / (g.h() * g.h());
    let mut out = f.values.clone();
    let [lo, hi] = bx;
    for j in lo[1]..=hi[1] {
        for i in lo[0]..=hi[0] {
            let k = g.index(i, j);
            let mut div = fl.x[k];
            if i > 0 {
                div -= fl.x[g.index(i - 1, j)];
            }
            if n == 2 {
                div += fl.y[k];
                if j > 0 {
                    div -= fl.y[g.index(i, j - 1)];
                }
            }
            let v = f.values[k] + c * div;
            if !(v >= 0.0) {
                return Err(Error::NegativeValue { node: k, value: v });
            }
            out[k] = v;
        }
    }
    let next = Field {
        grid: *g,
        values: out,
        time: f.time + dt,
    };
    if !next.collar_is_zero() {
        return Err(Error::BoundaryTouched { time: next.time });
    }
    Ok(next)
}

/// One explicit step of size `dt`.
pub fn step(f: &Field, dt: f64, cfg: &SolverConfig) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    let Some(bx) = active_box(f) else {
        return Ok(Field::zeros(f.grid, f.time + dt));
    };
    let fl = face_fluxes(f, cfg, bx);
    let bound = bound_from(f.grid, cfg, fl.a_max);
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, bound });
    }
    apply(f, dt, &fl, bx)
}

/// Advances every member with a common adaptive time step, the smallest
/// monotone step over the ensemble, and records each member at the output
/// times. Ordered initial data therefore stay ordered node by node.
pub fn solve_ensemble(initial: Vec<Field>, cfg: &SolverConfig) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let first = initial
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
    let grid = first.grid;
    let t0 = first.time;
    if initial.iter().any(|f| f.grid != grid || f.time != t0) {
        return Err(Error::Incompatible("ensemble members differ in grid or time".into()));
    }
    if cfg.output_times[0] <= t0 {
        return Err(Error::InvalidParameter(format!(
            "output times must exceed the start time {t0}"
        )));
    }
    let monotone = 1.0 / (cfg.exps.p - 1.0);
    let mut state = initial;
    let mut trajs: Vec<Trajectory> = state.iter().map(|_| Trajectory::new(grid)).collect();
    let mut t = t0;
    let mut steps = 0usize;
    for &target in &cfg.output_times {
        while t < target {
            if steps >= cfg.max_steps {
                return Err(Error::StepBudgetExhausted {
                    max_steps: cfg.max_steps,
                    time: t,
                });
            }
            let boxes: Vec<_> = state.iter().map(active_box).collect();
            let fluxes: Vec<_> = state
                .iter()
                .zip(&boxes)
                .map(|(f, b)| b.map(|b| face_fluxes(f, cfg, b)))
                .collect();
            let a_max = fluxes
                .iter()
                .flatten()
                .map(|fl| fl.a_max)
                .fold(0.0, f64::max);
            let remaining = target - t;
            let dt = (monotone * bound_from(grid, cfg, a_max)).min(remaining);
            let landing = dt >= remaining;
            let t_next = if landing { target } else { t + dt };
            for ((f, b), fl) in state.iter_mut().zip(&boxes).zip(&fluxes) {
                let mut next = match (b, fl) {
                    (Some(b), Some(fl)) => apply(f, dt, fl, *b)?,
                    _ => Field::zeros(grid, t_next),
                };
                next.time = t_next;
                *f = next;
            }
            t = t_next;
            steps += 1;
        }
        for (traj, f) in trajs.iter_mut().zip(&state) {
            traj.push(f.clone())?;
        }
    }
    Ok(trajs)
}

/// Solves from an arbitrary initial field starting at its own time.
pub fn solve_from(initial: Field, cfg: &SolverConfig) -> Result<Trajectory> {
    Ok(solve_ensemble(vec![initial], cfg)?.remove(0))
}

/// Solves the Cauchy problem from the mollified trace `nu * rho_delta`.
pub fn solve(trace: &InitialTrace, grid: &Grid, delta: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    let u0 = mollify_trace(trace, grid, delta)?;
    solve_from(u0, cfg)
}

/// Default mollification radius `max(2h, 0.05)`.
pub fn default_delta(grid: &Grid) -> f64 {
    (2.0 * grid.h()).max(0.05)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{BarenblattSpec, BarrierSpec};
    use crate::grid::{discrete_mass, sample_exact};
    use crate::params::derive_exponents;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e3() -> Exponents {
        derive_exponents(3.0, 1).unwrap()
    }

    #[test]
    fn diffusivity_values() {
        let e = e3();
        assert_eq!(flux_diffusivity(&[0.0], &e, 0.0), 0.0);
        assert_eq!(flux_diffusivity(&[1.0], &e, 0.0), 1.0);
        assert_eq!(flux_diffusivity(&[2.0], &e, 0.0), 2.0);
        assert_eq!(flux_diffusivity(&[0.0, 2.0], &e, 0.0), 2.0);
        assert!((flux_diffusivity(&[0.0], &e, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_stays_zero() {
        let cfg = SolverConfig::uniform(e3(), 1.0, 4).unwrap();
        let g = Grid::centered(1, 0.05, 1.0).unwrap();
        let out = step(&Field::zeros(g, 0.0), 0.1, &cfg).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_conserves_mass_and_checks_cfl() {
        let e = e3();
        let cfg = SolverConfig::uniform(e, 1.0, 4).unwrap();
        let s = BarenblattSpec::unit(e).unwrap();
        let g = Grid::centered(1, 1.0 / 256.0, 4.0).unwrap();
        let f = sample_exact(&s, &g, 0.5).unwrap();
        let bound = cfl_bound(&f, &cfg);
        assert!(matches!(step(&f, 2.0 * bound, &cfg), Err(Error::CflViolation { .. })));
        let next = step(&f, bound, &cfg).unwrap();
        assert!((discrete_mass(&next) - discrete_mass(&f)).abs() < 1e-14);
        // One step at the CFL limit tracks the closed form.
        let exact = sample_exact(&s, &g, 0.5 + bound).unwrap();
        let dev = next
            .values
            .iter()
            .zip(&exact.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-3, "deviation {dev}");
    }

    #[test]
    fn boundary_contact_is_an_error() {
        let e = e3();
        let g = Grid::centered(1, 1.0 / 32.0, 1.0).unwrap();
        let cfg = SolverConfig::new(e, 50.0, vec![50.0]).unwrap();
        let tr = InitialTrace::atom(1, [0.0, 0.0], 1.0).unwrap();
        let r = solve(&tr, &g, 0.1, &cfg);
        assert!(matches!(r, Err(Error::BoundaryTouched { .. })), "{r:?}");
    }

    #[test]
    fn budget_is_enforced() {
        let e = e3();
        let g = Grid::centered(1, 1.0 / 64.0, 4.0).unwrap();
        let mut cfg = SolverConfig::new(e, 1.0, vec![1.0]).unwrap();
        cfg.max_steps = 10;
        let tr = InitialTrace::atom(1, [0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            solve(&tr, &g, 0.05, &cfg),
            Err(Error::StepBudgetExhausted { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let e = e3();
        assert!(SolverConfig::new(e, 1.0, vec![]).is_err());
        assert!(SolverConfig::new(e, 1.0, vec![0.5, 0.5]).is_err());
        assert!(SolverConfig::new(e, 1.0, vec![1.5]).is_err());
        assert!(SolverConfig::new(e, 1.0, vec![0.0]).is_err());
        let mut c = SolverConfig::new(e, 1.0, vec![1.0]).unwrap();
        c.cfl_safety = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mass_positivity_and_sup_decay() {
        let e = e3();
        let g = Grid::centered(1, 1.0 / 128.0, 4.0).unwrap();
        let cfg = SolverConfig::uniform(e, 1.0, 10).unwrap();
        let tr = InitialTrace::new(1, vec![([-0.3, 0.0], 0.6), ([0.4, 0.0], 0.4)], None).unwrap();
        let traj = solve(&tr, &g, 0.05, &cfg).unwrap();
        let mut prev = f64::INFINITY;
        for f in traj.snapshots() {
            assert!((discrete_mass(f) - 1.0).abs() < 1e-8);
            assert!(f.values.iter().all(|&v| v >= 0.0));
            assert!(f.max() <= prev);
            prev = f.max();
        }
        assert_eq!(traj.times(), cfg.output_times);
    }

    #[test]
    fn comparison_principle_on_random_pairs() {
        let e = e3();
        let g = Grid::centered(1, 1.0 / 64.0, 3.0).unwrap();
        let cfg = SolverConfig::uniform(e, 0.5, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let u: Vec<f64> = (0..g.len())
                .map(|k| {
                    let x = g.node(k)[0];
                    if x.abs() < 1.0 { rng.gen_range(0.0..1.0) } else { 0.0 }
                })
                .collect();
            let v: Vec<f64> = u.iter().map(|&a| if a > 0.0 { a + rng.gen_range(0.0..0.5) } else { 0.0 }).collect();
            let trajs = solve_ensemble(
                vec![Field::new(g, u, 0.0).unwrap(), Field::new(g, v, 0.0).unwrap()],
                &cfg,
            )
            .unwrap();
            for (a, b) in trajs[0].snapshots().iter().zip(trajs[1].snapshots()) {
                assert!(a.dominated_by(b));
            }
        }
    }

    #[test]
    fn larger_mass_dominates() {
        let e = e3();
        let g = Grid::centered(1, 1.0 / 64.0, 4.0).unwrap();
        let cfg = SolverConfig::uniform(e, 1.0, 4).unwrap();
        let one = mollify_trace(&InitialTrace::atom(1, [0.0; 2], 1.0).unwrap(), &g, 0.1).unwrap();
        let two = mollify_trace(&InitialTrace::atom(1, [0.0; 2], 2.0).unwrap(), &g, 0.1).unwrap();
        let t = solve_ensemble(vec![one, two], &cfg).unwrap();
        for (a, b) in t[0].snapshots().iter().zip(t[1].snapshots()) {
            assert!(a.dominated_by(b));
        }
    }

    #[test]
    fn stays_below_barrier() {
        // Data bounded by H and vanishing on B(x1, R); the barrier with
        // v(R, 0) = H dominates on the ball until its blow-up time.
        let e = e3();
        let g = Grid::centered(1, 1.0 / 128.0, 3.0).unwrap();
        let (radius, height): (f64, f64) = (1.0, 0.5);
        let probe = BarrierSpec::new(e, 1.0, [0.0; 2]);
        let c = probe.coefficient();
        // c T^{-1/(p-2)} R^{p/(p-2)} = H
        let blowup = (c * radius.powf(e.p / (e.p - 2.0)) / height).powf(e.p - 2.0);
        let barrier = BarrierSpec::new(e, blowup, [0.0; 2]);
        let u0 = Field::from_fn(g, 0.0, |x| {
            let r = x[0].abs();
            if r > radius + 0.1 && r < 2.5 { height * (1.0 - ((r - 1.8) / 0.7).powi(2)).max(0.0) } else { 0.0 }
        });
        let times: Vec<f64> = (1..=8).map(|k| 0.95 * blowup * k as f64 / 8.0).collect();
        let cfg = SolverConfig::new(e, times[7], times).unwrap();
        let traj = solve_from(u0, &cfg).unwrap();
        for f in traj.snapshots() {
            for k in 0..g.len() {
                let x = g.node(k);
                if x[0].abs() <= radius {
                    assert!(f.values[k] <= barrier.value(&x[..1], f.time).unwrap() + 1e-14);
                }
            }
        }
    }

    #[test]
    fn two_dimensional_solve_is_radial_and_conservative() {
        let e = derive_exponents(3.0, 2).unwrap();
        let g = Grid::centered(2, 1.0 / 32.0, 2.0).unwrap();
        let cfg = SolverConfig::uniform(e, 0.2, 2).unwrap();
        let tr = InitialTrace::atom(2, [0.0; 2], 1.0).unwrap();
        let traj = solve(&tr, &g, 0.15, &cfg).unwrap();
        let f = traj.last().unwrap();
        assert!((discrete_mass(f) - 1.0).abs() < 1e-8);
        let c = g.shape()[0] / 2;
        for d in 1..10 {
            let a = f.values[g.index(c + d, c)];
            let b = f.values[g.index(c, c + d)];
            assert!((a - b).abs() <= 1e-12 * a.max(1e-30), "{a} {b}");
        }
    }

    #[test]
    fn fault_removes_finite_propagation() {
        let e = e3();
        let g = Grid::centered(1, 1.0 / 64.0, 3.0).unwrap();
        let mut cfg = SolverConfig::uniform(e, 0.2, 2).unwrap();
        cfg.eps_reg = 0.5;
        cfg.fault = FluxFault::MisSignedRegularization;
        let tr = InitialTrace::atom(1, [0.0; 2], 1.0).unwrap();
        let r = solve(&tr, &g, 0.1, &cfg);
        // Nondegenerate diffusion reaches the collar at once.
        assert!(matches!(r, Err(Error::BoundaryTouched { .. })), "{r:?}");
    }
}
