use super::{trapezoid, window_snapshots, Window};
use crate::error::{Error, Result};
use crate::grid::{Field, Trajectory};

/// `(int int |u|^q)^{1/q}` over the window.
pub fn lq_spacetime(traj: &Trajectory, q: f64, w: &Window) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
    }
    let vol = traj.grid().cell_volume();
    let total = super::spacetime_integral(traj, w, |f, nodes| {
        vol * nodes.iter().map(|&k| f.values[k].abs().powf(q)).sum::<f64>()
    })?;
    Ok(total.powf(1.0 / q))
}

/// Nodal gradient: centered differences inside, one-sided on the collar.
pub fn gradient_field(f: &Field) -> Vec<[f64; 2]> {
    let g = &f.grid;
    let n = g.n();
    let h = g.h();
    let shape = g.shape();
    let u = &f.values;
    let mut out = vec![[0.0; 2]; g.len()];
    for (k, grad) in out.iter_mut().enumerate() {
        let (i, j) = g.ij(k);
        for (axis, slot) in grad.iter_mut().enumerate().take(n) {
            let (pos, len) = if axis == 0 { (i, shape[0]) } else { (j, shape[1]) };
            let at = |d: isize| -> f64 {
                let p = (pos as isize + d) as usize;
                if axis == 0 {
                    u[g.index(p, j)]
                } else {
                    u[g.index(i, p)]
                }
            };
            *slot = if pos == 0 {
                (at(1) - at(0)) / h
            } else if pos + 1 == len {
                (at(0) - at(-1)) / h
            } else {
                (at(1) - at(-1)) / (2.0 * h)
            };
        }
    }
    out
}

/// Value and gradient parts of a space-time `W^{1,q}` distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceParts {
    /// `int int |a - b|^q`
    pub values: f64,
    /// `int int |grad a - grad b|^q`
    pub gradients: f64,
    pub q: f64,
}

impl DistanceParts {
    /// `(values + gradients)^{1/q}`
    pub fn sobolev(&self) -> f64 {
        (self.values + self.gradients).powf(1.0 / self.q)
    }

    /// `values^{1/q}`
    pub fn lq(&self) -> f64 {
        self.values.powf(1.0 / self.q)
    }
}

/// Both parts of the distance between two trajectories on the same grid.
///
/// Snapshots of `b` are matched to those of `a` by time within `h^2`.
pub fn sobolev_distance_parts(a: &Trajectory, b: &Trajectory, q: f64, w: &Window) -> Result<DistanceParts> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
    }
    let grid = a.grid();
    let gb = b.grid();
    if grid.n() != gb.n() || grid.shape() != gb.shape() || (grid.h() - gb.h()).abs() > 1e-12 * grid.h()
    {
        return Err(Error::Incompatible("trajectories live on different grids".into()));
    }
    let sa = window_snapshots(a, w)?;
    let sb = window_snapshots(b, w)?;
    let tol = grid.h() * grid.h();
    let nodes = w.nodes(grid);
    let vol = grid.cell_volume();
    let mut vals = Vec::with_capacity(sa.len());
    let mut grads = Vec::with_capacity(sa.len());
    for fa in &sa {
        let fb = sb
            .iter()
            .min_by(|x, y| (x.time - fa.time).abs().total_cmp(&(y.time - fa.time).abs()))
            .filter(|fb| (fb.time - fa.time).abs() <= tol)
            .ok_or_else(|| {
                Error::Incompatible(format!("no snapshot of b within h^2 of t = {}", fa.time))
            })?;
        let ga = gradient_field(fa);
        let gb = gradient_field(fb);
        let mut v = 0.0;
        let mut d = 0.0;
        for &k in &nodes {
            v += (fa.values[k] - fb.values[k]).abs().powf(q);
            let dx = ga[k][0] - gb[k][0];
            let dy = ga[k][1] - gb[k][1];
            d += (dx * dx + dy * dy).sqrt().powf(q);
        }
        vals.push((fa.time, v * vol));
        grads.push((fa.time, d * vol));
    }
    Ok(DistanceParts {
        values: trapezoid(&vals),
        gradients: trapezoid(&grads),
        q,
    })
}

/// `(||a - b||_q^q + ||grad a - grad b||_q^q)^{1/q}` over the window.
pub fn sobolev_distance(a: &Trajectory, b: &Trajectory, q: f64, w: &Window) -> Result<f64> {
    Ok(sobolev_distance_parts(a, b, q, w)?.sobolev())
}
