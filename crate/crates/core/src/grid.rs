//! Uniform node-centered grids, sampled fields, trajectories, and initial
//! traces made of atoms plus an optional bounded density.
//!
//! Every field carries an implicit zero extension outside its box and a
//! one-node collar on the boundary that must stay zero.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact::{BarenblattSpec, Point};

/// Minimum number of cells along each axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
    lo: Point,
    cells: [usize; 2],
}

impl Grid {
    /// Grid on the box `[lo, hi]`; the side lengths must be integer
    /// multiples of `h`.
    pub fn new(n: usize, h: f64, lo: &[f64], hi: &[f64]) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::InvalidParameter(format!("grid dimension {n}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing h = {h}")));
        }
        if lo.len() < n || hi.len() < n {
            return Err(Error::InvalidParameter("corner has fewer coordinates than n".into()));
        }
        let mut cells = [0usize; 2];
        let mut lo_pt = [0.0; 2];
        for i in 0..n {
            let ratio = (hi[i] - lo[i]) / h;
            let k = ratio.round();
            if (ratio - k).abs() > 1e-9 * ratio.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "axis {i}: length {} is not a multiple of h = {h}",
                    hi[i] - lo[i]
                )));
            }
            if k < MIN_CELLS as f64 {
                return Err(Error::InvalidParameter(format!(
                    "axis {i}: {k} cells, need at least {MIN_CELLS}"
                )));
            }
            cells[i] = k as usize;
            lo_pt[i] = lo[i];
        }
        Ok(Self {
            n,
            h,
            lo: lo_pt,
            cells,
        })
    }

    /// Grid on `[-half_width, half_width]^n`.
    pub fn centered(n: usize, h: f64, half_width: f64) -> Result<Self> {
        Self::new(n, h, &[-half_width; 2], &[half_width; 2])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lo(&self) -> Point {
        self.lo
    }

    pub fn hi(&self) -> Point {
        let mut hi = [0.0; 2];
        for (i, v) in hi.iter_mut().enumerate().take(self.n) {
            *v = self.lo[i] + self.cells[i] as f64 * self.h;
        }
        hi
    }

    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    /// Node counts per axis; the unused second axis of a 1D grid has one node.
    pub fn shape(&self) -> [usize; 2] {
        if self.n == 1 {
            [self.cells[0] + 1, 1]
        } else {
            [self.cells[0] + 1, self.cells[1] + 1]
        }
    }

    pub fn len(&self) -> usize {
        let s = self.shape();
        s[0] * s[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^n`
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.shape()[0]
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        let nx = self.shape()[0];
        (idx % nx, idx / nx)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + i as f64 * self.h
    }

    pub fn node(&self, idx: usize) -> Point {
        let (i, j) = self.ij(idx);
        if self.n == 1 {
            [self.coord(0, i), 0.0]
        } else {
            [self.coord(0, i), self.coord(1, j)]
        }
    }

    /// True for nodes on the outer boundary layer.
    pub fn is_collar(&self, idx: usize) -> bool {
        let (i, j) = self.ij(idx);
        let s = self.shape();
        let on_x = i == 0 || i + 1 == s[0];
        if self.n == 1 {
            on_x
        } else {
            on_x || j == 0 || j + 1 == s[1]
        }
    }

    /// Whether the closed ball `B(c, r)` lies strictly inside the collar.
    pub fn contains_ball(&self, c: &[f64], r: f64) -> bool {
        let hi = self.hi();
        (0..self.n).all(|i| c[i] - r > self.lo[i] + self.h && c[i] + r < hi[i] - self.h)
    }

    /// Whether `x` lies in the closed box.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        let hi = self.hi();
        (0..self.n).all(|i| x[i] >= self.lo[i] - 1e-12 && x[i] <= hi[i] + 1e-12)
    }

    /// Grid with the same box and half the spacing.
    pub fn refined(&self) -> Self {
        Self {
            n: self.n,
            h: 0.5 * self.h,
            lo: self.lo,
            cells: [2 * self.cells[0], 2 * self.cells[1]],
        }
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n
            && self.cells == other.cells
            && (self.h - other.h).abs() <= 1e-12 * self.h
            && (0..self.n).all(|i| (self.lo[i] - other.lo[i]).abs() <= 1e-12 * self.h)
    }
}

/// Grid-sampled solution at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn zeros(grid: Grid, time: f64) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            time,
        }
    }

    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeValue { node, value });
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, time: f64, f: F) -> Self {
        let n = grid.n();
        let values = (0..grid.len()).map(|k| f(&grid.node(k)[..n])).collect();
        Self { grid, values, time }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn collar_is_zero(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(k, &v)| v == 0.0 || !self.grid.is_collar(k))
    }

    /// Node-wise `self <= other`.
    pub fn dominated_by(&self, other: &Field) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }

    /// Writes the snapshot as `# t=.. h=.. n=..` followed by `x[,y],u` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.grid.n();
        writeln!(w, "# t={} h={} n={}", self.time, self.grid.h(), n)?;
        writeln!(w, "{}", if n == 1 { "x,u" } else { "x,y,u" })?;
        for (k, v) in self.values.iter().enumerate() {
            let x = self.grid.node(k);
            if n == 1 {
                writeln!(w, "{},{}", x[0], v)?;
            } else {
                writeln!(w, "{},{},{}", x[0], x[1], v)?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Parses the format produced by [`Field::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let head = lines
            .next()
            .ok_or_else(|| Error::Config("empty snapshot".into()))??;
        let mut time = None;
        let mut h = None;
        let mut n = None;
        for tok in head.trim_start_matches('#').split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad snapshot header token {tok}")))?;
            let bad = |_| Error::Config(format!("bad snapshot header value {tok}"));
            match k {
                "t" => time = Some(v.parse::<f64>().map_err(bad)?),
                "h" => h = Some(v.parse::<f64>().map_err(bad)?),
                "n" => n = Some(v.parse::<usize>().map_err(|_| Error::Config(tok.into()))?),
                _ => {}
            }
        }
        let (time, h, n) = match (time, h, n) {
            (Some(t), Some(h), Some(n)) => (t, h, n),
            _ => return Err(Error::Config("snapshot header needs t, h and n".into())),
        };
        let _columns = lines.next();
        let mut rows: Vec<[f64; 3]> = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut row = [0.0; 3];
            let mut k = 0;
            for f in line.split(',') {
                if k >= 3 {
                    return Err(Error::Config(format!("too many columns: {line}")));
                }
                row[k] = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number in {line}")))?;
                k += 1;
            }
            if k != n + 1 {
                return Err(Error::Config(format!("expected {} columns: {line}", n + 1)));
            }
            rows.push(row);
        }
        let lo: Vec<f64> = (0..n)
            .map(|a| rows.iter().map(|r| r[a]).fold(f64::INFINITY, f64::min))
            .collect();
        let hi: Vec<f64> = (0..n)
            .map(|a| rows.iter().map(|r| r[a]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let grid = Grid::new(n, h, &lo, &hi)?;
        if rows.len() != grid.len() {
            return Err(Error::Config(format!(
                "snapshot has {} rows, grid needs {}",
                rows.len(),
                grid.len()
            )));
        }
        let mut values = vec![0.0; grid.len()];
        for r in &rows {
            let i = ((r[0] - lo[0]) / h).round() as usize;
            let j = if n == 2 { ((r[1] - lo[1]) / h).round() as usize } else { 0 };
            values[grid.index(i, j)] = r[n];
        }
        Field::new(grid, values, time)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }
}

/// Snapshots with strictly increasing times on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    snapshots: Vec<Field>,
}

impl Trajectory {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            snapshots: Vec::new(),
        }
    }

    pub fn from_snapshots(snapshots: Vec<Field>) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| Error::InsufficientSnapshots("empty trajectory".into()))?;
        let mut traj = Self::new(first.grid);
        for f in snapshots {
            traj.push(f)?;
        }
        Ok(traj)
    }

    pub fn push(&mut self, f: Field) -> Result<()> {
        if !f.grid.same_as(&self.grid) {
            return Err(Error::Incompatible("snapshot grid differs from trajectory grid".into()));
        }
        if f.time < 0.0 {
            return Err(Error::InvalidParameter(format!("negative snapshot time {}", f.time)));
        }
        if let Some(last) = self.snapshots.last() {
            if f.time <= last.time {
                return Err(Error::InvalidParameter(format!(
                    "snapshot time {} not after {}",
                    f.time, last.time
                )));
            }
        }
        self.snapshots.push(f);
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.time).collect()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn last(&self) -> Option<&Field> {
        self.snapshots.last()
    }

    /// Writes one CSV per snapshot plus `index.csv` listing times and files.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.len());
        let mut index = BufWriter::new(File::create(dir.join(format!("{stem}_index.csv")))?);
        writeln!(index, "t,file")?;
        for (k, f) in self.snapshots.iter().enumerate() {
            let name = format!("{stem}_{k:04}.csv");
            f.save_csv(&dir.join(&name))?;
            writeln!(index, "{},{}", f.time, name)?;
            files.push(name);
        }
        index.flush()?;
        files.push(format!("{stem}_index.csv"));
        Ok(files)
    }

    /// Reads a trajectory written by [`Trajectory::save`].
    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let index = BufReader::new(File::open(dir.join(format!("{stem}_index.csv")))?);
        let mut snaps = Vec::new();
        for line in index.lines().skip(1) {
            let line = line?;
            if let Some((_, file)) = line.split_once(',') {
                snaps.push(Field::load_csv(&dir.join(file.trim()))?);
            }
        }
        Self::from_snapshots(snaps)
    }
}

type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Bounded nonnegative density with support in an axis-aligned box.
#[derive(Clone)]
pub struct Density {
    f: DensityFn,
    lo: Point,
    hi: Point,
    mass: f64,
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("mass", &self.mass)
            .finish()
    }
}

impl Density {
    /// `f` is evaluated only inside `[lo, hi]`. Its integral is computed by
    /// a fine midpoint rule (2048 cells per axis in 1D, 512 in 2D).
    pub fn new<F>(n: usize, lo: &[f64], hi: &[f64], f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let mut l = [0.0; 2];
        let mut u = [0.0; 2];
        for i in 0..n {
            if !(hi[i] > lo[i]) {
                return Err(Error::InvalidParameter("empty density support box".into()));
            }
            l[i] = lo[i];
            u[i] = hi[i];
        }
        let cells = if n == 1 { 2048 } else { 512 };
        let w: Vec<f64> = (0..n).map(|i| (u[i] - l[i]) / cells as f64).collect();
        let mut mass = 0.0;
        let ny = if n == 1 { 1 } else { cells };
        for j in 0..ny {
            for i in 0..cells {
                let x = [l[0] + (i as f64 + 0.5) * w[0], l[1] + (j as f64 + 0.5) * w.get(1).unwrap_or(&0.0)];
                let v = f(&x[..n]);
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("density value {v} at {x:?}")));
                }
                mass += v;
            }
        }
        mass *= w.iter().product::<f64>();
        Ok(Self {
            f: Arc::new(f),
            lo: l,
            hi: u,
            mass,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let inside = x.iter().enumerate().all(|(i, &xi)| xi >= self.lo[i] && xi <= self.hi[i]);
        if inside {
            (self.f)(x)
        } else {
            0.0
        }
    }
}

/// Compactly supported positive measure: atoms plus an optional density.
#[derive(Debug, Clone)]
pub struct InitialTrace {
    pub n: usize,
    pub atoms: Vec<(Point, f64)>,
    pub density: Option<Density>,
    total_mass: f64,
}

impl InitialTrace {
    pub fn new(n: usize, atoms: Vec<(Point, f64)>, density: Option<Density>) -> Result<Self> {
        if let Some((_, m)) = atoms.iter().find(|(_, m)| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter(format!("atom mass {m} must be positive")));
        }
        let total_mass =
            atoms.iter().map(|(_, m)| m).sum::<f64>() + density.as_ref().map_or(0.0, Density::mass);
        if !(total_mass > 0.0 && total_mass.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "trace total mass {total_mass} must be positive and finite"
            )));
        }
        Ok(Self {
            n,
            atoms,
            density,
            total_mass,
        })
    }

    pub fn atom(n: usize, at: Point, mass: f64) -> Result<Self> {
        Self::new(n, vec![(at, mass)], None)
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// `sum_i m_i phi(a_i) + int phi f`, the density part by a fine midpoint rule.
    pub fn pair<F: Fn(&[f64]) -> f64>(&self, phi: F) -> f64 {
        let n = self.n;
        let mut s: f64 = self.atoms.iter().map(|(a, m)| m * phi(&a[..n])).sum();
        if let Some(d) = &self.density {
            let cells = if n == 1 { 2048 } else { 512 };
            let w: Vec<f64> = (0..n).map(|i| (d.hi[i] - d.lo[i]) / cells as f64).collect();
            let ny = if n == 1 { 1 } else { cells };
            let mut acc = 0.0;
            for j in 0..ny {
                for i in 0..cells {
                    let x = [
                        d.lo[0] + (i as f64 + 0.5) * w[0],
                        d.lo[1] + (j as f64 + 0.5) * w.get(1).unwrap_or(&0.0),
                    ];
                    acc += d.eval(&x[..n]) * phi(&x[..n]);
                }
            }
            s += acc * w.iter().product::<f64>();
        }
        s
    }

    fn check_fits(&self, grid: &Grid, delta: f64) -> Result<()> {
        for (a, _) in &self.atoms {
            if !grid.contains_ball(&a[..self.n], delta) {
                return Err(Error::SupportOverflow(format!(
                    "atom at {:?} inflated by {delta} leaves the grid interior",
                    &a[..self.n]
                )));
            }
        }
        if let Some(d) = &self.density {
            let lo = grid.lo();
            let hi = grid.hi();
            let h = grid.h();
            for i in 0..self.n {
                if d.lo[i] - delta <= lo[i] + h || d.hi[i] + delta >= hi[i] - h {
                    return Err(Error::SupportOverflow(
                        "density support inflated by delta leaves the grid interior".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Standard bump `exp(-1/(1-|z|^2))` on the unit ball.
pub fn bump(z2: f64) -> f64 {
    if z2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - z2)).exp()
    }
}

/// Samples `nu * rho_delta` on the grid; each atom and the density part are
/// renormalized separately so their discrete masses match exactly.
pub fn mollify_trace(trace: &InitialTrace, grid: &Grid, delta: f64) -> Result<Field> {
    let h = grid.h();
    if trace.n != grid.n() {
        return Err(Error::Incompatible(format!(
            "trace dimension {} vs grid dimension {}",
            trace.n,
            grid.n()
        )));
    }
    if delta < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::UnderResolved {
            delta,
            min: 2.0 * h,
        });
    }
    trace.check_fits(grid, delta)?;
    let n = grid.n();
    let shape = grid.shape();
    let lo = grid.lo();
    let vol = grid.cell_volume();
    let reach = (delta / h).ceil() as i64 + 1;
    let mut values = vec![0.0; grid.len()];

    for (a, m) in &trace.atoms {
        // Offsets are taken in grid units so that lattice shifts reproduce
        // the same weights.
        let mut base = [0i64; 2];
        let mut frac = [0.0; 2];
        for i in 0..n {
            let s = (a[i] - lo[i]) / h;
            base[i] = s.floor() as i64;
            frac[i] = s - base[i] as f64;
        }
        let jr = if n == 1 { 0..=0 } else { -reach..=reach };
        let mut stencil = Vec::new();
        let mut sum = 0.0;
        for dj in jr {
            for di in -reach..=reach {
                let zx = (di as f64 - frac[0]) * h / delta;
                let zy = if n == 2 { (dj as f64 - frac[1]) * h / delta } else { 0.0 };
                let w = bump(zx * zx + zy * zy);
                if w > 0.0 {
                    let i = base[0] + di;
                    let j = base[1] + dj;
                    stencil.push((grid.index(i as usize, j as usize), w));
                    sum += w;
                }
            }
        }
        let scale = m / (sum * vol);
        for (k, w) in stencil {
            values[k] += w * scale;
        }
    }

    if let Some(d) = &trace.density {
        let mut kernel = Vec::new();
        let mut ksum = 0.0;
        let jr = if n == 1 { 0..=0 } else { -reach..=reach };
        for dj in jr {
            for di in -reach..=reach {
                let zx = di as f64 * h / delta;
                let zy = dj as f64 * h / delta;
                let w = bump(zx * zx + zy * zy);
                if w > 0.0 {
                    kernel.push((di, dj, w));
                    ksum += w;
                }
            }
        }
        let sampled: Vec<f64> = (0..grid.len()).map(|k| d.eval(&grid.node(k)[..n])).collect();
        let mut conv = vec![0.0; grid.len()];
        for (k, &v) in sampled.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let (i, j) = grid.ij(k);
            for &(di, dj, w) in &kernel {
                let ii = i as i64 + di;
                let jj = j as i64 + dj;
                if ii < 0 || jj < 0 || ii >= shape[0] as i64 || jj >= shape[1] as i64 {
                    continue;
                }
                conv[grid.index(ii as usize, jj as usize)] += v * w / ksum;
            }
        }
        let discrete: f64 = conv.iter().sum::<f64>() * vol;
        if discrete > 0.0 {
            let scale = d.mass() / discrete;
            for (v, c) in values.iter_mut().zip(conv) {
                *v += c * scale;
            }
        }
    }
    Field::new(*grid, values, 0.0)
}

/// `h^n * sum of values`.
pub fn discrete_mass(f: &Field) -> f64 {
    f.values.iter().sum::<f64>() * f.grid.cell_volume()
}

/// Nodewise evaluation of the Barenblatt solution.
pub fn sample_exact(spec: &BarenblattSpec, grid: &Grid, t: f64) -> Result<Field> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("sampling time {t} must be positive")));
    }
    let r = spec.support_radius(t);
    if !grid.contains_ball(&spec.center[..grid.n()], r) {
        return Err(Error::SupportOverflow(format!(
            "Barenblatt support radius {r} at t = {t} does not fit the grid"
        )));
    }
    Ok(Field::from_fn(*grid, t, |x| spec.value(x, t)))
}

/// Trajectory of sampled Barenblatt snapshots.
pub fn sample_exact_trajectory(spec: &BarenblattSpec, grid: &Grid, times: &[f64]) -> Result<Trajectory> {
    let mut traj = Trajectory::new(*grid);
    for &t in times {
        traj.push(sample_exact(spec, grid, t)?)?;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;

    fn line(h: f64, w: f64) -> Grid {
        Grid::centered(1, h, w).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1, 0.1, &[0.0], &[0.55]).is_err());
        assert!(Grid::new(1, 0.1, &[0.0], &[0.5]).is_err());
        assert!(Grid::new(3, 0.1, &[0.0], &[1.0]).is_err());
        let g = Grid::new(2, 0.125, &[0.0, -1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(g.shape(), [9, 17]);
        assert!(g.is_collar(g.index(0, 5)));
        assert!(g.is_collar(g.index(4, 16)));
        assert!(!g.is_collar(g.index(4, 5)));
    }

    #[test]
    fn single_atom_mollification() {
        let g = line(1.0 / 256.0, 1.0);
        let tr = InitialTrace::atom(1, [0.0, 0.0], 1.0).unwrap();
        let f = mollify_trace(&tr, &g, 0.05).unwrap();
        assert!((discrete_mass(&f) - 1.0).abs() < 1e-12);
        for (k, v) in f.values.iter().enumerate() {
            if g.node(k)[0].abs() > 0.05 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn two_atoms_give_two_bumps() {
        let g = line(1.0 / 256.0, 1.0);
        let tr = InitialTrace::new(1, vec![([-0.5, 0.0], 0.5), ([0.5, 0.0], 0.5)], None).unwrap();
        let f = mollify_trace(&tr, &g, 0.05).unwrap();
        assert!((discrete_mass(&f) - 1.0).abs() < 1e-12);
        let mid = g.index(256, 0);
        assert_eq!(f.values[mid], 0.0);
        assert!(f.values[g.index(128, 0)] > 0.0);
        assert!(f.values[g.index(384, 0)] > 0.0);
    }

    #[test]
    fn mollify_errors() {
        let g = line(1.0 / 64.0, 1.0);
        let tr = InitialTrace::atom(1, [0.0, 0.0], 1.0).unwrap();
        assert!(matches!(mollify_trace(&tr, &g, 0.02), Err(Error::UnderResolved { .. })));
        let edge = InitialTrace::atom(1, [0.95, 0.0], 1.0).unwrap();
        assert!(matches!(mollify_trace(&edge, &g, 0.05), Err(Error::SupportOverflow(_))));
        assert!(InitialTrace::new(1, vec![], None).is_err());
        assert!(InitialTrace::atom(1, [0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn mass_scaling_and_translation() {
        let g = Grid::centered(2, 1.0 / 32.0, 1.0).unwrap();
        let atoms = vec![([0.1, -0.2], 0.7), ([-0.3, 0.25], 0.4)];
        let tr = InitialTrace::new(2, atoms.clone(), None).unwrap();
        let f = mollify_trace(&tr, &g, 0.15).unwrap();
        let s = 3.5;
        let scaled: Vec<_> = atoms.iter().map(|(a, m)| (*a, m * s)).collect();
        let fs = mollify_trace(&InitialTrace::new(2, scaled, None).unwrap(), &g, 0.15).unwrap();
        for (a, b) in f.values.iter().zip(&fs.values) {
            assert!((a * s - b).abs() <= 1e-13 * b.abs().max(1e-300));
        }
        let h = g.h();
        let shifted: Vec<_> = atoms
            .iter()
            .map(|(a, m)| ([a[0] + 3.0 * h, a[1] - 2.0 * h], *m))
            .collect();
        let ft = mollify_trace(&InitialTrace::new(2, shifted, None).unwrap(), &g, 0.15).unwrap();
        let shape = g.shape();
        for j in 2..shape[1] - 3 {
            for i in 0..shape[0] - 3 {
                let a = f.values[g.index(i, j)];
                let b = ft.values[g.index(i + 3, j - 2)];
                assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            }
        }
    }

    #[test]
    fn density_trace() {
        let g = line(1.0 / 128.0, 1.0);
        let d = Density::new(1, &[-0.25], &[0.25], |x| 1.0 - 4.0 * x[0].abs()).unwrap();
        assert!((d.mass() - 0.25).abs() < 1e-6);
        let tr = InitialTrace::new(1, vec![([0.5, 0.0], 0.5)], Some(d)).unwrap();
        assert!((tr.total_mass() - 0.75).abs() < 1e-6);
        let f = mollify_trace(&tr, &g, 0.05).unwrap();
        assert!((discrete_mass(&f) - tr.total_mass()).abs() < 1e-8 * tr.total_mass());
    }

    #[test]
    fn discrete_mass_of_sampled_barenblatt() {
        let e = derive_exponents(3.0, 1).unwrap();
        let s = BarenblattSpec::unit(e).unwrap();
        let g = line(1.0 / 256.0, 3.0);
        assert_eq!(discrete_mass(&Field::zeros(g, 0.0)), 0.0);
        let f = sample_exact(&s, &g, 1.0).unwrap();
        assert!((discrete_mass(&f) - 1.0).abs() < 1e-3);
        assert_eq!(f.values[g.index(768, 0)], s.sup_norm(1.0));
        assert!(f.collar_is_zero());
        assert!(sample_exact(&s, &line(1.0 / 16.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn sampling_is_exact_at_nodes() {
        // Piecewise-linear interpolation of samples converges at second order
        // away from the front and at least first order overall.
        let e = derive_exponents(3.0, 1).unwrap();
        let s = BarenblattSpec::unit(e).unwrap();
        let mut errs = Vec::new();
        for h in [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0] {
            let g = line(h, 3.0);
            let f = sample_exact(&s, &g, 1.0).unwrap();
            let mut err: f64 = 0.0;
            for k in 0..g.len() - 1 {
                let x = g.node(k)[0] + 0.5 * h;
                let interp = 0.5 * (f.values[k] + f.values[k + 1]);
                err = err.max((interp - s.value(&[x], 1.0)).abs());
            }
            errs.push(err);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.0);
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::centered(2, 0.125, 1.0).unwrap();
        let f = Field::from_fn(g, 0.25, |x| (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# t=0.25 h=0.125 n=2\nx,y,u\n"));
        let back = Field::read_csv(&buf[..]).unwrap();
        assert_eq!(back, f);
    }
}
