//! Experiment configuration: a TOML file with one section per concern,
//! patched by `section.key=value` overrides.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exact::Point;
use crate::grid::{Density, Grid, InitialTrace};
use crate::params::Exponents;
use crate::solver::{FluxFault, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub p: f64,
    pub n: usize,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self { p: 3.0, n: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub h: f64,
    /// The grid is `[-half_width, half_width]^n`.
    pub half_width: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            h: 1.0 / 128.0,
            half_width: 4.0,
        }
    }
}

/// Smooth bump density `mass * bump(|x - center|^2 / radius^2) / norm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Peak value of the bump (before any normalization).
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    /// Atoms as `[x, mass]` on the line or `[x, y, mass]` in the plane.
    pub atoms: Vec<Vec<f64>>,
    pub density: Option<DensitySection>,
    /// Mollification radius; `0` selects `4h`.
    pub delta: f64,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self {
            atoms: vec![vec![0.0, 1.0]],
            density: None,
            delta: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Uniform,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub end_time: f64,
    pub first_output: f64,
    pub outputs: usize,
    pub spacing: Spacing,
    pub cfl: f64,
    pub eps_reg: f64,
    pub save_snapshots: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            end_time: 1.0,
            first_output: 0.01,
            outputs: 50,
            spacing: Spacing::Geometric,
            cfl: SolverConfig::DEFAULT_CFL,
            eps_reg: 0.0,
            save_snapshots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarenblattSection {
    pub mass: f64,
    pub times: Vec<f64>,
    pub residual_points: usize,
    /// Difference step of the strong residual.
    pub residual_h: f64,
}

impl Default for BarenblattSection {
    fn default() -> Self {
        Self {
            mass: 1.0,
            times: vec![0.25, 1.0, 4.0],
            residual_points: 100,
            residual_h: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityPath {
    ClosedForm,
    Solver,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub p_list: Vec<f64>,
    pub q: f64,
    pub window_half: f64,
    pub t0: f64,
    pub t1: f64,
    pub snapshots: usize,
    pub path: StabilityPath,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            p_list: vec![3.4, 3.2, 3.1, 3.05],
            q: 2.0,
            window_half: 3.0,
            t0: 0.01,
            t1: 1.0,
            snapshots: 200,
            path: StabilityPath::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Exact,
    Solver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationSection {
    pub source: Source,
    pub probe: Vec<f64>,
}

impl Default for PropagationSection {
    fn default() -> Self {
        Self {
            source: Source::Solver,
            probe: vec![2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSection {
    pub source: Source,
}

impl Default for SmoothingSection {
    fn default() -> Self {
        Self { source: Source::Solver }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    pub source: Source,
    /// Number of dyadic levels `j = top / 2^k`, `k = 1..=levels`.
    pub levels: usize,
    /// Top level; `0` selects the sup norm at the window start.
    pub j_top: f64,
    /// Window start; `0` selects `T 2^{-5 lambda/n}` for the closed form
    /// and `1e-4` for the solver.
    pub t0: f64,
    /// Geometric snapshots of the solver run.
    pub snapshots: usize,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            source: Source::Exact,
            levels: 6,
            j_top: 0.0,
            t0: 0.0,
            snapshots: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultName {
    None,
    MisSignedFlux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestSection {
    pub draws: usize,
    pub pairs: usize,
    pub residual_points: usize,
    pub mollifier_checks: usize,
    pub weak_bumps: usize,
    pub fault: FaultName,
    /// Regularization used together with the injected fault.
    pub fault_eps: f64,
}

impl Default for SelftestSection {
    fn default() -> Self {
        Self {
            draws: 100_000,
            pairs: 20,
            residual_points: 100,
            mollifier_checks: 3,
            weak_bumps: 10,
            fault: FaultName::None,
            fault_eps: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub trace: TraceSection,
    pub solver: SolverSection,
    pub barenblatt: BarenblattSection,
    pub stability: StabilitySection,
    pub propagation: PropagationSection,
    pub smoothing: SmoothingSection,
    pub decay: DecaySection,
    pub selftest: SelftestSection,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses an override value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies `section.key=value` to a TOML table.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{spec}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("override key `{path}` is malformed")));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override `{path}`: `{k}` is not a section")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Builds the config from optional TOML text plus overrides.
    pub fn from_sources(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut table = match text {
            Some(t) => toml::from_str::<toml::Table>(t).map_err(|e| config_err(e.to_string()))?,
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn exponents(&self) -> Result<Exponents> {
        exponents_at(self.problem.p, self.problem.n)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::centered(self.problem.n, self.grid.h, self.grid.half_width)
            .map_err(|e| config_err(format!("grid: {e}")))
    }

    pub fn delta(&self) -> f64 {
        if self.trace.delta > 0.0 {
            self.trace.delta
        } else {
            4.0 * self.grid.h
        }
    }

    pub fn trace(&self) -> Result<InitialTrace> {
        let n = self.problem.n;
        let mut atoms = Vec::new();
        for a in &self.trace.atoms {
            if a.len() != n + 1 {
                return Err(config_err(format!(
                    "trace.atoms entries must have {} numbers (position then mass), got {a:?}",
                    n + 1
                )));
            }
            let mut at: Point = [0.0; 2];
            at[..n].copy_from_slice(&a[..n]);
            atoms.push((at, a[n]));
        }
        let density = match &self.trace.density {
            None => None,
            Some(d) => {
                if d.center.len() != n || !(d.radius > 0.0) || !(d.height > 0.0) {
                    return Err(config_err("trace.density needs an n-dimensional center, radius > 0 and height > 0"));
                }
                let (c, r, hgt) = (d.center.clone(), d.radius, d.height);
                let lo: Vec<f64> = c.iter().map(|x| x - r).collect();
                let hi: Vec<f64> = c.iter().map(|x| x + r).collect();
                let f = move |x: &[f64]| {
                    let z2: f64 = x.iter().zip(&c).map(|(a, b)| ((a - b) / r).powi(2)).sum();
                    hgt * crate::grid::bump(z2) * std::f64::consts::E
                };
                Some(Density::new(n, &lo, &hi, f)?)
            }
        };
        InitialTrace::new(n, atoms, density).map_err(|e| config_err(format!("trace: {e}")))
    }

    /// Output times of the solver section.
    pub fn output_times(&self) -> Vec<f64> {
        let s = &self.solver;
        match s.spacing {
            Spacing::Uniform => (1..=s.outputs)
                .map(|k| s.first_output + (s.end_time - s.first_output) * (k - 1) as f64 / (s.outputs - 1).max(1) as f64)
                .collect(),
            Spacing::Geometric => crate::analysis::geometric_times(s.first_output, s.end_time, s.outputs),
        }
    }

    pub fn solver_config(&self, exps: Exponents, times: Vec<f64>) -> Result<SolverConfig> {
        let end = *times.last().ok_or_else(|| config_err("no output times"))?;
        let mut cfg = SolverConfig::new(exps, end, times).map_err(|e| config_err(format!("solver: {e}")))?;
        cfg.cfl_safety = self.solver.cfl;
        cfg.eps_reg = self.solver.eps_reg;
        cfg.validate().map_err(|e| config_err(format!("solver: {e}")))?;
        Ok(cfg)
    }

    pub fn fault(&self) -> FluxFault {
        match self.selftest.fault {
            FaultName::None => FluxFault::None,
            FaultName::MisSignedFlux => FluxFault::MisSignedRegularization,
        }
    }

    /// Range checks. Messages name the constraint that is violated.
    pub fn validate(&self) -> Result<()> {
        self.exponents()?;
        if !(self.grid.h > 0.0 && self.grid.half_width > 0.0) {
            return Err(config_err("grid.h and grid.half_width must be positive"));
        }
        if self.trace.delta < 0.0 {
            return Err(config_err("trace.delta must be >= 0"));
        }
        if self.trace.atoms.is_empty() && self.trace.density.is_none() {
            return Err(config_err("trace needs at least one atom or a density"));
        }
        let s = &self.solver;
        if !(s.first_output > 0.0 && s.first_output < s.end_time) {
            return Err(config_err("solver.first_output must lie in (0, solver.end_time)"));
        }
        if s.outputs < 2 {
            return Err(config_err("solver.outputs must be at least 2"));
        }
        if !(s.cfl > 0.0 && s.cfl <= 1.0) {
            return Err(config_err("solver.cfl must lie in (0, 1]"));
        }
        let b = &self.barenblatt;
        if !(b.mass > 0.0) || b.times.iter().any(|t| !(*t > 0.0)) || !(b.residual_h > 0.0) {
            return Err(config_err("barenblatt.mass, barenblatt.times and barenblatt.residual_h must be positive"));
        }
        let d = &self.decay;
        if d.levels < 2 || d.j_top < 0.0 || d.t0 < 0.0 || d.snapshots < 4 {
            return Err(config_err("decay needs levels >= 2, j_top >= 0, t0 >= 0, snapshots >= 4"));
        }
        if !(self.selftest.fault_eps > 0.0) {
            return Err(config_err("selftest.fault_eps must be positive"));
        }
        Ok(())
    }

    /// Checks of the stability section, run by the stability command only.
    pub fn validate_stability(&self) -> Result<()> {
        let e = self.exponents()?;
        let (p, n) = (e.p, e.n);
        let st = &self.stability;
        if st.p_list.is_empty() {
            return Err(config_err("stability.p_list is empty"));
        }
        for &pi in &st.p_list {
            if !(pi > 2.0) {
                return Err(config_err(format!("stability.p_list entry {pi} must exceed 2 (degenerate range p > 2)")));
            }
        }
        let dist: Vec<f64> = st.p_list.iter().map(|pi| (pi - p).abs()).collect();
        if dist.windows(2).any(|w| w[1] > w[0]) {
            return Err(config_err("stability.p_list must be sorted by |p_i - p| descending"));
        }
        let q_max = e.q_grad_max;
        if !(st.q >= 1.0) {
            return Err(config_err(format!("stability.q = {} must be >= 1", st.q)));
        }
        if st.q >= q_max {
            return Err(config_err(format!(
                "stability.q = {} exceeds p-1+1/(n+1) = {q_max} for p = {p}, n = {n}",
                st.q
            )));
        }
        if !(st.t0 > 0.0 && st.t0 < st.t1) || st.snapshots < 4 || !(st.window_half > 0.0) {
            return Err(config_err("stability window needs 0 < t0 < t1, window_half > 0 and at least 4 snapshots"));
        }
        if st.window_half >= self.grid.half_width {
            return Err(config_err("stability.window_half must lie inside the grid"));
        }
        Ok(())
    }

    /// Checks of the propagation section, run by the propagation command only.
    pub fn validate_propagation(&self) -> Result<()> {
        let n = self.problem.n;
        if self.propagation.probe.len() != n {
            return Err(config_err(format!("propagation.probe must have {n} coordinates")));
        }
        Ok(())
    }
}

/// Exponents with the constraint named on failure.
pub fn exponents_at(p: f64, n: usize) -> Result<Exponents> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(config_err(format!("p = {p} must exceed 2 (degenerate range p > 2)")));
    }
    if n != 1 && n != 2 {
        return Err(config_err(format!("n = {n} must be 1 or 2")));
    }
    Exponents::new(p, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::from_sources(None, &[]).unwrap();
        let again = ExperimentConfig::from_sources(Some(&c.to_toml()), &[]).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
    }

    #[test]
    fn overrides_apply_and_change_the_hash() {
        let base = ExperimentConfig::from_sources(None, &[]).unwrap();
        let c = ExperimentConfig::from_sources(
            Some("[problem]\np = 3.5\n"),
            &["grid.h=0.015625".into(), "stability.p_list=[3.9, 3.7]".into(), "decay.source=solver".into()],
        )
        .unwrap();
        assert_eq!(c.problem.p, 3.5);
        assert_eq!(c.grid.h, 0.015625);
        assert_eq!(c.stability.p_list, vec![3.9, 3.7]);
        assert_eq!(c.decay.source, Source::Solver);
        assert_ne!(c.hash(), base.hash());
    }

    #[test]
    fn violations_name_the_constraint() {
        let msg = |o: &str| ExperimentConfig::from_sources(None, &[o.into()]).unwrap_err().to_string();
        let stab = |o: &str| {
            let c = ExperimentConfig::from_sources(None, &[o.into()]).unwrap();
            c.validate_stability().unwrap_err().to_string()
        };
        assert!(stab("stability.q=2.6").contains("p-1+1/(n+1)"));
        assert!(stab("stability.p_list=[3.05, 3.4]").contains("descending"));
        assert!(msg("problem.p=1.5").contains("exceed 2"));
        assert!(msg("nonsense.key=1").contains("unknown field"));
        assert!(msg("grid.h").contains("key=value"));
    }

    #[test]
    fn trace_and_times() {
        let c = ExperimentConfig::from_sources(
            None,
            &["trace.atoms=[[-0.5, 0.25], [0.5, 0.75]]".into(), "solver.spacing=\"uniform\"".into()],
        )
        .unwrap();
        let t = c.trace().unwrap();
        assert!((t.total_mass() - 1.0).abs() < 1e-15);
        let times = c.output_times();
        assert_eq!(times.len(), 50);
        assert_eq!(times[0], 0.01);
        assert_eq!(*times.last().unwrap(), 1.0);
        let bad = ExperimentConfig::from_sources(None, &["trace.atoms=[[0.0, 0.0, 1.0]]".into()]).unwrap();
        assert!(bad.trace().is_err());
    }
}
