//! Browser bindings: closed-form profiles, solver profiles and stability
//! distances for a single static page.

use pparabolic::analysis::{geometric_times, sobolev_distance_parts, Window};
use pparabolic::exact::BarenblattSpec;
use pparabolic::grid::{sample_exact, sample_exact_trajectory, Grid, InitialTrace};
use pparabolic::solver::{solve, SolverConfig};
use pparabolic::{derive_exponents, Exponents};
use wasm_bindgen::prelude::*;

/// Half-width of the demo domain `[-4, 4]`.
pub const HALF_WIDTH: f64 = 4.0;
/// Mollification radius of the unit atom.
pub const DELTA: f64 = 0.05;
/// Finest grid offered by the page; keeps a solve under a second.
pub const MIN_H: f64 = 1.0 / 256.0;

fn exps(p: f64) -> Result<Exponents, String> {
    if !(p > 2.0 && p <= 8.0) {
        return Err(format!("p = {p} must lie in (2, 8]"));
    }
    derive_exponents(p, 1).map_err(|e| e.to_string())
}

fn grid(h: f64) -> Result<Grid, String> {
    if !(MIN_H..=1.0 / 16.0).contains(&h) {
        return Err(format!("h = {h} must lie in [1/256, 1/16]"));
    }
    Grid::centered(1, h, HALF_WIDTH).map_err(|e| e.to_string())
}

/// Node values of the unit-mass line Barenblatt solution at time `t`.
pub fn barenblatt_profile(p: f64, t: f64, h: f64) -> Result<Vec<f64>, String> {
    if !(t > 0.0 && t <= 10.0) {
        return Err(format!("t = {t} must lie in (0, 10]"));
    }
    let spec = BarenblattSpec::unit(exps(p)?).map_err(|e| e.to_string())?;
    let f = sample_exact(&spec, &grid(h)?, t).map_err(|e| e.to_string())?;
    Ok(f.values)
}

/// Node values of the solver run from a unit atom at time `t`.
pub fn solver_profile(p: f64, t: f64, h: f64) -> Result<Vec<f64>, String> {
    if !(t > 0.0 && t <= 2.0) {
        return Err(format!("t = {t} must lie in (0, 2]"));
    }
    let e = exps(p)?;
    let g = grid(h)?;
    let cfg = SolverConfig::new(e, t, vec![t]).map_err(|e| e.to_string())?;
    let trace = InitialTrace::atom(1, [0.0; 2], 1.0).map_err(|e| e.to_string())?;
    let traj = solve(&trace, &g, DELTA, &cfg).map_err(|e| e.to_string())?;
    Ok(traj.last().map(|f| f.values.clone()).unwrap_or_default())
}

/// Node coordinates matching the profiles for grid step `h`.
pub fn nodes(h: f64) -> Result<Vec<f64>, String> {
    let g = grid(h)?;
    Ok((0..g.len()).map(|k| g.node(k)[0]).collect())
}

/// `W^{1,2}` distances over `(-3, 3) x (0.01, 1)` from `B_{p_i}` to `B_p`,
/// from closed forms sampled on a `1/128` grid at 200 geometric times.
pub fn stability_distances(p: f64, p_list: &[f64]) -> Result<Vec<f64>, String> {
    let g = grid(1.0 / 128.0)?;
    let times = geometric_times(0.01, 1.0, 200);
    let w = Window::centered(1, 3.0, 0.01, 1.0).map_err(|e| e.to_string())?;
    let sampled = |p: f64| {
        let spec = BarenblattSpec::unit(exps(p)?).map_err(|e| e.to_string())?;
        sample_exact_trajectory(&spec, &g, &times).map_err(|e| e.to_string())
    };
    let target = sampled(p)?;
    p_list
        .iter()
        .map(|&pi| {
            let d = sobolev_distance_parts(&sampled(pi)?, &target, 2.0, &w).map_err(|e| e.to_string())?;
            Ok(d.sobolev())
        })
        .collect()
}

/// `[lambda, alpha, gamma, q_u_max, q_grad_max]` on the line.
pub fn exponent_summary(p: f64) -> Result<Vec<f64>, String> {
    let e = exps(p)?;
    Ok(vec![e.lambda, e.alpha, e.gamma, e.q_u_max, e.q_grad_max])
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsError> {
    r.map_err(|m| JsError::new(&m))
}

#[wasm_bindgen(js_name = barenblattProfile)]
pub fn barenblatt_profile_js(p: f64, t: f64, h: f64) -> Result<Vec<f64>, JsError> {
    js(barenblatt_profile(p, t, h))
}

#[wasm_bindgen(js_name = solverProfile)]
pub fn solver_profile_js(p: f64, t: f64, h: f64) -> Result<Vec<f64>, JsError> {
    js(solver_profile(p, t, h))
}

#[wasm_bindgen(js_name = gridNodes)]
pub fn nodes_js(h: f64) -> Result<Vec<f64>, JsError> {
    js(nodes(h))
}

#[wasm_bindgen(js_name = stabilityDistances)]
pub fn stability_distances_js(p: f64, p_list: Vec<f64>) -> Result<Vec<f64>, JsError> {
    js(stability_distances(p, &p_list))
}

#[wasm_bindgen(js_name = exponentSummary)]
pub fn exponent_summary_js(p: f64) -> Result<Vec<f64>, JsError> {
    js(exponent_summary(p))
}
