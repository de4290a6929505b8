//! The two elementary inequalities used in the stability argument, with
//! randomized drivers.
//!
//! Both sides can reach `1e24` for the sampled ranges, so the slack is
//! `1e-12 * max(1, |rhs|)` rather than a bare absolute `1e-12`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SLACK: f64 = 1e-12;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + SLACK * rhs.abs().max(1.0)
}

/// `||z|^a - |z|^b| <= (|z|^{max(a,b)+g} / g + (1/a + 1/b) / e) |a - b|`.
pub fn power_diff_bound_check(zeta: &[f64], a: f64, b: f64, gamma_pen: f64) -> bool {
    let z = norm(zeta);
    let lhs = (z.powf(a) - z.powf(b)).abs();
    let rhs = (z.powf(a.max(b) + gamma_pen) / gamma_pen
        + (1.0 / a + 1.0 / b) / std::f64::consts::E)
        * (a - b).abs();
    holds(lhs, rhs)
}

/// `2^{2-p} |a-b|^p <= (|a|^{p-2} a - |b|^{p-2} b) . (a - b)`.
pub fn monotonicity_gap_check(a: &[f64], b: &[f64], p: f64) -> bool {
    let (na, nb) = (norm(a), norm(b));
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let lhs = 2f64.powf(2.0 - p) * norm(&diff).powf(p);
    let (sa, sb) = (na.powf(p - 2.0), nb.powf(p - 2.0));
    let rhs: f64 = a
        .iter()
        .zip(b)
        .zip(&diff)
        .map(|((x, y), d)| (sa * x - sb * y) * d)
        .sum();
    holds(lhs, rhs)
}

/// Outcome of a randomized run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrawSummary {
    pub draws: usize,
    pub violations: usize,
}

impl DrawSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> [f64; 2] {
    if n == 1 {
        return [if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0];
    }
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    [th.cos(), th.sin()]
}

/// `|zeta|` log-uniform in `[1e-3, 1e3)`, `a, b` in `(0.1, 8)`, `gamma` in `(0.05, 2)`.
pub fn power_diff_draws(seed: u64, count: usize, n: usize) -> DrawSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..count {
        let mag = 10f64.powf(rng.gen_range(-3.0..3.0));
        let d = unit_direction(&mut rng, n);
        let zeta = [mag * d[0], mag * d[1]];
        let a = rng.gen_range(0.1..8.0);
        let b = rng.gen_range(0.1..8.0);
        let g = rng.gen_range(0.05..2.0);
        if !power_diff_bound_check(&zeta[..n], a, b, g) {
            violations += 1;
        }
    }
    DrawSummary { draws: count, violations }
}

/// Pairs in the plane with components in `(-10, 10)`, `p` in `(2, 6)`.
pub fn monotonicity_draws(seed: u64, count: usize) -> DrawSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..count {
        let a = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let b = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let p = rng.gen_range(2.0..6.0);
        if !monotonicity_gap_check(&a, &b, p) {
            violations += 1;
        }
    }
    DrawSummary { draws: count, violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases() {
        assert!(power_diff_bound_check(&[3.0, 4.0], 2.0, 2.0, 0.5));
        assert!(power_diff_bound_check(&[0.6, 0.8], 1.0, 7.0, 0.5));
        assert!(monotonicity_gap_check(&[1.0, 2.0], &[1.0, 2.0], 3.0));
        assert!(monotonicity_gap_check(&[1.0, -2.0], &[0.0, 0.0], 4.5));
        // Equality case b = -a.
        assert!(monotonicity_gap_check(&[1.5, -0.5], &[-1.5, 0.5], 3.7));
    }

    #[test]
    fn detects_violations() {
        // Below p = 2 the constant 2^{2-p} exceeds 1 and the bound fails.
        assert!(!monotonicity_gap_check(&[1.0, 0.0], &[1e-4, 0.0], 1.5));
        assert!(!power_diff_bound_check(&[2.0], 1.0, 3.0, -0.5));
    }

    #[test]
    fn randomized_runs_pass() {
        assert!(power_diff_draws(7, 20_000, 2).passed());
        assert!(power_diff_draws(8, 20_000, 1).passed());
        assert!(monotonicity_draws(9, 20_000).passed());
        assert_eq!(monotonicity_draws(1, 0).draws, 0);
    }
}
