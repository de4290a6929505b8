//! Exponents and integrability thresholds derived from `(p, n)`.
//!
//! Every power used elsewhere in the crate comes from [`Exponents`]; other
//! modules never recompute them.

use crate::error::{Error, Result};

/// All derived exponents of the p-parabolic equation in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub p: f64,
    pub n: usize,
    /// `n(p-2) + p`
    pub lambda: f64,
    /// `n / lambda`, the time decay rate of the sup norm.
    pub alpha: f64,
    /// `p / lambda`, the mass power in the sup-norm bound.
    pub sigma: f64,
    /// Dead-zone recession exponent.
    pub gamma: f64,
    /// Parabolic Sobolev exponent `(n+2)/n`.
    pub kappa: f64,
    /// Solutions lie in `L^q` in space-time for `q` below this value.
    pub q_u_max: f64,
    /// Gradients lie in `L^q` in space-time for `q` below this value.
    pub q_grad_max: f64,
}

impl Exponents {
    pub fn new(p: f64, n: usize) -> Result<Self> {
        if !p.is_finite() || p <= 2.0 {
            return Err(Error::InvalidParameter(format!(
                "p = {p} must satisfy p > 2 (degenerate regime)"
            )));
        }
        if n != 1 && n != 2 {
            return Err(Error::InvalidParameter(format!(
                "dimension n = {n} unsupported; expected 1 or 2"
            )));
        }
        let nf = n as f64;
        let lambda = nf * (p - 2.0) + p;
        Ok(Self {
            p,
            n,
            lambda,
            alpha: nf / lambda,
            sigma: p / lambda,
            gamma: (1.0 - nf * (p - 2.0) / lambda) / p,
            kappa: (nf + 2.0) / nf,
            q_u_max: p - 1.0 + p / nf,
            q_grad_max: p - 1.0 + 1.0 / (nf + 1.0),
        })
    }

    /// `gamma` recomputed through `1/p - alpha (p-2)/p`.
    pub fn gamma_via_alpha(&self) -> f64 {
        1.0 / self.p - self.alpha * (self.p - 2.0) / self.p
    }

    /// Exponent of the Barenblatt bracket, `(p-1)/(p-2)`.
    pub fn profile_power(&self) -> f64 {
        (self.p - 1.0) / (self.p - 2.0)
    }

    /// Power of the radius inside the Barenblatt bracket, `p/(p-1)`.
    pub fn radial_power(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Level-set decay exponent `1 - p - p/n`.
    pub fn level_set_slope(&self) -> f64 {
        1.0 - self.p - self.p / self.n as f64
    }
}

pub fn derive_exponents(p: f64, n: usize) -> Result<Exponents> {
    Exponents::new(p, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn p3_n1() {
        let e = derive_exponents(3.0, 1).unwrap();
        assert_eq!(e.lambda, 4.0);
        assert_eq!(e.alpha, 0.25);
        assert_eq!(e.sigma, 0.75);
        assert_eq!(e.gamma, 0.25);
        assert_eq!(e.kappa, 3.0);
        assert_eq!(e.q_u_max, 5.0);
        assert_eq!(e.q_grad_max, 2.5);
    }

    #[test]
    fn p4_n2() {
        let e = derive_exponents(4.0, 2).unwrap();
        assert_eq!(e.lambda, 8.0);
        assert_eq!(e.alpha, 0.25);
        assert_eq!(e.sigma, 0.5);
        assert_eq!(e.kappa, 2.0);
        assert_eq!(e.q_u_max, 5.0);
        assert_relative_eq!(e.q_grad_max, 10.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_p2_and_bad_dim() {
        assert!(derive_exponents(2.0, 1).is_err());
        assert!(derive_exponents(1.5, 1).is_err());
        assert!(derive_exponents(f64::NAN, 1).is_err());
        assert!(derive_exponents(3.0, 3).is_err());
        assert!(derive_exponents(3.0, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn invariants_hold(p in 2.0f64..10.0, n in 1usize..=2) {
            prop_assume!(p > 2.0);
            let e = derive_exponents(p, n).unwrap();
            prop_assert!(e.lambda > 0.0);
            prop_assert!(e.alpha > 0.0 && e.alpha < 1.0);
            prop_assert!(e.sigma > 0.0 && e.sigma < 1.0);
            prop_assert!(e.gamma > 0.0);
            prop_assert!(e.kappa > 1.0);
            prop_assert!(e.q_grad_max < e.q_u_max);
            prop_assert!((e.gamma - e.gamma_via_alpha()).abs() <= 1e-12);
        }

        #[test]
        fn lambda_is_lipschitz_in_p(p in 2.001f64..9.9, h in 0.0f64..0.1, n in 1usize..=2) {
            let a = derive_exponents(p, n).unwrap();
            let b = derive_exponents(p + h, n).unwrap();
            prop_assert!((b.lambda - a.lambda).abs() <= (n as f64 + 1.0) * h + 1e-12);
        }
    }
}
