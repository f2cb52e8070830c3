//! Gauss–Hermite quadrature on the real line.
//!
//! The rule is the classical one for the weight `exp(-x²)`. Helpers map it onto
//! arbitrary Gaussians so that velocity-space integrals of "polynomial times
//! Gaussian" integrands are exact up to rounding.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Number of nodes used by the oracle rule.
pub const ORACLE_ORDER: usize = 60;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// `n`-point Gauss–Hermite rule for `∫ f(x) exp(-x²) dx`, exact for
    /// polynomials of degree `≤ 2n − 1`.
    ///
    /// Roots are found by Newton iteration on the orthonormal Hermite
    /// recurrence, which keeps the small tail weights relatively accurate.
    pub fn gauss_hermite(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be positive");
        let nf = n as f64;
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut z = 0.0_f64;
        for i in 0..n.div_ceil(2) {
            // initial guesses for the i-th largest root
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 1.0;
            for _ in 0..200 {
                let (p1, p2) = orthonormal_pair(n, z, pim4);
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, p2) = orthonormal_pair(n, z, pim4);
            pp = if p2 != 0.0 {
                (2.0 * nf).sqrt() * p2
            } else {
                pp
            };
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            // odd rules have a root at the origin by symmetry
            x[n / 2] = 0.0;
        }
        x.reverse();
        w.reverse();
        Self {
            nodes: x,
            weights: w,
        }
    }

    /// Shared 60-point rule used as ground truth throughout the crate.
    pub fn oracle() -> &'static QuadratureRule {
        static RULE: OnceLock<QuadratureRule> = OnceLock::new();
        RULE.get_or_init(|| QuadratureRule::gauss_hermite(ORACLE_ORDER))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ f(x) exp(-x²) dx`.
    pub fn integrate_weighted(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Expectation `E[f(c)]` for `c ~ N(mean, var)`.
    pub fn expect_normal(&self, mean: f64, var: f64, f: impl Fn(f64) -> f64) -> f64 {
        let s = (2.0 * var).sqrt();
        let inv_sqrt_pi = 1.0 / PI.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * inv_sqrt_pi * f(mean + s * x))
            .sum()
    }

    /// `∫ f(c) dc` over the real line, sampling around a Gaussian centred at
    /// `center` with standard deviation `scale`. Exact when `f` is a
    /// polynomial times exactly that Gaussian.
    pub fn integrate_line(&self, center: f64, scale: f64, f: impl Fn(f64) -> f64) -> f64 {
        let s = std::f64::consts::SQRT_2 * scale;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * (x * x).exp() * s * f(center + s * x))
            .sum()
    }
}

/// Orthonormal Hermite values `(p_n(z), p_{n-1}(z))` for the weight `exp(-x²)`.
fn orthonormal_pair(n: usize, z: f64, p0: f64) -> (f64, f64) {
    let mut p1 = p0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}
