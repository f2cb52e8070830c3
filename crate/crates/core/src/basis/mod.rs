//! Hermite velocity bases, expansions and their moments.
//!
//! Two conventions coexist and are converted with [`state_scale`]:
//!
//! * the **orthonormal** basis `φ_α = ω^{[u,θ]}(c) He_α(ξ) / √α!`, `ξ = (c−u)/√θ`,
//!   with `ω` the Gaussian density of mean `u` and variance `θ`. It satisfies
//!   `∫ φ_0 dc = 1` and `∫ φ_i φ_j / ω dc = δ_ij`. Matching and distances are
//!   computed in this basis.
//! * the **derivative** basis `(−1)^α dᵅ/dcᵅ ω = θ^{−α/2} He_α(ξ) ω`, in which the
//!   HME variable vector `(ρ, u, θ, f_3, …)` is stored and in which the HME
//!   transport matrix takes its closed form.
//!
//! The HSM basis is the orthonormal basis frozen at `u = 0, θ = 1`.

mod quadrature;

pub use quadrature::{QuadratureRule, ORACLE_ORDER};

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Heat flux constant: `q = κ θ^{3/2} g_3` for the orthonormal coefficient `g_3`.
///
/// Frozen from quadrature of `∫ (c−u)³ φ_3 dc` (see tests).
pub const HEAT_FLUX_KAPPA: f64 = 2.449_489_742_783_178;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisParams {
    /// Mean velocity `u`.
    pub u: f64,
    /// Temperature `θ` (variance of the weight), must be positive.
    pub theta: f64,
}

impl BasisParams {
    pub fn new(u: f64, theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() || !u.is_finite() {
            return Err(Error::Domain(format!(
                "basis parameters require finite u and θ > 0, got u = {u}, θ = {theta}"
            )));
        }
        Ok(Self { u, theta })
    }

    /// Parameters of the fixed HSM basis.
    pub const fn equilibrium() -> Self {
        Self { u: 0.0, theta: 1.0 }
    }
}

/// Probabilists' Hermite polynomial `He_n(x)`.
pub fn hermite_he(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[k] = He_k(x) / √k!` for `k < out.len()`.
pub fn hermite_normalized_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
    }
}

fn hermite_normalized(n: usize, x: f64) -> f64 {
    let mut buf = vec![0.0; n + 1];
    hermite_normalized_into(x, &mut buf);
    buf[n]
}

/// Gaussian density `ω^{[u,θ]}(c)` with mean `u` and variance `θ`.
pub fn gaussian_weight(p: BasisParams, c: f64) -> f64 {
    let d = c - p.u;
    (-d * d / (2.0 * p.theta)).exp() / (2.0 * PI * p.theta).sqrt()
}

/// Orthonormal HME basis function `φ^{[u,θ]}_α(c)`.
pub fn eval_basis_hme(alpha: usize, p: BasisParams, c: f64) -> Result<f64> {
    let p = BasisParams::new(p.u, p.theta)?;
    let xi = (c - p.u) / p.theta.sqrt();
    Ok(gaussian_weight(p, c) * hermite_normalized(alpha, xi))
}

/// HSM basis function: the orthonormal basis at `u = 0, θ = 1`.
pub fn eval_basis_hsm(alpha: usize, c: f64) -> f64 {
    gaussian_weight(BasisParams::equilibrium(), c) * hermite_normalized(alpha, c)
}

/// Dual test polynomial `ψ_α(c) = He_α(c)/√α!` of the HSM basis.
pub fn dual_hsm(alpha: usize, c: f64) -> f64 {
    hermite_normalized(alpha, c)
}

/// Factor converting a derivative-basis coefficient into an orthonormal one:
/// `g_α = √α! · θ^{−α/2} · f_α`.
pub fn state_scale(alpha: usize, theta: f64) -> f64 {
    let mut s = 1.0;
    for k in 1..=alpha {
        s *= (k as f64 / theta).sqrt();
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTag {
    Hme,
    Hsm,
}

/// A truncated Hermite expansion of a distribution function.
///
/// For [`ModelTag::Hme`] the stored vector is the HME variable vector
/// `(ρ, u, θ, f_3, …, f_{M−1})` in the derivative basis, with `f_0 = ρ`,
/// `f_1 = f_2 = 0` implied. For [`ModelTag::Hsm`] it holds the raw orthonormal
/// coefficients `(f_0, …, f_{M−1})` at `u = 0, θ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    tag: ModelTag,
    vars: Vec<f64>,
}

impl HermiteExpansion {
    pub fn hme(vars: Vec<f64>) -> Result<Self> {
        if vars.len() < 4 {
            return Err(Error::Config(format!(
                "HME expansion needs at least 4 variables, got {}",
                vars.len()
            )));
        }
        check_macroscopic(vars[0], vars[2])?;
        Ok(Self {
            tag: ModelTag::Hme,
            vars,
        })
    }

    pub fn hsm(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 3 {
            return Err(Error::Config(format!(
                "HSM expansion needs at least 3 coefficients, got {}",
                coeffs.len()
            )));
        }
        let (rho, _, theta) = hsm_macroscopic(&coeffs);
        check_macroscopic(rho, theta)?;
        Ok(Self {
            tag: ModelTag::Hsm,
            vars: coeffs,
        })
    }

    pub fn new(tag: ModelTag, vars: Vec<f64>) -> Result<Self> {
        match tag {
            ModelTag::Hme => Self::hme(vars),
            ModelTag::Hsm => Self::hsm(vars),
        }
    }

    /// Builds an expansion from orthonormal coefficients in the basis `params`.
    ///
    /// For HME the first three coefficients are replaced by the consistency
    /// values `(ρ, 0, 0)` with `ρ = g_0`.
    pub fn from_orthonormal(tag: ModelTag, params: BasisParams, g: &[f64]) -> Result<Self> {
        match tag {
            ModelTag::Hme => {
                let mut vars = Vec::with_capacity(g.len());
                vars.extend([g[0], params.u, params.theta]);
                vars.extend(
                    g.iter()
                        .enumerate()
                        .skip(3)
                        .map(|(a, &ga)| ga / state_scale(a, params.theta)),
                );
                Self::hme(vars)
            }
            ModelTag::Hsm => Self::hsm(g.to_vec()),
        }
    }

    pub fn tag(&self) -> ModelTag {
        self.tag
    }

    pub fn vars(&self) -> &[f64] {
        &self.vars
    }

    pub fn into_vars(self) -> Vec<f64> {
        self.vars
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Basis the expansion is written in.
    pub fn params(&self) -> BasisParams {
        match self.tag {
            ModelTag::Hme => BasisParams {
                u: self.vars[1],
                theta: self.vars[2],
            },
            ModelTag::Hsm => BasisParams::equilibrium(),
        }
    }

    /// `(ρ, u, θ)`.
    pub fn macroscopic(&self) -> (f64, f64, f64) {
        match self.tag {
            ModelTag::Hme => (self.vars[0], self.vars[1], self.vars[2]),
            ModelTag::Hsm => hsm_macroscopic(&self.vars),
        }
    }

    /// Coefficients with respect to the orthonormal basis at [`Self::params`].
    pub fn orthonormal_coefficients(&self) -> Vec<f64> {
        match self.tag {
            ModelTag::Hme => {
                let theta = self.vars[2];
                let mut g = self.vars.clone();
                g[1] = 0.0;
                g[2] = 0.0;
                for (a, ga) in g.iter_mut().enumerate().skip(3) {
                    *ga *= state_scale(a, theta);
                }
                g
            }
            ModelTag::Hsm => self.vars.clone(),
        }
    }

    /// Pointwise value `f(c)`.
    pub fn eval(&self, c: f64) -> f64 {
        let p = self.params();
        let g = self.orthonormal_coefficients();
        let mut h = vec![0.0; g.len()];
        hermite_normalized_into((c - p.u) / p.theta.sqrt(), &mut h);
        gaussian_weight(p, c) * g.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>()
    }
}

fn check_macroscopic(rho: f64, theta: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::state(
            None,
            format!("density must be positive, got {rho}"),
        ));
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::state(
            None,
            format!("temperature must be positive, got {theta}"),
        ));
    }
    Ok(())
}

/// Inverts the HSM consistency constraints: `(ρ, u, θ)` from `f_0, f_1, f_2`.
pub fn hsm_macroscopic(f: &[f64]) -> (f64, f64, f64) {
    let rho = f[0];
    let u = f[1] / f[0];
    let theta = 1.0 + std::f64::consts::SQRT_2 * f[2] / f[0] - u * u;
    (rho, u, theta)
}

/// Density, momentum, `ρθ` and heat flux `q = ∫ f (c−u)³ dc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub density: f64,
    pub momentum: f64,
    pub energy: f64,
    pub heat_flux: f64,
}

pub fn moments_of(e: &HermiteExpansion) -> Moments {
    match e.tag() {
        ModelTag::Hme => {
            let v = e.vars();
            let (rho, u, theta) = (v[0], v[1], v[2]);
            let g3 = v[3] * state_scale(3, theta);
            Moments {
                density: rho,
                momentum: rho * u,
                energy: rho * theta,
                heat_flux: HEAT_FLUX_KAPPA * theta.powf(1.5) * g3,
            }
        }
        ModelTag::Hsm => {
            let f = e.vars();
            let g = |k: usize| f.get(k).copied().unwrap_or(0.0);
            // raw moments ∫ c^k f dc from c = h_1, c² = √2 h_2 + 1, c³ = √6 h_3 + 3 h_1
            let m0 = g(0);
            let m1 = g(1);
            let m2 = std::f64::consts::SQRT_2 * g(2) + g(0);
            let m3 = 6.0_f64.sqrt() * g(3) + 3.0 * g(1);
            let u = m1 / m0;
            Moments {
                density: m0,
                momentum: m1,
                energy: m2 - m1 * u,
                heat_flux: m3 - 3.0 * u * m2 + 3.0 * u * u * m1 - u * u * u * m0,
            }
        }
    }
}

/// Coefficients of the Maxwellian `f_M(ρ, u, θ)` in the fixed HSM basis.
///
/// Uses `m_{α+1} = (u m_α + √α (θ−1) m_{α−1}) / √(α+1)`, `m_0 = ρ`.
pub fn maxwellian_coefficients(rho: f64, u: f64, theta: f64, m: usize) -> Result<Vec<f64>> {
    check_macroscopic(rho, theta)?;
    let mut out = vec![0.0; m];
    if m == 0 {
        return Ok(out);
    }
    out[0] = rho;
    if m > 1 {
        out[1] = u * rho;
    }
    for a in 1..m.saturating_sub(1) {
        let af = a as f64;
        out[a + 1] = (u * out[a] + af.sqrt() * (theta - 1.0) * out[a - 1]) / (af + 1.0).sqrt();
    }
    Ok(out)
}

/// `∫ (Σ_i a_i φ^{pa}_i)(Σ_j b_j φ^{pb}_j) / ω^{pw} dc`, by quadrature.
///
/// The three Gaussians combine into a single one with precision
/// `τ = 1/θa + 1/θb − 1/θw`; the remaining integrand is a polynomial, so the
/// oracle rule is exact. `τ ≤ 0` means the integral diverges.
fn weighted_cross_term(
    pa: BasisParams,
    a: &[f64],
    pb: BasisParams,
    b: &[f64],
    pw: BasisParams,
) -> Result<f64> {
    let tau = 1.0 / pa.theta + 1.0 / pb.theta - 1.0 / pw.theta;
    if !(tau > 0.0) {
        return Err(Error::Numeric(format!(
            "weighted L2 integral diverges: 1/θa + 1/θb − 1/θw = {tau:.3e} ≤ 0 \
             (θa = {}, θb = {}, θw = {})",
            pa.theta, pb.theta, pw.theta
        )));
    }
    let center = (pa.u / pa.theta + pb.u / pb.theta - pw.u / pw.theta) / tau;
    let log_k = log_gauss(pa, center) + log_gauss(pb, center) - log_gauss(pw, center);
    let norm = (2.0 * PI / tau).sqrt() * log_k.exp();
    let poly = |c: f64| {
        let mut ha = vec![0.0; a.len()];
        let mut hb = vec![0.0; b.len()];
        hermite_normalized_into((c - pa.u) / pa.theta.sqrt(), &mut ha);
        hermite_normalized_into((c - pb.u) / pb.theta.sqrt(), &mut hb);
        let sa: f64 = a.iter().zip(&ha).map(|(x, y)| x * y).sum();
        let sb: f64 = b.iter().zip(&hb).map(|(x, y)| x * y).sum();
        sa * sb
    };
    let val = norm * QuadratureRule::oracle().expect_normal(center, 1.0 / tau, poly);
    if !val.is_finite() {
        return Err(Error::Numeric("weighted L2 integral is not finite".into()));
    }
    Ok(val)
}

fn log_gauss(p: BasisParams, c: f64) -> f64 {
    let d = c - p.u;
    -d * d / (2.0 * p.theta) - 0.5 * (2.0 * PI * p.theta).ln()
}

/// Weighted L² distance `∫ (a − b)² / ω^{[u,θ]} dc` between two expansions.
pub fn weighted_l2_distance(
    a: &HermiteExpansion,
    b: &HermiteExpansion,
    weight: BasisParams,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "expansions differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let weight = BasisParams::new(weight.u, weight.theta)?;
    let (pa, pb) = (a.params(), b.params());
    let (ga, gb) = (a.orthonormal_coefficients(), b.orthonormal_coefficients());
    if pa == pb {
        let d: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| x - y).collect();
        return weighted_cross_term(pa, &d, pa, &d, weight);
    }
    let aa = weighted_cross_term(pa, &ga, pa, &ga, weight)?;
    let ab = weighted_cross_term(pa, &ga, pb, &gb, weight)?;
    let bb = weighted_cross_term(pb, &gb, pb, &gb, weight)?;
    Ok(aa - 2.0 * ab + bb)
}
