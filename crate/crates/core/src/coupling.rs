//! Restriction and matching between micro expansions and macro moments.
//!
//! Matching minimizes the weighted L² distance `∫ (f − f*)² / ω⁺ dc` between
//! the new expansion `f` (basis `(u⁺, θ⁺)`, first moments prescribed) and the
//! prior `f*` (basis `(u*, θ*)`). In the orthonormal basis the normal
//! equations involve the Gram matrices
//!
//! ```text
//! A_ij = ∫ φ⁺_i φ⁺_j / ω⁺ dc = δ_ij,     B_kj = ∫ φ*_k φ⁺_j / ω⁺ dc,
//! ```
//!
//! and the prior re-expanded in the new basis has coefficients `f̃ = Bᵀ g*`.

use nalgebra::{DMatrix, DVector};

use crate::basis::{
    hermite_normalized_into, hsm_macroscopic, state_scale, BasisParams, HermiteExpansion, ModelTag,
    QuadratureRule,
};
use crate::error::{Error, Result};

/// First `l` macro quantities of a micro expansion.
///
/// HME: the first `l` variables `(ρ, u, θ, f_3, …)`. HSM: `(ρ, u, θ)` for
/// `l = 3`, otherwise the raw leading coefficients.
pub fn restrict(micro: &HermiteExpansion, l: usize) -> Result<Vec<f64>> {
    let m = micro.len();
    if !(3..=m).contains(&l) {
        return Err(Error::Config(format!(
            "restriction needs 3 ≤ L ≤ M = {m}, got L = {l}"
        )));
    }
    Ok(match micro.tag() {
        ModelTag::Hsm if l == 3 => {
            let (rho, u, theta) = hsm_macroscopic(micro.vars());
            vec![rho, u, theta]
        }
        _ => micro.vars()[..l].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingOperator {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    new: BasisParams,
    prior: BasisParams,
}

/// Gram matrices for matching a prior in basis `(u*, θ*)` onto `(u⁺, θ⁺)`.
///
/// `B` comes from Hermite connection coefficients: with `a = √(θ*/θ⁺)`,
/// `b = (u* − u⁺)/√θ⁺` and `G_0 = 1, G_1 = b,
/// G_{m+1} = b G_m − m (1 − a²) G_{m−1}`,
/// `B_kj = C(j,k) a^k G_{j−k} √(k!/j!)` for `k ≤ j` and zero below the diagonal.
///
/// The prior has finite weighted norm only if `θ* < 2θ⁺`.
pub fn build_matching_operator(
    u_new: f64,
    theta_new: f64,
    u_prior: f64,
    theta_prior: f64,
    m: usize,
) -> Result<MatchingOperator> {
    let new = BasisParams::new(u_new, theta_new)?;
    let prior = BasisParams::new(u_prior, theta_prior)?;
    check_weight_ratio(new, prior)?;
    let conn = Connection::new(new, prior, m);
    let mut bm = DMatrix::zeros(m, m);
    for j in 0..m {
        conn.column(j, |k, v| bm[(k, j)] = v);
    }
    Ok(MatchingOperator {
        a: DMatrix::identity(m, m),
        b: bm,
        new,
        prior,
    })
}

/// Tables for the columns of `B`, in one buffer: `G_0..G_{n−1}`, `a^k`,
/// `√k` and `1/k`.
struct Connection {
    n: usize,
    buf: Vec<f64>,
}

impl Connection {
    fn new(new: BasisParams, prior: BasisParams, m: usize) -> Self {
        let a = (prior.theta / new.theta).sqrt();
        let b = (prior.u - new.u) / new.theta.sqrt();
        let n = m.max(2);
        let mut buf = vec![0.0; 4 * n + 2];
        let (g, rest) = buf.split_at_mut(n);
        let (a_pow, rest) = rest.split_at_mut(n);
        let (sqrt, recip) = rest.split_at_mut(n + 1);
        g[0] = 1.0;
        g[1] = b;
        for k in 1..n - 1 {
            g[k + 1] = b * g[k] - k as f64 * (1.0 - a * a) * g[k - 1];
        }
        a_pow[0] = 1.0;
        for k in 1..n {
            a_pow[k] = a_pow[k - 1] * a;
        }
        for k in 0..=n {
            sqrt[k] = (k as f64).sqrt();
            recip[k] = 1.0 / k as f64;
        }
        Self { n, buf }
    }

    /// Calls `emit(k, B_kj)` for `k = j, j−1, …, 0`.
    fn column(&self, j: usize, mut emit: impl FnMut(usize, f64)) {
        let n = self.n;
        let (g, a_pow) = (&self.buf[..n], &self.buf[n..2 * n]);
        let (sqrt, recip) = (&self.buf[2 * n..3 * n + 1], &self.buf[3 * n + 1..]);
        // c = C(j,k) √(k!/j!) = √(j!/k!) / (j−k)!, built down from k = j
        let mut c = 1.0;
        for k in (0..=j).rev() {
            emit(k, c * a_pow[k] * g[j - k]);
            c *= sqrt[k] * recip[j - k + 1];
        }
    }
}

fn check_weight_ratio(new: BasisParams, prior: BasisParams) -> Result<()> {
    if prior.theta < 2.0 * new.theta {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "weighted L² matching requires θ* < 2θ⁺ for a finite prior norm, \
             got θ* = {}, θ⁺ = {}",
            prior.theta, new.theta
        )))
    }
}

impl MatchingOperator {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn new_params(&self) -> BasisParams {
        self.new
    }

    pub fn prior_params(&self) -> BasisParams {
        self.prior
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// `A⁻¹B` by LU solve.
    pub fn a_inv_b(&self) -> Result<DMatrix<f64>> {
        self.a
            .clone()
            .lu()
            .solve(&self.b)
            .ok_or_else(|| Error::Numeric("singular Gram matrix A".into()))
    }

    /// Orthonormal coefficients of the prior in the new basis, `f̃ = Bᵀ g*`.
    pub fn transform(&self, g_prior: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|j| (0..=j).map(|k| self.b[(k, j)] * g_prior[k]).sum())
            .collect()
    }

    /// Minimizes the weighted distance to the prior with slots `0..fixed.len()`
    /// prescribed (orthonormal coefficients); returns all `M` coefficients.
    pub fn solve_free(&self, g_prior: &[f64], fixed: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        let l = fixed.len();
        let target = self.transform(g_prior);
        let mut out = fixed.to_vec();
        if l == m {
            return Ok(out);
        }
        let free = m - l;
        let rhs = DVector::from_fn(free, |i, _| {
            let row = l + i;
            target[row] - (0..l).map(|j| self.a[(row, j)] * fixed[j]).sum::<f64>()
        });
        let block = self.a.view((l, l), (free, free)).into_owned();
        let sol = block
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numeric("singular Gram block".into()))?;
        out.extend(sol.iter());
        Ok(out)
    }
}

/// Matching with the three macro quantities `(ρ⁺, u⁺, θ⁺)` prescribed.
pub fn match_l2(prior: &HermiteExpansion, macro_new: (f64, f64, f64)) -> Result<HermiteExpansion> {
    let (rho, u, theta) = macro_new;
    match_head(prior, &[rho, u, theta])
}

/// Inverse of [`restrict`]: an expansion whose restriction to `head.len()`
/// moments equals `head`, closest to `prior` in the weighted L² sense.
///
/// HME solves the normal equations for the free slots in the new basis. HSM
/// keeps the unconstrained coefficients of the prior.
pub fn match_head(prior: &HermiteExpansion, head: &[f64]) -> Result<HermiteExpansion> {
    let m = prior.len();
    let l = head.len();
    if !(3..=m).contains(&l) {
        return Err(Error::Config(format!(
            "matching needs 3 ≤ L ≤ M = {m} prescribed moments, got {l}"
        )));
    }
    if l == m {
        return HermiteExpansion::new(prior.tag(), head.to_vec());
    }
    match prior.tag() {
        ModelTag::Hsm => {
            let mut f = prior.vars().to_vec();
            if l == 3 {
                let (rho, u, theta) = (head[0], head[1], head[2]);
                f[0] = rho;
                f[1] = rho * u;
                f[2] = (rho * theta + rho * u * u - rho) / std::f64::consts::SQRT_2;
            } else {
                f[..l].copy_from_slice(head);
            }
            HermiteExpansion::hsm(f)
        }
        ModelTag::Hme => {
            let (u, theta) = (head[1], head[2]);
            let p = prior.params();
            if p.u == u && p.theta == theta {
                // identical bases: the minimizer keeps the prior coefficients
                let mut vars = prior.vars().to_vec();
                vars[..l].copy_from_slice(head);
                return HermiteExpansion::hme(vars);
            }
            let new = BasisParams::new(u, theta)?;
            check_weight_ratio(new, p)?;
            // A is the identity in the orthonormal basis, so the free block of
            // the normal equations is the re-expanded prior f̃_j = Σ_k B_kj g*_k
            let g_prior = prior.orthonormal_coefficients();
            let conn = Connection::new(new, p, m);
            let mut vars = head.to_vec();
            vars.extend((l..m).map(|j| {
                let mut acc = 0.0;
                conn.column(j, |k, b| acc += b * g_prior[k]);
                acc / state_scale(j, theta)
            }));
            HermiteExpansion::hme(vars)
        }
    }
}

/// Orthonormal coefficients in basis `to` of the truncated re-expansion of
/// `prior`, by an `M`-point Gauss–Hermite rule.
///
/// The integrand `P*(ξ*) He_j(ξ_to)` has degree `≤ 2M − 2`, so the rule is exact;
/// this route is independent of the connection coefficients in `B`.
pub fn basis_transform(prior: &HermiteExpansion, to: BasisParams) -> Result<Vec<f64>> {
    let to = BasisParams::new(to.u, to.theta)?;
    let p = prior.params();
    check_weight_ratio(to, p)?;
    let m = prior.len();
    let g = prior.orthonormal_coefficients();
    if p == to {
        return Ok(g);
    }
    let rule = QuadratureRule::gauss_hermite(m);
    let (mut hp, mut hn) = (vec![0.0; m], vec![0.0; m]);
    let mut out = vec![0.0; m];
    let s = (2.0 * p.theta).sqrt();
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let c = p.u + s * x;
        hermite_normalized_into((c - p.u) / p.theta.sqrt(), &mut hp);
        hermite_normalized_into((c - to.u) / to.theta.sqrt(), &mut hn);
        let val: f64 = g.iter().zip(&hp).map(|(a, b)| a * b).sum();
        for (o, h) in out.iter_mut().zip(&hn) {
            *o += w * inv_sqrt_pi * val * h;
        }
    }
    Ok(out)
}

/// Projective step `w_K + (Δt − Kδt)(w_K − w_{K−1})/δt`.
pub fn pi_extrapolate(
    w_k: &[f64],
    w_km1: &[f64],
    dt_micro: f64,
    dt_macro: f64,
    k: usize,
) -> Result<Vec<f64>> {
    if !(dt_micro > 0.0) {
        return Err(Error::Config(format!(
            "micro step must be positive, got {dt_micro}"
        )));
    }
    let span = dt_macro - k as f64 * dt_micro;
    // tolerate rounding when Δt is computed as exactly Kδt
    if span < -1e-12 * dt_macro.abs().max(dt_micro) {
        return Err(Error::Config(format!(
            "projective step needs Δt ≥ Kδt, got Δt = {dt_macro}, K = {k}, δt = {dt_micro}"
        )));
    }
    let span = span.max(0.0);
    Ok(w_k
        .iter()
        .zip(w_km1)
        .map(|(a, b)| a + span * (a - b) / dt_micro)
        .collect())
}
