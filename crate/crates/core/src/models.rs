//! Quasi-linear moment systems `∂_t w + A(w) ∂_x w = −S(w)/ε`.
//!
//! HME works on the variable vector `(ρ, u, θ, f_3, …)` of
//! [`crate::basis::HermiteExpansion`], HSM on raw coefficients in the fixed
//! basis, and Euler on primitive `(ρ, u, θ)`.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::basis::{hsm_macroscopic, maxwellian_coefficients, QuadratureRule};
use crate::error::{Error, Result};

/// A system `∂_t w + A(w) ∂_x w = 0` that the finite-volume grid can advance.
pub trait QuasiLinearSystem: Sync {
    /// Length of the per-cell state vector.
    fn dim(&self) -> usize;

    /// `out = A(w) v`.
    fn apply(&self, w: &[f64], v: &[f64], out: &mut [f64]);

    /// Upper bound on `|λ|` over the spectrum of `A(w)`.
    fn max_speed(&self, w: &[f64]) -> f64;

    /// Rejects states outside the admissible set.
    fn validate(&self, w: &[f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Hme(usize),
    Hsm(usize),
    Euler,
}

/// Time integrator for the relaxation source over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceIntegrator {
    /// `w ← w + dt·S(w)`.
    ForwardEuler,
    /// Exact solution of `dw/dt = S(w)`; the relaxation is linear once the
    /// conserved moments are fixed.
    Exact,
}

impl ModelKind {
    pub fn check(self) -> Result<Self> {
        match self {
            ModelKind::Hme(m) if m < 4 => Err(Error::Config(format!(
                "HME needs at least 4 moments, got {m}"
            ))),
            ModelKind::Hsm(m) if m < 3 => Err(Error::Config(format!(
                "HSM needs at least 3 moments, got {m}"
            ))),
            k => Ok(k),
        }
    }

    /// `(ρ, u, θ)` of a state vector.
    pub fn macroscopic(self, w: &[f64]) -> (f64, f64, f64) {
        match self {
            ModelKind::Hme(_) | ModelKind::Euler => (w[0], w[1], w[2]),
            ModelKind::Hsm(_) => hsm_macroscopic(w),
        }
    }

    /// Dense `A(w)`.
    pub fn system_matrix(self, w: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            ModelKind::Hme(_) => hme_system_matrix(w),
            ModelKind::Hsm(m) => Ok(hsm_system_matrix(m)),
            ModelKind::Euler => euler_system_matrix(w),
        }
    }

    /// `−S(w)/ε`.
    pub fn source(self, w: &[f64], eps: f64) -> Result<Vec<f64>> {
        match self {
            ModelKind::Hme(_) => hme_source(w, eps),
            ModelKind::Hsm(_) => hsm_source(w, eps),
            ModelKind::Euler => {
                check_eps(eps)?;
                Ok(vec![0.0; w.len()])
            }
        }
    }

    /// Advances `w` in place by the relaxation source over `dt`.
    ///
    /// HME non-equilibrium variables that fall below the normal range are
    /// flushed to zero.
    pub fn relax(self, w: &mut [f64], eps: f64, dt: f64, how: SourceIntegrator) -> Result<()> {
        check_eps(eps)?;
        if eps.is_infinite() {
            return Ok(());
        }
        let factor = match how {
            SourceIntegrator::ForwardEuler => 1.0 - dt / eps,
            SourceIntegrator::Exact => (-dt / eps).exp(),
        };
        match self {
            ModelKind::Hme(_) => {
                for f in &mut w[3..] {
                    *f *= factor;
                    // subnormal tails carry no information and slow every later step
                    if f.is_subnormal() {
                        *f = 0.0;
                    }
                }
            }
            ModelKind::Hsm(m) => {
                let (rho, u, theta) = hsm_macroscopic(w);
                let eq = maxwellian_coefficients(rho, u, theta, m)?;
                for (f, e) in w.iter_mut().zip(&eq).skip(3) {
                    *f = e + factor * (*f - e);
                }
            }
            ModelKind::Euler => {}
        }
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "relaxation time must be positive, got {eps}"
        )))
    }
}

fn check_rho_theta(rho: f64, theta: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::state(
            None,
            format!("density must be positive, got {rho}"),
        ));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::state(
            None,
            format!("temperature must be positive, got {theta}"),
        ));
    }
    Ok(())
}

impl QuasiLinearSystem for ModelKind {
    fn dim(&self) -> usize {
        match *self {
            ModelKind::Hme(m) | ModelKind::Hsm(m) => m,
            ModelKind::Euler => 3,
        }
    }

    fn apply(&self, w: &[f64], v: &[f64], out: &mut [f64]) {
        match *self {
            ModelKind::Hme(m) => {
                for (beta, o) in out.iter_mut().enumerate().take(m) {
                    let mut acc = 0.0;
                    hme_row(w, beta, |j, a| acc += a * v[j]);
                    *o = acc;
                }
            }
            ModelKind::Hsm(m) => {
                for k in 0..m {
                    let mut acc = 0.0;
                    if k > 0 {
                        acc += (k as f64).sqrt() * v[k - 1];
                    }
                    if k + 1 < m {
                        acc += ((k + 1) as f64).sqrt() * v[k + 1];
                    }
                    out[k] = acc;
                }
            }
            ModelKind::Euler => {
                let (rho, u, theta) = (w[0], w[1], w[2]);
                out[0] = u * v[0] + rho * v[1];
                out[1] = theta / rho * v[0] + u * v[1] + v[2];
                out[2] = 2.0 * theta * v[1] + u * v[2];
            }
        }
    }

    fn max_speed(&self, w: &[f64]) -> f64 {
        match *self {
            ModelKind::Hme(m) => w[1].abs() + w[2].sqrt() * hermite_max_root(m),
            // constant matrix: its spectrum is exactly the roots of He_M
            ModelKind::Hsm(m) => hermite_max_root(m),
            ModelKind::Euler => w[1].abs() + (3.0 * w[2]).sqrt(),
        }
    }

    fn validate(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::Config(format!(
                "state has {} components, model expects {}",
                w.len(),
                self.dim()
            )));
        }
        if let Some(i) = w.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("component {i} is {}", w[i])));
        }
        let (rho, _, theta) = self.macroscopic(w);
        check_rho_theta(rho, theta)
    }
}

/// Largest root of the probabilists' Hermite polynomial `He_m`.
pub fn hermite_max_root(m: usize) -> f64 {
    const CACHED: usize = 129;
    static ROOTS: [OnceLock<f64>; CACHED] = [const { OnceLock::new() }; CACHED];
    let compute = || {
        if m <= 1 {
            return 0.0;
        }
        // Gauss–Hermite nodes are roots of the physicists' H_m = 2^{m/2} He_m(√2 x)
        let q = QuadratureRule::gauss_hermite(m);
        std::f64::consts::SQRT_2 * q.nodes()[m - 1]
    };
    match ROOTS.get(m) {
        Some(cell) => *cell.get_or_init(compute),
        None => compute(),
    }
}

/// Emits the nonzero entries `(column, value)` of row `beta` of `A_HME(w)`.
///
/// Higher rows refer to `f_0, f_1, f_2`; these take their consistency values
/// `ρ, 0, 0`, which also fixes the pattern for `M < 6`.
fn hme_row(w: &[f64], beta: usize, mut emit: impl FnMut(usize, f64)) {
    let m = w.len();
    let (rho, u, theta) = (w[0], w[1], w[2]);
    let f = |k: isize| -> f64 {
        match k {
            0 => rho,
            k if k >= 3 && (k as usize) < m => w[k as usize],
            _ => 0.0,
        }
    };
    match beta {
        0 => {
            emit(0, u);
            emit(1, rho);
        }
        1 => {
            emit(0, theta / rho);
            emit(1, u);
            emit(2, 1.0);
        }
        2 => {
            emit(1, 2.0 * theta);
            emit(2, u);
            if m > 3 {
                emit(3, 6.0 / rho);
            }
        }
        _ => {
            let b = beta as isize;
            let last = beta + 1 == m;
            emit(0, -theta * f(b - 1) / rho);
            if !last {
                emit(1, (b + 1) as f64 * f(b));
            }
            let c2 = if last {
                -f(b - 1) + theta * f(b - 3) / 2.0
            } else {
                ((b - 1) as f64 * f(b - 1) + theta * f(b - 3)) / 2.0
            };
            emit(2, c2);
            emit(3, -3.0 * f(b - 2) / rho);
            if beta >= 4 {
                emit(beta - 1, theta);
            }
            emit(beta, u);
            if !last {
                emit(beta + 1, (beta + 1) as f64);
            }
        }
    }
}

/// Dense HME system matrix at `w = (ρ, u, θ, f_3, …, f_{M−1})`.
pub fn hme_system_matrix(w: &[f64]) -> Result<DMatrix<f64>> {
    let m = w.len();
    if m < 4 {
        return Err(Error::Config(format!(
            "HME needs at least 4 moments, got {m}"
        )));
    }
    check_rho_theta(w[0], w[2])?;
    let mut a = DMatrix::zeros(m, m);
    for beta in 0..m {
        hme_row(w, beta, |j, v| a[(beta, j)] += v);
    }
    Ok(a)
}

/// Constant symmetric tridiagonal HSM matrix with off-diagonals `√1, …, √(M−1)`.
pub fn hsm_system_matrix(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| {
        if i + 1 == j {
            (j as f64).sqrt()
        } else if j + 1 == i {
            (i as f64).sqrt()
        } else {
            0.0
        }
    })
}

/// Euler system matrix in primitive variables `(ρ, u, θ)`.
pub fn euler_system_matrix(w: &[f64]) -> Result<DMatrix<f64>> {
    let (rho, u, theta) = (w[0], w[1], w[2]);
    check_rho_theta(rho, theta)?;
    Ok(DMatrix::from_row_slice(
        3,
        3,
        &[u, rho, 0.0, theta / rho, u, 1.0, 0.0, 2.0 * theta, u],
    ))
}

/// `−(1/ε) diag(0, 0, 0, 1, …, 1) w`.
pub fn hme_source(w: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_eps(eps)?;
    Ok(w.iter()
        .enumerate()
        .map(|(i, &x)| if i < 3 { 0.0 } else { -x / eps })
        .collect())
}

/// `−(1/ε)(f − f_M)` with the Maxwellian of the recovered `(ρ, u, θ)`.
pub fn hsm_source(f: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_eps(eps)?;
    let (rho, u, theta) = hsm_macroscopic(f);
    check_rho_theta(rho, theta)?;
    let eq = maxwellian_coefficients(rho, u, theta, f.len())?;
    Ok(f.iter()
        .zip(&eq)
        .enumerate()
        .map(|(i, (&x, &e))| if i < 3 { 0.0 } else { -(x - e) / eps })
        .collect())
}
