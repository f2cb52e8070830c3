//! Uniform 1D finite volumes for non-conservative quasi-linear systems.
//!
//! Transport uses a path-conservative FORCE scheme along straight segments,
//! with `A` evaluated at the arithmetic mean of the two end states. At an
//! interface with jump `Δw` the fluctuations are
//!
//! ```text
//! D∓ = ½ A Δw ∓ ½ Q Δw,   Q Δw = ½ [ (dx/τ) Δw + (τ/dx) A (A Δw) ]
//! ```
//!
//! and cell `i` receives `−(dt/dx)(D⁺_{i−½} + D⁻_{i+½})`. The viscosity scale
//! `τ = dx / λ_max` is the CFL-1 step of the current field, independent of the
//! step actually taken, so that very small steps are not over-damped. For a
//! scalar linear equation the scheme reduces to upwinding.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{ModelKind, QuasiLinearSystem, SourceIntegrator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 cells, got {n_cells}"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Config(format!("invalid domain [{x_min}, {x_max}]")));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    /// Centre of cell `i`, computed symmetrically so mirrored cells have
    /// exactly opposite coordinates on a symmetric domain.
    pub fn center(&self, i: usize) -> f64 {
        let n = self.n_cells as f64;
        let s = (2 * i + 1) as f64 / (2.0 * n);
        self.x_min * (1.0 - s) + self.x_max * s
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }
}

/// Reconstruction order of the transport step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpatialOrder {
    /// Piecewise constant states, forward Euler in time.
    #[default]
    First,
    /// Minmod-limited linear states with Heun (SSP-RK2) time stepping.
    Second,
}

/// Per-cell state vectors on a grid, stored cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    dim: usize,
    data: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn new(grid: Grid1D, dim: usize, data: Vec<f64>, time: f64) -> Result<Self> {
        if dim == 0 || data.len() != grid.n_cells() * dim {
            return Err(Error::Config(format!(
                "field data has {} values, expected {} cells × {dim}",
                data.len(),
                grid.n_cells()
            )));
        }
        Ok(Self {
            grid,
            dim,
            data,
            time,
        })
    }

    /// Builds a field at `t = 0` from a state per cell centre.
    pub fn from_fn(
        grid: Grid1D,
        dim: usize,
        mut init: impl FnMut(f64) -> Vec<f64>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(grid.n_cells() * dim);
        for i in 0..grid.n_cells() {
            let w = init(grid.center(i));
            if w.len() != dim {
                return Err(Error::Config(format!(
                    "initial state at cell {i} has {} components, expected {dim}",
                    w.len()
                )));
            }
            data.extend(w);
        }
        Self::new(grid, dim, data, 0.0)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cells(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Same grid and time, new per-cell data.
    pub fn with_data(&self, dim: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, dim, data, self.time)
    }

    /// Applies `f` to every cell, producing a field of dimension `dim`.
    pub fn map_cells(
        &self,
        dim: usize,
        f: impl Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync,
    ) -> Result<Self> {
        let mut data = vec![0.0; dim * self.n_cells()];
        data.par_chunks_exact_mut(dim)
            .zip(self.data.par_chunks_exact(self.dim))
            .enumerate()
            .try_for_each(|(i, (out, w))| {
                let c = f(i, w).map_err(|e| locate(e, i))?;
                if c.len() != dim {
                    return Err(Error::Config(format!(
                        "cell {i} mapped to {} components, expected {dim}",
                        c.len()
                    )));
                }
                out.copy_from_slice(&c);
                Ok(())
            })?;
        self.with_data(dim, data)
    }

    /// Checks every cell against the admissible set of `sys`.
    pub fn validate(&self, sys: &impl QuasiLinearSystem) -> Result<()> {
        if sys.dim() != self.dim {
            return Err(Error::Config(format!(
                "field has {} components per cell, model expects {}",
                self.dim,
                sys.dim()
            )));
        }
        self.data
            .par_chunks_exact(self.dim)
            .enumerate()
            .try_for_each(|(i, w)| sys.validate(w).map_err(|e| locate(e, i)))
    }
}

/// Attaches a cell index to a per-cell error.
pub(crate) fn locate(e: Error, cell: usize) -> Error {
    match e {
        Error::State { reason, .. } => Error::State {
            cell: Some(cell),
            reason,
        },
        Error::Numeric(msg) => Error::Numeric(format!("cell {cell}: {msg}")),
        Error::Domain(msg) => Error::Domain(format!("cell {cell}: {msg}")),
        other => other,
    }
}

/// Largest characteristic speed over all cells and the first cell attaining it.
pub fn max_speed(field: &Field, sys: &impl QuasiLinearSystem) -> (f64, usize) {
    let speeds: Vec<f64> = field
        .data
        .par_chunks_exact(field.dim)
        .map(|w| sys.max_speed(w))
        .collect();
    let mut best = (0.0, 0);
    for (i, &s) in speeds.iter().enumerate() {
        if s > best.0 {
            best = (s, i);
        }
    }
    best
}

/// `cfl · dx / max λ`.
pub fn cfl_timestep(field: &Field, sys: &impl QuasiLinearSystem, cfl: f64) -> f64 {
    let (lam, _) = max_speed(field, sys);
    cfl * field.grid.dx() / lam
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

struct Scratch {
    mean: Vec<f64>,
    jump: Vec<f64>,
    a_jump: Vec<f64>,
    aa_jump: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            jump: vec![0.0; dim],
            a_jump: vec![0.0; dim],
            aa_jump: vec![0.0; dim],
            left: vec![0.0; dim],
            right: vec![0.0; dim],
        }
    }
}

/// Minmod slopes per cell; boundary cells get zero slope (copy-outflow ghosts).
fn limited_slopes(field: &Field) -> Vec<f64> {
    let (n, d) = (field.n_cells(), field.dim);
    let mut slopes = vec![0.0; n * d];
    slopes
        .par_chunks_exact_mut(d)
        .enumerate()
        .for_each(|(i, s)| {
            if i == 0 || i + 1 == n {
                return;
            }
            let (wl, wc, wr) = (field.cell(i - 1), field.cell(i), field.cell(i + 1));
            for k in 0..d {
                s[k] = minmod(wc[k] - wl[k], wr[k] - wc[k]);
            }
        });
    slopes
}

/// Right-hand side `−(1/dx)(D⁺_{i−½} + D⁻_{i+½} [+ A(w_i)σ_i])`, flattened.
fn transport_rate(
    field: &Field,
    sys: &impl QuasiLinearSystem,
    tau: f64,
    order: SpatialOrder,
) -> Vec<f64> {
    let (n, d) = (field.n_cells(), field.dim);
    let dx = field.grid.dx();
    let slopes = match order {
        SpatialOrder::First => None,
        SpatialOrder::Second => Some(limited_slopes(field)),
    };
    let slope = |i: usize, k: usize| slopes.as_ref().map_or(0.0, |s| s[i * d + k]);

    // interfaces 1..n-1 between cells i-1 and i; the outer two carry no jump
    let mut fluct = vec![0.0; (n + 1) * 2 * d];
    fluct.par_chunks_exact_mut(2 * d).enumerate().for_each_init(
        || Scratch::new(d),
        |s, (j, out)| {
            if j == 0 || j == n {
                return;
            }
            let (wl, wr) = (field.cell(j - 1), field.cell(j));
            for k in 0..d {
                s.left[k] = wl[k] + 0.5 * slope(j - 1, k);
                s.right[k] = wr[k] - 0.5 * slope(j, k);
                s.mean[k] = 0.5 * (s.left[k] + s.right[k]);
                s.jump[k] = s.right[k] - s.left[k];
            }
            sys.apply(&s.mean, &s.jump, &mut s.a_jump);
            sys.apply(&s.mean, &s.a_jump, &mut s.aa_jump);
            let (minus, plus) = out.split_at_mut(d);
            for k in 0..d {
                let q = 0.5 * (dx / tau * s.jump[k] + tau / dx * s.aa_jump[k]);
                minus[k] = 0.5 * (s.a_jump[k] - q);
                plus[k] = 0.5 * (s.a_jump[k] + q);
            }
        },
    );

    let mut rate = vec![0.0; n * d];
    rate.par_chunks_exact_mut(d).enumerate().for_each_init(
        || (vec![0.0; d], vec![0.0; d]),
        |(sigma, internal), (i, r)| {
            let from_left = &fluct[(i * 2 + 1) * d..(i * 2 + 2) * d];
            let from_right = &fluct[(i + 1) * 2 * d..((i + 1) * 2 + 1) * d];
            if slopes.is_some() {
                for (k, s) in sigma.iter_mut().enumerate() {
                    *s = slope(i, k);
                }
                sys.apply(field.cell(i), sigma, internal);
            }
            for k in 0..d {
                r[k] = -(from_left[k] + from_right[k] + internal[k]) / dx;
            }
        },
    );
    rate
}

/// One explicit transport step of size `dt`; sources are not applied.
///
/// Fails with [`Error::Cfl`] if `dt` exceeds the CFL-1 limit of the field and
/// with a located state error if a cell leaves the admissible set.
pub fn spatial_update(
    field: &Field,
    sys: &impl QuasiLinearSystem,
    dt: f64,
    order: SpatialOrder,
) -> Result<Field> {
    field.validate(sys)?;
    if !(dt >= 0.0) {
        return Err(Error::Config(format!(
            "time step must be non-negative, got {dt}"
        )));
    }
    let dx = field.grid.dx();
    let (lam, cell) = max_speed(field, sys);
    if lam == 0.0 || dt == 0.0 {
        let mut out = field.clone();
        out.time += dt;
        return Ok(out);
    }
    let tau = dx / lam;
    // relative slack: dt is often computed as exactly this quotient
    if dt > tau * (1.0 + 1e-12) {
        return Err(Error::Cfl {
            cell,
            dt,
            limit: tau,
        });
    }
    let euler = |f: &Field, rate: &[f64], dt: f64| -> Vec<f64> {
        f.data.iter().zip(rate).map(|(w, r)| w + dt * r).collect()
    };
    let data = match order {
        SpatialOrder::First => euler(field, &transport_rate(field, sys, tau, order), dt),
        SpatialOrder::Second => {
            let stage = field.with_data(
                field.dim,
                euler(field, &transport_rate(field, sys, tau, order), dt),
            )?;
            stage.validate(sys)?;
            let second = euler(&stage, &transport_rate(&stage, sys, tau, order), dt);
            field
                .data
                .iter()
                .zip(&second)
                .map(|(a, b)| 0.5 * (a + b))
                .collect()
        }
    };
    let mut out = field.with_data(field.dim, data)?;
    out.time += dt;
    out.validate(sys)?;
    Ok(out)
}

/// Applies the relaxation source to every cell over `dt`; identity for Euler.
pub fn apply_source(
    field: &Field,
    model: ModelKind,
    eps: f64,
    dt: f64,
    how: SourceIntegrator,
) -> Result<Field> {
    if !(dt >= 0.0) {
        return Err(Error::Config(format!(
            "time step must be non-negative, got {dt}"
        )));
    }
    let mut out = field.clone();
    out.data
        .par_chunks_exact_mut(field.dim)
        .enumerate()
        .try_for_each(|(i, w)| {
            model.relax(w, eps, dt, how).map_err(|e| locate(e, i))?;
            model.validate(w).map_err(|e| locate(e, i))
        })?;
    Ok(out)
}
