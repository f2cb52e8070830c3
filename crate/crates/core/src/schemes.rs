//! Time integrators: micro-macro acceleration, projective integration and
//! reference solvers.
//!
//! One micro-macro step of size `Δt` runs `n_s` micro steps of size `δt`,
//! restricts to `(ρ, u, θ)`, advances the Euler equations over the remaining
//! `Δt − n_s δt`, and matches the micro state to the new macro state.
//! Projective schemes replace the macro solve by linear extrapolation.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::basis::{HermiteExpansion, ModelTag};
use crate::coupling::{match_head, match_l2, pi_extrapolate, restrict};
use crate::error::{Error, Phase, Result};
use crate::grid::{apply_source, max_speed, spatial_update, Field, SpatialOrder};
use crate::models::{ModelKind, SourceIntegrator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Micro-macro acceleration of HME with an Euler macro model.
    MmHme,
    /// Micro-macro acceleration of HSM with an Euler macro model.
    MmHsm,
    /// Projective integration of all micro variables.
    Pi,
    /// Coarse projective integration of the first `L` variables.
    Cpi,
    /// Forward Euler in time for transport and relaxation with step `δt`.
    MicroExplicit,
    /// Lie splitting: transport at the CFL step, exact relaxation.
    MicroSplitting,
    /// Euler equations alone.
    EulerOnly,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::MmHme,
        SchemeKind::MmHsm,
        SchemeKind::Pi,
        SchemeKind::Cpi,
        SchemeKind::MicroExplicit,
        SchemeKind::MicroSplitting,
        SchemeKind::EulerOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::MmHme => "mmhme",
            SchemeKind::MmHsm => "mmhsm",
            SchemeKind::Pi => "pi",
            SchemeKind::Cpi => "cpi",
            SchemeKind::MicroExplicit => "micro",
            SchemeKind::MicroSplitting => "micro-split",
            SchemeKind::EulerOnly => "euler",
        }
    }

    fn is_accelerated(self) -> bool {
        matches!(
            self,
            SchemeKind::MmHme | SchemeKind::MmHsm | SchemeKind::Pi | SchemeKind::Cpi
        )
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scheme: SchemeKind,
    /// Micro model for the projective and reference schemes; the micro-macro
    /// schemes fix it by name.
    pub model: ModelTag,
    /// Number of micro variables `M`.
    pub moments: usize,
    /// Number of macro variables `L`.
    pub macro_vars: usize,
    /// Relaxation time `ε`.
    pub eps: f64,
    /// Micro step `δt`; derived from `ε` and the CFL limit when `None`.
    pub dt_micro: Option<f64>,
    /// Macro step `Δt`; `cfl · dx / λ_Euler` of the initial field when `None`.
    pub dt_macro: Option<f64>,
    /// Micro steps per macro step, `n_s = K + 1`.
    pub micro_steps: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub order: SpatialOrder,
    /// Snapshots after the initial one, at evenly spaced target times.
    pub snapshots: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeKind::MmHme,
            model: ModelTag::Hme,
            moments: 10,
            macro_vars: 3,
            eps: 1e-4,
            dt_micro: None,
            dt_macro: Some(5e-4),
            micro_steps: 2,
            cfl: 0.5,
            t_end: 0.1,
            order: SpatialOrder::First,
            snapshots: 1,
        }
    }
}

/// Step sizes fixed for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSteps {
    pub dt_micro: f64,
    pub dt_macro: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let (m, l) = (self.moments, self.macro_vars);
        let cfg = |msg: String| Err(Error::Config(msg));
        if !(self.eps > 0.0) {
            return cfg(format!(
                "relaxation time must be positive, got {}",
                self.eps
            ));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return cfg(format!("CFL number must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return cfg(format!("end time must be non-negative, got {}", self.t_end));
        }
        if self.micro_steps == 0 {
            return cfg("at least one micro step per macro step is required".into());
        }
        for (name, v) in [("micro", self.dt_micro), ("macro", self.dt_macro)] {
            if let Some(dt) = v {
                if !(dt > 0.0) || !dt.is_finite() {
                    return cfg(format!("{name} time step must be positive, got {dt}"));
                }
            }
        }
        self.micro_model().check()?;
        match self.scheme {
            SchemeKind::MmHme | SchemeKind::MmHsm if l != 3 => {
                return cfg(format!(
                    "micro-macro schemes use the Euler macro model, so L must be 3, got {l}"
                ));
            }
            SchemeKind::Pi if l != m => {
                return cfg(format!(
                    "projective integration extrapolates every micro variable, so L must equal M = {m}, got {l}"
                ));
            }
            SchemeKind::Cpi if !(3..=m).contains(&l) => {
                return cfg(format!(
                    "coarse projective integration needs 3 ≤ L ≤ M = {m}, got {l}"
                ));
            }
            _ => {}
        }
        if self.scheme.is_accelerated() {
            if let (Some(dt), Some(big)) = (self.dt_micro, self.dt_macro) {
                if big < self.micro_steps as f64 * dt * (1.0 - 1e-12) {
                    return cfg(format!(
                        "macro step Δt = {big} is shorter than {} micro steps of δt = {dt}",
                        self.micro_steps
                    ));
                }
            }
        }
        Ok(())
    }

    /// Model advanced by the scheme's time steps.
    pub fn micro_model(&self) -> ModelKind {
        match self.scheme {
            SchemeKind::MmHme => ModelKind::Hme(self.moments),
            SchemeKind::MmHsm => ModelKind::Hsm(self.moments),
            SchemeKind::EulerOnly => ModelKind::Euler,
            _ => match self.model {
                ModelTag::Hme => ModelKind::Hme(self.moments),
                ModelTag::Hsm => ModelKind::Hsm(self.moments),
            },
        }
    }

    fn tag(&self) -> ModelTag {
        match self.micro_model() {
            ModelKind::Hsm(_) => ModelTag::Hsm,
            _ => ModelTag::Hme,
        }
    }

    /// Resolves `δt` and `Δt` against the initial field.
    ///
    /// The default `δt` is `min(ε/2, cfl·dx/λ_micro, Δt/n_s)`. Schemes that
    /// extrapolate non-conserved moments (PI, and CPI with `L > 3`) use `ε`
    /// instead of `ε/2`: the forward Euler relaxation factor `1 − δt/ε` then
    /// vanishes and the extrapolation of stiff modes stays bounded.
    pub fn resolve(&self, field0: &Field) -> Result<TimeSteps> {
        self.validate()?;
        let model = self.micro_model();
        let dx = field0.grid().dx();
        let micro_cfl = self.cfl * dx / max_speed(field0, &model).0;
        let dt_macro = match self.dt_macro {
            Some(dt) => dt,
            None => self.cfl * dx / max_speed(&euler_view(field0, model)?, &ModelKind::Euler).0,
        };
        let stiff = match self.scheme {
            SchemeKind::Pi => self.eps,
            SchemeKind::Cpi if self.macro_vars > 3 => self.eps,
            _ => self.eps / 2.0,
        };
        let dt_micro = match (self.dt_micro, self.scheme) {
            (Some(dt), _) => dt,
            (None, SchemeKind::MicroSplitting) => micro_cfl,
            (None, SchemeKind::EulerOnly) => dt_macro,
            (None, s) if s.is_accelerated() => {
                stiff.min(micro_cfl).min(dt_macro / self.micro_steps as f64)
            }
            (None, _) => stiff.min(micro_cfl),
        };
        if self.scheme.is_accelerated()
            && dt_macro < self.micro_steps as f64 * dt_micro * (1.0 - 1e-12)
        {
            return Err(Error::Config(format!(
                "macro step Δt = {dt_macro} is shorter than {} micro steps of δt = {dt_micro}",
                self.micro_steps
            )));
        }
        Ok(TimeSteps { dt_micro, dt_macro })
    }
}

/// `(ρ, u, θ)` per cell.
fn euler_view(field: &Field, model: ModelKind) -> Result<Field> {
    if model == ModelKind::Euler {
        return Ok(field.clone());
    }
    field.map_cells(3, |_, w| {
        let (rho, u, theta) = model.macroscopic(w);
        Ok(vec![rho, u, theta])
    })
}

/// Wall time per phase of one or more steps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub micro: Duration,
    pub restrict: Duration,
    pub macro_: Duration,
    pub matching: Duration,
    /// Step size covered.
    pub dt: f64,
    /// Micro steps taken.
    pub micro_steps: usize,
}

impl StepReport {
    fn absorb(&mut self, other: &StepReport) {
        self.micro += other.micro;
        self.restrict += other.restrict;
        self.macro_ += other.macro_;
        self.matching += other.matching;
        self.dt += other.dt;
        self.micro_steps += other.micro_steps;
    }
}

/// Counters for a whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunStats {
    /// Outer steps, including a final partial one.
    pub steps: usize,
    pub micro_steps: usize,
    pub dt_micro: f64,
    pub dt_macro: f64,
    pub phases: StepReport,
}

fn timed<T>(slot: &mut Duration, phase: Phase, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_phase(phase));
    *slot += start.elapsed();
    out
}

/// Transport then relaxation over `dt`.
fn micro_step(field: &Field, cfg: &SimConfig, dt: f64, how: SourceIntegrator) -> Result<Field> {
    let model = cfg.micro_model();
    let f = spatial_update(field, &model, dt, cfg.order)?;
    apply_source(&f, model, cfg.eps, dt, how)
}

/// Euler transport over `interval`, substepping at the CFL-1 limit.
fn euler_advance(field: &Field, interval: f64, order: SpatialOrder) -> Result<Field> {
    let mut f = field.clone();
    let t_end = field.time() + interval;
    let mut remaining = interval;
    while remaining > 0.0 {
        let tau = f.grid().dx() / max_speed(&f, &ModelKind::Euler).0;
        let h = if remaining <= tau {
            remaining
        } else {
            remaining / (remaining / tau).ceil()
        };
        f = spatial_update(&f, &ModelKind::Euler, h, order)?;
        remaining = t_end - f.time();
        if remaining <= 1e-14 * interval {
            break;
        }
    }
    f.set_time(t_end);
    Ok(f)
}

fn expansion(tag: ModelTag, w: &[f64]) -> Result<HermiteExpansion> {
    HermiteExpansion::new(tag, w.to_vec())
}

/// Runs `n_s` micro steps, returning the last two states.
fn micro_phase(
    field: &Field,
    cfg: &SimConfig,
    steps: &TimeSteps,
    report: &mut StepReport,
) -> Result<(Field, Field)> {
    timed(&mut report.micro, Phase::Micro, || {
        let mut prev = field.clone();
        let mut cur = field.clone();
        for _ in 0..cfg.micro_steps {
            prev = cur;
            cur = micro_step(&prev, cfg, steps.dt_micro, SourceIntegrator::ForwardEuler)?;
        }
        Ok((prev, cur))
    })
    .inspect(|_| report.micro_steps += cfg.micro_steps)
}

/// One micro-macro step covering `dt_macro`.
pub fn mm_step(
    field: &Field,
    cfg: &SimConfig,
    steps: &TimeSteps,
    dt_macro: f64,
) -> Result<(Field, StepReport)> {
    let t0 = field.time();
    let tag = cfg.tag();
    let m = cfg.moments;
    let mut report = StepReport {
        dt: dt_macro,
        ..Default::default()
    };
    let (_, micro) = micro_phase(field, cfg, steps, &mut report)?;
    let coarse = timed(&mut report.restrict, Phase::Restrict, || {
        micro.map_cells(3, |_, w| restrict(&expansion(tag, w)?, 3))
    })?;
    let interval = (dt_macro - cfg.micro_steps as f64 * steps.dt_micro).max(0.0);
    let coarse = timed(&mut report.macro_, Phase::Macro, || {
        euler_advance(&coarse, interval, cfg.order)
    })?;
    let mut out = timed(&mut report.matching, Phase::Match, || {
        micro.map_cells(m, |i, w| {
            let c = coarse.cell(i);
            Ok(match_l2(&expansion(tag, w)?, (c[0], c[1], c[2]))?.into_vars())
        })
    })?;
    out.set_time(t0 + dt_macro);
    Ok((out, report))
}

/// One projective integration step: all `M` variables are extrapolated.
pub fn pi_step(
    field: &Field,
    cfg: &SimConfig,
    steps: &TimeSteps,
    dt_macro: f64,
) -> Result<(Field, StepReport)> {
    let t0 = field.time();
    let model = cfg.micro_model();
    let mut report = StepReport {
        dt: dt_macro,
        ..Default::default()
    };
    let (prev, cur) = micro_phase(field, cfg, steps, &mut report)?;
    let mut out = timed(&mut report.macro_, Phase::Extrapolate, || {
        let f = cur.map_cells(cfg.moments, |i, w| {
            pi_extrapolate(w, prev.cell(i), steps.dt_micro, dt_macro, cfg.micro_steps)
        })?;
        f.validate(&model)?;
        Ok(f)
    })?;
    out.set_time(t0 + dt_macro);
    Ok((out, report))
}

/// One coarse projective step: the first `L` restricted variables are
/// extrapolated and the rest is matched to the last micro state.
pub fn cpi_step(
    field: &Field,
    cfg: &SimConfig,
    steps: &TimeSteps,
    dt_macro: f64,
) -> Result<(Field, StepReport)> {
    let t0 = field.time();
    let tag = cfg.tag();
    let l = cfg.macro_vars;
    let mut report = StepReport {
        dt: dt_macro,
        ..Default::default()
    };
    let (prev, cur) = micro_phase(field, cfg, steps, &mut report)?;
    let (coarse_prev, coarse_cur) = timed(&mut report.restrict, Phase::Restrict, || {
        let r = |f: &Field| f.map_cells(l, |_, w| restrict(&expansion(tag, w)?, l));
        Ok((r(&prev)?, r(&cur)?))
    })?;
    let coarse = timed(&mut report.macro_, Phase::Extrapolate, || {
        coarse_cur.map_cells(l, |i, w| {
            pi_extrapolate(
                w,
                coarse_prev.cell(i),
                steps.dt_micro,
                dt_macro,
                cfg.micro_steps,
            )
        })
    })?;
    let mut out = timed(&mut report.matching, Phase::Match, || {
        cur.map_cells(cfg.moments, |i, w| {
            Ok(match_head(&expansion(tag, w)?, coarse.cell(i))?.into_vars())
        })
    })?;
    out.set_time(t0 + dt_macro);
    Ok((out, report))
}

/// Micro steps of size `δt` over `span`, the last one shortened.
fn micro_only(field: &Field, cfg: &SimConfig, dt: f64, span: f64) -> Result<(Field, StepReport)> {
    let mut report = StepReport {
        dt: span,
        ..Default::default()
    };
    let t_end = field.time() + span;
    let f = timed(&mut report.micro, Phase::Remainder, || {
        let full = (span / dt * (1.0 + 1e-12)).floor() as usize;
        let mut f = field.clone();
        for _ in 0..full {
            f = micro_step(&f, cfg, dt, SourceIntegrator::ForwardEuler)?;
        }
        let rest = t_end - f.time();
        if rest > 1e-14 * span {
            f = micro_step(&f, cfg, rest, SourceIntegrator::ForwardEuler)?;
            report.micro_steps += 1;
        }
        report.micro_steps += full;
        Ok(f)
    })?;
    let mut f = f;
    f.set_time(t_end);
    Ok((f, report))
}

/// One step of size `h` of the configured scheme.
fn step(field: &Field, cfg: &SimConfig, steps: &TimeSteps, h: f64) -> Result<(Field, StepReport)> {
    match cfg.scheme {
        SchemeKind::MmHme | SchemeKind::MmHsm => mm_step(field, cfg, steps, h),
        SchemeKind::Pi => pi_step(field, cfg, steps, h),
        SchemeKind::Cpi => cpi_step(field, cfg, steps, h),
        SchemeKind::MicroExplicit | SchemeKind::MicroSplitting => {
            let how = if cfg.scheme == SchemeKind::MicroSplitting {
                SourceIntegrator::Exact
            } else {
                SourceIntegrator::ForwardEuler
            };
            let mut report = StepReport {
                dt: h,
                micro_steps: 1,
                ..Default::default()
            };
            let f = timed(&mut report.micro, Phase::Micro, || {
                micro_step(field, cfg, h, how)
            })?;
            Ok((f, report))
        }
        SchemeKind::EulerOnly => {
            let mut report = StepReport {
                dt: h,
                ..Default::default()
            };
            let f = timed(&mut report.macro_, Phase::Macro, || {
                euler_advance(field, h, cfg.order)
            })?;
            Ok((f, report))
        }
    }
}

/// Advances `field0` to `cfg.t_end`, returning the snapshots.
pub fn run(field0: &Field, cfg: &SimConfig) -> Result<Vec<Field>> {
    run_with_stats(field0, cfg).map(|(s, _)| s)
}

/// [`run`] with step counters and accumulated phase timings.
///
/// With `n = ⌊T/h⌋` full steps of size `h`, a remainder `r` of at least `n_s δt`
/// is covered by one shortened step of the same scheme; a shorter remainder
/// by micro steps alone. The output is therefore continuous in `h` across
/// the values where `n` changes.
pub fn run_with_stats(field0: &Field, cfg: &SimConfig) -> Result<(Vec<Field>, RunStats)> {
    let model = cfg.micro_model();
    field0.validate(&model)?;
    let steps = cfg.resolve(field0)?;
    let mut stats = RunStats {
        dt_micro: steps.dt_micro,
        dt_macro: steps.dt_macro,
        ..Default::default()
    };
    let t0 = field0.time();
    let t_end = t0 + cfg.t_end;
    let mut snaps = vec![field0.clone()];
    if cfg.t_end == 0.0 {
        return Ok((snaps, stats));
    }
    let h = match cfg.scheme {
        s if s.is_accelerated() || s == SchemeKind::EulerOnly => steps.dt_macro,
        _ => steps.dt_micro,
    };
    let n_snap = cfg.snapshots.max(1);
    let mut next_snap = 1;
    let snap_time = |k: usize| t0 + cfg.t_end * k as f64 / n_snap as f64;
    let tol = 1e-12 * cfg.t_end;

    let full = (cfg.t_end / h * (1.0 + 1e-12)).floor() as usize;
    let mut f = field0.clone();
    let mut record =
        |f: &Field, report: &StepReport, stats: &mut RunStats, snaps: &mut Vec<Field>| {
            stats.steps += 1;
            stats.micro_steps += report.micro_steps;
            stats.phases.absorb(report);
            if next_snap <= n_snap && f.time() >= snap_time(next_snap) - tol {
                snaps.push(f.clone());
                while next_snap <= n_snap && f.time() >= snap_time(next_snap) - tol {
                    next_snap += 1;
                }
            }
        };
    for k in 0..full {
        let t = f.time();
        let (mut g, report) = step(&f, cfg, &steps, h).map_err(|e| e.at_time(t))?;
        g.set_time((t0 + (k + 1) as f64 * h).min(t_end));
        f = g;
        record(&f, &report, &mut stats, &mut snaps);
    }
    let rest = t_end - f.time();
    if rest > tol {
        let t = f.time();
        let accelerated = cfg.scheme.is_accelerated();
        let (mut g, report) = if accelerated && rest < cfg.micro_steps as f64 * steps.dt_micro {
            micro_only(&f, cfg, steps.dt_micro, rest)
        } else {
            step(&f, cfg, &steps, rest)
        }
        .map_err(|e| e.at_time(t))?;
        g.set_time(t_end);
        f = g;
        record(&f, &report, &mut stats, &mut snaps);
    } else {
        f.set_time(t_end);
    }
    if snaps.last().map(|s| s.time()) != Some(t_end) {
        snaps.push(f);
    }
    Ok((snaps, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::maxwellian_coefficients;
    use crate::grid::Grid1D;
    use crate::models::QuasiLinearSystem;

    fn constant(dim: usize, w: &[f64], n: usize) -> Field {
        let grid = Grid1D::new(-1.0, 1.0, n).unwrap();
        Field::from_fn(grid, dim, |_| w.to_vec()).unwrap()
    }

    fn beams(cfg: &SimConfig, n: usize, beam: f64) -> Field {
        let model = cfg.micro_model();
        let grid = Grid1D::new(-10.0, 10.0, n).unwrap();
        Field::from_fn(grid, model.dim(), |x| {
            let u = if x < 0.0 { beam } else { -beam };
            match model {
                ModelKind::Hsm(m) => maxwellian_coefficients(1.0, u, 1.0, m).unwrap(),
                _ => {
                    let mut w = vec![0.0; model.dim()];
                    w[0] = 1.0;
                    w[1] = u;
                    w[2] = 1.0;
                    w
                }
            }
        })
        .unwrap()
    }

    fn cfg(scheme: SchemeKind) -> SimConfig {
        SimConfig {
            scheme,
            moments: 6,
            macro_vars: if scheme == SchemeKind::Pi { 6 } else { 3 },
            eps: 1e-3,
            dt_macro: Some(2e-3),
            t_end: 0.01,
            ..Default::default()
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
        }
        assert!("nope".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn config_constraints() {
        let mut c = cfg(SchemeKind::Pi);
        c.macro_vars = 3;
        let err = c.validate().unwrap_err();
        assert!(err.is_config() && err.to_string().contains("L must equal M"));
        let mut c = cfg(SchemeKind::MmHme);
        c.macro_vars = 4;
        assert!(c.validate().is_err());
        let mut c = cfg(SchemeKind::Cpi);
        c.macro_vars = 7;
        assert!(c.validate().is_err());
        let mut c = cfg(SchemeKind::MmHme);
        c.dt_micro = Some(2e-3);
        assert!(c.validate().is_err());
        let mut c = cfg(SchemeKind::MmHme);
        c.eps = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn default_micro_steps() {
        let c = cfg(SchemeKind::MmHme);
        let f = beams(&c, 50, 0.5);
        let s = c.resolve(&f).unwrap();
        assert_eq!(s.dt_micro, 5e-4);
        let s = cfg(SchemeKind::Pi).resolve(&f).unwrap();
        assert_eq!(s.dt_micro, 1e-3);
        let mut c = cfg(SchemeKind::MmHme);
        c.eps = 1e-2;
        // clamped so that n_s micro steps fit in one macro step
        assert_eq!(c.resolve(&f).unwrap().dt_micro, 1e-3);
    }

    #[test]
    fn zero_end_time_returns_initial_field() {
        let c = SimConfig {
            t_end: 0.0,
            ..cfg(SchemeKind::MmHme)
        };
        let f = beams(&c, 20, 0.5);
        assert_eq!(run(&f, &c).unwrap(), vec![f]);
    }

    #[test]
    fn equilibrium_is_fixed_for_every_scheme() {
        for scheme in SchemeKind::ALL {
            let mut c = cfg(scheme);
            c.t_end = 0.02;
            let model = c.micro_model();
            let w = match model {
                ModelKind::Hsm(m) => maxwellian_coefficients(1.2, 0.3, 0.9, m).unwrap(),
                ModelKind::Euler => vec![1.2, 0.3, 0.9],
                ModelKind::Hme(m) => {
                    let mut w = vec![0.0; m];
                    w[..3].copy_from_slice(&[1.2, 0.3, 0.9]);
                    w
                }
            };
            let f = constant(model.dim(), &w, 16);
            let out = run(&f, &c).unwrap();
            let last = out.last().unwrap();
            for (a, b) in last.data().iter().zip(f.data()) {
                assert!((a - b).abs() <= 1e-14, "{scheme}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn degenerate_macro_interval_equals_micro_stepping() {
        let mut c = cfg(SchemeKind::MmHme);
        c.dt_micro = Some(1e-3);
        c.dt_macro = Some(2e-3);
        c.t_end = 2e-3;
        let f = beams(&c, 40, 0.5);
        let mm = run(&f, &c).unwrap().pop().unwrap();
        let mut m = c.clone();
        m.scheme = SchemeKind::MicroExplicit;
        let micro = run(&f, &m).unwrap().pop().unwrap();
        assert_eq!(mm.data(), micro.data());
    }

    #[test]
    fn pi_without_remainder_equals_micro() {
        let mut c = cfg(SchemeKind::Pi);
        c.dt_micro = Some(1e-3);
        c.dt_macro = Some(2e-3);
        c.t_end = 4e-3;
        let f = beams(&c, 40, 0.5);
        let pi = run(&f, &c).unwrap().pop().unwrap();
        let mut m = c.clone();
        m.scheme = SchemeKind::MicroExplicit;
        let micro = run(&f, &m).unwrap().pop().unwrap();
        for (a, b) in pi.data().iter().zip(micro.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cpi_with_all_moments_is_pi() {
        let pi = cfg(SchemeKind::Pi);
        let mut cpi = pi.clone();
        cpi.scheme = SchemeKind::Cpi;
        let f = beams(&pi, 60, 0.5);
        assert_eq!(run(&f, &pi).unwrap(), run(&f, &cpi).unwrap());
    }

    #[test]
    fn run_is_continuous_across_a_seam() {
        let mut c = cfg(SchemeKind::MmHme);
        c.dt_micro = Some(2e-4);
        c.t_end = 0.01;
        let f = beams(&c, 40, 0.5);
        let seam = c.t_end / 5.0;
        let mut a = c.clone();
        a.dt_macro = Some(seam - 1e-9);
        let mut b = c.clone();
        b.dt_macro = Some(seam + 1e-9);
        let (ra, sa) = run_with_stats(&f, &a).unwrap();
        let (rb, sb) = run_with_stats(&f, &b).unwrap();
        assert_ne!(sa.steps, sb.steps, "the seam must change the schedule");
        let d = ra
            .last()
            .unwrap()
            .data()
            .iter()
            .zip(rb.last().unwrap().data())
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn snapshots_hit_targets() {
        let mut c = cfg(SchemeKind::MmHme);
        c.snapshots = 4;
        c.t_end = 0.01;
        let f = beams(&c, 20, 0.5);
        let s = run(&f, &c).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s[0].time(), 0.0);
        assert_eq!(s[4].time(), 0.01);
        assert!(s.windows(2).all(|p| p[1].time() > p[0].time()));
    }

    #[test]
    fn splitting_takes_fewer_steps_than_explicit() {
        let mut c = cfg(SchemeKind::MicroExplicit);
        c.moments = 10;
        c.t_end = 0.05;
        let f = beams(&c, 100, 0.5);
        let (_, se) = run_with_stats(&f, &c).unwrap();
        let mut s = c.clone();
        s.scheme = SchemeKind::MicroSplitting;
        let (out, ss) = run_with_stats(&f, &s).unwrap();
        assert!(ss.steps < se.steps, "{} vs {}", ss.steps, se.steps);
        out.last().unwrap().validate(&s.micro_model()).unwrap();
    }

    #[test]
    fn phase_errors_carry_time_and_phase() {
        let mut c = cfg(SchemeKind::MmHme);
        c.dt_micro = Some(0.5);
        c.dt_macro = Some(1.0);
        c.t_end = 1.0;
        let f = beams(&c, 20, 0.5);
        match run(&f, &c) {
            Err(Error::AtTime { source, .. }) => {
                assert!(matches!(
                    *source,
                    Error::Phase {
                        phase: Phase::Micro,
                        ..
                    }
                ))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn relaxation_is_geometric_under_micro_stepping() {
        let mut c = cfg(SchemeKind::MicroExplicit);
        c.dt_micro = Some(3e-4);
        c.t_end = 100.0 * 3e-4;
        let w0 = [1.0, 0.2, 1.1, 0.1, -0.05, 0.02];
        let f = constant(6, &w0, 8);
        let out = run(&f, &c).unwrap().pop().unwrap();
        let factor = (1.0_f64 - 0.3).powi(100);
        for (got, w) in out.cell(3).iter().zip(&w0).skip(3) {
            let want = factor * w;
            assert!((got - want).abs() <= 100.0 * f64::EPSILON * want.abs());
        }
    }
}
