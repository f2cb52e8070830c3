//! Canned studies: colliding beams, matching accuracy, Δt consistency and the
//! ε benchmark.

use std::time::{Duration, Instant};

use crate::basis::{
    maxwellian_coefficients, moments_of, weighted_l2_distance, HermiteExpansion, ModelTag,
};
use crate::coupling::match_head;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};
use crate::models::{ModelKind, QuasiLinearSystem};
use crate::schemes::{run, run_with_stats, RunStats, SchemeKind, SimConfig};

/// Two colliding beams: `u = +u_b` left of the origin, `−u_b` right of it,
/// `ρ = θ = 1` and no higher moments.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBeamConfig {
    pub beam: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub sim: SimConfig,
}

impl Default for TwoBeamConfig {
    fn default() -> Self {
        Self {
            beam: 0.5,
            x_min: -10.0,
            x_max: 10.0,
            n_cells: 500,
            sim: SimConfig::default(),
        }
    }
}

impl TwoBeamConfig {
    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.x_min, self.x_max, self.n_cells)
    }

    /// Initial field in the variables of the configured scheme's model.
    pub fn initial_field(&self) -> Result<Field> {
        let model = self.sim.micro_model().check()?;
        let dim = model.dim();
        let b = self.beam;
        let mut err = None;
        let field = Field::from_fn(self.grid()?, dim, |x| {
            let u = if x < 0.0 { b } else { -b };
            match model {
                ModelKind::Hsm(m) => maxwellian_coefficients(1.0, u, 1.0, m).unwrap_or_else(|e| {
                    err = Some(e);
                    vec![0.0; m]
                }),
                _ => {
                    let mut w = vec![0.0; dim];
                    w[..3].copy_from_slice(&[1.0, u, 1.0]);
                    w
                }
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(field),
        }
    }
}

/// Cell-centred observables of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub time: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    /// Pressure `ρθ`.
    pub p: Vec<f64>,
    /// Heat flux; identically zero for the Euler equations.
    pub q: Vec<f64>,
}

impl Profile {
    pub fn of(field: &Field, model: ModelKind) -> Result<Self> {
        let n = field.n_cells();
        let mut out = Profile {
            time: field.time(),
            x: field.grid().centers(),
            rho: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
            p: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
        };
        for w in field.cells() {
            let (rho, u, theta) = model.macroscopic(w);
            let q = match model {
                ModelKind::Euler => 0.0,
                ModelKind::Hme(_) => {
                    moments_of(&HermiteExpansion::new(ModelTag::Hme, w.to_vec())?).heat_flux
                }
                ModelKind::Hsm(_) => {
                    moments_of(&HermiteExpansion::new(ModelTag::Hsm, w.to_vec())?).heat_flux
                }
            };
            out.rho.push(rho);
            out.u.push(u);
            out.theta.push(theta);
            out.p.push(rho * theta);
            out.q.push(q);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct TwoBeamOutput {
    pub snapshots: Vec<Field>,
    pub profiles: Vec<Profile>,
    pub stats: RunStats,
}

pub fn two_beam(cfg: &TwoBeamConfig) -> Result<TwoBeamOutput> {
    let field0 = cfg.initial_field()?;
    let (snapshots, stats) = run_with_stats(&field0, &cfg.sim)?;
    let model = cfg.sim.micro_model();
    let profiles = snapshots
        .iter()
        .map(|f| Profile::of(f, model))
        .collect::<Result<_>>()?;
    Ok(TwoBeamOutput {
        snapshots,
        profiles,
        stats,
    })
}

/// Bimodal HME prior with eight variables.
pub const BIMODAL_PRIOR: [f64; 8] = [1.0, 1.0, 1.0, -0.2, 0.1, -0.01, 0.001, -0.0005];

/// Matches the first `L` variables of `p_scale ·` prior against the prior for
/// each `L`, returning the weighted L² error to the scaled state. The weight
/// is the Maxwellian of the scaled state.
pub fn matching_study(m: usize, p_scale: f64, ls: &[usize]) -> Result<Vec<(usize, f64)>> {
    if !(3..=BIMODAL_PRIOR.len()).contains(&m) {
        return Err(Error::Config(format!(
            "the bimodal prior supports 3 ≤ M ≤ {}, got {m}",
            BIMODAL_PRIOR.len()
        )));
    }
    let prior = HermiteExpansion::hme(BIMODAL_PRIOR[..m].to_vec())?;
    let exact = HermiteExpansion::hme(prior.vars().iter().map(|v| p_scale * v).collect())?;
    ls.iter()
        .map(|&l| {
            if !(3..=m).contains(&l) {
                return Err(Error::Config(format!("need 3 ≤ L ≤ M = {m}, got {l}")));
            }
            let matched = match_head(&prior, &exact.vars()[..l])?;
            Ok((l, weighted_l2_distance(&matched, &exact, exact.params())?))
        })
        .collect()
}

/// Macro step for a CFL number, anchored so that CFL 0.5 gives the
/// configured `Δt = 5e−4`.
pub fn consistency_dt(cfl: f64) -> f64 {
    5e-4 * cfl / 0.5
}

/// Discrete L² distance of the stacked `(ρ, u, θ)` over all cells.
pub fn macro_distance(a: &Field, model_a: ModelKind, b: &Field, model_b: ModelKind) -> Result<f64> {
    if a.n_cells() != b.n_cells() {
        return Err(Error::Config("fields live on different grids".into()));
    }
    let mut sum = 0.0;
    for (wa, wb) in a.cells().zip(b.cells()) {
        let (ra, ua, ta) = model_a.macroscopic(wa);
        let (rb, ub, tb) = model_b.macroscopic(wb);
        sum += (ra - rb).powi(2) + (ua - ub).powi(2) + (ta - tb).powi(2);
    }
    Ok((sum * a.grid().dx()).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: SchemeKind,
    pub cfl: f64,
    pub dt_macro: f64,
    pub distance: f64,
}

/// Reference run: explicit HME with `M = 10` and `δt = ε/2`.
pub fn reference_solution(base: &TwoBeamConfig) -> Result<Field> {
    let mut cfg = base.clone();
    cfg.sim = SimConfig {
        scheme: SchemeKind::MicroExplicit,
        model: ModelTag::Hme,
        moments: 10,
        macro_vars: 3,
        dt_micro: Some(base.sim.eps / 2.0),
        ..base.sim.clone()
    };
    let snaps = run(&cfg.initial_field()?, &cfg.sim)?;
    Ok(snaps
        .last()
        .cloned()
        .expect("run returns at least the initial field"))
}

/// Distances of mMHME and CPI (`L = 3`) to the reference at the end time,
/// one row per scheme and CFL number.
pub fn consistency_sweep(base: &TwoBeamConfig, cfls: &[f64]) -> Result<Vec<SweepRow>> {
    let reference = reference_solution(base)?;
    let ref_model = ModelKind::Hme(10);
    let mut rows = Vec::new();
    for scheme in [SchemeKind::MmHme, SchemeKind::Cpi] {
        for &cfl in cfls {
            let mut cfg = base.clone();
            cfg.sim.scheme = scheme;
            cfg.sim.model = ModelTag::Hme;
            cfg.sim.macro_vars = 3;
            cfg.sim.dt_macro = Some(consistency_dt(cfl));
            let snaps = run(&cfg.initial_field()?, &cfg.sim)?;
            let last = snaps
                .last()
                .expect("run returns at least the initial field");
            rows.push(SweepRow {
                scheme,
                cfl,
                dt_macro: consistency_dt(cfl),
                distance: macro_distance(last, cfg.sim.micro_model(), &reference, ref_model)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub scheme: SchemeKind,
    pub eps: f64,
    /// Fastest wall time over the repetitions.
    pub wall: Duration,
    pub steps: usize,
    /// Micro time over scheme time at the same ε.
    pub speedup: f64,
}

/// Cost ratio of explicit micro stepping to micro-macro stepping, counting
/// the `n_s` micro steps of each macro step: `Δt / (n_s ε)`.
pub fn theoretical_mm_speedup(dt_macro: f64, micro_steps: usize, eps: f64) -> f64 {
    dt_macro / (micro_steps as f64 * eps)
}

/// Cost ratio of explicit micro stepping to a pure macro solve:
/// `M² Δt / (L² ε)`.
pub fn theoretical_macro_speedup(m: usize, l: usize, dt_macro: f64, eps: f64) -> f64 {
    (m * m) as f64 * dt_macro / ((l * l) as f64 * eps)
}

/// Speedups listed in the reference runtime table at `ε = 1e−5`.
pub const TABULATED_MM_SPEEDUP: f64 = 25.5;
pub const TABULATED_MACRO_SPEEDUP: f64 = 555.5;

/// Times MicroExplicit, mMHME and EulerOnly on the two-beam problem for each
/// ε on a single thread, keeping the fastest of `repetitions` runs.
pub fn speedup_bench(
    base: &TwoBeamConfig,
    eps_list: &[f64],
    repetitions: usize,
) -> Result<Vec<BenchResult>> {
    if cfg!(debug_assertions) {
        return Err(Error::Config(
            "benchmarks need an optimized build without debug assertions".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Numeric(format!("cannot build benchmark thread pool: {e}")))?;
    const SCHEMES: [SchemeKind; 3] = [
        SchemeKind::MicroExplicit,
        SchemeKind::MmHme,
        SchemeKind::EulerOnly,
    ];
    let mut cases = Vec::new();
    for &eps in eps_list {
        for scheme in SCHEMES {
            let mut cfg = base.clone();
            cfg.sim.scheme = scheme;
            cfg.sim.eps = eps;
            cfg.sim.model = ModelTag::Hme;
            cfg.sim.macro_vars = 3;
            let field0 = cfg.initial_field()?;
            cases.push((cfg, field0, Duration::MAX, 0));
        }
    }
    pool.install(|| {
        // rounds over all cases, so slow drift of the machine hits each alike
        for _ in 0..repetitions.max(1) {
            for (cfg, field0, best, steps) in cases.iter_mut() {
                let start = Instant::now();
                let (_, stats) = run_with_stats(field0, &cfg.sim)?;
                *best = (*best).min(start.elapsed());
                *steps = stats.steps;
            }
        }
        Ok::<_, Error>(())
    })?;
    Ok(cases
        .chunks(SCHEMES.len())
        .flat_map(|group| {
            let micro = group[0].2.as_secs_f64();
            group.iter().map(move |(cfg, _, wall, steps)| BenchResult {
                scheme: cfg.sim.scheme,
                eps: cfg.sim.eps,
                wall: *wall,
                steps: *steps,
                speedup: micro / wall.as_secs_f64(),
            })
        })
        .collect())
}
