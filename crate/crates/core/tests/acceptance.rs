//! Acceptance checks, one line per criterion. Exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use micromacro::basis::{
    eval_basis_hme, gaussian_weight, hermite_he, maxwellian_coefficients, weighted_l2_distance,
    BasisParams, HermiteExpansion, ModelTag, QuadratureRule,
};
use micromacro::coupling::{build_matching_operator, match_l2};
use micromacro::experiments::{
    consistency_sweep, matching_study, speedup_bench, two_beam, TwoBeamConfig, BIMODAL_PRIOR,
};
use micromacro::grid::{Field, Grid1D};
use micromacro::models::ModelKind;
use micromacro::schemes::{run, SchemeKind, SimConfig};
use rand::{Rng, SeedableRng};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, elapsed: Duration, detail: String) -> Check {
    ensure(
        elapsed <= limit,
        format!(
            "{detail}; {:.2} s of {} s",
            elapsed.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn orthonormality() -> Check {
    let start = Instant::now();
    let mut rng = rand::rngs::StdRng::seed_from_u64(1);
    let rule = QuadratureRule::oracle();
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let p = BasisParams::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0)).unwrap();
        for m in 1..=10 {
            for i in 0..m {
                for j in 0..m {
                    let g = rule.integrate_line(p.u, p.theta.sqrt(), |c| {
                        eval_basis_hme(i, p, c).unwrap() * eval_basis_hme(j, p, c).unwrap()
                            / gaussian_weight(p, c)
                    });
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((g - want).abs());
                }
            }
        }
    }
    let detail = format!("max |G − I| = {worst:.2e} (limit 1e-10)");
    ensure(worst < 1e-10, detail.clone())?;
    within(Duration::from_secs(5), start.elapsed(), detail)
}

fn matching_oracle() -> Check {
    let start = Instant::now();
    let mut rng = rand::rngs::StdRng::seed_from_u64(2);
    let rule = QuadratureRule::oracle();
    let mut worst = 0.0_f64;
    let mut count = 0;
    while count < 50 {
        let (un, tn) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0));
        let (up, tp) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0));
        if tp >= 2.0 * tn {
            continue;
        }
        count += 1;
        for m in [6, 8, 10] {
            let op = build_matching_operator(un, tn, up, tp, m).unwrap();
            for k in 0..m {
                for j in 0..m {
                    // ∫ φ*_k φ⁺_j / ω⁺ dc = E_{c ~ N(u*, θ*)}[ψ_k(ξ*) ψ_j(ξ⁺)]
                    let q = rule.expect_normal(up, tp, |c| {
                        hermite_he(k, (c - up) / tp.sqrt()) * hermite_he(j, (c - un) / tn.sqrt())
                    }) / (factorial(k) * factorial(j)).sqrt();
                    worst = worst.max((op.b()[(k, j)] - q).abs());
                }
            }
        }
    }
    let detail = format!("max |B − B_quad| = {worst:.2e} over 50 quadruples (limit 1e-10)");
    ensure(worst < 1e-10, detail.clone())?;
    within(Duration::from_secs(10), start.elapsed(), detail)
}

fn matching_optimality() -> Check {
    let prior = HermiteExpansion::hme(BIMODAL_PRIOR.to_vec()).unwrap();
    let matched = match_l2(&prior, (1.2, 1.2, 1.2)).unwrap();
    let weight = matched.params();
    let d0 = weighted_l2_distance(&matched, &prior, weight).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let mut best_gain = f64::NEG_INFINITY;
    for n in 0..100 {
        let scale = 10f64.powi(-(n % 6) - 1);
        let mut g = matched.orthonormal_coefficients();
        for gi in &mut g[3..] {
            *gi += scale * rng.gen_range(-1.0..1.0);
        }
        let q = HermiteExpansion::from_orthonormal(ModelTag::Hme, weight, &g).unwrap();
        let d = weighted_l2_distance(&q, &prior, weight).unwrap();
        best_gain = best_gain.max(d0 - d);
    }
    ensure(
        best_gain <= 1e-12,
        format!("matched distance {d0:.6e}; best improvement by a perturbation {best_gain:.2e} (limit 1e-12)"),
    )
}

fn hsm_degeneracy() -> Check {
    let prior = maxwellian_coefficients(1.0, 0.3, 1.2, 10).unwrap();
    let mut prior = prior;
    prior[3] += 0.05;
    prior[6] -= 0.01;
    let h = HermiteExpansion::hsm(prior.clone()).unwrap();
    let (rho, u, theta) = (1.1, -0.2, 0.95);
    let m = match_l2(&h, (rho, u, theta)).unwrap();
    let carry = m.vars()[3..]
        .iter()
        .zip(&prior[3..])
        .all(|(a, b)| a.to_bits() == b.to_bits());
    let head = [
        rho,
        rho * u,
        (rho * theta + rho * u * u - rho) / std::f64::consts::SQRT_2,
    ];
    let constraints = m.vars()[..3]
        .iter()
        .zip(&head)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(
        carry && constraints,
        format!("carry-over bitwise: {carry}; constraint coefficients bitwise: {constraints}"),
    )
}

fn matching_study_monotone() -> Check {
    let start = Instant::now();
    let rows = matching_study(8, 1.2, &[3, 4, 5, 6, 7]).unwrap();
    let monotone = rows.windows(2).all(|w| w[1].1 <= w[0].1);
    let detail = format!(
        "errors {}",
        rows.iter()
            .map(|(l, e)| format!("L={l}: {e:.3e}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    ensure(monotone && rows[4].1 < rows[0].1, detail.clone())?;
    within(Duration::from_secs(60), start.elapsed(), detail)
}

fn consistency_limit() -> Check {
    let mut rng = rand::rngs::StdRng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let (u, th) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0));
        for m in [6, 8, 10] {
            let op = build_matching_operator(
                u + rng.gen_range(-1e-6..1e-6),
                th + rng.gen_range(-1e-6..1e-6),
                u,
                th,
                m,
            )
            .unwrap();
            let d = op.a_inv_b().unwrap() - nalgebra::DMatrix::<f64>::identity(m, m);
            let norm = d
                .row_iter()
                .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            worst = worst.max(norm);
        }
    }
    ensure(
        worst < 1e-8,
        format!("max ‖A⁻¹B − I‖∞ = {worst:.2e} for offsets ≤ 1e-6 (limit 1e-8)"),
    )
}

fn consistency_sweep_monotone() -> Check {
    let start = Instant::now();
    let rows = consistency_sweep(&TwoBeamConfig::default(), &[0.5, 0.4, 0.27]).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for scheme in [SchemeKind::MmHme, SchemeKind::Cpi] {
        let d: Vec<f64> = rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| r.distance)
            .collect();
        ok &= d.windows(2).all(|w| w[1] < w[0]);
        parts.push(format!(
            "{scheme}: {}",
            d.iter()
                .map(|x| format!("{x:.3e}"))
                .collect::<Vec<_>>()
                .join(" > ")
        ));
    }
    let detail = parts.join("; ");
    ensure(ok, detail.clone())?;
    within(Duration::from_secs(300), start.elapsed(), detail)
}

fn scheme_config(scheme: SchemeKind) -> TwoBeamConfig {
    let mut cfg = TwoBeamConfig::default();
    cfg.sim.scheme = scheme;
    if scheme == SchemeKind::Pi {
        cfg.sim.macro_vars = cfg.sim.moments;
    }
    cfg
}

fn two_beam_symmetry() -> Check {
    let mut worst = 0.0_f64;
    let mut snaps = 0;
    for scheme in SchemeKind::ALL {
        let mut cfg = scheme_config(scheme);
        cfg.sim.snapshots = 4;
        let out = two_beam(&cfg).map_err(|e| format!("{scheme}: {e}"))?;
        for p in &out.profiles {
            snaps += 1;
            let n = p.x.len();
            for i in 0..n {
                let j = n - 1 - i;
                worst = worst
                    .max((p.rho[i] - p.rho[j]).abs())
                    .max((p.u[i] + p.u[j]).abs())
                    .max((p.q[i] + p.q[j]).abs());
            }
        }
    }
    ensure(
        worst <= 1e-10,
        format!("max mirror defect {worst:.2e} over {snaps} snapshots of 7 schemes (limit 1e-10)"),
    )
}

fn relaxation_exactness() -> Check {
    let (eps, dt, steps) = (1e-4, 3e-5, 100);
    let w0 = [1.0, 0.2, 1.1, 0.1, -0.05, 0.02, 0.01, -3e-3, 1e-3];
    let grid = Grid1D::new(0.0, 1.0, 8).unwrap();
    let field = Field::from_fn(grid, w0.len(), |_| w0.to_vec()).unwrap();
    let cfg = SimConfig {
        scheme: SchemeKind::MicroExplicit,
        moments: w0.len(),
        eps,
        dt_micro: Some(dt),
        t_end: steps as f64 * dt,
        ..Default::default()
    };
    let out = run(&field, &cfg).unwrap().pop().unwrap();
    let factor = 1.0 - dt / eps;
    let mut worst = 0.0_f64;
    for w in out.cells() {
        for i in 3..w0.len() {
            let want = factor.powi(steps) * w0[i];
            worst = worst.max((w[i] - want).abs() / want.abs());
        }
        for i in 0..3 {
            worst = worst.max((w[i] - w0[i]).abs());
        }
    }
    let limit = steps as f64 * f64::EPSILON;
    ensure(
        worst <= limit,
        format!("max relative defect {worst:.2e} after {steps} steps (limit {limit:.1e})"),
    )
}

fn cpi_pi_degeneracy() -> Check {
    let pi = scheme_config(SchemeKind::Pi);
    let mut cpi = pi.clone();
    cpi.sim.scheme = SchemeKind::Cpi;
    let a = two_beam(&pi).map_err(|e| e.to_string())?;
    let b = two_beam(&cpi).map_err(|e| e.to_string())?;
    let same = a.snapshots.len() == b.snapshots.len()
        && a.snapshots.iter().zip(&b.snapshots).all(|(x, y)| {
            x.data()
                .iter()
                .zip(y.data())
                .all(|(p, q)| p.to_bits() == q.to_bits())
        });
    ensure(
        same,
        format!(
            "CPI with L = M = {} bitwise equal to PI: {same}",
            pi.sim.moments
        ),
    )
}

fn speedup() -> Check {
    let start = Instant::now();
    let rows = speedup_bench(&TwoBeamConfig::default(), &[1e-3, 1e-4, 1e-5], 3)
        .map_err(|e| e.to_string())?;
    let mm: Vec<_> = rows
        .iter()
        .filter(|r| r.scheme == SchemeKind::MmHme)
        .collect();
    let times: Vec<f64> = mm.iter().map(|r| r.wall.as_secs_f64()).collect();
    let (lo, hi) = times
        .iter()
        .fold((f64::MAX, 0.0_f64), |(a, b), &t| (a.min(t), b.max(t)));
    let variation = hi / lo - 1.0;
    let s = mm
        .iter()
        .find(|r| r.eps == 1e-5)
        .map(|r| r.speedup)
        .unwrap_or(0.0);
    let detail = format!(
        "speedup at ε=1e-5 {s:.1} (limit ≥ 10); mMHME times {} s, variation {:.1}% (limit 20%)",
        times
            .iter()
            .map(|t| format!("{t:.3}"))
            .collect::<Vec<_>>()
            .join("/"),
        100.0 * variation
    );
    ensure(s >= 10.0 && variation < 0.2, detail.clone())?;
    within(Duration::from_secs(600), start.elapsed(), detail)
}

fn equilibrium_fixed_point() -> Check {
    let (rho, u, theta) = (1.2, 0.3, 0.9);
    let mut worst = 0.0_f64;
    for scheme in SchemeKind::ALL {
        let mut sim = scheme_config(scheme).sim;
        let model = sim.micro_model();
        let w = match model {
            ModelKind::Hsm(m) => maxwellian_coefficients(rho, u, theta, m).unwrap(),
            ModelKind::Euler => vec![rho, u, theta],
            ModelKind::Hme(m) => {
                let mut w = vec![0.0; m];
                w[..3].copy_from_slice(&[rho, u, theta]);
                w
            }
        };
        let grid = Grid1D::new(-1.0, 1.0, 16).unwrap();
        let field = Field::from_fn(grid, w.len(), |_| w.clone()).unwrap();
        let steps = sim.resolve(&field).unwrap();
        let h = match scheme {
            SchemeKind::MicroExplicit | SchemeKind::MicroSplitting => steps.dt_micro,
            _ => steps.dt_macro,
        };
        sim.t_end = 1000.0 * h;
        sim.snapshots = 1000;
        let snaps = run(&field, &sim).map_err(|e| format!("{scheme}: {e}"))?;
        if snaps.len() != 1001 {
            return Err(format!(
                "{scheme}: {} snapshots instead of 1001",
                snaps.len()
            ));
        }
        for s in &snaps {
            for (a, b) in s.data().iter().zip(field.data()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    ensure(
        worst <= 1e-14,
        format!("max deviation {worst:.2e} over 1000 steps of 7 schemes (limit 1e-14)"),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("orthonormality", orthonormality),
        ("matching oracle equivalence", matching_oracle),
        ("matching optimality", matching_optimality),
        ("HSM matching degeneracy", hsm_degeneracy),
        ("matching study monotone", matching_study_monotone),
        ("consistency operator limit", consistency_limit),
        ("consistency sweep monotone", consistency_sweep_monotone),
        ("two-beam symmetry", two_beam_symmetry),
        ("relaxation exactness", relaxation_exactness),
        ("CPI/PI degeneracy", cpi_pi_degeneracy),
        ("speedup", speedup),
        ("equilibrium fixed point", equilibrium_fixed_point),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let result =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2} {name}: {detail}", n + 1);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
