//! Command-line front end: argument and config-file parsing, experiment
//! dispatch and CSV output.
//!
//! Exit codes: 0 on success, 2 for invalid or inconsistent configuration,
//! 1 for failures while running.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::basis::ModelTag;
use crate::error::{Error, Result};
use crate::experiments::{
    consistency_sweep, matching_study, speedup_bench, two_beam, BenchResult, Profile, SweepRow,
    TwoBeamConfig,
};
use crate::grid::SpatialOrder;
use crate::schemes::SchemeKind;

#[derive(Debug, Parser)]
#[command(
    name = "micromacro",
    version,
    about = "Micro-macro acceleration for BGK moment models in 1D"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two colliding beams; writes one `x,rho,u,theta,p,q` CSV per snapshot.
    TwoBeam(RunArgs),
    /// Weighted L² error of matching the bimodal prior for L = 3..7.
    MatchingStudy(StudyArgs),
    /// Distance of mMHME and CPI to the explicit micro reference per CFL number.
    ConsistencySweep(SweepArgs),
    /// Single-thread wall times of micro, mMHME and Euler runs per ε.
    Bench(BenchArgs),
}

/// Flags shared by the simulation commands; unset flags fall back to the
/// `--config` file, then to the defaults.
#[derive(Debug, Default, Clone, Args)]
pub struct SimArgs {
    /// Plain-text `key = value` file; keys are the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mmhme, mmhsm, pi, cpi, micro, micro-split or euler.
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<SchemeKind>,
    /// Micro model of the pi, cpi, micro and micro-split schemes: hme or hsm.
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelTag>,
    /// Number of micro variables M.
    #[arg(long)]
    pub moments: Option<usize>,
    /// Number of macro variables L.
    #[arg(long = "macro")]
    pub macro_vars: Option<usize>,
    #[arg(long = "dt-micro", allow_hyphen_values = true)]
    pub dt_micro: Option<f64>,
    #[arg(long = "dt-macro", allow_hyphen_values = true)]
    pub dt_macro: Option<f64>,
    /// Micro steps per macro step.
    #[arg(long = "micro-steps")]
    pub micro_steps: Option<usize>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub xmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub xmax: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub cfl: Option<f64>,
    /// Spatial order, 1 or 2.
    #[arg(long, value_parser = parse_order)]
    pub order: Option<SpatialOrder>,
    /// Reserved; every run is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; all available cores when unset.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Relaxation time ε.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    /// Snapshots after the initial one.
    #[arg(long)]
    pub snapshots: Option<usize>,
    /// Output prefix; files are `{out}_t{index}.csv`, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[arg(long, default_value_t = 8)]
    pub moments: usize,
    /// Factor between the exact state and the prior.
    #[arg(long, default_value_t = 1.2)]
    pub scale: f64,
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub eps: Option<f64>,
    /// CFL numbers, comma separated.
    #[arg(long = "cfl-list", value_delimiter = ',', default_values_t = [0.5, 0.4, 0.27])]
    pub cfl_list: Vec<f64>,
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Relaxation times, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-4, 1e-5])]
    pub eps: Vec<f64>,
    /// Timed runs per case; the fastest counts.
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    #[arg(long, default_value = "-")]
    pub out: String,
}

fn parse_scheme(s: &str) -> std::result::Result<SchemeKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_model(s: &str) -> std::result::Result<ModelTag, String> {
    match s {
        "hme" => Ok(ModelTag::Hme),
        "hsm" => Ok(ModelTag::Hsm),
        _ => Err(format!("unknown model '{s}', expected hme or hsm")),
    }
}

fn parse_order(s: &str) -> std::result::Result<SpatialOrder, String> {
    match s {
        "1" => Ok(SpatialOrder::First),
        "2" => Ok(SpatialOrder::Second),
        _ => Err(format!("unknown order '{s}', expected 1 or 2")),
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
}

/// Applies one `key = value` setting.
pub fn apply_setting(cfg: &mut TwoBeamConfig, key: &str, value: &str) -> Result<()> {
    let sim = &mut cfg.sim;
    let v = value.trim();
    match key.trim() {
        "scheme" => sim.scheme = v.parse()?,
        "model" => sim.model = parse_model(v).map_err(Error::Config)?,
        "moments" => sim.moments = parse_value(key, v)?,
        "macro" => sim.macro_vars = parse_value(key, v)?,
        "eps" => sim.eps = parse_value(key, v)?,
        "dt-micro" => sim.dt_micro = Some(parse_value(key, v)?),
        "dt-macro" => sim.dt_macro = Some(parse_value(key, v)?),
        "micro-steps" => sim.micro_steps = parse_value(key, v)?,
        "cells" => cfg.n_cells = parse_value(key, v)?,
        "xmin" => cfg.x_min = parse_value(key, v)?,
        "xmax" => cfg.x_max = parse_value(key, v)?,
        "t-end" => sim.t_end = parse_value(key, v)?,
        "cfl" => sim.cfl = parse_value(key, v)?,
        "order" => sim.order = parse_order(v).map_err(Error::Config)?,
        "snapshots" => sim.snapshots = parse_value(key, v)?,
        "seed" => {
            parse_value::<u64>(key, v)?;
        }
        other => return Err(Error::Config(format!("unknown config key '{other}'"))),
    }
    Ok(())
}

/// Applies a config file: one `key = value` per line, `#` starts a comment.
pub fn apply_config_text(cfg: &mut TwoBeamConfig, text: &str) -> Result<()> {
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("config line {}: expected 'key = value'", n + 1))
        })?;
        apply_setting(cfg, k, v)?;
    }
    Ok(())
}

impl SimArgs {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(&self, eps: Option<f64>, snapshots: Option<usize>) -> Result<TwoBeamConfig> {
        let mut cfg = TwoBeamConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            apply_config_text(&mut cfg, &text)?;
        }
        let sim = &mut cfg.sim;
        macro_rules! set {
            ($flag:expr => $slot:expr) => {
                if let Some(v) = $flag {
                    $slot = v;
                }
            };
        }
        set!(self.scheme => sim.scheme);
        set!(self.model => sim.model);
        set!(self.moments => sim.moments);
        set!(self.macro_vars => sim.macro_vars);
        set!(self.dt_micro.map(Some) => sim.dt_micro);
        set!(self.dt_macro.map(Some) => sim.dt_macro);
        set!(self.micro_steps => sim.micro_steps);
        set!(self.t_end => sim.t_end);
        set!(self.cfl => sim.cfl);
        set!(self.order => sim.order);
        set!(eps => sim.eps);
        set!(snapshots => sim.snapshots);
        set!(self.cells => cfg.n_cells);
        set!(self.xmin => cfg.x_min);
        set!(self.xmax => cfg.x_max);
        if self.threads == Some(0) {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        cfg.grid()?;
        cfg.sim.validate()?;
        Ok(cfg)
    }
}

fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn open_out(path: &str) -> Result<Box<dyn Write>> {
    if path == "-" {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(io::BufWriter::new(File::create(path)?)))
    }
}

fn write_table(out: Box<dyn Write>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a snapshot as CSV with columns `x,rho,u,theta,p,q`.
pub fn write_profile(out: impl Write, p: &Profile) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "rho", "u", "theta", "p", "q"])?;
    for i in 0..p.x.len() {
        w.write_record([p.x[i], p.rho[i], p.u[i], p.theta[i], p.p[i], p.q[i]].map(format_float))?;
    }
    w.flush()?;
    Ok(())
}

/// File for snapshot `index` of the output prefix `out`.
pub fn snapshot_path(out: &str, index: usize) -> PathBuf {
    let stem = out.strip_suffix(".csv").unwrap_or(out);
    PathBuf::from(format!("{stem}_t{index}.csv"))
}

/// Writes every profile to `{out}_t{index}.csv`, or all of them in sequence to
/// stdout for `-`, each with its own header row.
pub fn write_profiles(out: &str, profiles: &[Profile]) -> Result<()> {
    for (i, p) in profiles.iter().enumerate() {
        if out == "-" {
            write_profile(io::stdout().lock(), p)?;
        } else {
            let path = snapshot_path(out, i);
            if let Some(dir) = Path::new(&path)
                .parent()
                .filter(|d| !d.as_os_str().is_empty())
            {
                std::fs::create_dir_all(dir)?;
            }
            write_profile(io::BufWriter::new(File::create(&path)?), p)?;
        }
    }
    Ok(())
}

pub fn matching_rows(rows: &[(usize, f64)]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|(l, e)| vec![l.to_string(), format_float(*e)])
        .collect()
}

pub fn sweep_rows(rows: &[SweepRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.scheme.to_string(),
                format_float(r.cfl),
                format_float(r.dt_macro),
                format_float(r.distance),
            ]
        })
        .collect()
}

pub fn bench_rows(rows: &[BenchResult]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.scheme.to_string(),
                format_float(r.eps),
                format_float(r.wall.as_secs_f64()),
                r.steps.to_string(),
                format_float(r.speedup),
            ]
        })
        .collect()
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?
            .install(f),
    }
}

/// Runs one parsed command.
pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TwoBeam(a) => {
            let cfg = a.sim.resolve(a.eps, a.snapshots)?;
            let start = Instant::now();
            let out = with_threads(a.sim.threads, || two_beam(&cfg))?;
            eprintln!(
                "{}: {} steps, {} micro steps, δt = {:e}, Δt = {:e}, {:.3} s",
                cfg.sim.scheme,
                out.stats.steps,
                out.stats.micro_steps,
                out.stats.dt_micro,
                out.stats.dt_macro,
                start.elapsed().as_secs_f64()
            );
            write_profiles(&a.out, &out.profiles)
        }
        Command::MatchingStudy(a) => {
            let rows = matching_study(a.moments, a.scale, &[3, 4, 5, 6, 7])?;
            write_table(open_out(&a.out)?, &["L", "error"], &matching_rows(&rows))
        }
        Command::ConsistencySweep(a) => {
            let cfg = a.sim.resolve(a.eps, None)?;
            let rows = with_threads(a.sim.threads, || consistency_sweep(&cfg, &a.cfl_list))?;
            write_table(
                open_out(&a.out)?,
                &["scheme", "cfl", "dt_macro", "distance"],
                &sweep_rows(&rows),
            )
        }
        Command::Bench(a) => {
            let cfg = a.sim.resolve(None, None)?;
            if a.eps.iter().any(|e| !(*e > 0.0)) {
                return Err(Error::Config("relaxation times must be positive".into()));
            }
            let rows = speedup_bench(&cfg, &a.eps, a.repetitions)?;
            write_table(
                open_out(&a.out)?,
                &["scheme", "eps", "wall_s", "steps", "speedup"],
                &bench_rows(&rows),
            )
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("micromacro").chain(args.iter().copied())).unwrap()
    }

    fn run_args(args: &[&str]) -> RunArgs {
        match parse(args).command {
            Command::TwoBeam(a) => a,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_beam_defaults() {
        let a = run_args(&["two-beam"]);
        let cfg = a.sim.resolve(a.eps, a.snapshots).unwrap();
        assert_eq!(cfg, TwoBeamConfig::default());
        assert_eq!(a.out, "-");
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# two beams\nscheme = cpi\nmoments = 8\neps = 1e-3 # stiff\ncells=100\n",
        )
        .unwrap();
        let a = run_args(&[
            "two-beam",
            "--config",
            path.to_str().unwrap(),
            "--moments",
            "6",
            "--xmin",
            "-5",
        ]);
        let cfg = a.sim.resolve(a.eps, a.snapshots).unwrap();
        assert_eq!(cfg.sim.scheme, SchemeKind::Cpi);
        assert_eq!(cfg.sim.moments, 6);
        assert_eq!(cfg.sim.eps, 1e-3);
        assert_eq!(cfg.n_cells, 100);
        assert_eq!(cfg.x_min, -5.0);
    }

    #[test]
    fn bad_config_keys_and_values() {
        let mut cfg = TwoBeamConfig::default();
        assert!(apply_config_text(&mut cfg, "colour = red")
            .unwrap_err()
            .is_config());
        assert!(apply_config_text(&mut cfg, "eps = tiny")
            .unwrap_err()
            .is_config());
        assert!(apply_config_text(&mut cfg, "eps").unwrap_err().is_config());
    }

    #[test]
    fn inconsistent_flags_are_config_errors() {
        let a = run_args(&["two-beam", "--scheme", "pi", "--macro", "3"]);
        let e = a.sim.resolve(a.eps, a.snapshots).unwrap_err();
        assert!(e.is_config());
        assert!(e.to_string().contains("L must equal M"), "{e}");
        assert_eq!(
            parse_and_dispatch(["micromacro", "two-beam", "--scheme", "pi"]),
            2
        );
        assert_eq!(parse_and_dispatch(["micromacro", "two-beam", "--bogus"]), 2);
        assert_eq!(
            parse_and_dispatch(["micromacro", "two-beam", "--order", "3"]),
            2
        );
    }

    #[test]
    fn snapshot_paths() {
        assert_eq!(snapshot_path("out/run", 3), PathBuf::from("out/run_t3.csv"));
        assert_eq!(snapshot_path("run.csv", 0), PathBuf::from("run_t0.csv"));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let p = Profile {
            time: 0.0,
            x: vec![-0.1, 0.1],
            rho: vec![1.0, 1.0 / 3.0],
            u: vec![0.5, -0.5],
            theta: vec![1.0, std::f64::consts::PI],
            p: vec![1.0, 1e-300],
            q: vec![0.0, -2.0f64.sqrt()],
        };
        let mut buf = Vec::new();
        write_profile(&mut buf, &p).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        assert_eq!(
            r.headers().unwrap(),
            vec!["x", "rho", "u", "theta", "p", "q"]
        );
        let rows: Vec<Vec<f64>> = r
            .records()
            .map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect())
            .collect();
        for (i, row) in rows.iter().enumerate() {
            let want = [p.x[i], p.rho[i], p.u[i], p.theta[i], p.p[i], p.q[i]];
            for (a, b) in row.iter().zip(want) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn constant_equilibrium_rows() {
        let cfg = TwoBeamConfig {
            beam: 0.0,
            n_cells: 4,
            ..Default::default()
        };
        let p = Profile::of(&cfg.initial_field().unwrap(), cfg.sim.micro_model()).unwrap();
        let mut buf = Vec::new();
        write_profile(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            assert_eq!(&v[1..], &[1.0, 0.0, 1.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn list_flags() {
        match parse(&["bench", "--eps", "1e-3,1e-4"]).command {
            Command::Bench(b) => assert_eq!(b.eps, vec![1e-3, 1e-4]),
            other => panic!("{other:?}"),
        }
        match parse(&["consistency-sweep"]).command {
            Command::ConsistencySweep(s) => assert_eq!(s.cfl_list, vec![0.5, 0.4, 0.27]),
            other => panic!("{other:?}"),
        }
    }
}
