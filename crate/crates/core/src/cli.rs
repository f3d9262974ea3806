//! Command-line front end: `simulate`, `unfold`, `verify` and `demo`.
//!
//! Every command writes its CSV/JSON artifacts into the output directory
//! (`--out`, else `$KEPLER_UNFOLD_OUT`, else `.`) and prints the JSON summary
//! on stdout. Flags may also be given in a `key = value` file passed with
//! `--config`; flags on the command line take precedence.
//!
//! Exit codes: 0 success, 1 a tolerance check failed, 2 configuration error
//! (nothing is written), 3 integration failure, 4 I/O failure. Errors are
//! reported on stderr as a single JSON object.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Matrix2;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::integrate::{integrate, IntegratorConfig, Trajectory};
use crate::phase_geometry::{ks_lift, FiberAngle, State3};
use crate::reduction::{
    check_equivariance, compare_unfoldings, compare_with_kepler, radial_setup, reduce_calogero,
    unfold_kepler, KeplerComparison, UnfoldOptions, UnfoldResult, GRID_POINTS,
};
use crate::symplectic::{run_suite, Suite, SuiteReport};
use crate::systems::{
    calogero_energy, calogero_moser_field, completed_oscillator_field, conformal_kepler_system,
    free_particle_system, kepler_system, radial_reduced_field, DynamicalSystem, EnergyScaling,
    RadialVariant,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "KEPLER_UNFOLD_OUT";

pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTEGRATION: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "kepler-unfold",
    version,
    about = "Kepler orbits as projected 4-D oscillators"
)]
pub struct Cli {
    /// File of `key = value` lines (flag names without dashes, `#` comments).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one of the vector fields and write its trajectory.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Unfold a Kepler orbit into the oscillator family and project it back.
    #[command(args_override_self = true)]
    Unfold(UnfoldArgs),
    /// Check a table of Poisson-bracket structure constants.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Run a reduction demo against its oracle.
    #[command(args_override_self = true)]
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IntegratorArgs {
    #[arg(long, default_value_t = 1e-12)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-14)]
    pub abs_tol: f64,
    #[arg(long)]
    pub max_step: Option<f64>,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_steps: usize,
}

impl IntegratorArgs {
    fn config(&self) -> Result<IntegratorConfig, Error> {
        let cfg = IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step.unwrap_or(f64::INFINITY),
            initial_step: None,
            max_steps: self.max_steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemName {
    Kepler,
    Conformal,
    Oscillator,
    Free3d,
    Radial,
    Calogero,
}

impl SystemName {
    fn label(self) -> &'static str {
        match self {
            SystemName::Kepler => "kepler",
            SystemName::Conformal => "conformal",
            SystemName::Oscillator => "oscillator",
            SystemName::Free3d => "free3d",
            SystemName::Radial => "radial",
            SystemName::Calogero => "calogero",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub system: SystemName,
    /// Position for kepler, conformal and free3d.
    #[arg(long, value_parser = parse_vec::<3>, allow_hyphen_values = true)]
    pub x: Option<[f64; 3]>,
    /// Velocity for kepler, conformal and free3d.
    #[arg(long, value_parser = parse_vec::<3>, allow_hyphen_values = true)]
    pub v: Option<[f64; 3]>,
    /// Oscillator position `Y¹,Y²,Y³,Y⁰`.
    #[arg(long = "Y", value_parser = parse_vec::<4>, allow_hyphen_values = true)]
    pub big_y: Option<[f64; 4]>,
    /// Oscillator velocity `U¹,U²,U³,U⁰`.
    #[arg(long = "U", value_parser = parse_vec::<4>, allow_hyphen_values = true)]
    pub big_u: Option<[f64; 4]>,
    /// Oscillator energy, or the energy level of the radial reduction.
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    /// Radial coordinate and radial velocity `r,ṙ`.
    #[arg(long, value_parser = parse_vec::<2>, allow_hyphen_values = true)]
    pub radial: Option<[f64; 2]>,
    /// Calogero positions `q₁,q₂`.
    #[arg(long, value_parser = parse_vec::<2>, allow_hyphen_values = true)]
    pub q: Option<[f64; 2]>,
    /// Calogero velocities `q̇₁,q̇₂`.
    #[arg(long, value_parser = parse_vec::<2>, allow_hyphen_values = true)]
    pub qdot: Option<[f64; 2]>,
    /// Calogero coupling, or the angular momentum of the radial reduction.
    #[arg(long, allow_hyphen_values = true)]
    pub l: Option<f64>,
    /// Fiber angle of the lift for the conformal system.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long)]
    pub t_end: f64,
    /// Fail (exit 1) when the energy drift exceeds this value.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A single fiber angle or a sweep `start..end:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Single(f64),
    Sweep { start: f64, end: f64, count: usize },
}

impl LambdaSpec {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            LambdaSpec::Single(l) => vec![l],
            LambdaSpec::Sweep {
                start, count: 1, ..
            } => vec![start],
            LambdaSpec::Sweep { start, end, count } => (0..count)
                .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }
}

impl FromStr for LambdaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let Some((range, count)) = s.split_once(':') else {
            return num(s).map(LambdaSpec::Single);
        };
        let (start, end) = range
            .split_once("..")
            .ok_or_else(|| format!("expected start..end:count, got `{s}`"))?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|e| format!("`{count}`: {e}"))?;
        if count == 0 {
            return Err("sweep count must be positive".into());
        }
        Ok(LambdaSpec::Sweep {
            start: num(start)?,
            end: num(end)?,
            count,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UnfoldArgs {
    #[arg(long, value_parser = parse_vec::<3>, allow_hyphen_values = true)]
    pub x: [f64; 3],
    #[arg(long, value_parser = parse_vec::<3>, allow_hyphen_values = true)]
    pub v: [f64; 3],
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Parameter span of the upstairs run.
    #[arg(long, conflicts_with = "periods")]
    pub tau_end: Option<f64>,
    /// Number of Kepler periods to cover (bound orbits; default 1).
    #[arg(long)]
    pub periods: Option<f64>,
    /// Energy-dependent time scaling `g`: unit, inverse-energy or inverse-abs-energy.
    #[arg(long, default_value = "unit")]
    pub scaling: String,
    /// Fiber angle, or a sweep `start..end:count`.
    #[arg(long, default_value = "0", value_parser = LambdaSpec::from_str, allow_hyphen_values = true)]
    pub lambda: LambdaSpec,
    /// Largest admissible divergence from direct Kepler integration.
    #[arg(long, default_value_t = 1e-7)]
    pub tolerance: f64,
    /// Largest admissible spread between the runs of a gauge sweep.
    #[arg(long, default_value_t = 1e-8)]
    pub gauge_tolerance: f64,
    #[arg(long, default_value_t = GRID_POINTS)]
    pub grid: usize,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum SuiteChoice {
    One(Suite),
    All(String),
}

impl FromStr for SuiteChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            Ok(SuiteChoice::All(s.into()))
        } else {
            Suite::from_str(s)
                .map(SuiteChoice::One)
                .map_err(|e| e.to_string())
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// kepler-algebra, oscillator-u4, commutant-su2xsu2, reduction-criterion,
    /// rescaled-so4 or all.
    #[arg(long, value_parser = SuiteChoice::from_str)]
    pub suite: SuiteChoice,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoName {
    Radial,
    Calogero,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DemoArgs {
    #[arg(value_enum)]
    pub name: DemoName,
    /// Calogero coupling (default `−1/√2`).
    #[arg(long, allow_hyphen_values = true)]
    pub l: Option<f64>,
    /// Time span (radial 10, calogero 2).
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Divergence threshold (radial 1e-8; calogero 1e-6, or 1e-10 at ℓ = 0).
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_vec<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0f64; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("`{p}`: {e}"))?;
        if !o.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
    }
    Ok(out)
}

/// Parses `key = value` lines into `--key=value` tokens. Blank lines and text
/// after `#` are ignored; `key = true` becomes a bare `--key` and
/// `key = false` is dropped.
pub fn config_tokens(text: &str) -> Result<Vec<String>, Error> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if key.is_empty() {
            return Err(Error::Config(format!("config line {}: empty key", i + 1)));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => out.push(format!("--{key}={value}")),
        }
    }
    Ok(out)
}

/// Splices the config file tokens in right after the subcommand name so that
/// later command-line flags override them.
fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, Error> {
    let mut path = None;
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            path = args.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.into());
        } else if sub.is_none() && !a.starts_with('-') {
            sub = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(sub)) = (path, sub) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| {
        Error::Config(format!(
            "cannot read config {}: {e}",
            Path::new(&path).display()
        ))
    })?;
    let tokens = config_tokens(&text)?;
    let mut merged = args[..=sub].to_vec();
    merged.extend(tokens.into_iter().map(OsString::from));
    merged.extend_from_slice(&args[sub + 1..]);
    Ok(merged)
}

/// Process exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidState(_)
        | Error::UnknownObservable(_)
        | Error::ChartMismatch { .. }
        | Error::ConstraintViolated { .. }
        | Error::NotAntiHermitian { .. } => EXIT_CONFIG,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
        _ => EXIT_INTEGRATION,
    }
}

fn error_kind(code: i32) -> &'static str {
    match code {
        EXIT_CONFIG => "config",
        EXIT_INTEGRATION => "integration",
        EXIT_IO => "io",
        _ => "failure",
    }
}

fn report_error(code: i32, message: &str) -> i32 {
    let v = json!({ "error": error_kind(code), "exit_code": code, "message": message });
    eprintln!("{v}");
    code
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => return report_error(EXIT_CONFIG, &e.to_string()),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            return report_error(EXIT_CONFIG, e.to_string().trim());
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, cli.config.as_deref()),
        Command::Unfold(a) => cmd_unfold(a, cli.config.as_deref()),
        Command::Verify(a) => cmd_verify(a, cli.config.as_deref()),
        Command::Demo(a) => cmd_demo(a, cli.config.as_deref()),
    };
    match outcome {
        Ok(pass) if pass => 0,
        Ok(_) => EXIT_FAIL,
        Err(e) => report_error(exit_code(&e), &e.to_string()),
    }
}

/// Files produced by a command, written only after it succeeded.
struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(out: &Option<PathBuf>) -> Self {
        let dir = out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        Self {
            dir,
            files: Vec::new(),
        }
    }

    fn csv(
        &mut self,
        name: String,
        write: impl FnOnce(&mut Vec<u8>) -> Result<(), Error>,
    ) -> Result<(), Error> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name, buf));
        Ok(())
    }

    /// Writes all files plus the summary, and prints the summary.
    fn finish(mut self, name: &str, summary: &Value) -> Result<(), Error> {
        let mut text = serde_json::to_vec_pretty(summary)?;
        text.push(b'\n');
        println!("{}", String::from_utf8_lossy(&text).trim_end());
        self.files.push((format!("{name}.json"), text));
        fs::create_dir_all(&self.dir)?;
        for (file, bytes) in &self.files {
            fs::write(self.dir.join(file), bytes)?;
        }
        Ok(())
    }
}

fn require<T: Copy>(value: Option<T>, flag: &str, system: &str) -> Result<T, Error> {
    value.ok_or_else(|| Error::Config(format!("system {system} requires --{flag}")))
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn simulate_setup(a: &SimulateArgs) -> Result<(DynamicalSystem, Vec<f64>, Vec<String>), Error> {
    let name = a.system.label();
    let xv = || -> Result<Vec<f64>, Error> {
        let (x, v) = (require(a.x, "x", name)?, require(a.v, "v", name)?);
        Ok(x.iter().chain(&v).copied().collect())
    };
    let xv_labels = labels(&["x1", "x2", "x3", "v1", "v2", "v3"]);
    Ok(match a.system {
        SystemName::Kepler => (kepler_system(a.k), xv()?, xv_labels),
        SystemName::Free3d => (free_particle_system(), xv()?, xv_labels),
        SystemName::Conformal => {
            let p = State3::from_slice(&xv()?);
            let s = ks_lift(&p, FiberAngle(a.lambda))?;
            (
                conformal_kepler_system(a.k),
                s.to_array().to_vec(),
                labels(&["y1", "y2", "y3", "y0", "u1", "u2", "u3", "u0"]),
            )
        }
        SystemName::Oscillator => {
            let (y, u) = (require(a.big_y, "Y", name)?, require(a.big_u, "U", name)?);
            (
                completed_oscillator_field(require(a.energy, "energy", name)?),
                y.iter().chain(&u).copied().collect(),
                labels(&["Y1", "Y2", "Y3", "Y0", "U1", "U2", "U3", "U0"]),
            )
        }
        SystemName::Radial => {
            let variant = match (a.energy, a.l) {
                (_, Some(l)) => RadialVariant::FixedAngularMomentum(l),
                (Some(e), None) => RadialVariant::FixedEnergy(e),
                (None, None) => {
                    return Err(Error::Config(
                        "system radial requires --energy or --l".into(),
                    ))
                }
            };
            let s = require(a.radial, "radial", name)?;
            (
                radial_reduced_field(variant),
                s.to_vec(),
                labels(&["r", "vr"]),
            )
        }
        SystemName::Calogero => {
            let l = require(a.l, "l", name)?;
            let (q, p) = (require(a.q, "q", name)?, require(a.qdot, "qdot", name)?);
            (
                calogero_moser_field(l).with_energy(calogero_energy(l)),
                q.iter().chain(&p).copied().collect(),
                labels(&["q1", "q2", "qdot1", "qdot2"]),
            )
        }
    })
}

fn drift_map(traj: &Trajectory) -> Value {
    let mut m = serde_json::Map::new();
    for (name, d) in traj.monitor_drifts() {
        m.insert(name, json!(d));
    }
    Value::Object(m)
}

pub fn cmd_simulate(a: &SimulateArgs, config: Option<&Path>) -> Result<bool, Error> {
    let cfg = a.integrator.config()?;
    if !(a.t_end >= 0.0 && a.t_end.is_finite()) {
        return Err(Error::Config(format!(
            "--t-end must be non-negative, got {}",
            a.t_end
        )));
    }
    let (sys, s0, names) = simulate_setup(a)?;
    let mut monitors: Vec<_> = sys.energy().into_iter().cloned().collect();
    for c in sys.constants() {
        if !monitors.iter().any(|m| m.name() == c.name()) {
            monitors.push(c.clone());
        }
    }
    let clock = Instant::now();
    let traj = integrate(&sys, &s0, a.t_end, &cfg, &monitors)?.with_labels(names);
    let wall_time = clock.elapsed().as_secs_f64();

    let energy_drift = sys.energy().and_then(|e| {
        traj.monitor_drifts()
            .into_iter()
            .find(|(n, _)| n == e.name())
            .map(|(_, d)| d)
    });
    let closure = traj
        .final_state()
        .iter()
        .zip(traj.initial_state())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let pass = match (a.tolerance, energy_drift) {
        (Some(tol), Some(d)) => d < tol,
        _ => true,
    };
    let stem = format!("simulate-{}", a.system.label());
    let mut art = Artifacts::new(&a.out);
    art.csv(format!("{stem}.csv"), |w| traj.write_csv(w))?;
    let summary = json!({
        "command": "simulate",
        "config": a,
        "config_file": config,
        "system": sys.name(),
        "steps": traj.len() - 1,
        "t_end": traj.t_end(),
        "final_state": traj.final_state(),
        "energy": sys.energy().map(|e| e.name()),
        "energy_drift": energy_drift,
        "monitor_drifts": drift_map(&traj),
        "closure": closure,
        "tolerance": a.tolerance,
        "pass": pass,
        "wall_time_s": wall_time,
    });
    art.finish(&stem, &summary)?;
    Ok(pass)
}

fn comparison_json(res: Result<KeplerComparison, Error>, tol: f64) -> (Value, Option<bool>) {
    match res {
        Ok(c) => {
            let pass = c.max_divergence < tol;
            (
                json!({ "comparison": c, "tolerance": tol, "pass": pass }),
                Some(pass),
            )
        }
        Err(e) => (json!({ "error": e.to_string() }), None),
    }
}

fn unfold_run_json(r: &UnfoldResult, kepler: Value) -> Value {
    let drifts: serde_json::Map<String, Value> = r
        .monitor_drifts()
        .into_iter()
        .map(|(n, d)| (n, json!(d)))
        .collect();
    json!({
        "lambda": r.gauge.radians(),
        "lifted": r.lifted.to_array(),
        "energy": r.energy,
        "g": r.g,
        "scaling": r.scaling,
        "tau_end": r.trajectory.t_end(),
        "t_end": r.t_end(),
        "steps": r.trajectory.len() - 1,
        "collision": r.collision,
        "collision_regularized": r.collision.regularized,
        "monitor_drifts": drifts,
        "kepler": kepler,
    })
}

pub fn cmd_unfold(a: &UnfoldArgs, config: Option<&Path>) -> Result<bool, Error> {
    let cfg = a.integrator.config()?;
    let scaling = EnergyScaling::from_str(&a.scaling).map_err(Error::Config)?;
    let p0 = State3::new(a.x, a.v);
    if !(p0.radius() > 0.0) {
        return Err(Error::Config("--x must be away from the origin".into()));
    }
    if !(a.k > 0.0) {
        return Err(Error::Config(format!("--k must be positive, got {}", a.k)));
    }
    let energy = 0.5 * p0.v.norm_squared() - a.k / p0.radius();
    let g = scaling.factor(energy)?;
    let tau_end = match (a.tau_end, a.periods) {
        (Some(t), _) => t,
        (None, periods) if energy < 0.0 => {
            // One Kepler period is half an upstairs period.
            periods.unwrap_or(1.0) * std::f64::consts::PI / (g * (-2.0 * energy).sqrt())
        }
        (None, _) => {
            return Err(Error::Config(format!(
                "energy {energy} is not negative: --tau-end is required"
            )))
        }
    };
    if !(tau_end >= 0.0 && tau_end.is_finite()) {
        return Err(Error::Config(format!(
            "parameter span must be non-negative, got {tau_end}"
        )));
    }
    let lambdas = a.lambda.values();

    let clock = Instant::now();
    let mut runs = Vec::with_capacity(lambdas.len());
    for &l in &lambdas {
        let options = UnfoldOptions {
            scaling: scaling.clone(),
            gauge: FiberAngle(l),
            integrator: cfg,
            k: a.k,
        };
        runs.push(unfold_kepler(&p0, tau_end, &options)?);
    }

    let first = &runs[0];
    let t_common = runs.iter().map(|r| r.t_end()).fold(f64::INFINITY, f64::min);
    let direct = compare_with_kepler(first, first.t_end(), a.grid, &cfg);
    let direct_failed_at_collision = direct.is_err() && first.collision.regularized;
    let (kepler_json, kepler_pass) = comparison_json(direct, a.tolerance);
    let mut gauge_spread = 0.0f64;
    for r in &runs[1..] {
        gauge_spread =
            gauge_spread.max(compare_unfoldings(first, r, t_common, a.grid)?.max_divergence);
    }
    let gauge_pass = gauge_spread < a.gauge_tolerance;
    let pass = gauge_pass && kepler_pass.unwrap_or(direct_failed_at_collision);

    let mut art = Artifacts::new(&a.out);
    let mut run_json = Vec::with_capacity(runs.len());
    for (i, r) in runs.iter().enumerate() {
        let name = if runs.len() == 1 {
            "unfold.csv".to_string()
        } else {
            format!("unfold-{i:02}.csv")
        };
        art.csv(name.clone(), |w| r.write_csv(w))?;
        let kepler = if i == 0 {
            kepler_json.clone()
        } else {
            Value::Null
        };
        let mut v = unfold_run_json(r, kepler);
        v["csv"] = json!(name);
        run_json.push(v);
    }
    let summary = json!({
        "command": "unfold",
        "config": a,
        "config_file": config,
        "energy": first.energy,
        "collision_regularized": first.collision.regularized,
        "max_divergence": kepler_json.pointer("/comparison/max_divergence"),
        "gauge_spread": gauge_spread,
        "gauge_tolerance": a.gauge_tolerance,
        "runs": run_json,
        "pass": pass,
        "wall_time_s": clock.elapsed().as_secs_f64(),
    });
    art.finish("unfold", &summary)?;
    Ok(pass)
}

pub fn cmd_verify(a: &VerifyArgs, config: Option<&Path>) -> Result<bool, Error> {
    if a.samples == 0 {
        return Err(Error::Config("--samples must be positive".into()));
    }
    let suites: Vec<Suite> = match a.suite {
        SuiteChoice::One(s) => vec![s],
        SuiteChoice::All(_) => Suite::ALL.to_vec(),
    };
    let reports: Vec<SuiteReport> = suites
        .iter()
        .map(|&s| run_suite(s, a.samples, a.seed, a.k))
        .collect::<Result<_, _>>()?;
    let pass = reports.iter().all(|r| r.pass);
    let summary_rows: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "suite": r.suite,
                "tolerance": r.suite.tolerance(),
                "max_residual": r.max_residual(),
                "pass": r.pass,
            })
        })
        .collect();
    let stem = match &a.suite {
        SuiteChoice::One(s) => format!("verify-{}", s.name()),
        SuiteChoice::All(_) => "verify-all".into(),
    };
    let summary = json!({
        "command": "verify",
        "config": a,
        "config_file": config,
        "summary": summary_rows,
        "reports": reports,
        "pass": pass,
    });
    Artifacts::new(&a.out).finish(&stem, &summary)?;
    Ok(pass)
}

/// Free motion from `x = (1, 0, 0)`, `v = (0, 1, 0)`, with `r(t) = √(1 + t²)`.
fn radial_demo(a: &DemoArgs, cfg: &IntegratorConfig) -> Result<(Value, f64, f64), Error> {
    let t_end = a.t_end.unwrap_or(10.0);
    let tol = a.tolerance.unwrap_or(1e-8);
    let s0 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let mut reports = Vec::new();
    let mut worst = 0.0f64;
    for variant in [
        RadialVariant::FixedEnergy(0.5),
        RadialVariant::FixedAngularMomentum(1.0),
    ] {
        let setup = radial_setup(variant)?;
        let rep = check_equivariance(&setup, &s0, t_end, tol, cfg)?;
        let reduced = integrate(&setup.downstairs, &[1.0, 0.0], t_end, cfg, &[])?;
        let mut oracle = 0.0f64;
        for i in 0..GRID_POINTS {
            let t = t_end * i as f64 / (GRID_POINTS - 1) as f64;
            let r = reduced.state_at(t)?[0];
            oracle = oracle.max((r - (1.0 + t * t).sqrt()).abs());
        }
        worst = worst.max(rep.max_divergence).max(oracle);
        reports.push(json!({
            "variant": format!("{variant:?}"),
            "equivariance": rep,
            "oracle_divergence": oracle,
        }));
    }
    Ok((json!(reports), worst, tol))
}

/// `X₀ = diag(0, 1)`, `V₀ = [[−0.3, −ℓ], [−ℓ, 0.2]]`, whose coupling is `ℓ`.
fn calogero_demo(a: &DemoArgs, cfg: &IntegratorConfig) -> Result<(Value, f64, f64), Error> {
    let l = a.l.unwrap_or(-std::f64::consts::FRAC_1_SQRT_2);
    let t_end = a.t_end.unwrap_or(2.0);
    let tol = a.tolerance.unwrap_or(if l == 0.0 { 1e-10 } else { 1e-6 });
    let x0 = Matrix2::new(0.0, 0.0, 0.0, 1.0);
    let v0 = Matrix2::new(-0.3, -l, -l, 0.2);
    let rep = reduce_calogero(&x0, &v0, t_end, cfg)?;
    let worst = rep.max_divergence;
    Ok((
        json!({ "x0": x0.as_slice(), "v0": v0.as_slice(), "report": rep }),
        worst,
        tol,
    ))
}

pub fn cmd_demo(a: &DemoArgs, config: Option<&Path>) -> Result<bool, Error> {
    let cfg = a.integrator.config()?;
    if let Some(t) = a.t_end {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Config(format!(
                "--t-end must be non-negative, got {t}"
            )));
        }
    }
    let (detail, divergence, tol) = match a.name {
        DemoName::Radial => radial_demo(a, &cfg)?,
        DemoName::Calogero => calogero_demo(a, &cfg)?,
    };
    let pass = divergence < tol;
    let stem = match a.name {
        DemoName::Radial => "demo-radial",
        DemoName::Calogero => "demo-calogero",
    };
    let summary = json!({
        "command": "demo",
        "config": a,
        "config_file": config,
        "max_divergence": divergence,
        "tolerance": tol,
        "pass": pass,
        "detail": detail,
    });
    Artifacts::new(&a.out).finish(stem, &summary)?;
    Ok(pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines_become_flags() {
        let t = config_tokens(
            "# run\nsystem = kepler\nt_end = 6.28  # one period\n\nverbose = true\nquiet = false\n",
        )
        .unwrap();
        assert_eq!(t, ["--system=kepler", "--t-end=6.28", "--verbose"]);
        assert!(config_tokens("no equals sign").is_err());
    }

    #[test]
    fn lambda_sweep_parses() {
        let s: LambdaSpec = "0..6.5:8".parse().unwrap();
        let v = s.values();
        assert_eq!(v.len(), 8);
        assert_eq!(v[0], 0.0);
        assert!((v[7] - 6.5).abs() < 1e-15);
        assert_eq!(
            "1.5".parse::<LambdaSpec>().unwrap(),
            LambdaSpec::Single(1.5)
        );
        assert!("0..1:0".parse::<LambdaSpec>().is_err());
    }

    #[test]
    fn vectors_need_exact_length() {
        assert_eq!(parse_vec::<3>("1, -2,3e-1").unwrap(), [1.0, -2.0, 0.3]);
        assert!(parse_vec::<3>("1,2").is_err());
        assert!(parse_vec::<2>("1,nan").is_err());
    }
}
