//! Command-line flags and their resolution into validated run settings.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pebm_core::experiments::{self, GridSpec};
use pebm_core::integrators::{CoupledOptions, PebmOptions};
use pebm_core::loading::{self, DeformationProgram, PrestrainKind};
use pebm_core::{Integrator, MaterialParams};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "pebm", version, about = "Material-point driver for finite-strain viscoplastic stress updates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrates one deformation program and writes the trajectory.
    Simulate(SimulateArgs),
    /// Step-size study against an EBMSC reference solution.
    Convergence(ConvergenceArgs),
    /// Single-step error maps around a prestrain endpoint.
    Isoerror(GridArgs),
    /// Newton iterations and matrix work per grid cell.
    Itercount(GridArgs),
    /// Weak-invariance audit and round-off study.
    Audit(AuditArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorName {
    Pebm,
    Ebmsc,
    Em,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramName {
    Keypoint,
    Shear,
    PrestrainTension,
    PrestrainTensionShear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrestrainName {
    Tension,
    TensionShear,
}

impl PrestrainName {
    pub fn kind(self) -> PrestrainKind {
        match self {
            Self::Tension => PrestrainKind::Tension,
            Self::TensionShear => PrestrainKind::TensionShear,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct CommonArgs {
    /// Material card: path to a JSON file or a bundled name (aa5754o, 42crmo4).
    #[arg(long, default_value = "aa5754o")]
    pub material: String,
    /// Drop the viscous terms of the card (eta = 0, m = 1).
    #[arg(long)]
    pub rate_independent: bool,
    /// Relaxation passes of PEBM, 1 to 10.
    #[arg(long, default_value_t = 3)]
    pub relax_passes: usize,
    /// Largest number of substeps of the baselines.
    #[arg(long, default_value_t = 256)]
    pub max_subincrements: usize,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct ProgramArgs {
    #[arg(long, value_enum, default_value = "keypoint")]
    pub program: ProgramName,
    /// Shear rate in 1/s.
    #[arg(long, default_value_t = 0.07)]
    pub rate: f64,
    /// Reversal times of the shear program in s, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub reversals: Vec<f64>,
    /// End time. Shear runs this long (default 10 s); keypoint (300 s) and
    /// prestrain (1) programs are rescaled in time.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Clone, Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub program: ProgramArgs,
    #[arg(long, value_enum, default_value = "pebm")]
    pub integrator: IntegratorName,
    /// Time step; ignored when --steps is given.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of uniform steps; defaults to 300 when --dt is absent.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub program: ProgramArgs,
    /// Integrators to run; all three by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub integrator: Vec<IntegratorName>,
    /// Step sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 5.0, 2.5, 1.25])]
    pub dt: Vec<f64>,
    /// Steps of the reference solution; defaults to a 0.0025 s step.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Prestrain scenarios; both by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub prestrain: Vec<PrestrainName>,
    /// Integrators to run; all three by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub integrator: Vec<IntegratorName>,
    /// Either `N` or `MIN:MAX:N` for the increments of F11 and F12.
    #[arg(long, default_value = "25", allow_hyphen_values = true)]
    pub grid: String,
    /// Yield stress replacing isotropic hardening; defaults per bundled card.
    #[arg(long)]
    pub yield_stress: Option<f64>,
}

#[derive(Clone, Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub program: ProgramArgs,
    #[arg(long, default_value_t = 300)]
    pub steps: usize,
    /// Number of random reference changes F0.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 20240601)]
    pub seed: u64,
    /// Values of xi' of the round-off study, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 1e-6, 1e-8, 1e-10])]
    pub xi_primes: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub roundoff_samples: usize,
}

/// Settings shared by every command after validation.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub material_source: String,
    pub material: MaterialParams,
    pub relax_passes: usize,
    pub max_subincrements: usize,
    pub threads: usize,
    pub out: PathBuf,
}

impl Resolved {
    pub fn integrator(&self, name: IntegratorName) -> Integrator {
        let coupled = CoupledOptions { max_subincrements: self.max_subincrements, ..Default::default() };
        match name {
            IntegratorName::Pebm => {
                Integrator::Pebm(PebmOptions { relaxation_passes: self.relax_passes, ..Default::default() })
            }
            IntegratorName::Ebmsc => Integrator::Ebmsc(coupled),
            IntegratorName::Em => Integrator::Em(coupled),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProgramConfig {
    pub name: ProgramName,
    pub label: String,
    pub duration: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reversals: Vec<f64>,
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var("PEBM_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            v.trim().parse().map_err(|_| config(format!("PEBM_THREADS must be a non-negative integer, got '{v}'")))
        }
        _ => Ok(0),
    }
}

pub fn load_material(source: &str) -> Result<MaterialParams, CliError> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| config(format!("{source}: {e}")))?;
        return MaterialParams::from_json(&text).map_err(|e| config(format!("{source}: {e}")));
    }
    MaterialParams::bundled(source)
        .ok_or_else(|| config(format!("material '{source}' is neither a readable file nor a bundled card")))
}

pub fn resolve_common(args: &CommonArgs) -> Result<Resolved, CliError> {
    let mut material = load_material(&args.material)?;
    if args.rate_independent {
        material = material.rate_independent();
    }
    if !(1..=10).contains(&args.relax_passes) {
        return Err(config(format!("--relax-passes must be between 1 and 10, got {}", args.relax_passes)));
    }
    if args.max_subincrements == 0 {
        return Err(config("--max-subincrements must be at least 1"));
    }
    Ok(Resolved {
        material_source: args.material.clone(),
        material,
        relax_passes: args.relax_passes,
        max_subincrements: args.max_subincrements,
        threads: threads_from_env()?,
        out: args.out.clone(),
    })
}

pub fn resolve_program(args: &ProgramArgs) -> Result<(DeformationProgram, ProgramConfig), CliError> {
    if let Some(d) = args.duration {
        if !(d > 0.0) || !d.is_finite() {
            return Err(config(format!("--duration must be positive, got {d}")));
        }
    }
    let program = match args.program {
        ProgramName::Keypoint => {
            let p = loading::keypoint_program();
            match args.duration {
                Some(d) => p.with_duration(d).map_err(|e| config(e.to_string()))?,
                None => p,
            }
        }
        ProgramName::Shear => loading::shear_program(args.rate, &args.reversals, args.duration.unwrap_or(10.0))
            .map_err(|e| config(e.to_string()))?,
        ProgramName::PrestrainTension | ProgramName::PrestrainTensionShear => {
            let kind = if args.program == ProgramName::PrestrainTension {
                PrestrainKind::Tension
            } else {
                PrestrainKind::TensionShear
            };
            let p = loading::isoerror_prestrain(kind);
            match args.duration {
                Some(d) => p.with_duration(d).map_err(|e| config(e.to_string()))?,
                None => p,
            }
        }
    };
    let shear = args.program == ProgramName::Shear;
    let cfg = ProgramConfig {
        name: args.program,
        label: program.label.clone(),
        duration: program.duration,
        rate: shear.then_some(args.rate),
        reversals: if shear { args.reversals.clone() } else { Vec::new() },
    };
    Ok((program, cfg))
}

/// Number of uniform steps for a step size that must divide the duration.
pub fn steps_for_dt(duration: f64, dt: f64) -> Result<usize, CliError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(config(format!("dt must be positive, got {dt}")));
    }
    let n = (duration / dt).round();
    if n < 1.0 || ((n * dt - duration).abs() > 1e-9 * duration) {
        return Err(config(format!("dt = {dt} does not divide the program duration {duration}")));
    }
    Ok(n as usize)
}

pub fn resolve_steps(duration: f64, dt: Option<f64>, steps: Option<usize>) -> Result<usize, CliError> {
    match (steps, dt) {
        (Some(0), _) => Err(config("--steps must be at least 1")),
        (Some(n), _) => Ok(n),
        (None, Some(dt)) => steps_for_dt(duration, dt),
        (None, None) => Ok(300),
    }
}

pub fn parse_grid(text: &str) -> Result<GridSpec, CliError> {
    let bad = || config(format!("--grid expects N or MIN:MAX:N, got '{text}'"));
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [n] => GridSpec { n: n.trim().parse().map_err(|_| bad())?, ..Default::default() },
        [min, max, n] => GridSpec {
            min: min.trim().parse().map_err(|_| bad())?,
            max: max.trim().parse().map_err(|_| bad())?,
            n: n.trim().parse().map_err(|_| bad())?,
        },
        _ => return Err(bad()),
    };
    if grid.n == 0 || !grid.min.is_finite() || !grid.max.is_finite() || grid.min > grid.max {
        return Err(bad());
    }
    let min_f11 = PrestrainKind::Tension.endpoint().0.min(PrestrainKind::TensionShear.endpoint().0);
    if min_f11 + grid.min <= 0.0 {
        return Err(config("--grid increments must keep F11 positive"));
    }
    Ok(grid)
}

pub fn grid_material(base: &MaterialParams, yield_stress: Option<f64>) -> Result<MaterialParams, CliError> {
    match yield_stress {
        Some(k) if !(k > 0.0) || !k.is_finite() => Err(config(format!("--yield-stress must be positive, got {k}"))),
        Some(k) => Ok(base.clone().rate_independent().with_perfect_isotropy(k)),
        None => Ok(experiments::isoerror_material(base)),
    }
}

pub fn or_all<T: Copy>(given: &[T], all: &[T]) -> Vec<T> {
    if given.is_empty() {
        all.to_vec()
    } else {
        given.to_vec()
    }
}

pub const ALL_INTEGRATORS: [IntegratorName; 3] = [IntegratorName::Pebm, IntegratorName::Ebmsc, IntegratorName::Em];
pub const ALL_PRESTRAINS: [PrestrainName; 2] = [PrestrainName::Tension, PrestrainName::TensionShear];
