//! `pebm`: command-line driver for material-point studies.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when a step, grid
//! cell or audit trial failed numerically (partial outputs are still written).

mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use pebm_core::experiments::{self, ErrorSeries};

use config::{AuditArgs, Cli, Command, ConvergenceArgs, GridArgs, Resolved, SimulateArgs};
use output::OutDir;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("write error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Io(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'static str,
    version: &'static str,
    #[serde(flatten)]
    common: &'a Resolved,
    #[serde(flatten)]
    settings: T,
}

fn write_manifest<T: Serialize>(out: &OutDir, command: &'static str, common: &Resolved, settings: T) -> Result<(), CliError> {
    out.write_json("run_manifest.json", &Manifest { command, version: env!("CARGO_PKG_VERSION"), common, settings })
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let common = config::resolve_common(&args.common)?;
    let (program, program_cfg) = config::resolve_program(&args.program)?;
    let steps = config::resolve_steps(program.duration, args.dt, args.steps)?;
    let integrator = common.integrator(args.integrator);
    let out = OutDir::create(&common.out)?;
    write_manifest(
        &out,
        "simulate",
        &common,
        json!({ "program": program_cfg, "integrator": args.integrator, "steps": steps, "dt": program.duration / steps as f64 }),
    )?;

    let traj = experiments::with_threads(common.threads, || {
        experiments::simulate(&program, &common.material, &integrator, steps)
    });
    out.write("trajectory.csv", &output::trajectory_csv(&traj))?;
    match &traj.failure {
        None => Ok(()),
        Some(f) => {
            out.write_json("failure.json", &json!({ "step": f.step, "t": f.t, "message": f.message }))?;
            Err(CliError::Numerical(format!("step {} (t = {}) failed: {}", f.step, f.t, f.message)))
        }
    }
}

#[derive(Serialize)]
struct SummaryRow {
    integrator: String,
    dt: f64,
    max_error: f64,
    slope: f64,
}

fn summary(series: &[ErrorSeries]) -> Vec<SummaryRow> {
    let mut rows = Vec::with_capacity(series.len());
    let mut labels: Vec<&str> = series.iter().map(|s| s.integrator.as_str()).collect();
    labels.dedup();
    for label in labels {
        let group: Vec<&ErrorSeries> = series.iter().filter(|s| s.integrator == label).collect();
        let dts: Vec<f64> = group.iter().map(|s| s.dt).collect();
        let errs: Vec<f64> = group.iter().map(|s| s.max_error()).collect();
        let slope = if group.len() > 1 { experiments::loglog_slope(&dts, &errs) } else { f64::NAN };
        rows.extend(group.iter().map(|s| SummaryRow { integrator: label.into(), dt: s.dt, max_error: s.max_error(), slope }));
    }
    rows
}

fn convergence(args: &ConvergenceArgs) -> Result<(), CliError> {
    let common = config::resolve_common(&args.common)?;
    let (program, program_cfg) = config::resolve_program(&args.program)?;
    let names = config::or_all(&args.integrator, &config::ALL_INTEGRATORS);
    let ref_steps = match args.steps {
        Some(0) => return Err(CliError::Config("--steps must be at least 1".into())),
        Some(n) => n,
        None => experiments::reference_steps(&program).max(1),
    };
    if args.dt.is_empty() {
        return Err(CliError::Config("--dt needs at least one step size".into()));
    }
    for &dt in &args.dt {
        let n = config::steps_for_dt(program.duration, dt)?;
        if ref_steps % n != 0 {
            return Err(CliError::Config(format!("reference with {ref_steps} steps does not refine dt = {dt}")));
        }
    }
    let out = OutDir::create(&common.out)?;
    write_manifest(
        &out,
        "convergence",
        &common,
        json!({
            "program": program_cfg,
            "integrators": names,
            "dts": args.dt,
            "reference_integrator": "ebmsc",
            "reference_steps": ref_steps,
            "reference_dt": program.duration / ref_steps as f64,
        }),
    )?;

    let integrators: Vec<_> = names.iter().map(|&n| common.integrator(n)).collect();
    let series = experiments::with_threads(common.threads, || {
        let reference = experiments::reference_trajectory(&program, &common.material, ref_steps);
        if let Some(f) = &reference.failure {
            return Err(CliError::Numerical(format!("reference failed at step {}: {}", f.step, f.message)));
        }
        Ok(experiments::convergence_study(&program, &common.material, &reference, &args.dt, &integrators))
    })?;

    let mut failures = Vec::new();
    for s in &series {
        out.write(&format!("errors_{}_{}.csv", s.integrator, s.dt), &output::error_csv(s))?;
        if let Some(msg) = &s.failure {
            failures.push(format!("{} dt={}: {msg}", s.integrator, s.dt));
        }
    }
    let mut csv = String::from("integrator,dt,max_error,slope\n");
    for r in summary(&series) {
        csv.push_str(&format!("{},{},{},{}\n", r.integrator, r.dt, r.max_error, r.slope));
    }
    out.write("summary.csv", &csv)?;
    if failures.is_empty() {
        Ok(())
    } else {
        out.write("failures.log", &output::failure_log(&failures))?;
        Err(CliError::Numerical(format!("{} run(s) failed, see failures.log", failures.len())))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum GridKind {
    Isoerror,
    Itercount,
}

fn grid_command(args: &GridArgs, kind: GridKind) -> Result<(), CliError> {
    let mut common = config::resolve_common(&args.common)?;
    common.material = config::grid_material(&common.material, args.yield_stress)?;
    let grid = config::parse_grid(&args.grid)?;
    let prestrains = config::or_all(&args.prestrain, &config::ALL_PRESTRAINS);
    let names = config::or_all(&args.integrator, &config::ALL_INTEGRATORS);
    let out = OutDir::create(&common.out)?;
    let command = if kind == GridKind::Isoerror { "isoerror" } else { "itercount" };
    write_manifest(
        &out,
        command,
        &common,
        json!({
            "grid": grid,
            "prestrains": prestrains,
            "integrators": names,
            "prestrain_steps": experiments::PRESTRAIN_STEPS,
            "oracle_substeps": experiments::ORACLE_SUBSTEPS,
        }),
    )?;

    let mut failed = 0;
    for p in &prestrains {
        for &name in &names {
            let integrator = common.integrator(name);
            let stem = format!("{command}_{}_{}", p.kind().label(), integrator.label());
            let failures = experiments::with_threads(common.threads, || -> Result<Vec<String>, CliError> {
                match kind {
                    GridKind::Isoerror => {
                        let g = experiments::isoerror_map(p.kind(), &common.material, &grid, &integrator)
                            .map_err(CliError::Numerical)?;
                        out.write(&format!("{stem}.csv"), &output::isoerror_csv(&g))?;
                        Ok(g.failures)
                    }
                    GridKind::Itercount => {
                        let g = experiments::iteration_count_map(p.kind(), &common.material, &grid, &integrator)
                            .map_err(CliError::Numerical)?;
                        out.write(&format!("{stem}.csv"), &output::iterations_csv(&g))?;
                        out.write(&format!("cost_{}_{}.csv", p.kind().label(), integrator.label()), &output::cost_csv(&g))?;
                        Ok(g.failures)
                    }
                }
            })?;
            if !failures.is_empty() {
                out.write(&format!("{stem}.log"), &output::failure_log(&failures))?;
                failed += failures.len();
            }
        }
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("{failed} grid cell(s) failed, see the .log files")))
    }
}

fn audit(args: &AuditArgs) -> Result<(), CliError> {
    let common = config::resolve_common(&args.common)?;
    let (program, program_cfg) = config::resolve_program(&args.program)?;
    if args.steps == 0 || args.trials == 0 {
        return Err(CliError::Config("--steps and --trials must be at least 1".into()));
    }
    if args.xi_primes.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(CliError::Config("--xi-primes must be positive".into()));
    }
    let out = OutDir::create(&common.out)?;
    write_manifest(
        &out,
        "audit",
        &common,
        json!({
            "program": program_cfg,
            "steps": args.steps,
            "trials": args.trials,
            "seed": args.seed,
            "xi_primes": args.xi_primes,
            "roundoff_samples": args.roundoff_samples,
        }),
    )?;

    let (invariance, roundoff) = experiments::with_threads(common.threads, || {
        (
            experiments::weak_invariance_audit(&program, &common.material, args.steps, args.trials, args.seed),
            experiments::roundoff_study(&args.xi_primes, args.roundoff_samples, args.seed),
        )
    });
    out.write_json("audit.json", &json!({ "invariance": invariance, "roundoff": roundoff }))?;
    let failed: Vec<&str> = invariance.trials.iter().filter_map(|t| t.failure.as_deref()).collect();
    if failed.is_empty() && !invariance.max_stress_deviation.is_nan() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("{} invariance trial(s) failed", failed.len().max(1))))
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Convergence(a) => convergence(a),
        Command::Isoerror(a) => grid_command(a, GridKind::Isoerror),
        Command::Itercount(a) => grid_command(a, GridKind::Itercount),
        Command::Audit(a) => audit(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pebm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
