//! Command-line front end: `solve`, `converge-time`, `converge-space` and
//! `poisson-check`.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::assembly::Operators;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flows::{Propagator, Scheme, Signal, State};
use crate::harness::{self, ConvergenceTable, FLOOR_FACTOR};
use crate::output::{self, NormLog};

/// Tolerance on observed temporal orders for `converge-time --check`.
pub const TIME_ORDER_TOL: f64 = 0.25;
/// Tolerance on fitted spatial slopes for `converge-space` and
/// `poisson-check` with `--check`.
pub const SPACE_ORDER_TOL: f64 = 0.3;
/// Largest relative Poisson residual accepted by `poisson-check --check`.
pub const POISSON_RESIDUAL_TOL: f64 = 1e-12;

/// Exit code for a run that completed but failed its `--check` gate.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit code for configuration, I/O or solver errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "splitpde",
    version,
    about = "Splitting solver for the 2D Schrödinger-Poisson equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file with `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Exit with a nonzero status if the run misses its acceptance gate.
    #[arg(long, global = true)]
    pub check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate to `t_final`, writing snapshots and a norm log.
    Solve {
        /// Also write the mass and stiffness matrices in MatrixMarket format.
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Temporal convergence study for the configured schemes.
    ConvergeTime,
    /// Spatial convergence study for the configured degrees and spacings.
    ConvergeSpace,
    /// Manufactured-solution check of the Poisson solve.
    PoissonCheck,
}

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Whether the acceptance gate of the command was met.
    pub passed: bool,
    /// Human-readable lines for stdout.
    pub report: Vec<String>,
    pub warnings: Vec<String>,
}

/// Loads the configuration and runs the selected command.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    fs::create_dir_all(&cfg.output_dir)?;
    match cli.command {
        Command::Solve { dump_matrices } => solve(&cfg, dump_matrices),
        Command::ConvergeTime => converge_time(&cfg),
        Command::ConvergeSpace => converge_space(&cfg),
        Command::PoissonCheck => poisson_check(&cfg),
    }
}

/// Runs `cli` and maps the outcome to a process exit code, printing the
/// report to stdout and diagnostics to stderr.
pub fn main_with(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(outcome) => {
            for line in &outcome.report {
                println!("{line}");
            }
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if cli.check && !outcome.passed {
                eprintln!("check failed");
                EXIT_CHECK_FAILED
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn solve(cfg: &RunConfig, dump_matrices: bool) -> Result<Outcome> {
    let ops = Operators::new(cfg.domain_mesh()?)?;
    let scheme = Scheme::by_name(&cfg.scheme)?;
    let header = cfg.header();
    let dir = &cfg.output_dir;
    let mut out = Outcome::default();
    if dump_matrices {
        let (m, k) = output::dump_operators(dir, &ops)?;
        out.files.extend([m, k]);
    }

    let psi0 = cfg.initial.interpolate(ops.mesh())?;
    let initial = State::new(psi0, 0.0);
    let mut prop = Propagator::new(&ops, &cfg.solver)?;
    let norm0 = prop.norm(&initial.coeffs);
    let mut log = NormLog::new(norm0);

    let mut times = cfg.snapshot_times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let write = |out: &mut Outcome, st: &State, t: f64| -> Result<()> {
        let path = dir.join(output::snapshot_name(t));
        output::write_snapshot(&path, ops.mesh(), &st.coeffs, st.t, &header)?;
        out.files.push(path);
        Ok(())
    };
    if times.first() == Some(&0.0) {
        write(&mut out, &initial, 0.0)?;
    }
    let pending: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();

    let final_state = if cfg.adaptive {
        let mut state = initial;
        let mut accepted = 0;
        let mut rejected = 0;
        let mut stops = pending.clone();
        if stops.last().is_none_or(|&t| t < cfg.t_final) {
            stops.push(cfg.t_final);
        }
        for &stop in &stops {
            let ev =
                prop.evolve_adaptive(&scheme, cfg.tau, stop - state.t, cfg.adaptive_tol, &state)?;
            accepted += ev.accepted().count();
            rejected += ev.rejected_count();
            state = ev.state;
            state.t = stop;
            log.push(crate::flows::StepInfo {
                step: accepted,
                t: stop,
                norm: prop.norm(&state.coeffs),
            });
            if pending.contains(&stop) {
                write(&mut out, &state, stop)?;
            }
        }
        out.report.push(format!(
            "adaptive: {accepted} accepted, {rejected} rejected steps"
        ));
        state
    } else {
        let steps = ((cfg.t_final / cfg.tau).round() as usize).max(1);
        let tau = cfg.t_final / steps as f64;
        let marks: Vec<(usize, f64)> = pending
            .iter()
            .map(|&t| ((t / tau).round() as usize, t))
            .collect();
        let mut snaps = Vec::new();
        let ev = prop.evolve(&scheme, cfg.tau, cfg.t_final, &initial, &mut |info, st| {
            log.push(*info);
            for &(n, t) in &marks {
                if n == info.step {
                    snaps.push((t, st.clone()));
                }
            }
            Signal::Continue
        })?;
        for (t, st) in &snaps {
            write(&mut out, st, *t)?;
        }
        out.report.push(format!(
            "{} steps of {:e} with {}",
            ev.steps,
            ev.tau,
            scheme.name()
        ));
        ev.state
    };

    let log_path = dir.join("norms.csv");
    log.write(&log_path, &header)?;
    out.files.push(log_path);

    let drift = log.max_drift();
    let stats = prop.expv_stats();
    out.report.push(format!(
        "t = {}, norm = {:.16e}",
        final_state.t,
        prop.norm(&final_state.coeffs)
    ));
    out.report
        .push(format!("max relative norm drift = {drift:e}"));
    out.report.push(format!(
        "expv: {} calls, {} substeps, {} matvecs; poisson solves: {}",
        stats.calls,
        stats.substeps,
        stats.matvecs,
        prop.poisson_solves()
    ));
    out.passed = drift <= 100.0 * cfg.solver.expv_tol;
    Ok(out)
}

fn write_tables(
    cfg: &RunConfig,
    tables: &[ConvergenceTable],
    prefix: &str,
    tol: f64,
    out: &mut Outcome,
) -> Result<bool> {
    let header = cfg.header();
    let mut all = true;
    for t in tables {
        let name = t.label.replace('=', "");
        let path = cfg.output_dir.join(format!("{prefix}_{name}.csv"));
        fs::write(&path, t.to_csv(&header))?;
        out.files.push(path);
        let ok = t.passes(tol);
        all &= ok;
        let fitted = t
            .fitted_order
            .map_or("none".to_string(), |q| format!("{q:.4}"));
        out.report.push(format!(
            "{prefix} {}: fitted order {fitted} (nominal {}), rows {}..{} {}",
            t.label,
            t.nominal_order,
            t.window.start,
            t.window.end,
            if ok { "ok" } else { "off" }
        ));
        let low = t.unreliable_rows();
        if !low.is_empty() {
            out.warnings.push(format!(
                "{prefix} {}: rows {low:?} are within {FLOOR_FACTOR}x of the solver floor {:e}; their orders are unreliable",
                t.label, t.floor
            ));
        }
    }
    Ok(all)
}

fn converge_time(cfg: &RunConfig) -> Result<Outcome> {
    let schemes = cfg
        .time_schemes
        .iter()
        .map(|s| Scheme::by_name(s))
        .collect::<Result<Vec<_>>>()?;
    let reference = Scheme::by_name(&cfg.time_ref_scheme)?;
    let tables = harness::temporal_study(
        cfg,
        &schemes,
        &cfg.time_taus,
        (&reference, cfg.time_ref_tau),
    )?;
    let mut out = Outcome::default();
    out.passed = write_tables(cfg, &tables, "time", TIME_ORDER_TOL, &mut out)?;
    Ok(out)
}

fn converge_space(cfg: &RunConfig) -> Result<Outcome> {
    let scheme = Scheme::by_name(&cfg.space_scheme)?;
    let tables = harness::spatial_study(
        cfg,
        &cfg.space_degrees,
        &cfg.space_h,
        cfg.space_tau,
        &scheme,
        (cfg.space_ref_degree, cfg.space_ref_h),
    )?;
    let mut out = Outcome::default();
    out.passed = write_tables(cfg, &tables, "space", SPACE_ORDER_TOL, &mut out)?;
    Ok(out)
}

fn poisson_check(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.domain != crate::mesh::Rect::square(0.0, 5.0) {
        return Err(Error::Validation {
            field: "domain".into(),
            msg: "the manufactured Poisson solution is defined on [0, 5]^2".into(),
        });
    }
    let (tables, residual) =
        harness::poisson_study(&cfg.poisson_degrees, &cfg.poisson_h, &cfg.solver)?;
    let mut out = Outcome::default();
    let orders_ok = write_tables(cfg, &tables, "poisson", SPACE_ORDER_TOL, &mut out)?;
    out.report
        .push(format!("largest relative residual {residual:e}"));
    out.passed = orders_ok && residual <= POISSON_RESIDUAL_TOL;
    Ok(out)
}

/// Convenience for tests: parses `args` (without the program name) and runs.
pub fn run_args<I, S>(args: I) -> Result<Outcome>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("splitpde"))
        .chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Config(e.to_string()))?;
    run(&cli)
}
