//! `hmhf`: runs, convergence studies, stability checks and traces.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! divergence or a failed check, 3 I/O failure.

mod args;

use std::f64::consts::PI;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use radial_hmhf::experiments::{
    run_space_convergence, run_time_convergence, run_trace_experiment, write_csv, CsvOutput, ExperimentConfig,
    ExperimentReport, InitialCondition, ReferenceSpec, TraceKind, SPACE_LADDER, SPACE_REFERENCE, TIME_LADDER,
    TIME_REFERENCE,
};
use radial_hmhf::verify::{self, CheckReport, Suite, DEFAULT_SEED};
use radial_hmhf::Error;

use args::{Cli, Command, Common, ConvergenceArgs, IcArg, KindArg, ModeArg, RunArgs, TraceArgs, VerifyArgs};

const DEFAULT_N: usize = 999;
const DEFAULT_DT: f64 = 1e-6;
const DEFAULT_T: f64 = 0.1;

/// Failure with its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<String> for Failure {
    fn from(m: String) -> Self {
        Failure::Usage(m)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Io { .. }
            | Error::WouldOverwrite { .. }
            | Error::CacheFormat { .. }
            | Error::CacheChecksum { .. } => Failure::Io(m),
            Error::NonFiniteState { .. } | Error::ReferenceRejected { .. } | Error::SingularPivot { .. } => {
                Failure::Numerical(m)
            }
            _ => Failure::Usage(m),
        }
    }
}

type Outcome = Result<(), Failure>;

fn initial_condition(common: &Common) -> Result<InitialCondition, Failure> {
    Ok(match (common.ic.unwrap_or(IcArg::Smooth), common.amplitude) {
        (IcArg::Custom, Some(a)) if a.is_finite() => InitialCondition::Custom(a),
        (IcArg::Custom, _) => return Err(Failure::Usage("--ic custom requires a finite --amplitude".into())),
        (_, Some(_)) => return Err(Failure::Usage("--amplitude only applies to --ic custom".into())),
        (IcArg::Smooth, None) => InitialCondition::Smooth,
        (IcArg::Blowup, None) => InitialCondition::Blowup,
        (IcArg::Zero, None) => InitialCondition::Zero,
    })
}

fn base_config(common: &Common, n: usize, dt: f64) -> Result<ExperimentConfig, Failure> {
    let mut config = ExperimentConfig::new(initial_condition(common)?, common.final_time.unwrap_or(DEFAULT_T), n, dt);
    config.scheme = common.scheme.map(Into::into).unwrap_or(config.scheme);
    config.output = common.out.clone();
    config.cache_dir = common.ref_cache.clone();
    config.jobs = common.jobs;
    config.stride = common.stride;
    Ok(config)
}

/// CSV to `--out`, or to stdout.
fn emit(output: &impl CsvOutput, common: &Common) -> Outcome {
    match &common.out {
        Some(path) => Ok(write_csv(output, path, common.force)?),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(output.to_csv().as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

fn summarize(report: &ExperimentReport) {
    let e = &report.energy;
    let b = &report.blowup;
    eprintln!(
        "energy {:.6e} -> {:.6e} ({} increases)",
        e.energies.first().copied().unwrap_or(0.0),
        e.energies.last().copied().unwrap_or(0.0),
        e.violations.len()
    );
    eprintln!(
        "|D^-1 u|_inf {:.6e} -> {:.6e}, growth x{:.3}, blow-up indicator {}",
        b.trace.first().copied().unwrap_or(0.0),
        b.trace.last().copied().unwrap_or(0.0),
        b.final_ratio,
        if b.triggered { "triggered" } else { "quiet" }
    );
    if let (true, Some(t)) = (b.triggered, b.steepest_rise_time) {
        eprintln!("steepest rise near t = {t:.6e}");
    }
}

fn finish_trace(report: &ExperimentReport, common: &Common) -> Outcome {
    summarize(report);
    emit(report, common)?;
    match &report.divergence {
        Some(d) => Err(Failure::Numerical(format!("run diverged at step {}: {:?}", d.step, d.reason))),
        None => Ok(()),
    }
}

fn cmd_run(mut a: RunArgs) -> Outcome {
    a.common.resolve(&[])?;
    let config = base_config(&a.common, a.common.single_n(DEFAULT_N)?, a.common.single_dt(DEFAULT_DT)?)?;
    let report = run_trace_experiment(&config, TraceKind::Solution)?;
    finish_trace(&report, &a.common)
}

fn cmd_trace(mut a: TraceArgs) -> Outcome {
    let file = a.common.resolve(&["kind", "alpha"])?;
    file.fill_enum(&mut a.kind, "kind")?;
    file.fill(&mut a.alpha, "alpha")?;
    let kind = match a.kind.unwrap_or(KindArg::Energy) {
        KindArg::Energy => TraceKind::Energy,
        KindArg::Weighted => TraceKind::WeightedNorm(a.alpha.unwrap_or((2.0 / PI).sqrt())),
        KindArg::Blowup => TraceKind::Blowup,
        KindArg::Solution => TraceKind::Solution,
    };
    let config = base_config(&a.common, a.common.single_n(DEFAULT_N)?, a.common.single_dt(DEFAULT_DT)?)?;
    let report = run_trace_experiment(&config, kind)?;
    finish_trace(&report, &a.common)
}

fn cmd_convergence(mut a: ConvergenceArgs) -> Outcome {
    let file = a.common.resolve(&["mode", "ref-N", "ref-dt"])?;
    file.fill_enum(&mut a.mode, "mode")?;
    file.fill(&mut a.ref_n, "ref-N")?;
    file.fill(&mut a.ref_dt, "ref-dt")?;
    let c = &a.common;
    let table = match a.mode.unwrap_or(ModeArg::Time) {
        ModeArg::Time => {
            let ladder = if c.dt.is_empty() { TIME_LADDER.to_vec() } else { c.dt.clone() };
            let n = c.single_n(TIME_REFERENCE.n)?;
            let mut base = base_config(c, n, ladder[0])?;
            base.reference = ReferenceSpec { n: a.ref_n.unwrap_or(n), dt: a.ref_dt.unwrap_or(TIME_REFERENCE.dt) };
            run_time_convergence(&base, &ladder)?
        }
        ModeArg::Space => {
            let ladder = if c.n.is_empty() { SPACE_LADDER.to_vec() } else { c.n.clone() };
            let mut base = base_config(c, ladder[0], c.single_dt(DEFAULT_DT)?)?;
            base.reference =
                ReferenceSpec { n: a.ref_n.unwrap_or(SPACE_REFERENCE.n), dt: a.ref_dt.unwrap_or(SPACE_REFERENCE.dt) };
            run_space_convergence(&base, &ladder)?
        }
    };
    for (k, v) in &table.metadata {
        eprintln!("{k} = {v}");
    }
    eprint!("{}", table.render());
    emit(&table, c)
}

fn single_check(a: &VerifyArgs, suite: Suite, seed: u64) -> Result<Option<Vec<CheckReport>>, Failure> {
    let c = &a.common;
    let custom = !c.n.is_empty() || !c.dt.is_empty() || a.delta.is_some() || a.alpha.is_some();
    if !custom {
        return Ok(None);
    }
    let n = || c.single_n(0).and_then(|n| if n == 0 { Err("this check needs --N".to_string()) } else { Ok(n) });
    let alpha = || a.alpha.ok_or_else(|| "this check needs --alpha".to_string());
    let reports = match suite {
        Suite::Resolvent => {
            let deltas = a.delta.map(|d| vec![d]).unwrap_or_else(|| verify::RESOLVENT_DELTAS.to_vec());
            deltas
                .into_iter()
                .map(|d| verify::check_resolvent_bound(n()?, d).map_err(Failure::from))
                .collect::<Result<_, _>>()?
        }
        Suite::MProperty => {
            let n = c.single_n(verify::MPROPERTY_N)?;
            let dt = c.single_dt(verify::MPROPERTY_DT)?;
            verify::admissible_states(n, verify::MPROPERTY_STATES, seed)?
                .iter()
                .map(|u| verify::check_step_matrix_mproperty(dt, u))
                .collect::<Result<_, _>>()?
        }
        Suite::Symbol => vec![verify::check_discrete_symbol(n()?, alpha()?)?],
        Suite::FBound => vec![verify::check_f_bound(alpha()?, c.single_n(verify::F_BOUND_I_MAX)?)?],
        Suite::DcSpd => vec![verify::check_dc_spd(n()?, seed)?],
        Suite::Lipschitz | Suite::All => {
            return Err(Failure::Usage(format!("--suite {suite} takes no grid parameters")));
        }
    };
    Ok(Some(reports))
}

fn cmd_verify(mut a: VerifyArgs) -> Outcome {
    let file = a.common.resolve(&["suite", "delta", "alpha"])?;
    if a.suite.is_none() {
        if let Some(s) = file_value(&file, "suite")? {
            a.suite = Some(s);
        }
    }
    file.fill(&mut a.delta, "delta")?;
    file.fill(&mut a.alpha, "alpha")?;
    let suite = a.suite.unwrap_or(Suite::All);
    let seed = a.common.seed.unwrap_or(DEFAULT_SEED);
    let reports = match single_check(&a, suite, seed)? {
        Some(r) => r,
        None => verify::run_suite(suite, seed)?,
    };
    print!("{}", verify::render_table(&reports));
    if let Some(path) = &a.common.out {
        verify::write_report(&reports, path, a.common.force)?;
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} of {} checks failed", reports.len())));
    }
    Ok(())
}

fn file_value(file: &args::ConfigFile, key: &str) -> Result<Option<Suite>, Failure> {
    let mut slot: Option<String> = None;
    file.fill(&mut slot, key)?;
    slot.map(|s| s.parse::<Suite>().map_err(Failure::from)).transpose()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Trace(a) => cmd_trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
