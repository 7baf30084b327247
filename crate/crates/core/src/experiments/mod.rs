//! Convergence studies, trace experiments and their output.

mod output;
mod reference;

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

pub use output::{write_csv, write_text, CsvOutput};
pub use reference::{
    cache_file_name, checksum, compute_reference, gate_tolerance, load_or_compute, restrict, ReferenceSolution,
    ReferenceSpec, CACHE_VERSION, GATE_TOLERANCE,
};

use crate::diagnostics::{blowup_indicator, BlowupReport, EnergyMonitor, EnergyTrace, WeightedNormMonitor};
use crate::error::{Error, Result};
use crate::grid::{Grid, StateVector, TimeGrid};
use crate::operators::assemble_c;
use crate::stepper::{evolve, Divergence, Monitor, Scheme, SchemeConfig, Trajectory};

/// Step sizes of the temporal study.
pub const TIME_LADDER: [f64; 5] = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4];
/// Interior node counts `2^k - 1`, `k = 2..=7`, of the spatial study.
pub const SPACE_LADDER: [usize; 6] = [3, 7, 15, 31, 63, 127];
pub const TIME_REFERENCE: ReferenceSpec = ReferenceSpec { n: 999, dt: 1e-6 };
pub const SPACE_REFERENCE: ReferenceSpec = ReferenceSpec { n: 2047, dt: 5e-8 };
/// Snapshot count of default solution traces.
pub const PROFILE_SNAPSHOTS: usize = 10;

/// `u0(x) = A (1 - x) x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// `A = pi`.
    Smooth,
    /// `A = 9 pi`.
    Blowup,
    Zero,
    Custom(f64),
}

impl InitialCondition {
    pub fn amplitude(self) -> f64 {
        match self {
            Self::Smooth => PI,
            Self::Blowup => 9.0 * PI,
            Self::Zero => 0.0,
            Self::Custom(a) => a,
        }
    }

    pub fn id(self) -> String {
        match self {
            Self::Smooth => "smooth".into(),
            Self::Blowup => "blowup".into(),
            Self::Zero => "zero".into(),
            Self::Custom(a) => format!("custom_{a:e}"),
        }
    }

    pub fn sample(self, grid: &Grid<f64>) -> Result<StateVector<f64>> {
        let a = self.amplitude();
        StateVector::sample(grid, |x| a * (1.0 - x) * x)
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Accepts the preset names and the `custom_<A>` form produced by [`id`](Self::id).
impl FromStr for InitialCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(Self::Smooth),
            "blowup" => Ok(Self::Blowup),
            "zero" => Ok(Self::Zero),
            _ => s
                .strip_prefix("custom_")
                .and_then(|a| a.parse::<f64>().ok())
                .filter(|a| a.is_finite())
                .map(Self::Custom)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown initial condition '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub ic: InitialCondition,
    pub final_time: f64,
    pub n: usize,
    pub dt: f64,
    pub scheme: Scheme,
    pub output: Option<PathBuf>,
    pub reference: ReferenceSpec,
    pub cache_dir: Option<PathBuf>,
    /// Worker threads for study rows; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Monitor stride; `None` picks the default of the trace kind.
    pub stride: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(ic: InitialCondition, final_time: f64, n: usize, dt: f64) -> Self {
        Self {
            ic,
            final_time,
            n,
            dt,
            scheme: Scheme::EulerSi,
            output: None,
            reference: TIME_REFERENCE,
            cache_dir: None,
            jobs: None,
            stride: None,
        }
    }

    /// Smooth data, `h = 1e-3`, `T = 0.1`, reference on the same grid.
    pub fn time_study() -> Self {
        Self::new(InitialCondition::Smooth, 0.1, 999, TIME_LADDER[0])
    }

    /// Smooth data, `dt = 1e-6`, `T = 0.1`, nested reference with `h = 2^-11`.
    pub fn space_study() -> Self {
        Self { reference: SPACE_REFERENCE, ..Self::new(InitialCondition::Smooth, 0.1, SPACE_LADDER[0], 1e-6) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.final_time > 0.0) {
            return Err(Error::InvalidConfig(format!("final time must be positive, got {}", self.final_time)));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        Grid::<f64>::new(self.n)?;
        self.time_grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<Grid<f64>> {
        Grid::new(self.n)
    }

    pub fn time_grid(&self) -> Result<TimeGrid<f64>> {
        TimeGrid::from_step(self.final_time, self.dt)
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig<f64>> {
        let config = SchemeConfig::new(self.scheme, self.time_grid()?);
        match self.stride {
            Some(k) => config.with_stride(k),
            None => Ok(config),
        }
    }

    fn reference(&self) -> Result<ReferenceSolution> {
        load_or_compute(self.ic, self.reference, self.final_time, self.cache_dir.as_deref())
    }

    fn in_pool<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        match self.jobs {
            None => Ok(f()),
            Some(jobs) => rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map(|pool| pool.install(f))
                .map_err(|e| Error::InvalidConfig(format!("cannot start {jobs} worker threads: {e}"))),
        }
    }
}

/// Final state of one evolution without recorded states.
fn final_state(config: &ExperimentConfig) -> Result<StateVector<f64>> {
    let grid = config.grid()?;
    let time = config.time_grid()?;
    let scheme = SchemeConfig::new(config.scheme, time).keep_states(false).with_stride(time.steps())?;
    let traj = evolve(&config.ic.sample(&grid)?, &scheme, &grid, &mut [])?;
    match traj.divergence {
        Some(d) => Err(Error::NonFiniteState { step: d.step }),
        None => Ok(traj.final_state),
    }
}

/// `|u - u_ref|_{D,h}`.
pub fn end_time_error(u: &StateVector<f64>, reference: &StateVector<f64>, grid: &Grid<f64>) -> Result<f64> {
    Ok(grid.norm_dh(&u.difference(reference)?))
}

/// `ln(e_k / e_{k+1}) / ln(ratio)` for consecutive errors.
pub fn eoc(errors: &[f64], ratio: f64) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).ln() / ratio.ln()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub param: f64,
    pub error: f64,
    /// Order against the previous row; `None` on the first row or when an
    /// error vanishes.
    pub eoc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    /// `"dt"` or `"h"`.
    pub parameter: &'static str,
    pub rows: Vec<ConvergenceRow>,
    /// Fixed parameters of the study.
    pub metadata: Vec<(String, String)>,
}

impl ConvergenceTable {
    /// Rows with EOCs taken against each pair's actual parameter ratio.
    pub fn from_errors(parameter: &'static str, params: &[f64], errors: &[f64]) -> Self {
        assert_eq!(params.len(), errors.len(), "one error per parameter");
        let rows = params
            .iter()
            .zip(errors)
            .enumerate()
            .map(|(k, (&param, &error))| {
                let eoc = (k > 0 && error > 0.0 && errors[k - 1] > 0.0)
                    .then(|| eoc(&errors[k - 1..=k], params[k - 1] / param)[0]);
                ConvergenceRow { param, error, eoc }
            })
            .collect();
        Self { parameter, rows, metadata: Vec::new() }
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn eocs(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.eoc).collect()
    }

    /// Human-readable table.
    pub fn render(&self) -> String {
        let mut s = format!("{:>12} {:>14} {:>8}\n", self.parameter, "error_Dh", "EOC");
        for r in &self.rows {
            let eoc = r.eoc.map(|e| format!("{e:.2}")).unwrap_or_default();
            s.push_str(&format!("{:>12.5e} {:>14.4e} {:>8}\n", r.param, r.error, eoc));
        }
        s
    }
}

fn check_ladder<T: PartialOrd + Copy + fmt::Debug>(ladder: &[T]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::InvalidConfig("empty refinement ladder".into()));
    }
    Ok(())
}

/// End-time errors for each step size of `ladder` on the grid of `base`.
pub fn run_time_convergence(base: &ExperimentConfig, ladder: &[f64]) -> Result<ConvergenceTable> {
    check_ladder(ladder)?;
    base.validate()?;
    let configs = ladder
        .iter()
        .map(|&dt| {
            let c = ExperimentConfig { dt, ..base.clone() };
            c.time_grid().map(|_| c)
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = base.grid()?;
    let errors = base.in_pool(|| -> Result<Vec<f64>> {
        let reference = base.reference()?;
        let u_ref = restrict(&reference, &grid)?;
        configs.par_iter().map(|c| end_time_error(&final_state(c)?, &u_ref, &grid)).collect()
    })??;
    let mut table = ConvergenceTable::from_errors("dt", ladder, &errors);
    table.metadata = study_metadata(base, "N", base.n.to_string());
    Ok(table)
}

/// End-time errors for each interior node count of `ladder` at the step of
/// `base`; the reference is injected onto each grid.
pub fn run_space_convergence(base: &ExperimentConfig, ladder: &[usize]) -> Result<ConvergenceTable> {
    check_ladder(ladder)?;
    base.validate()?;
    for &n in ladder {
        if n == 0 || !(base.reference.n + 1).is_multiple_of(n + 1) {
            return Err(Error::NonNested { coarse: n, fine: base.reference.n });
        }
    }
    let errors = base.in_pool(|| -> Result<Vec<f64>> {
        let reference = base.reference()?;
        ladder
            .par_iter()
            .map(|&n| {
                let c = ExperimentConfig { n, ..base.clone() };
                let grid = c.grid()?;
                end_time_error(&final_state(&c)?, &restrict(&reference, &grid)?, &grid)
            })
            .collect()
    })??;
    let hs: Vec<f64> = ladder.iter().map(|&n| 1.0 / (n + 1) as f64).collect();
    let mut table = ConvergenceTable::from_errors("h", &hs, &errors);
    table.metadata = study_metadata(base, "dt", format!("{:e}", base.dt));
    Ok(table)
}

fn study_metadata(base: &ExperimentConfig, key: &str, value: String) -> Vec<(String, String)> {
    vec![
        ("ic".into(), base.ic.id()),
        ("T".into(), format!("{:e}", base.final_time)),
        (key.into(), value),
        ("scheme".into(), base.scheme.name().into()),
        ("N_ref".into(), base.reference.n.to_string()),
        ("dt_ref".into(), format!("{:e}", base.reference.dt)),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceKind {
    /// Recorded profiles in long form.
    Solution,
    /// `|D^-alpha u^n|_inf`.
    WeightedNorm(f64),
    /// Discrete Dirichlet energy.
    Energy,
    /// `|D^-1 u^n|_inf` with the blow-up indicator.
    Blowup,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceData {
    Solution { x: Vec<f64>, times: Vec<f64>, states: Vec<Vec<f64>> },
    Scalar { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub kind: TraceKind,
    pub data: TraceData,
    /// Energy at every recorded step, whatever the kind.
    pub energy: EnergyTrace<f64>,
    /// Indicator on the `|D^-1 u^n|_inf` trace at every recorded step.
    pub blowup: BlowupReport<f64>,
    pub divergence: Option<Divergence>,
    pub final_state: StateVector<f64>,
}

/// One evolution with monitors for the requested trace. Energy and the
/// `D^-1` indicator are recorded alongside every kind.
pub fn run_trace_experiment(config: &ExperimentConfig, kind: TraceKind) -> Result<ExperimentReport> {
    config.validate()?;
    let grid = config.grid()?;
    let c = assemble_c(&grid);
    let mut scheme = config.scheme_config()?.keep_states(false);
    if kind == TraceKind::Solution && config.stride.is_none() {
        let steps = scheme.time.steps();
        scheme = scheme.with_stride(steps.div_ceil(PROFILE_SNAPSHOTS).max(1))?;
    }
    let alpha = match kind {
        TraceKind::WeightedNorm(a) => a,
        _ => 1.0,
    };
    let mut energy = EnergyMonitor::new(&grid, &c);
    let mut inverse_x = WeightedNormMonitor::new(&grid, 1.0)?;
    let mut weighted = WeightedNormMonitor::new(&grid, alpha)?;
    let mut profiles: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut snapshot = |_n: usize, t: f64, u: &StateVector<f64>| {
        if kind == TraceKind::Solution {
            profiles.push((t, u.values().to_vec()));
        }
    };
    let traj: Trajectory<f64> = {
        let mut monitors: Vec<&mut dyn Monitor<f64>> = vec![&mut energy, &mut inverse_x, &mut snapshot];
        if matches!(kind, TraceKind::WeightedNorm(_)) {
            monitors.push(&mut weighted);
        }
        evolve(&config.ic.sample(&grid)?, &scheme, &grid, &mut monitors)?
    };
    let energy = energy.finish();
    let blowup = blowup_indicator(&inverse_x.values, &inverse_x.times);
    let data = match kind {
        TraceKind::Solution => {
            let (times, states) = profiles.into_iter().unzip();
            TraceData::Solution { x: grid.nodes().to_vec(), times, states }
        }
        TraceKind::WeightedNorm(_) => TraceData::Scalar { times: weighted.times, values: weighted.values },
        TraceKind::Energy => TraceData::Scalar { times: energy.times.clone(), values: energy.energies.clone() },
        TraceKind::Blowup => TraceData::Scalar { times: blowup.times.clone(), values: blowup.trace.clone() },
    };
    Ok(ExperimentReport { kind, data, energy, blowup, divergence: traj.divergence, final_state: traj.final_state })
}
