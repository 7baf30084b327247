//! Time integration.
//!
//! The semi-implicit Euler step freezes the nonlinear coefficient at the old
//! level and treats everything else implicitly:
//!
//! ```text
//! (I + dt (C + G(u^n) D^-2)) u^{n+1} = u^n
//! ```
//!
//! The BDF2 variant uses the same one-solve structure with the coefficient
//! frozen at the extrapolant `u* = 2 u^n - u^{n-1}`:
//!
//! ```text
//! (3/2 I + dt (C + G(u*) D^-2)) u^{n+1} = 2 u^n - u^{n-1} / 2
//! ```
//!
//! and starts with one Euler step.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{Grid, StateVector, TimeGrid};
use crate::linsolve::{thomas_slice, thomas_solve};
use crate::operators::{assemble_c, assemble_g, g, system_matrix, Tridiagonal};
use crate::scalar::Real;

/// Max-norm above which a run is declared diverged.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Upper bound on the number of records the default stride produces.
pub const DEFAULT_MAX_RECORDS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    EulerSi,
    Bdf2,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::EulerSi => "euler",
            Scheme::Bdf2 => "bdf2",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" | "euler_si" => Ok(Scheme::EulerSi),
            "bdf2" => Ok(Scheme::Bdf2),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig<T> {
    pub scheme: Scheme,
    pub time: TimeGrid<T>,
    monitor_stride: usize,
    /// Keep recorded states in the trajectory. Monitors still see every
    /// recorded step when this is off.
    pub keep_states: bool,
    /// Max-norm at which the run is stopped as diverged.
    pub divergence_bound: T,
}

impl<T: Real> SchemeConfig<T> {
    /// Config whose stride keeps the record count at or below
    /// [`DEFAULT_MAX_RECORDS`].
    pub fn new(scheme: Scheme, time: TimeGrid<T>) -> Self {
        let stride = time.steps().div_ceil(DEFAULT_MAX_RECORDS).max(1);
        Self { scheme, time, monitor_stride: stride, keep_states: true, divergence_bound: T::lit(DIVERGENCE_BOUND) }
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        if stride == 0 || stride > self.time.steps() {
            return Err(Error::InvalidConfig(format!("monitor stride {stride} must lie in 1..={}", self.time.steps())));
        }
        self.monitor_stride = stride;
        Ok(self)
    }

    pub fn keep_states(mut self, keep: bool) -> Self {
        self.keep_states = keep;
        self
    }

    pub fn with_divergence_bound(mut self, bound: T) -> Self {
        self.divergence_bound = bound;
        self
    }

    pub fn monitor_stride(&self) -> usize {
        self.monitor_stride
    }
}

/// Observer invoked on recorded steps with `(n, t_n, u^n)`.
pub trait Monitor<T> {
    fn observe(&mut self, step: usize, time: T, state: &StateVector<T>);
}

impl<T, F> Monitor<T> for F
where
    F: FnMut(usize, T, &StateVector<T>),
{
    fn observe(&mut self, step: usize, time: T, state: &StateVector<T>) {
        self(step, time, state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DivergenceReason {
    NormExceeded(f64),
    NonFinite,
    SingularPivot { row: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    /// Step whose result tripped the guard.
    pub step: usize,
    pub reason: DivergenceReason,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    /// Recorded states; empty when the config did not keep them.
    pub states: Vec<StateVector<T>>,
    pub steps: Vec<usize>,
    /// Last accepted state.
    pub final_state: StateVector<T>,
    pub final_time: T,
    pub divergence: Option<Divergence>,
}

impl<T: Real> Trajectory<T> {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }
}

/// Reusable integrator on one grid: `C` and `D^-2` are assembled once,
/// the system diagonal is rebuilt every step.
pub struct Integrator<'g, T> {
    grid: &'g Grid<T>,
    c: Tridiagonal<T>,
    inv_x2: Vec<T>,
    system: Tridiagonal<T>,
    dt: T,
}

impl<'g, T: Real> Integrator<'g, T> {
    pub fn new(grid: &'g Grid<T>, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidTimeStep(dt.to_f64_lossy()));
        }
        let c = assemble_c(grid);
        let inv_x2 = grid.nodes().iter().map(|&x| T::one() / (x * x)).collect();
        let system = c.shifted_identity(dt);
        Ok(Self { grid, c, inv_x2, system, dt })
    }

    pub fn c(&self) -> &Tridiagonal<T> {
        &self.c
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    fn solve_frozen(&mut self, lead: T, frozen: impl Fn(usize) -> T, rhs: &[T]) -> Result<Vec<T>> {
        let dt = self.dt;
        for (i, m) in self.system.main.iter_mut().enumerate() {
            *m = lead + dt * (self.c.main[i] + g(frozen(i)) * self.inv_x2[i]);
        }
        thomas_slice(&self.system, rhs)
    }

    pub fn euler(&mut self, u_n: &StateVector<T>) -> Result<StateVector<T>> {
        self.grid.check(u_n)?;
        let v = u_n.values();
        let next = self.solve_frozen(T::one(), |i| v[i], v)?;
        Ok(StateVector::from_raw(u_n.tag(), next))
    }

    pub fn bdf2(&mut self, u_n: &StateVector<T>, u_nm1: &StateVector<T>) -> Result<StateVector<T>> {
        self.grid.check(u_n)?;
        self.grid.check(u_nm1)?;
        let (a, b) = (u_n.values(), u_nm1.values());
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        let rhs: Vec<T> = a.iter().zip(b).map(|(&x, &y)| two * x - half * y).collect();
        let next = self.solve_frozen(T::lit(1.5), |i| two * a[i] - b[i], &rhs)?;
        Ok(StateVector::from_raw(u_n.tag(), next))
    }
}

/// One semi-implicit Euler step.
pub fn euler_step<T: Real>(u_n: &StateVector<T>, dt: T, grid: &Grid<T>, c: &Tridiagonal<T>) -> Result<StateVector<T>> {
    grid.check(u_n)?;
    let m = system_matrix(c, &assemble_g(u_n), grid, dt)?;
    let next = thomas_solve(&m, u_n)?;
    if !next.is_finite() {
        return Err(Error::NonFiniteState { step: 1 });
    }
    Ok(next)
}

/// One BDF2 step with the coefficient frozen at `2 u^n - u^{n-1}`.
pub fn bdf2_step<T: Real>(
    u_n: &StateVector<T>,
    u_nm1: &StateVector<T>,
    dt: T,
    grid: &Grid<T>,
    c: &Tridiagonal<T>,
) -> Result<StateVector<T>> {
    grid.check(u_n)?;
    grid.check(u_nm1)?;
    let two = T::lit(2.0);
    let extrapolant =
        StateVector::from_raw(u_n.tag(), u_n.values().iter().zip(u_nm1.values()).map(|(&a, &b)| two * a - b).collect());
    // I + dt(C + G D^-2), then shift the identity part to 3/2 I
    let mut m = system_matrix(c, &assemble_g(&extrapolant), grid, dt)?;
    m.main.iter_mut().for_each(|d| *d = *d + T::lit(0.5));
    let rhs = StateVector::from_raw(
        u_n.tag(),
        u_n.values().iter().zip(u_nm1.values()).map(|(&a, &b)| two * a - T::lit(0.5) * b).collect(),
    );
    let next = thomas_solve(&m, &rhs)?;
    if !next.is_finite() {
        return Err(Error::NonFiniteState { step: 1 });
    }
    Ok(next)
}

/// Runs `config.time.steps()` steps from `u0`.
///
/// States and monitor calls happen at `n = 0`, every `monitor_stride` steps,
/// and at `n = M`. A run whose max-norm exceeds the divergence bound, turns
/// non-finite, or hits a singular pivot stops early with
/// [`Trajectory::divergence`] set; the records up to that point are kept.
pub fn evolve<T: Real>(
    u0: &StateVector<T>,
    config: &SchemeConfig<T>,
    grid: &Grid<T>,
    monitors: &mut [&mut dyn Monitor<T>],
) -> Result<Trajectory<T>> {
    grid.check(u0)?;
    let time = config.time;
    let steps = time.steps();
    let stride = config.monitor_stride;
    let mut integrator = Integrator::new(grid, time.dt())?;

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        steps: Vec::new(),
        final_state: u0.clone(),
        final_time: T::zero(),
        divergence: None,
    };
    let record = |traj: &mut Trajectory<T>, n: usize, state: &StateVector<T>, monitors: &mut [&mut dyn Monitor<T>]| {
        let t = time.time(n);
        traj.times.push(t);
        traj.steps.push(n);
        if config.keep_states {
            traj.states.push(state.clone());
        }
        for m in monitors.iter_mut() {
            m.observe(n, t, state);
        }
    };
    record(&mut traj, 0, u0, monitors);

    let bound = config.divergence_bound;
    let mut prev: Option<StateVector<T>> = None;
    let mut current = u0.clone();
    for n in 1..=steps {
        let result = match (config.scheme, &prev) {
            (Scheme::Bdf2, Some(p)) => integrator.bdf2(&current, p),
            _ => integrator.euler(&current),
        };
        let next = match result {
            Ok(next) => next,
            Err(Error::SingularPivot { row, .. }) => {
                traj.divergence = Some(Divergence { step: n, reason: DivergenceReason::SingularPivot { row } });
                break;
            }
            Err(e) => return Err(e),
        };
        if !next.is_finite() {
            traj.divergence = Some(Divergence { step: n, reason: DivergenceReason::NonFinite });
            break;
        }
        let norm = next.norm_inf();
        if norm > bound {
            traj.divergence = Some(Divergence { step: n, reason: DivergenceReason::NormExceeded(norm.to_f64_lossy()) });
            break;
        }
        if config.scheme == Scheme::Bdf2 {
            prev = Some(std::mem::replace(&mut current, next));
        } else {
            current = next;
        }
        traj.final_time = time.time(n);
        if n % stride == 0 || n == steps {
            record(&mut traj, n, &current, monitors);
        }
    }
    traj.final_state = current;
    Ok(traj)
}
