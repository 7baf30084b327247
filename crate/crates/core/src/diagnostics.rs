//! Discrete Dirichlet energy, weighted-norm traces and the blow-up indicator.
//!
//! The discrete energy is
//!
//! ```text
//! E_h(u) = h <D C u, u> + h <D^-1 F(u), F(u)>,   F(u)_i = sin(u_i),
//! ```
//!
//! which is nonnegative because `D C` is symmetric positive definite.

use crate::error::{Error, Result};
use crate::grid::{Grid, StateVector};
use crate::operators::Tridiagonal;
use crate::scalar::Real;
use crate::stepper::{Monitor, Trajectory};

/// Relative tolerance below which an energy increase counts as roundoff.
pub const ENERGY_TOLERANCE: f64 = 1e-12;

/// Final-to-initial ratio of the weighted trace that signals blow-up.
pub const BLOWUP_RATIO: f64 = 10.0;

/// Relative increase between consecutive records that signals blow-up.
pub const BLOWUP_JUMP: f64 = 0.5;

/// `E_h(u)`.
pub fn discrete_energy<T: Real>(u: &StateVector<T>, grid: &Grid<T>, c: &Tridiagonal<T>) -> Result<T> {
    grid.check(u)?;
    if c.tag() != grid.tag() {
        return Err(Error::GridMismatch { expected: grid.n(), found: c.tag().n_interior() });
    }
    let v = u.values();
    let cu = c.apply(v);
    let (quadratic, nonlinear) =
        grid.nodes().iter().zip(v).zip(&cu).fold((T::zero(), T::zero()), |(q, s), ((&x, &ui), &cui)| {
            let sin = ui.sin();
            (q + x * cui * ui, s + sin * sin / x)
        });
    Ok(grid.h() * (quadratic + nonlinear))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace<T> {
    pub times: Vec<T>,
    pub energies: Vec<T>,
    /// `(step, increase)` for every recorded increase beyond
    /// `ENERGY_TOLERANCE * (1 + |E|)`.
    pub violations: Vec<(usize, T)>,
}

impl<T: Real> EnergyTrace<T> {
    fn from_parts(times: Vec<T>, steps: &[usize], energies: Vec<T>) -> Self {
        let tol = T::lit(ENERGY_TOLERANCE);
        let violations = energies
            .windows(2)
            .enumerate()
            .filter_map(|(k, w)| {
                let rise = w[1] - w[0];
                (rise > tol * (T::one() + w[0].abs())).then(|| (steps[k + 1], rise))
            })
            .collect();
        Self { times, energies, violations }
    }

    pub fn is_dissipative(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Energies of every recorded state of `traj`.
pub fn energy_trace<T: Real>(traj: &Trajectory<T>, grid: &Grid<T>, c: &Tridiagonal<T>) -> Result<EnergyTrace<T>> {
    let states = recorded_states(traj)?;
    let energies = states.iter().map(|u| discrete_energy(u, grid, c)).collect::<Result<Vec<_>>>()?;
    Ok(EnergyTrace::from_parts(traj.times.clone(), &traj.steps, energies))
}

/// `|D^-alpha u|_inf` of every recorded state of `traj`.
pub fn weighted_trace<T: Real>(traj: &Trajectory<T>, grid: &Grid<T>, alpha: T) -> Result<Vec<T>> {
    recorded_states(traj)?.iter().map(|u| grid.norm_inf_weighted(u, alpha)).collect()
}

fn recorded_states<T: Real>(traj: &Trajectory<T>) -> Result<&[StateVector<T>]> {
    if traj.states.len() != traj.times.len() {
        return Err(Error::InvalidConfig(
            "trajectory was run without keeping states; use a trace monitor instead".into(),
        ));
    }
    Ok(&traj.states)
}

/// Computes energies on the fly, for runs too long to keep every state.
pub struct EnergyMonitor<'a, T> {
    grid: &'a Grid<T>,
    c: &'a Tridiagonal<T>,
    times: Vec<T>,
    steps: Vec<usize>,
    energies: Vec<T>,
}

impl<'a, T: Real> EnergyMonitor<'a, T> {
    pub fn new(grid: &'a Grid<T>, c: &'a Tridiagonal<T>) -> Self {
        Self { grid, c, times: Vec::new(), steps: Vec::new(), energies: Vec::new() }
    }

    pub fn finish(self) -> EnergyTrace<T> {
        EnergyTrace::from_parts(self.times, &self.steps, self.energies)
    }
}

impl<T: Real> Monitor<T> for EnergyMonitor<'_, T> {
    fn observe(&mut self, step: usize, time: T, state: &StateVector<T>) {
        let e = discrete_energy(state, self.grid, self.c).expect("monitor sees states of its own grid");
        self.times.push(time);
        self.steps.push(step);
        self.energies.push(e);
    }
}

/// Records `|D^-alpha u^n|_inf` on the fly.
pub struct WeightedNormMonitor<'a, T> {
    grid: &'a Grid<T>,
    alpha: T,
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<'a, T: Real> WeightedNormMonitor<'a, T> {
    pub fn new(grid: &'a Grid<T>, alpha: T) -> Result<Self> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::AlphaOutOfRange(alpha.to_f64_lossy()));
        }
        Ok(Self { grid, alpha, times: Vec::new(), values: Vec::new() })
    }
}

impl<T: Real> Monitor<T> for WeightedNormMonitor<'_, T> {
    fn observe(&mut self, _step: usize, time: T, state: &StateVector<T>) {
        let v = self.grid.norm_inf_weighted(state, self.alpha).expect("alpha validated");
        self.times.push(time);
        self.values.push(v);
    }
}

/// Growth summary of a `|D^-1 u^n|_inf` trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport<T> {
    pub times: Vec<T>,
    pub trace: Vec<T>,
    /// `max_k trace_k / trace_0`; 1 for an all-zero trace.
    pub max_growth_ratio: T,
    pub final_ratio: T,
    /// Largest `trace_{k+1} / trace_k - 1` over consecutive records.
    pub max_relative_jump: T,
    /// Midpoint of the interval with the largest relative jump, if any
    /// record increased.
    pub steepest_rise_time: Option<T>,
    pub triggered: bool,
}

/// Flags blow-up when the trace grows tenfold overall or jumps by more than
/// half its value between two records.
pub fn blowup_indicator<T: Real>(trace: &[T], times: &[T]) -> BlowupReport<T> {
    assert_eq!(trace.len(), times.len(), "trace and times differ in length");
    let first = trace.first().copied().unwrap_or_else(T::zero);
    let ratio = |v: T| if first > T::zero() { v / first } else { T::one() };
    let max_growth_ratio = trace.iter().map(|&v| ratio(v)).fold(T::one(), T::max);
    let final_ratio = trace.last().map(|&v| ratio(v)).unwrap_or_else(T::one);

    let mut max_relative_jump = T::zero();
    let mut steepest_rise_time = None;
    for k in 0..trace.len().saturating_sub(1) {
        if trace[k] <= T::zero() {
            continue;
        }
        let jump = trace[k + 1] / trace[k] - T::one();
        if jump > max_relative_jump {
            max_relative_jump = jump;
            steepest_rise_time = Some((times[k] + times[k + 1]) * T::lit(0.5));
        }
    }
    let triggered = final_ratio > T::lit(BLOWUP_RATIO) || max_relative_jump > T::lit(BLOWUP_JUMP);
    BlowupReport {
        times: times.to_vec(),
        trace: trace.to_vec(),
        max_growth_ratio,
        final_ratio,
        max_relative_jump,
        steepest_rise_time,
        triggered,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::linsolve::DenseMatrix;
    use crate::operators::assemble_c;
    use crate::stepper::{evolve, Scheme, SchemeConfig};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, PI};

    /// Dense quadratic-form evaluation: h u^T (DC) u + h sum sin^2(u_i)/x_i.
    fn dense_energy(u: &[f64], grid: &Grid<f64>) -> f64 {
        let n = grid.n();
        let c = DenseMatrix::from_tridiagonal(&assemble_c(grid)).unwrap();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += u[i] * grid.nodes()[i] * c[(i, j)] * u[j];
            }
        }
        let s: f64 = u.iter().zip(grid.nodes()).map(|(v, x)| v.sin().powi(2) / x).sum();
        grid.h() * (q + s)
    }

    #[test]
    fn energy_of_zero_and_scalar_state() {
        let g = Grid::<f64>::new(5).unwrap();
        let c = assemble_c(&g);
        assert_eq!(discrete_energy(&StateVector::zeros(&g), &g, &c).unwrap(), 0.0);

        let g1 = Grid::new(1).unwrap();
        let c1 = assemble_c(&g1);
        let u = StateVector::from_vec(&g1, vec![FRAC_PI_4]).unwrap();
        let e = discrete_energy(&u, &g1, &c1).unwrap();
        assert_relative_eq!(e, 0.5 * 0.5 * 8.0 * FRAC_PI_4 * FRAC_PI_4 + 0.5, max_relative = 1e-15);
        assert!((e - 1.733_701).abs() < 1e-6);
    }

    #[test]
    fn energy_matches_dense_oracle_and_is_even() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [1usize, 2, 7, 32, 64] {
            let g = Grid::new(n).unwrap();
            let c = assemble_c(&g);
            for _ in 0..10 {
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let u = StateVector::from_vec(&g, v.clone()).unwrap();
                let e = discrete_energy(&u, &g, &c).unwrap();
                assert!(e >= 0.0);
                assert_relative_eq!(e, dense_energy(&v, &g), max_relative = 1e-12);
                assert_eq!(e, discrete_energy(&u.scaled(-1.0), &g, &c).unwrap());
            }
        }
    }

    #[test]
    fn zero_trajectory_traces() {
        let g = Grid::new(9).unwrap();
        let c = assemble_c(&g);
        let cfg = SchemeConfig::new(Scheme::EulerSi, TimeGrid::from_step(0.01, 1e-3).unwrap());
        let traj = evolve(&StateVector::zeros(&g), &cfg, &g, &mut []).unwrap();
        let et = energy_trace(&traj, &g, &c).unwrap();
        assert!(et.energies.iter().all(|&e| e == 0.0));
        assert!(et.is_dissipative());
        assert!(weighted_trace(&traj, &g, 0.5).unwrap().iter().all(|&v| v == 0.0));
        let b = blowup_indicator(&weighted_trace(&traj, &g, 1.0).unwrap(), &traj.times);
        assert!(!b.triggered);
        assert_eq!(b.max_growth_ratio, 1.0);
    }

    #[test]
    fn monitors_agree_with_trajectory_traces() {
        let g = Grid::new(31).unwrap();
        let c = assemble_c(&g);
        let u0 = StateVector::sample(&g, |x| PI * (1.0 - x) * x).unwrap();
        let cfg = SchemeConfig::new(Scheme::EulerSi, TimeGrid::from_step(0.05, 1e-3).unwrap()).with_stride(5).unwrap();
        let mut em = EnergyMonitor::new(&g, &c);
        let mut wm = WeightedNormMonitor::new(&g, 0.5).unwrap();
        let traj = evolve(&u0, &cfg, &g, &mut [&mut em, &mut wm]).unwrap();
        let direct = energy_trace(&traj, &g, &c).unwrap();
        assert_eq!(em.finish(), direct);
        assert_eq!(wm.values, weighted_trace(&traj, &g, 0.5).unwrap());
        assert!(direct.is_dissipative());
        assert!(direct.energies.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn energy_trace_requires_states() {
        let g = Grid::new(3).unwrap();
        let c = assemble_c(&g);
        let cfg = SchemeConfig::new(Scheme::EulerSi, TimeGrid::from_step(0.01, 1e-3).unwrap()).keep_states(false);
        let traj = evolve(&StateVector::zeros(&g), &cfg, &g, &mut []).unwrap();
        assert!(energy_trace(&traj, &g, &c).is_err());
    }

    #[test]
    fn violations_are_reported() {
        let et = EnergyTrace::from_parts(vec![0.0, 1.0, 2.0], &[0, 10, 20], vec![1.0, 0.5, 0.6]);
        assert_eq!(et.violations.len(), 1);
        assert_eq!(et.violations[0].0, 20);
        assert_relative_eq!(et.violations[0].1, 0.1, max_relative = 1e-12);
        let tiny = EnergyTrace::from_parts(vec![0.0, 1.0], &[0, 1], vec![1.0, 1.0 + 1e-13]);
        assert!(tiny.is_dissipative());
    }

    #[test]
    fn blowup_indicator_cases() {
        let times = [0.0, 1.0, 2.0, 3.0];
        let flat = blowup_indicator(&[2.0, 2.0, 2.0, 2.0], &times);
        assert!(!flat.triggered);
        assert_eq!(flat.max_growth_ratio, 1.0);
        assert_eq!(flat.steepest_rise_time, None);

        let decay = blowup_indicator(&[4.0, 3.0, 2.5, 2.0], &times);
        assert!(!decay.triggered);

        let spike = blowup_indicator(&[1.0, 1.2, 2.4, 2.5], &times);
        assert!(spike.triggered);
        assert_eq!(spike.steepest_rise_time, Some(1.5));
        assert!(spike.max_growth_ratio >= 1.0);

        let slow = blowup_indicator(
            &[1.0, 1.4, 1.96, 2.744, 3.84, 5.38, 7.53, 10.5, 14.8],
            &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        );
        assert!(slow.triggered && slow.max_relative_jump < 0.5);
    }
}
