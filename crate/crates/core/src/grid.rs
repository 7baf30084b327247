//! Uniform interior mesh on (0, 1), nodal state vectors, the time grid and
//! the discrete norms.
//!
//! The boundary values u(0) = u(1) = 0 are implicit: only the `N` interior
//! nodes `x_i = i h`, `h = 1 / (N + 1)`, are stored.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Identifies the grid a state vector lives on. Uniform grids on (0, 1) are
/// fully determined by their interior node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridTag(usize);

impl GridTag {
    pub fn n_interior(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    n: usize,
    h: T,
    nodes: Vec<T>,
}

impl<T: Real> Grid<T> {
    /// Builds the grid with `n` interior nodes.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGrid);
        }
        let h = T::one() / T::from_index(n + 1);
        let nodes = (1..=n).map(|i| T::from_index(i) * h).collect();
        Ok(Self { n, h, nodes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> T {
        self.h
    }

    /// Interior nodes `x_1 .. x_N`.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn tag(&self) -> GridTag {
        GridTag(self.n)
    }

    pub fn check(&self, v: &StateVector<T>) -> Result<()> {
        if v.tag != self.tag() {
            return Err(Error::GridMismatch { expected: self.n, found: v.tag.0 });
        }
        Ok(())
    }

    fn assert_owns(&self, v: &StateVector<T>) {
        assert_eq!(v.tag, self.tag(), "state vector belongs to a different grid");
    }

    /// `sqrt(h * sum v_i^2)`.
    ///
    /// Panics if `v` lives on another grid.
    pub fn norm_2h(&self, v: &StateVector<T>) -> T {
        self.assert_owns(v);
        let sum: T = v.values.iter().map(|&a| a * a).sum();
        (self.h * sum).sqrt()
    }

    /// `sqrt(h * sum x_i v_i^2)`, the Euclidean norm weighted by `D`.
    ///
    /// Panics if `v` lives on another grid.
    pub fn norm_dh(&self, v: &StateVector<T>) -> T {
        self.assert_owns(v);
        let sum: T = v.values.iter().zip(&self.nodes).map(|(&a, &x)| x * a * a).sum();
        (self.h * sum).sqrt()
    }

    /// `max_i x_i^(-alpha) |v_i|`, i.e. `|D^(-alpha) v|_inf`.
    ///
    /// Panics if `v` lives on another grid.
    pub fn norm_inf_weighted(&self, v: &StateVector<T>, alpha: T) -> Result<T> {
        self.assert_owns(v);
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::AlphaOutOfRange(alpha.to_f64_lossy()));
        }
        if alpha == T::zero() {
            return Ok(v.norm_inf());
        }
        Ok(v.values.iter().zip(&self.nodes).map(|(&a, &x)| (-alpha * x.ln()).exp() * a.abs()).fold(T::zero(), T::max))
    }
}

/// Nodal values at the interior nodes of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    values: Vec<T>,
    tag: GridTag,
}

impl<T: Real> StateVector<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        Self { values: vec![T::zero(); grid.n()], tag: grid.tag() }
    }

    /// Wraps `values` as a state on `grid`; rejects wrong lengths and
    /// non-finite entries.
    pub fn from_vec(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::LengthMismatch { expected: grid.n(), found: values.len() });
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                index: i + 1,
                x: grid.nodes()[i].to_f64_lossy(),
                value: v.to_f64_lossy(),
            });
        }
        Ok(Self { values, tag: grid.tag() })
    }

    /// Samples `f` at the interior nodes.
    pub fn sample(grid: &Grid<T>, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_vec(grid, grid.nodes().iter().map(|&x| f(x)).collect())
    }

    /// Unchecked constructor for solver output, which may legitimately carry
    /// non-finite values when a run diverges.
    pub(crate) fn from_raw(tag: GridTag, values: Vec<T>) -> Self {
        Self { values, tag }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tag(&self) -> GridTag {
        self.tag
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm_inf(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// `self - other`; both must live on the same grid.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.tag != other.tag {
            return Err(Error::GridMismatch { expected: self.tag.0, found: other.tag.0 });
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect();
        Ok(Self { values, tag: self.tag })
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { values: self.values.iter().map(|&v| c * v).collect(), tag: self.tag }
    }
}

/// `sample_initial(f, grid)`: the initial state `u0 = (f(x_1), ..., f(x_N))`.
pub fn sample_initial<T: Real>(f: impl Fn(T) -> T, grid: &Grid<T>) -> Result<StateVector<T>> {
    StateVector::sample(grid, f)
}

/// Fixed step `dt = T / M` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    final_time: T,
    steps: usize,
    dt: T,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(final_time: T, steps: usize) -> Result<Self> {
        if !(final_time > T::zero()) || !final_time.is_finite() {
            return Err(Error::InvalidConfig(format!("final time must be positive, got {final_time}")));
        }
        if steps == 0 {
            return Err(Error::InvalidConfig("step count must be positive".into()));
        }
        Ok(Self { final_time, steps, dt: final_time / T::from_index(steps) })
    }

    /// Time grid with step `dt`; `final_time / dt` must be an integer up to
    /// a relative `1e-9`.
    pub fn from_step(final_time: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidTimeStep(dt.to_f64_lossy()));
        }
        let ratio = (final_time / dt).to_f64_lossy();
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps {
            return Err(Error::IncommensurateTimeStep { final_time: final_time.to_f64_lossy(), dt: dt.to_f64_lossy() });
        }
        Self::new(final_time, steps as usize)
    }

    pub fn final_time(&self) -> T {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// `t_n = n * dt`.
    pub fn time(&self, n: usize) -> T {
        T::from_index(n) * self.dt
    }
}
