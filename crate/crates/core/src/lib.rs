//! Semi-implicit finite-difference solver for the radially symmetric
//! harmonic map heat flow
//!
//! ```text
//! u_t = u_xx + u_x / x - sin(2u) / (2 x^2),   x in (0, 1),
//! u(0, t) = u(1, t) = 0,
//! ```
//!
//! together with the machinery needed to check it: discrete norms, M-matrix
//! stability checks, the discrete Dirichlet energy, a BDF2 reference
//! integrator and convergence studies.
//!
//! The numerical core ([`grid`], [`operators`], [`linsolve`], [`stepper`],
//! [`diagnostics`]) is generic over the scalar type through [`Real`]. The
//! verification suite and the experiment harness run in `f64`; the aliases
//! below name the concrete types they use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod linsolve;
pub mod operators;
pub mod scalar;
pub mod stepper;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid = grid::Grid<f64>;
pub type Grid32 = grid::Grid<f32>;
pub type StateVector = grid::StateVector<f64>;
pub type StateVector32 = grid::StateVector<f32>;
pub type TimeGrid = grid::TimeGrid<f64>;
pub type Tridiagonal = operators::Tridiagonal<f64>;
pub type Diagonal = operators::Diagonal<f64>;
pub type StabilityParams = operators::StabilityParams<f64>;
pub type DenseMatrix = linsolve::DenseMatrix<f64>;
pub type SchemeConfig = stepper::SchemeConfig<f64>;
pub type Trajectory = stepper::Trajectory<f64>;
pub type EnergyTrace = diagnostics::EnergyTrace<f64>;
pub type BlowupReport = diagnostics::BlowupReport<f64>;
