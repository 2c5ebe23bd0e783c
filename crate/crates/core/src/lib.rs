//! Spectral solver for the Schrödinger–Bopp–Podolsky system on a box.
//!
//! The core is generic over the scalar type (`f32` or `f64`); the aliases
//! below fix it to `f64`, which every tolerance in the test suite assumes.

pub mod charge;
pub mod energy;
pub mod error;
pub mod field;
pub mod greens;
pub mod grid;
pub mod manifold;
pub mod operators;
pub mod poly;
pub mod quadrature;
pub mod reduction;
pub mod sampling;
pub mod scalar;
pub mod solver;

pub use charge::ChargeProfile;
pub use energy::{Case, Multipliers, ProblemSpec};
pub use error::{Error, Result};
pub use field::{BoundaryClass, ScalarField};
pub use grid::{make_grid, BoxDomain, Grid};
pub use operators::{Biharmonic, BoundaryFlux, ChiSolution, FaceData};
pub use reduction::Regime;
pub use scalar::Real;
pub use solver::{Solution, SolverOptions, Status, Symmetry};

pub type BoxDomain64 = BoxDomain<f64>;
pub type Grid64 = Grid<f64>;
pub type Field64 = ScalarField<f64>;
pub type Charge64 = ChargeProfile<f64>;
pub type Spec64 = ProblemSpec<f64>;
pub type Flux64 = BoundaryFlux<f64>;
pub type Chi64 = ChiSolution<f64>;
pub type Solution64 = Solution<f64>;
pub type Options64 = SolverOptions<f64>;
