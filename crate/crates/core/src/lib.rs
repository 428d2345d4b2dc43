//! Radial solver for `-Δu + V(x) u = f'(u) + g(x)` in `ℝᴺ` with a
//! double-power nonlinearity, using a Nehari manifold decomposition.

pub mod config;
pub mod error;
pub mod fibering;
pub mod grid;
pub mod harness;
pub mod nonlinearity;
pub mod orlicz;
pub mod roots;
pub mod solver;
pub mod tridiag;

pub use config::Config;
pub use error::{Error, Result};
pub use fibering::{Branch, FiberingProfile, PairingCase};
pub use grid::{GridFunction, OuterBoundary, ProblemSpec, RadialGrid};
pub use nonlinearity::DoublePowerParams;
pub use solver::{SolutionBranch, SolveReport, SolverOptions};
