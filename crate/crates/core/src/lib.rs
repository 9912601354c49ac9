//! Operator splitting in time and Gauss-Lobatto spectral elements in space for
//! the two-dimensional Schrödinger-Poisson equation
//!
//! ```text
//! i dψ/dt = -(1/2) Δψ + Θ ψ,   ΔΘ = |ψ|²,   ψ = Θ = 0 on the boundary,
//! ```
//!
//! together with a harness for measuring temporal and spatial convergence
//! orders.

pub mod assembly;
pub mod cli;
pub mod config;
pub mod error;
pub mod flows;
pub mod harness;
pub mod krylov;
pub mod mesh;
pub mod output;
pub mod poisson;
pub mod quadrature;
pub mod sparse;

pub use assembly::{Operators, StiffnessRule};
pub use config::{InitialCondition, RunConfig};
pub use error::{Error, Result};
pub use flows::{Propagator, Scheme, Signal, SolverSettings, State, StepInfo};
pub use krylov::ExpvWorkspace;
pub use mesh::{Mesh, Rect};
pub use poisson::{PoissonMethod, PoissonSolver};
pub use quadrature::GlBasis;
