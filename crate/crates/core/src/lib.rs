//! Douglas-Rachford and Peaceman-Rachford dimension splitting for linear
//! dissipative evolution equations `u' = (A + B) u`.
//!
//! The concrete instance is the 2D diffusion problem
//! `u_t = ∂x(λ(x)μ(y) ∂x u) + ∂y(λ(x)μ(y) ∂y u)` on the unit square with
//! homogeneous Dirichlet data, discretized by bilinear finite elements with
//! trapezoidal (lumped) quadrature. Each split operator then acts on grid lines
//! only and every implicit stage is a batch of tridiagonal solves.
//!
//! - [`grid`]: mesh, finite element fields, lumped inner product, interpolation
//! - [`operators`]: the 1D matrices and the matrix-free `A_h`, `B_h`, `L_h`
//! - [`steppers`]: DR, PR and Crank-Nicolson step maps
//! - [`linsolve`]: CG, Kronecker fast-diagonalization solver, power iteration
//! - [`oracle`]: dense reference implementations for small grids
//! - [`experiments`]: convergence studies and the assumption report

pub mod error;
pub mod experiments;
pub mod grid;
pub mod linsolve;
pub mod operators;
pub mod oracle;
pub mod problem;
pub mod steppers;

pub use error::{Error, Result};
pub use grid::{Field, Function1D, Function2D, Grid};
pub use linsolve::{LinearSolver, LinearSolverHandle, SolverMethod};
pub use operators::SplitDiffusionOperator;
pub use problem::CoefficientSet;
pub use steppers::{Scheme, SplitOperator};
