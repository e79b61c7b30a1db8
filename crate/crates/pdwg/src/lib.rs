//! Primal-dual weak Galerkin (PDWG) finite elements for the convection-diffusion
//! equation
//!
//! ```text
//!   -div(a grad u + b u) = f   in Omega,
//!                      u = g1  on Gamma_D,
//!   (a grad u + b u) . n = g2  on Gamma_N,
//! ```
//!
//! discretized on conforming triangular meshes. The primal unknown is a weak
//! function `u_h = {u0, ub, un}` (interior value, edge trace, edge flux) coupled
//! to a piecewise-polynomial Lagrange multiplier `lambda_h` through the weak
//! formulation; the resulting linear system is sparse, symmetric and indefinite.
//!
//! The crate provides mesh generation and uniform refinement, scaled polynomial
//! bases with quadrature, the discrete weak gradient and local/global assembly,
//! direct and iterative solvers, error/convergence analysis, and a study harness
//! that reproduces convergence-rate tables.

pub mod analysis;
pub mod assembly;
pub mod basis;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod study;
pub mod verify;

/// 2D point or vector.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2x2 tensor (diffusion coefficient).
pub type Mat2 = nalgebra::Matrix2<f64>;

pub use analysis::{conservation_residual, error_norms, flux_jump, rates, sample_field, ErrorReport, LevelReport};
pub use assembly::{assemble, commutativity_check, project_qh, weak_gradient, LocalWeakGradient, SaddleSystem};
pub use mesh::{BoundaryTag, Domain, EdgeFrame, Mesh};
pub use problem::{builtin, manufacture, DomainChoice, ExampleId, LoadChoice, ProblemSpec};
pub use solver::{solve, Method, SolveOptions, SolveReport, SparseMatrix};
pub use space::WgSpace;
pub use study::{run_study, StudyConfig, StudyReport};
pub use verify::{run_verify, VerifyReport};

/// Errors produced by mesh construction, assembly, and solves.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("quadrature degree {0} out of range (max {max})", max = quadrature::MAX_EXACT_DEGREE)]
    QuadDegreeOutOfRange(usize),
    #[error("unsupported derivative order {0} (max 2)")]
    UnsupportedDerivOrder(usize),
    #[error("invalid degree pair k={k}, l={l}: require k >= 1 and l in {{k-1, k}}")]
    InvalidDegrees { k: usize, l: usize },
    #[error("element {0} is degenerate")]
    DegenerateElement(usize),
    #[error("boundary edge {0} is unclassified")]
    UntaggedBoundaryEdge(usize),
    #[error("system singular")]
    Singular,
    #[error("not converged after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("missing exact solution for error computation")]
    MissingExact,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
