//! Numerical laboratory for the Dirichlet problem
//!
//! ```text
//! chi_u^n = psi chi_u ^ omega^{n-1}   in M,      u = phi on dM,
//! ```
//!
//! where `chi_u = chi + (i/2) d dbar u`, on axis-aligned boxes in `C^n` carrying
//! a (generally non-Kahler) Hermitian metric `omega`.
//!
//! Locally the equation reads `det(gt) = (psi/n) W det(g)` with
//! `gt = chi + Hess u` and `W = tr_g gt`. The crate provides
//!
//! * [`geom`]: analytic background metrics with their Chern connection,
//!   torsion and curvature;
//! * [`pointwise`]: the per-point algebra (residual, linearization,
//!   subsolution and cone predicates, strict-concavity margins) and an
//!   exterior-algebra oracle;
//! * [`grid`]: box discretization with second-order complex Hessian stencils;
//! * [`solver`]: damped Newton with an admissibility-preserving line search
//!   inside a continuation in `psi`, and a manufactured-solution generator;
//! * [`estimates`]: post-solve diagnostics (comparison, barrier inequality,
//!   gradient/Laplacian ratio reports);
//! * [`io`]: field files, configuration documents and reports.

pub mod error;
pub mod functions;
pub mod geom;
pub mod grid;
pub mod io;
pub mod pointwise;
pub mod solver;
pub mod estimates;

pub use error::{Error, Result};
pub use functions::AnalyticFn;
pub use geom::{MetricField, ChiForm};

pub use grid::{GridSpec, Region, ScalarField};
pub use pointwise::{HermitianMat, Pencil, PointData};
pub use solver::{ProblemSpec, SolveOptions, SolveReport, SolveState};
pub use estimates::EstimateReport;
pub use num_complex::Complex64;

/// Dense complex matrix used for small pointwise tensors.
pub type CMat = nalgebra::DMatrix<Complex64>;
