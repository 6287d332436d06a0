//! Piecewise SOS-convex generalized moment optimization compiled to exact
//! semidefinite programs, with a built-in interior-point conic solver.
//!
//! The crate models problems of the form
//! `min_mu E_mu[ min_k max_l g_l^k(v) ]` over measures supported on a
//! projected spectrahedron and satisfying generalized moment bounds, builds
//! the equivalent primal/dual semidefinite pair, solves it, and recovers a
//! discrete optimal measure.

pub mod apps;
pub mod compile;
pub mod conic;
pub mod model;
pub mod oracle;
pub mod poly;
pub mod recovery;
pub mod sdpa;
pub mod solver;
pub mod sos;
pub mod support;

pub use compile::{compile, compile_poly_opt, CompiledPair};
pub use conic::{Cone, ConicProgram, Solution, SolveStatus};
pub use model::{DiscreteMeasure, MomentConstraint, MomentProblem, PiecewiseSosConvex};
pub use poly::{MonomialBasis, MultiIndex, Polynomial};
pub use recovery::{jensen_check, recover, RecoveryReport};
pub use solver::{solve, SolveOptions};
pub use support::ProjectedSpectrahedron;
