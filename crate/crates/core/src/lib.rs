//! Projected line-search descent on the real-algebraic variety of m×n
//! matrices of rank at most k.
//!
//! Iterates are kept in compact SVD form ([`FactoredMatrix`]); gradients are
//! structured ([`Ambient`]) so that sparse or low-rank gradients are never
//! densified on the hot path. The building blocks are:
//!
//! - [`variety`]: tangent-space and tangent-cone projections, the projected
//!   antigradient norm `g⁻`, the truncated-SVD retraction and the
//!   rank-preserving partial directions,
//! - [`linesearch`]: Armijo backtracking and the descent-condition monitors,
//! - [`solvers`]: projected steepest descent and the retraction-free method,
//! - [`experiment`]: random matrix-completion problems and the benchmark harness.

pub mod error;
pub mod experiment;
pub mod linesearch;
pub mod matcore;
pub mod objectives;
pub mod solvers;
pub mod variety;

pub use error::{Error, Result};
pub use matcore::{frob_inner, mask_apply, numerical_rank, svd, truncate, Ambient, FactoredMatrix, IndexSet, SparseOnMask};
pub use nalgebra::{DMatrix, DVector};
pub use objectives::{MatrixCompletion, Objective, QuadraticDistance};
pub use variety::{ConeTangentVector, VarietyPoint};
