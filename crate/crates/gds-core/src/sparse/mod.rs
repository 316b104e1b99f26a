//! Sparse symmetric storage, graph-coloring finite-difference Hessians,
//! sparse Cholesky factorization, and triangular solves.

mod cholesky;
mod coloring;
mod fd;
mod matrix;
mod pattern;

pub use cholesky::{cholesky, solve_lt, CholFactor, SolveMode, SparseError};
pub use coloring::{color_pattern, coloring_is_valid, cover_counts, Coloring};
pub use fd::{fd_hessian, FdError};
pub use matrix::SparseSymMatrix;
pub use pattern::SparsityPattern;
