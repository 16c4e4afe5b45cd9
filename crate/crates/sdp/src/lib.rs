//! Dense semidefinite programming for small Hermitian problems.
//!
//! The variable is a tuple of Hermitian positive semidefinite blocks.
//! Objectives and constraints are real-linear functionals on the entries,
//! written as sums of `Re(c * X[b][i,j])` terms. Internally every Hermitian
//! block of dimension d is embedded as the real symmetric block
//! `[Re X, -Im X; Im X, Re X]` of dimension 2d and the embedded problem is
//! solved by a primal-dual interior-point method with Nesterov-Todd scaling
//! and a Mehrotra predictor-corrector step.
//!
//! The solver is deterministic: a fixed initial point, cyclic Jacobi
//! eigensolves and no randomness anywhere, so identical inputs give
//! bit-identical iterate sequences.

// Dense kernels index into flat buffers throughout; range loops are the idiom.
#![allow(clippy::needless_range_loop)]

pub mod linalg;
mod problem;
mod solver;

pub use problem::{
    Achieved, LinearFunctional, SdpError, SdpProblem, SdpSolution, SdpStatus, Sense, Term,
};
pub use solver::{solve, SolveOptions};
