//! Problem description: Hermitian block variables, real-linear functionals,
//! equality constraints and an optimization sense.

use num_complex::Complex64;
use thiserror::Error;

/// Errors raised while assembling or validating an [`SdpProblem`].
#[derive(Debug, Error)]
pub enum SdpError {
    #[error("block index {block} out of range ({blocks} blocks)")]
    BadBlock { block: usize, blocks: usize },
    #[error("entry ({row},{col}) out of range for block {block} of dim {dim}")]
    BadEntry {
        block: usize,
        row: usize,
        col: usize,
        dim: usize,
    },
    #[error("block dimension must be >= 1, got {0}")]
    ZeroBlock(usize),
    #[error("block dimension {0} exceeds the supported maximum of 200")]
    BlockTooLarge(usize),
    #[error("{0} independent constraints exceed the supported maximum of 5000")]
    TooManyConstraints(usize),
    #[error("presolve found inconsistent constraints (row {row}, rhs residual {residual:.3e})")]
    InconsistentConstraints { row: usize, residual: f64 },
    #[error("numerical breakdown: {0}")]
    Breakdown(String),
}

/// One scalar term of a real-linear functional on Hermitian blocks.
///
/// A term `(block, row, col, coeff)` contributes `Re(coeff * X[block][row,col])`
/// to the functional value. Hermitian symmetry of the equivalent coefficient
/// matrix is enforced by construction, so addressing `(row, col)` or
/// `(col, row)` with conjugated coefficient describes the same functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub coeff: Complex64,
}

/// Real-valued linear functional `f(X) = sum_k Re(c_k * X[b_k][i_k, j_k])`.
#[derive(Debug, Clone, Default)]
pub struct LinearFunctional {
    pub terms: Vec<Term>,
}

impl LinearFunctional {
    pub fn new() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn term(&mut self, block: usize, row: usize, col: usize, coeff: Complex64) -> &mut Self {
        self.terms.push(Term {
            block,
            row,
            col,
            coeff,
        });
        self
    }

    pub fn real_term(&mut self, block: usize, row: usize, col: usize, coeff: f64) -> &mut Self {
        self.term(block, row, col, Complex64::new(coeff, 0.0))
    }

    /// Evaluate on explicit Hermitian blocks (row-major complex storage).
    pub fn evaluate(&self, blocks: &[Vec<Complex64>], dims: &[usize]) -> f64 {
        let mut v = 0.0;
        for t in &self.terms {
            let d = dims[t.block];
            v += (t.coeff * blocks[t.block][t.row * d + t.col]).re;
        }
        v
    }

    /// Canonical form used for duplicate detection: terms folded onto the
    /// upper triangle, sorted, merged.
    pub(crate) fn canonical_terms(&self) -> Vec<(usize, usize, usize, f64, f64)> {
        let mut folded: Vec<(usize, usize, usize, Complex64)> = Vec::new();
        for t in &self.terms {
            let (r, c, co) = if t.row <= t.col {
                (t.row, t.col, t.coeff)
            } else {
                (t.col, t.row, t.coeff.conj())
            };
            folded.push((t.block, r, c, co));
        }
        folded.sort_by_key(|&(b, r, c, _)| (b, r, c));
        let mut merged: Vec<(usize, usize, usize, f64, f64)> = Vec::new();
        for (b, r, c, co) in folded {
            if let Some(last) = merged.last_mut() {
                if last.0 == b && last.1 == r && last.2 == c {
                    last.3 += co.re;
                    last.4 += co.im;
                    continue;
                }
            }
            merged.push((b, r, c, co.re, co.im));
        }
        merged.retain(|m| m.3.abs() > 0.0 || m.4.abs() > 0.0);
        merged
    }
}

/// Optimization sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Feasibility,
}

/// A semidefinite program over one or more Hermitian PSD blocks:
/// optimize `objective(X) + offset` subject to `constraint_k(X) = rhs_k`
/// and every block positive semidefinite.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub objective: LinearFunctional,
    pub objective_offset: f64,
    pub constraints: Vec<(LinearFunctional, f64)>,
    pub sense: Sense,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>) -> Result<Self, SdpError> {
        for &d in &block_dims {
            if d == 0 {
                return Err(SdpError::ZeroBlock(d));
            }
            if d > 200 {
                return Err(SdpError::BlockTooLarge(d));
            }
        }
        Ok(Self {
            block_dims,
            objective: LinearFunctional::new(),
            objective_offset: 0.0,
            constraints: Vec::new(),
            sense: Sense::Maximize,
        })
    }

    pub fn set_objective(&mut self, f: LinearFunctional, offset: f64) -> Result<(), SdpError> {
        self.check_functional(&f)?;
        self.objective = f;
        self.objective_offset = offset;
        Ok(())
    }

    pub fn add_constraint(&mut self, f: LinearFunctional, rhs: f64) -> Result<(), SdpError> {
        self.check_functional(&f)?;
        self.constraints.push((f, rhs));
        Ok(())
    }

    fn check_functional(&self, f: &LinearFunctional) -> Result<(), SdpError> {
        for t in &f.terms {
            if t.block >= self.block_dims.len() {
                return Err(SdpError::BadBlock {
                    block: t.block,
                    blocks: self.block_dims.len(),
                });
            }
            let dim = self.block_dims[t.block];
            if t.row >= dim || t.col >= dim {
                return Err(SdpError::BadEntry {
                    block: t.block,
                    row: t.row,
                    col: t.col,
                    dim,
                });
            }
        }
        Ok(())
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, PartialEq)]
pub enum SdpStatus {
    Optimal,
    /// Heuristic flag: dual objective diverged past 1e8; no rigorous
    /// certificate is produced at this scale.
    Infeasible {
        dual_objective: f64,
    },
    MaxIterations,
}

/// Residuals and gap achieved by the returned iterate.
#[derive(Debug, Clone, Copy)]
pub struct Achieved {
    /// Largest |constraint residual| recomputed directly from the primal.
    pub constraint_residual: f64,
    /// Relative duality gap |p - d| / (1 + |p| + |d|).
    pub duality_gap: f64,
    /// Smallest eigenvalue over all primal blocks.
    pub min_eigenvalue: f64,
    /// Frobenius norm of the dual slack residual.
    pub dual_residual: f64,
}

/// Solution of an [`SdpProblem`].
#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Hermitian primal blocks, row-major complex storage.
    pub primal: Vec<Vec<Complex64>>,
    /// Dual multipliers, one per original constraint (rows dropped by
    /// presolve carry 0).
    pub dual: Vec<f64>,
    /// Objective value in the problem's own sense, offset included.
    pub objective: f64,
    pub status: SdpStatus,
    pub achieved: Achieved,
    pub iterations: usize,
}
