//! Small dense semidefinite programs over Hermitian matrices.
//!
//! A problem is a list of PSD blocks, a Hermitian objective per block and
//! linear trace constraints `sum_b Tr{A_mb X_b} (>=|<=|=) rhs_m`. Problems are
//! mapped to real symmetric form ([`embed`]) and solved with a homogeneous
//! self-dual interior-point method ([`ipm`]) that either converges to a KKT
//! point or returns an infeasibility certificate.
//!
//! Dual multipliers follow the Lagrangian
//! `Tr{C X} - sum_{>=} l_m (Tr{A_m X} - b_m) + sum_{<=} l_m (Tr{A_m X} - b_m)`,
//! so every inequality multiplier is nonnegative.

pub mod embed;
pub mod ipm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, ComplexMatrix};

pub use embed::{embed_hermitian_to_real, embed_matrix, recover_hermitian, RealConstraint, RealSdp};
pub use ipm::SolverSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintTerm {
    pub block: usize,
    #[serde(with = "crate::serde_complex::matrix")]
    pub coeff: ComplexMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub terms: Vec<ConstraintTerm>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(terms: Vec<(usize, ComplexMatrix)>, sense: Sense, rhs: f64) -> Self {
        Self {
            terms: terms
                .into_iter()
                .map(|(block, coeff)| ConstraintTerm { block, coeff })
                .collect(),
            sense,
            rhs,
        }
    }

    /// `sum_b Tr{A_b X_b}`.
    pub fn evaluate(&self, blocks: &[ComplexMatrix]) -> f64 {
        self.terms
            .iter()
            .map(|t| numerics::trace_product(&t.coeff, &blocks[t.block]))
            .sum()
    }
}

/// `min sum_b Tr{C_b X_b}` subject to trace constraints, `X_b` Hermitian PSD.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    #[serde(with = "crate::serde_complex::matrix_vec")]
    pub objective: Vec<ComplexMatrix>,
    pub constraints: Vec<LinearConstraint>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("block {block}: expected {expected}x{expected} matrix, got {rows}x{cols}")]
    BlockShape {
        block: usize,
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("constraint {constraint} references block {block} which does not exist")]
    UnknownBlock { constraint: usize, block: usize },
    #[error("coefficient matrix not Hermitian (constraint {constraint:?}, block {block})")]
    NotHermitian {
        constraint: Option<usize>,
        block: usize,
    },
    #[error("constraint {0} has a non-finite right-hand side")]
    NonFiniteRhs(usize),
}

impl SdpProblem {
    /// Problem with zero objective on every block and no constraints.
    pub fn new(block_dims: Vec<usize>) -> Self {
        let objective = block_dims.iter().map(|&n| ComplexMatrix::zeros(n, n)).collect();
        Self {
            block_dims,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn set_objective(&mut self, block: usize, coeff: ComplexMatrix) {
        self.objective[block] = coeff;
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, ComplexMatrix)>, sense: Sense, rhs: f64) {
        self.constraints.push(LinearConstraint::new(terms, sense, rhs));
    }

    pub fn objective_value(&self, blocks: &[ComplexMatrix]) -> f64 {
        self.objective
            .iter()
            .zip(blocks)
            .map(|(c, x)| numerics::trace_product(c, x))
            .sum()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let check = |m: &ComplexMatrix, block: usize, constraint: Option<usize>| {
            let n = self.block_dims[block];
            if m.nrows() != n || m.ncols() != n {
                return Err(SdpError::BlockShape {
                    block,
                    expected: n,
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
            }
            if !numerics::is_hermitian(m) {
                return Err(SdpError::NotHermitian { constraint, block });
            }
            Ok(())
        };
        for (b, c) in self.objective.iter().enumerate() {
            check(c, b, None)?;
        }
        for (m, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return Err(SdpError::NonFiniteRhs(m));
            }
            for t in &con.terms {
                if t.block >= self.block_dims.len() {
                    return Err(SdpError::UnknownBlock {
                        constraint: m,
                        block: t.block,
                    });
                }
                check(&t.coeff, t.block, Some(m))?;
            }
        }
        Ok(())
    }

    /// Debug dump for cross-checking against an external solver.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    PrimalInfeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub blocks: Vec<ComplexMatrix>,
    pub objective: f64,
    pub dual_objective: f64,
    /// One multiplier per constraint; nonnegative for inequalities, free for equalities.
    pub duals: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

/// Solves with default [`SolverSettings`].
pub fn solve_sdp(problem: &SdpProblem) -> Result<SdpSolution, SdpError> {
    solve_sdp_with(problem, &SolverSettings::default())
}

pub fn solve_sdp_with(problem: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let real = embed_hermitian_to_real(problem);
    let raw = ipm::solve(&real, settings);
    let blocks: Vec<ComplexMatrix> = raw.blocks.iter().map(recover_hermitian).collect();
    let objective = problem.objective_value(&blocks);
    let dual_objective = problem
        .constraints
        .iter()
        .zip(&raw.duals)
        .map(|(c, &l)| match c.sense {
            Sense::Ge | Sense::Eq => l * c.rhs,
            Sense::Le => -l * c.rhs,
        })
        .sum();
    let mut solution = SdpSolution {
        status: raw.status,
        blocks,
        objective,
        dual_objective,
        duals: raw.duals,
        kkt_residual: f64::INFINITY,
        iterations: raw.iterations,
    };
    if solution.status == SdpStatus::Optimal {
        solution.kkt_residual = check_kkt(problem, &solution);
    }
    Ok(solution)
}

/// Dual slack `Z_b = C_b - sum_m s_m l_m A_mb` with `s_m = -1` for `<=` rows.
pub fn dual_slack(problem: &SdpProblem, duals: &[f64]) -> Vec<ComplexMatrix> {
    let mut z = problem.objective.clone();
    for (con, &l) in problem.constraints.iter().zip(duals) {
        let signed = match con.sense {
            Sense::Ge | Sense::Eq => l,
            Sense::Le => -l,
        };
        for t in &con.terms {
            z[t.block] -= t.coeff.map(|v| v * signed);
        }
    }
    z
}

fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    numerics::hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Largest of primal violation, dual violation, `|l_m * slack_m|` and the
/// relative duality gap `|p - d| / (1 + |p|)`.
pub fn check_kkt(problem: &SdpProblem, solution: &SdpSolution) -> f64 {
    let x = &solution.blocks;
    let mut primal = 0.0_f64;
    let mut compl = 0.0_f64;
    let mut dual = 0.0_f64;
    for (con, &l) in problem.constraints.iter().zip(&solution.duals) {
        let lhs = con.evaluate(x);
        let (viol, slack) = match con.sense {
            Sense::Ge => ((con.rhs - lhs).max(0.0), lhs - con.rhs),
            Sense::Le => ((lhs - con.rhs).max(0.0), con.rhs - lhs),
            Sense::Eq => ((lhs - con.rhs).abs(), 0.0),
        };
        primal = primal.max(viol);
        if con.sense != Sense::Eq {
            dual = dual.max((-l).max(0.0));
            compl = compl.max((l * slack).abs());
        }
    }
    for xb in x {
        primal = primal.max((-min_eigenvalue(xb)).max(0.0));
    }
    for zb in dual_slack(problem, &solution.duals) {
        dual = dual.max((-min_eigenvalue(&zb)).max(0.0));
    }
    let pobj = problem.objective_value(x);
    let dobj: f64 = problem
        .constraints
        .iter()
        .zip(&solution.duals)
        .map(|(c, &l)| match c.sense {
            Sense::Ge | Sense::Eq => l * c.rhs,
            Sense::Le => -l * c.rhs,
        })
        .sum();
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
    primal.max(dual).max(compl).max(gap)
}
