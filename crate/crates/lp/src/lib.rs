//! Dense linear programming.
//!
//! A small bounded-variable revised simplex solver. Problems are stored
//! densely: the programs produced by bound tightening and branch-and-bound
//! over small networks have at most a few hundred rows and columns, so a
//! dense explicit basis inverse with periodic refactorization is both simple
//! and fast enough.
//!
//! Every constraint row `a·x (≤|=|≥) rhs` gets a slack `s` with
//! `a·x + s = rhs` and bounds chosen by the relation, so the solver itself
//! only ever sees equality rows and bounded columns.

mod dump;
mod simplex;

pub use dump::{parse_lp, write_lp, ParseLpError};
pub use simplex::{solve, solve_with_hint, SolverOptions};

use thiserror::Error;

/// Optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Relation of a constraint row to its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    Equal,
    GreaterEq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program with per-variable bounds. Bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// New program over `objective.len()` variables, each bounded to `[0, ∞)`.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed(format!(
                "bound vectors have lengths {}/{} but there are {n} variables",
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("objective has non-finite entries".into()));
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(LpError::Malformed(format!(
                    "variable {j} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        for (r, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "constraint {r} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(LpError::Malformed(format!(
                    "constraint {r} has non-finite data"
                )));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.constraints {
            let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let viol = match row.relation {
                Relation::LessEq => lhs - row.rhs,
                Relation::GreaterEq => row.rhs - lhs,
                Relation::Equal => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Position of a column relative to the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free column held at zero.
    Free,
}

/// Basis over structural columns followed by one slack per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective at `primal` in the program's own sense. `-∞`/`+∞` (for
    /// maximization) when infeasible/unbounded.
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Row multipliers in the program's own sense: for maximization a `≤`
    /// row has a nonnegative multiplier at optimality.
    pub dual: Vec<f64>,
    /// Lagrangian bound `yᵀb + Σ max/min over the bound box` built from
    /// `dual`. Valid for any multipliers, so it stays a safe bound on the
    /// optimum even when the primal carries rounding error.
    pub dual_bound: f64,
    pub basis: Option<Basis>,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error(
        "numerical failure after {iterations} iterations: {reason} \
         (basis condition estimate {condition:.3e})"
    )]
    Numerical {
        reason: String,
        iterations: usize,
        condition: f64,
    },
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}
