//! Sparse linear programs and the solver interface.
//!
//! Programs are always minimisation problems over bounded columns and ranged
//! rows. Two backends exist: HiGHS (feature `highs`, the default) and a dense
//! two-phase simplex meant for small programs and cross-checks.

mod export;
#[cfg(feature = "highs")]
mod highs_backend;
mod simplex;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use export::write_lp_format;
#[cfg(feature = "highs")]
pub use highs_backend::HighsSolver;
pub use simplex::DenseSimplex;

/// Ranged constraint `lower <= Σ coef·x <= upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl Row {
    pub fn le(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coefs, lower: f64::NEG_INFINITY, upper: rhs }
    }

    pub fn ge(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coefs, lower: rhs, upper: f64::INFINITY }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, c)| c * x[j]).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub col_names: Vec<String>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.col_names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, row: Row) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, v) in x.iter().enumerate() {
            worst = worst.max(self.col_lower[j] - v).max(v - self.col_upper[j]);
        }
        for row in &self.rows {
            let a = row.activity(x);
            worst = worst.max(row.lower - a).max(a - row.upper);
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Failed(String),
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpStatus::Optimal => write!(f, "optimal"),
            LpStatus::Infeasible => write!(f, "infeasible"),
            LpStatus::Unbounded => write!(f, "unbounded"),
            LpStatus::IterationLimit => write!(f, "iteration limit"),
            LpStatus::Failed(s) => write!(f, "failed: {s}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

pub trait LpSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Solves to optimality or reports the failing status as an error.
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution>;

    /// Opens a session that keeps solver state between solves, so rows can be
    /// appended and the program re-optimised from the previous basis.
    fn session(&self, lp: LinearProgram) -> Box<dyn LpSession>;
}

pub trait LpSession {
    fn add_row(&mut self, row: Row);
    fn solve(&mut self) -> Result<LpSolution>;
    fn program(&self) -> &LinearProgram;
}

/// Session that re-solves the accumulated program from scratch.
pub(crate) struct RebuildSession<S> {
    pub solver: S,
    pub lp: LinearProgram,
}

impl<S: LpSolver> LpSession for RebuildSession<S> {
    fn add_row(&mut self, row: Row) {
        self.lp.add_row(row);
    }

    fn solve(&mut self) -> Result<LpSolution> {
        self.solver.solve(&self.lp)
    }

    fn program(&self) -> &LinearProgram {
        &self.lp
    }
}

pub(crate) fn status_error(status: LpStatus, message: impl Into<String>) -> Error {
    Error::Solver { status: status.to_string(), message: message.into() }
}

/// Algorithm hint for backends that offer several.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    #[default]
    Auto,
    Simplex,
    /// Interior point followed by crossover to a basic solution.
    InteriorPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Highs,
    Simplex,
}

impl Backend {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "highs" => {
                if cfg!(feature = "highs") {
                    Ok(Backend::Highs)
                } else {
                    Err(Error::InvalidArgument("this build has no HiGHS backend".into()))
                }
            }
            "simplex" | "dense" => Ok(Backend::Simplex),
            other => Err(Error::InvalidArgument(format!("unknown LP backend {other:?}"))),
        }
    }

    /// Backend named by `SOLVER_BACKEND`, else HiGHS when compiled in.
    pub fn from_env() -> Result<Self> {
        match std::env::var("SOLVER_BACKEND") {
            Ok(name) if !name.trim().is_empty() => Self::parse(&name),
            _ => Ok(Self::default()),
        }
    }

    pub fn solver(self) -> Box<dyn LpSolver> {
        self.solver_with(Method::Auto)
    }

    /// Solver with an algorithm hint; backends without a choice ignore it.
    pub fn solver_with(self, method: Method) -> Box<dyn LpSolver> {
        #[cfg(not(feature = "highs"))]
        let _ = method;
        match self {
            #[cfg(feature = "highs")]
            Backend::Highs => Box::new(HighsSolver { method, ..HighsSolver::default() }),
            #[cfg(not(feature = "highs"))]
            Backend::Highs => Box::new(DenseSimplex::default()),
            Backend::Simplex => Box::new(DenseSimplex::default()),
        }
    }
}

impl Default for Backend {
    fn default() -> Self {
        if cfg!(feature = "highs") {
            Backend::Highs
        } else {
            Backend::Simplex
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Highs => write!(f, "highs"),
            Backend::Simplex => write!(f, "simplex"),
        }
    }
}
