use highs::{Col, HighsModelStatus, Model, RowProblem, Sense};

use super::{status_error, LinearProgram, LpSession, LpSolution, LpSolver, LpStatus, Method, Row};
use crate::error::Result;

/// HiGHS through the `highs` crate.
#[derive(Clone, Copy, Debug)]
pub struct HighsSolver {
    pub feasibility_tol: f64,
    pub threads: u32,
    pub method: Method,
}

impl Default for HighsSolver {
    fn default() -> Self {
        Self { feasibility_tol: 1e-9, threads: 1, method: Method::Auto }
    }
}

impl HighsSolver {
    fn build(&self, lp: &LinearProgram, presolve: bool) -> (Model, Vec<Col>) {
        let mut problem = RowProblem::new();
        let cols: Vec<Col> = (0..lp.num_vars())
            .map(|j| problem.add_column(lp.objective[j], lp.col_lower[j]..=lp.col_upper[j]))
            .collect();
        for row in &lp.rows {
            problem.add_row(row.lower..=row.upper, row.coefs.iter().map(|&(j, c)| (cols[j], c)));
        }
        let mut model = problem.optimise(Sense::Minimise);
        model.make_quiet();
        model.set_option("primal_feasibility_tolerance", self.feasibility_tol);
        model.set_option("dual_feasibility_tolerance", self.feasibility_tol);
        model.set_option("threads", self.threads.max(1) as i32);
        match self.method {
            Method::Auto => {}
            Method::Simplex => model.set_option("solver", "simplex"),
            Method::InteriorPoint => model.set_option("solver", "ipm"),
        }
        if !presolve {
            model.set_option("presolve", "off");
        }
        (model, cols)
    }
}

fn map_status(status: HighsModelStatus) -> LpStatus {
    match status {
        HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => LpStatus::Optimal,
        HighsModelStatus::Infeasible => LpStatus::Infeasible,
        HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => LpStatus::Unbounded,
        HighsModelStatus::ReachedIterationLimit | HighsModelStatus::ReachedTimeLimit => {
            LpStatus::IterationLimit
        }
        other => LpStatus::Failed(format!("{other:?}")),
    }
}

/// Solves `model`, returning the solved model as a fresh [`Model`] so more
/// rows can be added.
fn run(model: Model, lp: &LinearProgram) -> (Result<LpSolution>, Option<Model>) {
    let solved = match model.try_solve() {
        Ok(s) => s,
        Err(e) => return (Err(status_error(LpStatus::Failed(format!("{e:?}")), "HiGHS")), None),
    };
    let status = map_status(solved.status());
    let result = if status == LpStatus::Optimal {
        let x = solved.get_solution().columns().to_vec();
        Ok(LpSolution { objective: lp.objective_value(&x), x })
    } else {
        Err(status_error(status, "HiGHS"))
    };
    (result, Some(Model::from(solved)))
}

impl LpSolver for HighsSolver {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution> {
        let (model, _) = self.build(lp, true);
        run(model, lp).0
    }

    fn session(&self, lp: LinearProgram) -> Box<dyn LpSession> {
        // Presolve off keeps the basis, so re-solves after a new row warm start.
        let (model, cols) = self.build(&lp, false);
        Box::new(HighsSession { model: Some(model), cols, lp, solver: *self })
    }
}

struct HighsSession {
    model: Option<Model>,
    cols: Vec<Col>,
    lp: LinearProgram,
    solver: HighsSolver,
}

impl LpSession for HighsSession {
    fn add_row(&mut self, row: Row) {
        if let Some(model) = self.model.as_mut() {
            model.add_row(row.lower..=row.upper, row.coefs.iter().map(|&(j, c)| (self.cols[j], c)));
        }
        self.lp.add_row(row);
    }

    fn solve(&mut self) -> Result<LpSolution> {
        let model = match self.model.take() {
            Some(m) => m,
            None => self.solver.build(&self.lp, false).0,
        };
        let (result, model) = run(model, &self.lp);
        self.model = model;
        result
    }

    fn program(&self) -> &LinearProgram {
        &self.lp
    }
}
