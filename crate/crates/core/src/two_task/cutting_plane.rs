//! Kelley's cutting-plane method over the piecewise rational family.
//!
//! The master LP minimises `t` over `(t, c0_2, c1_2, .., c0_k, c1_k)` subject
//! to the family constraints and `phi_two(F; x, y) <= t` for each cut, which
//! is linear in the coefficients once `(x, y)` and its cell are fixed. The
//! separation step is the exact sweep over all admissible cells.

use std::time::Instant;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::family::{PiecewiseRationalCDF, PiecewiseRationalDoc};
use super::inner_max::{phi_cell, sweep};
use crate::error::{Error, Result};
use crate::grid::GridSet;
use crate::lp::{Backend, LinearProgram, LpSolver, Row};
use crate::scalar;

pub const DEFAULT_STOP_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Two cuts closer than this in both coordinates count as the same point.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// A constraint point `(x, y) = (1/u, y)` together with the cell whose
/// pieces define it, so points on a breakpoint use that cell's closure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub i: usize,
    pub j: usize,
    pub u: f64,
    pub y: f64,
}

impl Cut {
    pub fn x(&self) -> Option<f64> {
        (self.u > 0.0).then(|| 1.0 / self.u)
    }

    fn same_point(&self, other: &Cut) -> bool {
        self.i == other.i
            && self.j == other.j
            && (self.u - other.u).abs() <= DUPLICATE_TOL
            && (self.y - other.y).abs() <= DUPLICATE_TOL
    }
}

#[derive(Clone, Debug)]
pub struct CuttingPlaneOptions {
    pub stop_tol: f64,
    pub max_iter: usize,
    pub binding_tol: f64,
    pub backend: Backend,
}

impl Default for CuttingPlaneOptions {
    fn default() -> Self {
        Self {
            stop_tol: DEFAULT_STOP_TOL,
            max_iter: DEFAULT_MAX_ITER,
            binding_tol: crate::lower_bound::DEFAULT_BINDING_TOL,
            backend: Backend::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub t_lower: f64,
    pub t_upper: f64,
    pub cell: [usize; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopStatus {
    Converged,
    Stalled,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct RefineResult {
    pub cdf: PiecewiseRationalCDF,
    pub t_lower: f64,
    pub t_upper: f64,
    pub cuts: Vec<Cut>,
    pub iterations: usize,
    pub status: LoopStatus,
    pub trace: Vec<IterationRecord>,
    /// Maximiser of the last sweep.
    pub argmax: Cut,
    pub seconds: f64,
}

impl RefineResult {
    pub fn k(&self) -> usize {
        self.cdf.k()
    }

    pub fn gap(&self) -> f64 {
        self.t_upper - self.t_lower
    }

    /// Error describing a run that did not close its bracket.
    pub fn failure(&self) -> Option<Error> {
        match self.status {
            LoopStatus::Converged => None,
            LoopStatus::Stalled => Some(Error::Stall {
                iterations: self.iterations,
                t_lower: self.t_lower,
                t_upper: self.t_upper,
            }),
            LoopStatus::IterationLimit => Some(Error::IterationLimit {
                iterations: self.iterations,
                t_lower: self.t_lower,
                t_upper: self.t_upper,
            }),
        }
    }

    /// Cuts whose constraint is tight within `tol` at the final master
    /// solution, with their slack.
    pub fn binding(&self, tol: f64) -> Vec<(Cut, f64)> {
        self.cuts
            .iter()
            .filter_map(|c| {
                let slack = self.t_lower - phi_cell(&self.cdf, c.i, c.j, &c.u, &c.y);
                (slack <= tol).then(|| (c.clone(), slack))
            })
            .collect()
    }

    pub fn to_doc(&self) -> RefineDoc {
        RefineDoc {
            k: self.k(),
            t_lower: self.t_lower,
            t_upper: self.t_upper,
            iterations: self.iterations,
            status: self.status,
            cdf: self.cdf.to_doc(),
            trace: self.trace.clone(),
            cuts: self.cuts.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineDoc {
    pub k: usize,
    pub t_lower: f64,
    pub t_upper: f64,
    pub iterations: usize,
    pub status: LoopStatus,
    pub cdf: PiecewiseRationalDoc,
    pub trace: Vec<IterationRecord>,
    pub cuts: Vec<Cut>,
}

fn c0_col(p: usize) -> usize {
    1 + 2 * (p - 2)
}

fn c1_col(p: usize) -> usize {
    2 + 2 * (p - 2)
}

/// Grid pairs `(s_m, s_q)` with `s_m s_q >= 1`, each in the cell it opens.
pub fn initial_cuts(grid: &GridSet<f64>) -> Result<Vec<Cut>> {
    let k = grid.k().ok_or_else(|| Error::InvalidGrid("the cutting-plane loop needs a symmetric grid".into()))?;
    let s = grid.points();
    let mut cuts = Vec::new();
    for m in 1..2 * k {
        for q in (2 * k - m).max(1)..2 * k {
            cuts.push(Cut { i: m + 1, j: q + 1, u: 1.0 / s[m - 1], y: s[q - 1] });
        }
    }
    Ok(cuts)
}

/// `phi_two <= t` at `cut` as a row over the master variables.
fn cut_row(k: usize, cut: &Cut) -> Row {
    let (u, y) = (cut.u, cut.y);
    let w = 1.0 + u - y;
    let mut constant = y - u;
    let mut coefs: Vec<(usize, f64)> = vec![(0, -1.0)];
    if cut.j <= k {
        if cut.j >= 2 {
            coefs.push((c0_col(cut.j), w));
            coefs.push((c1_col(cut.j), w / y));
        }
    } else {
        let q = 2 * k + 1 - cut.j;
        constant += w;
        if q >= 2 {
            coefs.push((c0_col(q), -w));
            coefs.push((c1_col(q), -w * y));
        }
    }
    if cut.i <= k {
        if cut.i >= 2 {
            coefs.push((c0_col(cut.i), u));
            coefs.push((c1_col(cut.i), u * u));
        }
    } else {
        let q = 2 * k + 1 - cut.i;
        constant += u;
        if q >= 2 {
            coefs.push((c0_col(q), -u));
            coefs.push((c1_col(q), -1.0));
        }
    }
    coefs.sort_by_key(|&(c, _)| c);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coefs.len());
    for (c, v) in coefs {
        match merged.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => merged.push((c, v)),
        }
    }
    merged.retain(|&(_, v)| v != 0.0);
    Row::le(merged, -constant)
}

/// Master LP without cuts: the variables and the family constraints.
fn family_lp(grid: &GridSet<f64>) -> Result<LinearProgram> {
    let k = grid.k().ok_or_else(|| Error::InvalidGrid("the master LP needs a symmetric grid".into()))?;
    let mut lp = LinearProgram::new();
    lp.add_var("t", 1.0, f64::NEG_INFINITY, f64::INFINITY);
    for p in 2..=k {
        lp.add_var(format!("c0_{p}"), 0.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_var(format!("c1_{p}"), 0.0, f64::NEG_INFINITY, 0.0);
    }
    let s = grid.points();
    for p in 1..k {
        // f_p(1/s_p) - f_{p+1}(1/s_p) <= 0
        let w = 1.0 / s[p - 1];
        let mut coefs = Vec::new();
        if p >= 2 {
            coefs.push((c0_col(p), 1.0));
            coefs.push((c1_col(p), w));
        }
        coefs.push((c0_col(p + 1), -1.0));
        coefs.push((c1_col(p + 1), -w));
        lp.add_row(Row::le(coefs, 0.0));
    }
    if k >= 2 {
        lp.add_row(Row::le(vec![(c0_col(k), 1.0), (c1_col(k), 1.0)], 0.5));
    }
    Ok(lp)
}

fn decode(grid: &GridSet<f64>, x: &[f64]) -> Result<PiecewiseRationalCDF> {
    let k = grid.k().expect("checked symmetric");
    let mut c0 = vec![0.0; k];
    let mut c1 = vec![0.0; k];
    for p in 2..=k {
        c0[p - 1] = x[c0_col(p)];
        // The bound c1 <= 0 may be met only up to solver tolerance.
        c1[p - 1] = x[c1_col(p)].min(0.0);
    }
    PiecewiseRationalCDF::new(grid.clone(), c0, c1)
}

/// The full master program for a cut set.
pub fn master_program(cuts: &[Cut], grid: &GridSet<f64>) -> Result<LinearProgram> {
    let mut lp = family_lp(grid)?;
    let k = grid.k().expect("checked by family_lp");
    for cut in cuts {
        lp.add_row(cut_row(k, cut));
    }
    Ok(lp)
}

/// Solves the master LP; `t` is a lower bound on the family's best ratio.
pub fn master_lp(cuts: &[Cut], grid: &GridSet<f64>, solver: &dyn LpSolver) -> Result<(PiecewiseRationalCDF, f64)> {
    if cuts.is_empty() {
        return Err(Error::InvalidArgument("the master LP needs at least one cut".into()));
    }
    let lp = master_program(cuts, grid)?;
    let sol = solver.solve(&lp)?;
    Ok((decode(grid, &sol.x)?, sol.x[0]))
}

pub fn cutting_plane(grid: &GridSet<f64>, options: &CuttingPlaneOptions) -> Result<RefineResult> {
    let start = Instant::now();
    let k = grid.k().ok_or_else(|| Error::InvalidGrid("the cutting-plane loop needs a symmetric grid".into()))?;
    let mut cuts = initial_cuts(grid)?;
    let solver = options.backend.solver();
    let mut session = solver.session(master_program(&cuts, grid)?);
    let mut trace = Vec::new();
    let mut iteration = 0;
    loop {
        iteration += 1;
        let sol = session.solve()?;
        let t_lower = sol.x[0];
        let cdf = decode(grid, &sol.x)?;
        let best = sweep(&cdf)?;
        let t_upper = best.value;
        trace.push(IterationRecord { iteration, t_lower, t_upper, cell: [best.cell.0, best.cell.1] });
        let argmax = Cut { i: best.cell.0, j: best.cell.1, u: best.u, y: best.y };
        let status = if t_upper - t_lower <= options.stop_tol {
            Some(LoopStatus::Converged)
        } else if cuts.iter().any(|c| c.same_point(&argmax)) {
            Some(LoopStatus::Stalled)
        } else if iteration >= options.max_iter {
            Some(LoopStatus::IterationLimit)
        } else {
            None
        };
        if let Some(status) = status {
            return Ok(RefineResult {
                cdf,
                t_lower,
                t_upper,
                cuts,
                iterations: iteration,
                status,
                trace,
                argmax,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        session.add_row(cut_row(k, &argmax));
        cuts.push(argmax);
    }
}

/// Symmetric grid spanned by the binding cuts: every coordinate `v` of a
/// binding point contributes `min(v, 1/v)` rounded to 8 digits, and the grid
/// is closed under reciprocals with 1 added.
pub fn refine_grid(result: &RefineResult, binding_tol: f64) -> Result<GridSet<f64>> {
    let binding = result.binding(binding_tol);
    if binding.is_empty() {
        return Err(Error::InvalidArgument("no binding constraints to refine from".into()));
    }
    let mut ratios: Vec<f64> = Vec::new();
    for (cut, _) in &binding {
        for v in cut.x().into_iter().chain([cut.y]) {
            if v > 0.0 && v.is_finite() {
                let r = scalar::to_f64(&scalar::round_decimal(v.min(1.0 / v), 8));
                if r > 0.0 && r < 1.0 {
                    ratios.push(r);
                }
            }
        }
    }
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    GridSet::from_ratios(ratios)
}

/// Exact bound certified for the final member of a cutting-plane run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoTaskCertificate {
    pub k: usize,
    pub bound_rational: String,
    /// Decimal rounded up.
    pub bound_decimal: String,
    pub bound_float: f64,
    pub argmax_cell: [usize; 2],
    pub limit_x: Option<f64>,
    pub limit_y: f64,
    /// Whether the rationalised coefficients had to be moved back into the
    /// family, and by how much at most (in endpoint values).
    pub repaired: bool,
    pub max_repair_shift: f64,
}

/// The exact grid matching a float grid: `i/k` points for uniform grids,
/// otherwise the lower half rounded to 8 digits and mirrored exactly.
fn exact_grid(grid: &GridSet<f64>) -> Result<GridSet<BigRational>> {
    let k = grid.k().ok_or_else(|| Error::InvalidGrid("grid must be symmetric".into()))?;
    let uniform = GridSet::<f64>::uniform(k)?;
    if uniform.points().iter().zip(grid.points()).all(|(a, b)| (a - b).abs() <= 1e-15 * a.max(1.0)) {
        return GridSet::uniform(k);
    }
    GridSet::from_ratios(grid.points()[..k - 1].iter().map(|&r| scalar::round_decimal(r, 8)).collect())
}

/// Re-evaluates `sup phi_two` in exact arithmetic for the run's final
/// member, after repairing the rationalised coefficients into the family.
/// The returned value is a rigorous upper bound on the two-task ratio.
pub fn certify_two_task(result: &RefineResult) -> Result<(TwoTaskCertificate, BigRational)> {
    let grid = exact_grid(result.cdf.grid())?;
    let raw = result.cdf.to_exact_on(grid)?;
    let zero = BigRational::from_integer(0.into());
    let (f, repaired, shift) = if raw.is_valid(&zero) {
        (raw, false, 0.0)
    } else {
        let fixed = raw.repaired();
        let shift = raw
            .endpoint_values()
            .iter()
            .zip(fixed.endpoint_values())
            .map(|(a, b)| scalar::to_f64(&(a - b)).abs())
            .fold(0.0, f64::max);
        (fixed, true, shift)
    };
    if !f.is_valid(&zero) {
        return Err(Error::Invariant("repaired coefficients leave the family".into()));
    }
    let best = sweep(&f)?;
    let cert = TwoTaskCertificate {
        k: f.k(),
        bound_rational: scalar::rational_string(&best.value),
        bound_decimal: scalar::decimal_ceil(&best.value, 10),
        bound_float: scalar::to_f64(&best.value),
        argmax_cell: [best.cell.0, best.cell.1],
        limit_x: best.x().map(|x| scalar::to_f64(&x)),
        limit_y: scalar::to_f64(&best.y),
        repaired,
        max_repair_shift: shift,
    };
    Ok((cert, best.value))
}
