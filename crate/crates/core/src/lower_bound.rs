//! The epigraph LP whose optimum is the grid lower bound `R_n(S)`.

use serde::Serialize;

use crate::cdf::{check_n_increasing, min_box_sum, FiniteCDF, OrbitIndex};
use crate::error::{Error, Result};
use crate::grid::GridSet;
use crate::lp::{Backend, LinearProgram, LpSolver, Method, Row};
use crate::scalar::{self, Scalar};

pub const DEFAULT_BINDING_TOL: f64 = 1e-7;
/// Slack allowed when re-checking the solver's answer against the grid.
pub const AUDIT_TOL: f64 = 1e-8;

/// `phi` on grid points as `c + a_x F(x) + a_y F(y) + a_h H(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiTerms<T> {
    pub constant: T,
    pub fx: T,
    pub fy: T,
    pub h: T,
}

pub fn phi_terms<T: Scalar>(x: &T, y: &T) -> PhiTerms<T> {
    let one = T::one();
    let u = one.clone() / x.clone();
    let alpha = scalar::min(one.clone(), one.clone() - u.clone() + y.clone());
    let beta = scalar::min(one.clone() + u, one.clone() + y.clone());
    PhiTerms { constant: one + y.clone(), fx: -alpha, fy: -y.clone(), h: beta }
}

/// Single-task ratio on the instance with ratio `x`, as `c + a F(x)`.
pub fn single_task_terms<T: Scalar>(x: &T) -> (T, T) {
    let one = T::one();
    if x <= &one {
        (one.clone(), one.clone() / x.clone() - one)
    } else {
        (x.clone(), one - x.clone())
    }
}

/// Worst-case ratio of the grid function over all grid pairs (or grid points
/// when `n = 1`), with the pair attaining it.
pub fn grid_phi_max<T: Scalar>(g: &FiniteCDF<T>) -> (T, (usize, usize)) {
    let pts = g.grid().points();
    let mut best: Option<(T, (usize, usize))> = None;
    let mut consider = |v: T, at: (usize, usize)| {
        if best.as_ref().map_or(true, |(b, _)| &v > b) {
            best = Some((v, at));
        }
    };
    if g.n() == 1 {
        for (i, x) in pts.iter().enumerate() {
            let (c, a) = single_task_terms(x);
            consider(c + a * g.univariate(i), (i, i));
        }
    } else {
        for (i, x) in pts.iter().enumerate() {
            for (j, y) in pts.iter().enumerate() {
                let t = phi_terms(x, y);
                let v = t.constant + t.fx * g.univariate(i) + t.fy * g.univariate(j) + t.h * g.bivariate(i, j);
                consider(v, (i, j));
            }
        }
    }
    best.expect("nonempty grid")
}

/// Evaluates `phi` of `g` at grid indices `(i, j)`.
pub fn grid_phi<T: Scalar>(g: &FiniteCDF<T>, i: usize, j: usize) -> T {
    let pts = g.grid().points();
    if g.n() == 1 {
        let (c, a) = single_task_terms(&pts[i]);
        return c + a * g.univariate(i);
    }
    let t = phi_terms(&pts[i], &pts[j]);
    t.constant + t.fx * g.univariate(i) + t.fy * g.univariate(j) + t.h * g.bivariate(i, j)
}

/// The assembled program plus the bookkeeping needed to read its solution.
#[derive(Clone, Debug)]
pub struct LowerBoundLp {
    pub lp: LinearProgram,
    pub n: usize,
    pub grid: GridSet<f64>,
    pub index: OrbitIndex,
    /// Grid index pair of each `phi` row, rows `0..phi_rows.len()`.
    pub phi_rows: Vec<(usize, usize)>,
    pub t_var: usize,
}

impl LowerBoundLp {
    /// Column of the orbit with the given rank; `None` for the pinned all-∞ orbit.
    pub fn orbit_var(&self, rank: usize) -> Option<usize> {
        (rank + 1 < self.index.count()).then_some(rank + 1)
    }
}

/// Builds the epigraph LP: minimise `t` subject to `phi(x, y) <= t` for all
/// grid pairs, the n-increasing inequality on every sorted elementary box,
/// and `0 <= g <= 1`. Orbits touching 0 are absent (identically 0) and the
/// all-∞ orbit is the constant 1.
pub fn build_lp(n: usize, grid: &GridSet<f64>) -> Result<LowerBoundLp> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one task".into()));
    }
    let m = grid.len() + 1;
    let index = OrbitIndex::new(n, m);
    let keys = index.keys();
    let inf = grid.len() as u32;
    let count = index.count();
    let mut lp = LinearProgram::new();
    let t_var = lp.add_var("t", 1.0, f64::NEG_INFINITY, f64::INFINITY);
    let pts = grid.points();
    for key in keys.iter().take(count - 1) {
        let name: Vec<String> = key
            .iter()
            .map(|&s| if s == inf { "inf".to_string() } else { format!("s{s}") })
            .collect();
        lp.add_var(format!("g[{}]", name.join(",")), 0.0, 0.0, 1.0);
    }
    let var = |key: &[u32]| -> Option<usize> {
        let r = index.rank(key);
        (r + 1 < count).then_some(r + 1)
    };

    let mut phi_rows = Vec::new();
    let push = |coefs: &mut Vec<(usize, f64)>, col: usize, c: f64| {
        if let Some(e) = coefs.iter_mut().find(|e| e.0 == col) {
            e.1 += c;
        } else {
            coefs.push((col, c));
        }
    };
    let f_key = |i: usize| {
        let mut k = vec![inf; n];
        k[0] = i as u32;
        k
    };
    if n == 1 {
        for (i, x) in pts.iter().enumerate() {
            let (c, a) = single_task_terms(x);
            let col = var(&f_key(i)).expect("grid orbit is free");
            lp.add_row(Row::le(vec![(col, a), (t_var, -1.0)], -c));
            phi_rows.push((i, i));
        }
    } else {
        for (i, x) in pts.iter().enumerate() {
            for (j, y) in pts.iter().enumerate() {
                let terms = phi_terms(x, y);
                let mut h_key = vec![inf; n];
                h_key[0] = i.min(j) as u32;
                h_key[1] = i.max(j) as u32;
                let mut coefs = Vec::with_capacity(4);
                push(&mut coefs, var(&f_key(i)).expect("free"), terms.fx);
                push(&mut coefs, var(&f_key(j)).expect("free"), terms.fy);
                push(&mut coefs, var(&h_key).expect("free"), terms.h);
                coefs.retain(|e| e.1 != 0.0);
                coefs.push((t_var, -1.0));
                lp.add_row(Row::le(coefs, -terms.constant));
                phi_rows.push((i, j));
            }
        }
    }

    let mut key = vec![0u32; n];
    for cell in &keys {
        let mut coefs: Vec<(usize, f64)> = Vec::with_capacity(1 << n);
        let mut constant = 0.0;
        'vertex: for mask in 0u32..(1 << n) {
            let mut lower = 0;
            for (i, &t) in cell.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    key[i] = t;
                } else if t == 0 {
                    continue 'vertex;
                } else {
                    key[i] = t - 1;
                    lower += 1;
                }
            }
            let sign = if lower % 2 == 0 { 1.0 } else { -1.0 };
            let mut sorted = key.clone();
            sorted.sort_unstable();
            match var(&sorted) {
                Some(col) => push(&mut coefs, col, sign),
                None => constant += sign,
            }
        }
        coefs.retain(|e| e.1 != 0.0);
        if !coefs.is_empty() {
            lp.add_row(Row::ge(coefs, -constant));
        }
    }
    Ok(LowerBoundLp { lp, n, grid: grid.clone(), index, phi_rows, t_var })
}

#[derive(Clone, Debug)]
pub struct LowerBoundOptions {
    pub backend: Backend,
    pub binding_tol: f64,
}

impl Default for LowerBoundOptions {
    fn default() -> Self {
        Self { backend: Backend::default(), binding_tol: DEFAULT_BINDING_TOL }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BindingPair {
    pub x: f64,
    pub y: f64,
    pub slack: f64,
}

#[derive(Clone, Debug)]
pub struct LowerBoundResult {
    pub n: usize,
    /// Optimal `t` of the epigraph LP.
    pub bound: f64,
    /// Maximum of `phi` recomputed from `g` over all grid pairs.
    pub audit_max: f64,
    pub g: FiniteCDF<f64>,
    pub grid: GridSet<f64>,
    pub status: String,
    pub binding: Vec<BindingPair>,
    /// Smallest elementary-box sum of `g` (negative only from solver round-off).
    pub min_box_sum: f64,
    pub num_vars: usize,
    pub num_rows: usize,
    pub backend: String,
}

/// Solves an assembled lower-bound program.
pub fn solve_lp(built: &LowerBoundLp, solver: &dyn LpSolver, binding_tol: f64) -> Result<LowerBoundResult> {
    let sol = solver.solve(&built.lp)?;
    let t = sol.x[built.t_var];
    let count = built.index.count();
    let values: Vec<f64> = (0..count)
        .map(|r| built.orbit_var(r).map_or(1.0, |col| sol.x[col].clamp(0.0, 1.0)))
        .collect();
    let g = FiniteCDF::from_values(built.n, built.grid.clone(), values)?;
    let pts = built.grid.points();
    let mut binding = Vec::new();
    let mut audit_max = f64::NEG_INFINITY;
    for &(i, j) in &built.phi_rows {
        let v = grid_phi(&g, i, j);
        audit_max = audit_max.max(v);
        if t - v <= binding_tol {
            binding.push(BindingPair { x: pts[i], y: pts[j], slack: t - v });
        }
    }
    Ok(LowerBoundResult {
        n: built.n,
        bound: t,
        audit_max,
        min_box_sum: min_box_sum(&g),
        g,
        grid: built.grid.clone(),
        status: "optimal".into(),
        binding,
        num_vars: built.lp.num_vars(),
        num_rows: built.lp.num_rows(),
        backend: solver.name().into(),
    })
}

/// Builds and solves the program, then audits the answer independently of
/// the solver: every grid `phi` recomputed from `g` must stay within
/// [`AUDIT_TOL`] of the bound and `g` must be n-increasing up to the same slack.
pub fn lower_bound(n: usize, grid: &GridSet<f64>, options: &LowerBoundOptions) -> Result<LowerBoundResult> {
    let built = build_lp(n, grid)?;
    // Interior point (with crossover) is far faster once box rows carry 2^n
    // entries, and the optimum is degenerate: the vertex it lands on gives
    // noticeably smaller upper bounds than the one dual simplex returns.
    let solver = options.backend.solver_with(Method::InteriorPoint);
    let result = solve_lp(&built, solver.as_ref(), options.binding_tol)?;
    if result.audit_max > result.bound + AUDIT_TOL {
        return Err(Error::Invariant(format!(
            "grid phi reaches {} above the LP bound {}",
            result.audit_max, result.bound
        )));
    }
    if let Some(v) = check_n_increasing(&result.g, &AUDIT_TOL) {
        return Err(Error::Invariant(format!("LP solution is not n-increasing: box sum {}", v.sum)));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::uniform_grid;
    use crate::lp::DenseSimplex;
    use crate::mechanism::{expected_ratio, phi, worst_case_instance};

    fn opts(backend: Backend) -> LowerBoundOptions {
        LowerBoundOptions { backend, ..Default::default() }
    }

    #[test]
    fn single_point_counts() {
        let built = build_lp(2, &uniform_grid(1).unwrap()).unwrap();
        // t, g(1,1), g(1,∞).
        assert_eq!(built.lp.num_vars(), 3);
        assert_eq!(built.phi_rows.len(), 1);
    }

    #[test]
    fn orbit_count_for_five_points() {
        // Multisets of size 2 over {s1..s5, ∞}: C(7, 2) = 21, minus the pinned (∞, ∞).
        let built = build_lp(2, &uniform_grid(3).unwrap()).unwrap();
        assert_eq!(built.lp.num_vars() - 1, 20);
        assert_eq!(built.phi_rows.len(), 25);
    }

    #[test]
    fn hand_lp_on_one_point() {
        // minimise 2 - 2F + 2H with H >= 2F - 1, 0 <= H <= F <= 1: optimum 1 at F = 1/2, H = 0.
        for backend in [Backend::Simplex, Backend::default()] {
            let r = lower_bound(2, &uniform_grid(1).unwrap(), &opts(backend)).unwrap();
            assert!((r.bound - 1.0).abs() < 1e-9, "{backend}: {}", r.bound);
            assert!((r.g.univariate(0) - 0.5).abs() < 1e-9);
            assert!(r.g.bivariate(0, 0).abs() < 1e-9);
            assert_eq!(r.binding.len(), 1);
        }
    }

    #[test]
    fn single_task_degenerate_case() {
        let r = lower_bound(1, &uniform_grid(1).unwrap(), &opts(Backend::Simplex)).unwrap();
        assert!((r.bound - 1.0).abs() < 1e-9);
        // With S = {1/2, 1, 2} the single task ratio is at least 1 everywhere.
        let r = lower_bound(1, &uniform_grid(2).unwrap(), &opts(Backend::Simplex)).unwrap();
        assert!(r.bound >= 1.0 - 1e-9);
    }

    #[test]
    fn backends_agree_on_small_grids() {
        for (n, k) in [(2, 3), (2, 4), (3, 2)] {
            let grid = uniform_grid(k).unwrap();
            let dense = lower_bound(n, &grid, &opts(Backend::Simplex)).unwrap();
            let default = lower_bound(n, &grid, &opts(Backend::default())).unwrap();
            assert!((dense.bound - default.bound).abs() < 1e-8, "n={n} k={k}");
        }
    }

    #[test]
    fn grid_phi_matches_the_formula() {
        let grid = uniform_grid(3).unwrap();
        let g = FiniteCDF::product(2, grid.clone(), &[0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        let ext = crate::cdf::extend(g.clone(), 6.0).unwrap();
        for (i, x) in grid.points().iter().enumerate() {
            for (j, y) in grid.points().iter().enumerate() {
                assert!((grid_phi(&g, i, j) - phi(&ext, x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lower_bound_is_a_ratio_of_its_own_algorithm() {
        // phi on the grid is an attained ratio of the extended algorithm, so
        // the LP bound is at most the bound's own worst grid instance ratio.
        let grid = uniform_grid(3).unwrap();
        let r = lower_bound(2, &grid, &opts(Backend::default())).unwrap();
        let ext = crate::cdf::extend(r.g.clone(), 6.0).unwrap();
        let dist = ext.to_distribution().unwrap();
        for &x in grid.points() {
            for &y in grid.points() {
                if y.max(1.0 / x) >= 1.0 {
                    let t = worst_case_instance(&x, &y, 2, &0.0).unwrap();
                    let ratio = expected_ratio(&dist, &t).unwrap();
                    assert!((ratio - phi(&ext, &x, &y)).abs() < 1e-9);
                }
            }
        }
        assert!(r.bound > 1.3 && r.bound < 1.7);
    }

    #[test]
    fn dense_solver_is_usable_directly() {
        let built = build_lp(2, &uniform_grid(2).unwrap()).unwrap();
        let r = solve_lp(&built, &DenseSimplex::default(), DEFAULT_BINDING_TOL).unwrap();
        assert!(r.audit_max <= r.bound + AUDIT_TOL);
        assert!(r.min_box_sum >= -1e-9);
    }
}
