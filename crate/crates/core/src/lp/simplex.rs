//! Dense two-phase tableau simplex. Quadratic memory in the program size, so
//! it is only meant for small programs and for cross-checking HiGHS.

use super::{status_error, LinearProgram, LpSession, LpSolution, LpSolver, LpStatus, RebuildSession};
use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub struct DenseSimplex {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200_000 }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Sense {
    Le,
    Ge,
    Eq,
}

/// Original column `j` equals `offset + Σ sign·y_k` over nonnegative `y`.
struct ColMap {
    offset: f64,
    parts: Vec<(usize, f64)>,
}

struct Standard {
    maps: Vec<ColMap>,
    ny: usize,
    rows: Vec<(Vec<(usize, f64)>, Sense, f64)>,
    cost: Vec<f64>,
}

fn standardise(lp: &LinearProgram) -> Standard {
    let mut maps = Vec::with_capacity(lp.num_vars());
    let mut ny = 0;
    let mut rows = Vec::new();
    for j in 0..lp.num_vars() {
        let (l, u) = (lp.col_lower[j], lp.col_upper[j]);
        let map = if l.is_finite() {
            if u.is_finite() {
                rows.push((vec![(ny, 1.0)], Sense::Le, u - l));
            }
            ColMap { offset: l, parts: vec![(ny, 1.0)] }
        } else if u.is_finite() {
            ColMap { offset: u, parts: vec![(ny, -1.0)] }
        } else {
            ny += 1;
            ColMap { offset: 0.0, parts: vec![(ny - 1, 1.0), (ny, -1.0)] }
        };
        ny += 1;
        maps.push(map);
    }
    let mut cost = vec![0.0; ny];
    for (j, map) in maps.iter().enumerate() {
        for &(k, s) in &map.parts {
            cost[k] += lp.objective[j] * s;
        }
    }
    for row in &lp.rows {
        let mut coefs: Vec<(usize, f64)> = Vec::new();
        let mut shift = 0.0;
        for &(j, c) in &row.coefs {
            shift += c * maps[j].offset;
            for &(k, s) in &maps[j].parts {
                coefs.push((k, c * s));
            }
        }
        if row.lower == row.upper {
            rows.push((coefs, Sense::Eq, row.lower - shift));
            continue;
        }
        if row.lower.is_finite() {
            rows.push((coefs.clone(), Sense::Ge, row.lower - shift));
        }
        if row.upper.is_finite() {
            rows.push((coefs, Sense::Le, row.upper - shift));
        }
    }
    Standard { maps, ny, rows, cost }
}

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r][c];
        for v in &mut self.t[r] {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for k in 0..=w {
                    row[k] -= f * pivot_row[k];
                }
            }
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations on the objective held in the last row.
    fn optimise(&mut self, allowed: usize, tol: f64, max_iter: usize) -> LpStatus {
        let m = self.basis.len();
        let w = self.width;
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            let obj = &self.t[m];
            let bland = degenerate > 50;
            let mut enter = None;
            let mut best = -tol;
            for j in 0..allowed {
                if obj[j] < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = obj[j];
                }
            }
            let Some(c) = enter else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][c];
                if a > tol {
                    let ratio = self.t[i][w] / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return LpStatus::Unbounded;
            };
            degenerate = if ratio.abs() <= 1e-12 { degenerate + 1 } else { 0 };
            self.pivot(r, c);
        }
        LpStatus::IterationLimit
    }
}

impl DenseSimplex {
    fn run(&self, lp: &LinearProgram) -> std::result::Result<LpSolution, LpStatus> {
        let std = standardise(lp);
        let m = std.rows.len();
        let n_slack = std.rows.iter().filter(|r| r.1 != Sense::Eq).count();
        let mut needs_art = Vec::with_capacity(m);
        let mut rows = std.rows;
        for row in &mut rows {
            if row.2 < 0.0 {
                for c in &mut row.0 {
                    c.1 = -c.1;
                }
                row.2 = -row.2;
                row.1 = match row.1 {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
            }
            needs_art.push(row.1 != Sense::Le);
        }
        let n_art = needs_art.iter().filter(|&&a| a).count();
        let real = std.ny + n_slack;
        let width = real + n_art;
        let mut t = vec![vec![0.0; width + 1]; m + 1];
        let mut basis = vec![0; m];
        let (mut s, mut a) = (std.ny, real);
        for (i, (coefs, sense, rhs)) in rows.iter().enumerate() {
            for &(k, c) in coefs {
                t[i][k] += c;
            }
            t[i][width] = *rhs;
            match sense {
                Sense::Le => {
                    t[i][s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Sense::Ge => {
                    t[i][s] = -1.0;
                    s += 1;
                }
                Sense::Eq => {}
            }
            if needs_art[i] {
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
        let mut tab = Tableau { t, basis, width };

        // Phase 1: minimise the sum of artificials.
        if n_art > 0 {
            for j in real..width {
                tab.t[m][j] = 1.0;
            }
            for i in 0..m {
                if tab.basis[i] >= real {
                    for k in 0..=width {
                        let v = tab.t[i][k];
                        tab.t[m][k] -= v;
                    }
                }
            }
            match tab.optimise(width, self.tol, self.max_iter) {
                LpStatus::Optimal => {}
                other => return Err(other),
            }
            if -tab.t[m][width] > 1e-7 {
                return Err(LpStatus::Infeasible);
            }
            for i in 0..m {
                if tab.basis[i] >= real {
                    if let Some(j) = (0..real).find(|&j| tab.t[i][j].abs() > 1e-9) {
                        tab.pivot(i, j);
                    }
                }
            }
        }

        // Phase 2 with the true costs.
        for k in 0..=width {
            tab.t[m][k] = if k < std.ny { std.cost[k] } else { 0.0 };
        }
        for i in 0..m {
            let b = tab.basis[i];
            let cb = if b < std.ny { std.cost[b] } else { 0.0 };
            if cb != 0.0 {
                for k in 0..=width {
                    let v = tab.t[i][k];
                    tab.t[m][k] -= cb * v;
                }
            }
        }
        match tab.optimise(real, self.tol, self.max_iter) {
            LpStatus::Optimal => {}
            other => return Err(other),
        }
        let mut y = vec![0.0; std.ny];
        for i in 0..m {
            if tab.basis[i] < std.ny {
                y[tab.basis[i]] = tab.t[i][width];
            }
        }
        let x: Vec<f64> = std
            .maps
            .iter()
            .map(|map| map.offset + map.parts.iter().map(|&(k, s)| s * y[k]).sum::<f64>())
            .collect();
        Ok(LpSolution { objective: lp.objective_value(&x), x })
    }
}

impl LpSolver for DenseSimplex {
    fn name(&self) -> &'static str {
        "simplex"
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution> {
        self.run(lp).map_err(|status| status_error(status, "dense simplex"))
    }

    fn session(&self, lp: LinearProgram) -> Box<dyn LpSession> {
        Box::new(RebuildSession { solver: *self, lp })
    }
}
