//! Worst-case ratio of the piecewise-constant algorithm built from a grid
//! function `g`, computed exactly cell by cell.
//!
//! In the coordinates `u = 1/x` and `y`, the margins are constant on each
//! cell and `phi` is affine on both sides of the diagonal `y = u`:
//!
//! * `y >= u`: `(1 - F_i + H) + (1 - F_j) y + H u`
//! * `y <= u`: `(1 - F_i + H) + (1 - F_i - F_j + H) y + F_i u`
//!
//! so the supremum over a cell is the largest value over the vertices of
//! the two polygons `cell ∩ {y >= u}` and `cell ∩ {y <= u}`.

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cdf::{check_n_increasing, extend, FiniteCDF, OrbitIndex};
use crate::error::{Error, Result};
use crate::grid::{Coord, GridSet};
use crate::mechanism::{expected_ratio, worst_case_instance};
use crate::report::{BoundReport, Mode};
use crate::scalar::{self, Scalar};

/// Digits kept when grid points and `a` are rationalised for certification.
pub const CERT_DIGITS: u32 = 8;

/// One side of a closed interval in the `(u, y)` plane; `None` is `+∞`.
type End<T> = Option<T>;

#[derive(Clone, Debug, PartialEq)]
pub struct CellSup<T> {
    pub value: T,
    /// Cell `(i, j)`, intervals numbered `1..=2k+1`.
    pub cell: (usize, usize),
    /// Limit point in `(u, y)`; unbounded sides are replaced by a finite
    /// stand-in along which `phi` is constant.
    pub u: T,
    pub y: T,
    pub upper_branch: bool,
}

/// Margins and interval geometry of `g` extended with sentinel `a`.
struct CellTable<T> {
    /// Interval `c` (1-based) has lower endpoint `lo[c - 1]` and upper `hi[c - 1]`.
    lo: Vec<T>,
    hi: Vec<End<T>>,
    f: Vec<T>,
    h: Vec<Vec<T>>,
}

fn lower_coord(c: usize, len: usize) -> Coord {
    if c == 1 {
        Coord::Zero
    } else if c <= len + 1 {
        Coord::At(c - 2)
    } else {
        Coord::Inf
    }
}

impl<T: Scalar> CellTable<T> {
    fn new(g: &FiniteCDF<T>, a: &T) -> Self {
        let pts = g.grid().points();
        let len = pts.len();
        let cells = len + 2;
        let mut lo = Vec::with_capacity(cells);
        let mut hi = Vec::with_capacity(cells);
        for c in 1..=cells {
            lo.push(match c {
                1 => T::zero(),
                c if c <= len + 1 => pts[c - 2].clone(),
                _ => a.clone(),
            });
            hi.push(match c {
                c if c <= len => Some(pts[c - 1].clone()),
                c if c == len + 1 => Some(a.clone()),
                _ => None,
            });
        }
        let n = g.n();
        let coords: Vec<Coord> = (1..=cells).map(|c| lower_coord(c, len)).collect();
        let f = coords
            .iter()
            .map(|&c| {
                let mut v = vec![Coord::Inf; n];
                v[0] = c;
                g.value(&v)
            })
            .collect();
        let h = coords
            .iter()
            .map(|&ci| {
                coords
                    .iter()
                    .map(|&cj| {
                        let mut v = vec![Coord::Inf; n];
                        v[0] = ci;
                        v[1] = cj;
                        g.value(&v)
                    })
                    .collect()
            })
            .collect();
        Self { lo, hi, f, h }
    }

    fn cells(&self) -> usize {
        self.lo.len()
    }

    fn sup(&self, i: usize, j: usize) -> Result<CellSup<T>> {
        let one = T::one();
        let (fi, fj, h) = (self.f[i - 1].clone(), self.f[j - 1].clone(), self.h[i - 1][j - 1].clone());
        // u = 1/x over the closure of the x-interval.
        let u_lo = self.hi[i - 1].as_ref().map_or(T::zero(), |x| one.clone() / x.clone());
        let u_hi: End<T> = (!self.lo[i - 1].is_zero()).then(|| one.clone() / self.lo[i - 1].clone());
        let y_lo = self.lo[j - 1].clone();
        let y_hi = self.hi[j - 1].clone();

        let base = one.clone() - fi.clone() + h.clone();
        let a_y = one.clone() - fj.clone();
        let a_u = h.clone();
        let b_y = (one.clone() - fj.clone()) - (fi.clone() - h.clone());
        let b_u = fi.clone();
        let zero = T::zero();
        if (u_hi.is_none() && (a_u > zero || b_u > zero)) || (y_hi.is_none() && (a_y > zero || b_y > zero))
        {
            return Err(Error::Invariant(format!("phi is unbounded on cell ({i}, {j})")));
        }

        let mut finite_max = scalar::max(u_lo.clone(), y_lo.clone());
        for e in [&u_hi, &y_hi].into_iter().flatten() {
            finite_max = scalar::max(finite_max, e.clone());
        }
        let far = finite_max + one.clone();
        let u_hi = u_hi.unwrap_or_else(|| far.clone());
        let y_hi = y_hi.unwrap_or(far);

        let mut points = vec![
            (u_lo.clone(), y_lo.clone()),
            (u_lo.clone(), y_hi.clone()),
            (u_hi.clone(), y_lo.clone()),
            (u_hi.clone(), y_hi.clone()),
        ];
        let d_lo = scalar::max(u_lo, y_lo);
        let d_hi = scalar::min(u_hi, y_hi);
        if d_lo <= d_hi {
            points.push((d_lo.clone(), d_lo));
            points.push((d_hi.clone(), d_hi));
        }
        let mut best: Option<CellSup<T>> = None;
        for (u, y) in points {
            for upper in [true, false] {
                let inside = if upper { y >= u } else { y <= u };
                if !inside {
                    continue;
                }
                let value = if upper {
                    base.clone() + a_y.clone() * y.clone() + a_u.clone() * u.clone()
                } else {
                    base.clone() + b_y.clone() * y.clone() + b_u.clone() * u.clone()
                };
                if best.as_ref().map_or(true, |b| value > b.value) {
                    best = Some(CellSup { value, cell: (i, j), u: u.clone(), y: y.clone(), upper_branch: upper });
                }
            }
        }
        Ok(best.expect("a rectangle has a vertex on each side of the diagonal or on it"))
    }
}

/// Supremum of `phi` for `g` extended with sentinel `a` over cell `(i, j)`.
pub fn cell_sup<T: Scalar>(g: &FiniteCDF<T>, a: &T, i: usize, j: usize) -> Result<CellSup<T>> {
    let table = CellTable::new(g, a);
    if i == 0 || j == 0 || i > table.cells() || j > table.cells() {
        return Err(Error::InvalidArgument(format!("cell ({i}, {j}) out of range")));
    }
    table.sup(i, j)
}

fn pick<T: Scalar>(a: CellSup<T>, b: CellSup<T>) -> CellSup<T> {
    if b.value > a.value || (b.value == a.value && b.cell < a.cell) {
        b
    } else {
        a
    }
}

/// Largest cell supremum; ties go to the lexicographically smallest cell.
pub fn sup_over_cells<T: Scalar>(g: &FiniteCDF<T>, a: &T) -> Result<CellSup<T>> {
    if g.n() < 2 {
        return Err(Error::InvalidArgument("upper bounds need n >= 2".into()));
    }
    if !(a > g.grid().max()) {
        return Err(Error::InvalidGrid("sentinel a must exceed the largest grid point".into()));
    }
    let table = CellTable::new(g, a);
    let cells = table.cells();
    let sups: Result<Vec<CellSup<T>>> = (0..cells * cells)
        .into_par_iter()
        .map(|c| table.sup(c / cells + 1, c % cells + 1))
        .collect();
    Ok(sups?.into_iter().reduce(pick).expect("at least one cell"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SentinelChoice {
    /// `2 max(S)`.
    Default,
    Fixed(f64),
    /// Minimise the bound over `a` by golden-section search on `log a`.
    Auto,
}

pub fn default_a(grid: &GridSet<f64>) -> f64 {
    2.0 * grid.max()
}

/// Resolves the sentinel. For [`SentinelChoice::Auto`] the bound is a
/// maximum of cell suprema that increase with `a` (cells reaching up to `a`
/// in `y`) and ones that decrease (cells beyond `a` in `x`), so a
/// one-dimensional search over `log a` is used, seeded with the default.
pub fn choose_a(g: &FiniteCDF<f64>, choice: SentinelChoice) -> Result<f64> {
    let smax = *g.grid().max();
    match choice {
        SentinelChoice::Default => Ok(default_a(g.grid())),
        SentinelChoice::Fixed(a) => {
            if a > smax {
                Ok(a)
            } else {
                Err(Error::InvalidGrid(format!("a = {a} must exceed max grid point {smax}")))
            }
        }
        SentinelChoice::Auto => {
            let eval = |la: f64| sup_over_cells(g, &la.exp()).map(|s| s.value);
            let (mut lo, mut hi) = ((smax * (1.0 + 1e-9)).ln(), (smax * 1e4).ln());
            let phi = (5f64.sqrt() - 1.0) / 2.0;
            let mut x1 = hi - phi * (hi - lo);
            let mut x2 = lo + phi * (hi - lo);
            let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
            for _ in 0..80 {
                if f1 <= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = eval(x1)?;
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = eval(x2)?;
                }
            }
            let searched = if f1 <= f2 { x1.exp() } else { x2.exp() };
            let default = default_a(g.grid());
            let (fs, fd) = (eval(searched.ln())?, sup_over_cells(g, &default)?.value);
            Ok(if fd <= fs { default } else { searched })
        }
    }
}

fn report_from<T: Scalar>(n: usize, k: Option<usize>, a: f64, sup: &CellSup<T>, mode: Mode) -> BoundReport {
    let value = scalar::to_f64(&sup.value);
    let u = scalar::to_f64(&sup.u);
    BoundReport {
        n,
        k,
        a,
        bound_float: value,
        bound_rational: None,
        bound_decimal: format!("{value:.10}"),
        argmax_cell: [sup.cell.0, sup.cell.1],
        limit_x: (u != 0.0).then(|| 1.0 / u),
        limit_y: scalar::to_f64(&sup.y),
        mode,
        repaired_mass: None,
    }
}

/// Worst-case expected ratio of the piecewise-constant algorithm built from
/// `g` with sentinel `a`, in floating point.
pub fn upper_bound(g: &FiniteCDF<f64>, a: f64) -> Result<BoundReport> {
    if !g.grid().is_symmetric() {
        return Err(Error::InvalidGrid("upper bounds need a reciprocal-closed grid containing 1".into()));
    }
    let sup = sup_over_cells(g, &a)?;
    Ok(report_from(g.n(), g.grid().k(), a, &sup, Mode::Float))
}

/// Turns `g` into a genuine CDF: negative elementary-box masses are clipped
/// to zero and the result renormalised. Returns the repaired function and the
/// clipped mass.
pub fn repair_to_cdf<T: Scalar>(g: &FiniteCDF<T>) -> (FiniteCDF<T>, T) {
    let n = g.n();
    let m = g.grid().len() + 1;
    let mut clipped = T::zero();
    let index = g.index();
    let keys = index.keys();
    let masses: Vec<T> = keys
        .iter()
        .map(|cell| {
            let s = g.box_sum(cell);
            if s < T::zero() {
                clipped = clipped.clone() - s;
                T::zero()
            } else {
                s
            }
        })
        .collect();
    // Cumulative sums over the full (unsymmetrised) cell array, one axis at a time.
    let total_cells = m.pow(n as u32);
    let mut full: Vec<T> = Vec::with_capacity(total_cells);
    let mut digits = vec![0u32; n];
    for _ in 0..total_cells {
        full.push(masses[index.rank_unsorted(&digits)].clone());
        for d in digits.iter_mut() {
            *d += 1;
            if (*d as usize) < m {
                break;
            }
            *d = 0;
        }
    }
    let mut stride = 1;
    for _ in 0..n {
        for idx in 0..total_cells {
            if (idx / stride) % m != 0 {
                let prev = full[idx - stride].clone();
                full[idx] = full[idx].clone() + prev;
            }
        }
        stride *= m;
    }
    let total = full[total_cells - 1].clone();
    let orbit = OrbitIndex::new(n, m);
    let values = orbit
        .keys()
        .iter()
        .map(|key| {
            let pos = key.iter().rev().fold(0usize, |acc, &d| acc * m + d as usize);
            full[pos].clone() / total.clone()
        })
        .collect();
    let repaired = FiniteCDF::from_values(n, g.grid().clone(), values).expect("same orbit count");
    (repaired, clipped)
}

/// Exact certificate: grid points and `a` are rounded to eight decimals and
/// rationalised, `g` is converted exactly from its doubles, checked to be a
/// CDF in exact arithmetic (repaired by [`repair_to_cdf`] if solver round-off
/// broke a box inequality), and every cell supremum is recomputed over the
/// rationals.
pub fn certify_exact(g: &FiniteCDF<f64>, a: f64) -> Result<(BoundReport, BigRational)> {
    if !g.grid().is_symmetric() {
        return Err(Error::InvalidGrid("upper bounds need a reciprocal-closed grid containing 1".into()));
    }
    let grid = g.grid().rounded_exact(CERT_DIGITS)?;
    let a_exact = scalar::round_decimal(a, CERT_DIGITS);
    let mut exact = g.to_exact_on(grid);
    let mut repaired_mass = None;
    if check_n_increasing(&exact, &BigRational::from_integer(0.into())).is_some() {
        let (fixed, clipped) = repair_to_cdf(&exact);
        repaired_mass = Some(scalar::to_f64(&clipped));
        exact = fixed;
    }
    let sup = sup_over_cells(&exact, &a_exact)?;
    let mut report = report_from(g.n(), g.grid().k(), scalar::to_f64(&a_exact), &sup, Mode::Exact);
    report.bound_rational = Some(scalar::rational_string(&sup.value));
    report.bound_decimal = scalar::decimal_ceil(&sup.value, 10);
    report.repaired_mass = repaired_mass;
    Ok((report, sup.value))
}

#[derive(Clone, Debug, Serialize)]
pub struct SpotSample {
    pub x: f64,
    pub y: f64,
    pub ratio: f64,
    /// Value the ratio must not exceed.
    pub reference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpotCheck {
    pub cell: [usize; 2],
    pub cell_sup: f64,
    pub global_bound: f64,
    pub max_ratio: f64,
    pub violations: usize,
    pub samples: Vec<SpotSample>,
}

/// Samples `(x, y)` in a cell, builds the adversarial instance (padded with
/// `n - 2` tasks of size `eps`) and computes the exact expected ratio of the
/// piecewise-constant algorithm. When `max{y, 1/x} >= 1` the optimum is 1 and
/// the ratio may exceed the cell supremum by at most `(n - 2) eps`; otherwise
/// it is compared with the global bound.
pub fn ratio_spot_check(
    g: &FiniteCDF<f64>,
    a: f64,
    cell: (usize, usize),
    trials: usize,
    seed: u64,
    eps: f64,
) -> Result<SpotCheck> {
    let n = g.n();
    let sup = cell_sup(g, &a, cell.0, cell.1)?;
    let global = sup_over_cells(g, &a)?.value;
    let ext = extend(g.clone(), a)?;
    let dist = ext.to_distribution()?;
    let table = CellTable::new(g, &a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |c: usize| -> f64 {
        let lo = table.lo[c - 1];
        let hi = table.hi[c - 1].unwrap_or(2.0 * lo);
        let v = lo + (hi - lo) * rng.random::<f64>();
        if v > 0.0 {
            v
        } else {
            hi * 1e-3
        }
    };
    let pad = (n as f64 - 2.0) * eps;
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        let (x, y) = (draw(cell.0), draw(cell.1));
        let t = worst_case_instance(&x, &y, n, &eps)?;
        let ratio = expected_ratio(&dist, &t)?;
        let reference = if y.max(1.0 / x) >= 1.0 { sup.value + pad } else { global };
        samples.push(SpotSample { x, y, ratio, reference });
    }
    let violations = samples.iter().filter(|s| s.ratio > s.reference + 1e-9).count();
    let max_ratio = samples.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(SpotCheck {
        cell: [cell.0, cell.1],
        cell_sup: sup.value,
        global_bound: global,
        max_ratio,
        violations,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::N_INCREASING_TOL;
    use crate::grid::uniform_grid;
    use crate::lower_bound::{lower_bound, LowerBoundOptions};
    use crate::mechanism::phi;

    fn lp_solution(n: usize, k: usize) -> (f64, FiniteCDF<f64>) {
        let r = lower_bound(n, &uniform_grid(k).unwrap(), &LowerBoundOptions::default()).unwrap();
        (r.bound, r.g)
    }

    fn point_mass() -> FiniteCDF<f64> {
        // F jumps from 0 to 1 at 1; both tasks share the threshold.
        FiniteCDF::from_values(2, GridSet::new(vec![1.0]).unwrap(), vec![1.0, 1.0, 1.0]).unwrap()
    }

    /// Closed `x` and `y` ranges of a cell, with unbounded sides cut at `cap`.
    fn cell_box(g: &FiniteCDF<f64>, a: f64, c: usize, cap: f64) -> (f64, f64) {
        let pts = g.grid().points();
        let lo = match c {
            1 => 0.0,
            c if c <= pts.len() + 1 => pts[c - 2],
            _ => a,
        };
        let hi = match c {
            c if c <= pts.len() => pts[c - 1],
            c if c == pts.len() + 1 => a,
            _ => cap,
        };
        (lo, hi)
    }

    /// Interior points of a cell, `steps` per axis.
    fn interior(g: &FiniteCDF<f64>, a: f64, i: usize, j: usize, steps: usize) -> Vec<(f64, f64)> {
        let (x0, x1) = cell_box(g, a, i, 4.0 * a);
        let (y0, y1) = cell_box(g, a, j, 4.0 * a);
        let mut out = Vec::new();
        for p in 1..=steps {
            for q in 1..=steps {
                let s = p as f64 / (steps + 1) as f64;
                let t = q as f64 / (steps + 1) as f64;
                out.push((x0 + (x1 - x0) * s, y0 + (y1 - y0) * t));
            }
        }
        out
    }

    #[test]
    fn point_mass_bound_is_two() {
        let g = point_mass();
        let report = upper_bound(&g, 2.0).unwrap();
        assert!((report.bound_float - 2.0).abs() < 1e-12);
        let (exact, value) = certify_exact(&g, 2.0).unwrap();
        assert_eq!(value, BigRational::from_integer(2.into()));
        assert_eq!(exact.bound_rational.as_deref(), Some("2/1"));
        assert_eq!(exact.bound_decimal, "2.0000000000");
    }

    #[test]
    fn dominates_sampled_phi() {
        for (n, k) in [(2, 3), (2, 5), (3, 3)] {
            let (_, g) = lp_solution(n, k);
            let a = default_a(g.grid());
            let ext = extend(g.clone(), a).unwrap();
            let cells = g.grid().len() + 2;
            let global = sup_over_cells(&g, &a).unwrap().value;
            for i in 1..=cells {
                for j in 1..=cells {
                    let sup = cell_sup(&g, &a, i, j).unwrap().value;
                    let mut sampled = f64::NEG_INFINITY;
                    for (x, y) in interior(&g, a, i, j, 12) {
                        let v = phi(&ext, &x, &y);
                        assert!(v <= sup + 1e-12, "n={n} k={k} cell ({i},{j}) at ({x},{y}): {v} > {sup}");
                        sampled = sampled.max(v);
                    }
                    assert!(sup <= global);
                    // The supremum is a limit of interior values, so a fine
                    // sample gets close unless the cell is unbounded.
                    if i > 1 && i < cells && j < cells {
                        assert!(sup - sampled < 0.2, "cell ({i},{j}) sup {sup} sampled {sampled}");
                    }
                }
            }
        }
    }

    #[test]
    fn monotone_within_cells() {
        let (_, g) = lp_solution(2, 4);
        let a = default_a(g.grid());
        let ext = extend(g.clone(), a).unwrap();
        let cells = g.grid().len() + 2;
        for i in 1..=cells {
            for j in 1..=cells {
                let (x0, x1) = cell_box(&g, a, i, 4.0 * a);
                let (y0, y1) = cell_box(&g, a, j, 4.0 * a);
                let xs: Vec<f64> = (1..=10).map(|p| x0 + (x1 - x0) * p as f64 / 11.0).collect();
                let ys: Vec<f64> = (1..=10).map(|p| y0 + (y1 - y0) * p as f64 / 11.0).collect();
                for &y in &ys {
                    for w in xs.windows(2) {
                        assert!(phi(&ext, &w[0], &y) >= phi(&ext, &w[1], &y) - 1e-12);
                    }
                }
                for &x in &xs {
                    for w in ys.windows(2) {
                        assert!(phi(&ext, &x, &w[0]) <= phi(&ext, &x, &w[1]) + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_cells() {
        let (_, g) = lp_solution(2, 3);
        let a = default_a(g.grid());
        let pts = g.grid().points().to_vec();
        let cells = pts.len() + 2;
        // x below the grid: F(x) = H = 0 and phi = 1 + (1 - F(y)) y, largest at the top of I_j.
        for j in 1..cells {
            let y_hi = if j <= pts.len() { pts[j - 1] } else { a };
            let fj = if j == 1 { 0.0 } else { g.univariate(j - 2) };
            let sup = cell_sup(&g, &a, 1, j).unwrap();
            assert!((sup.value - (1.0 + (1.0 - fj) * y_hi)).abs() < 1e-12, "cell (1,{j})");
        }
        // y beyond a: F(y) = 1 and H = F(x), so both branches read 1 + F_i u.
        for i in 2..=cells {
            let sup = cell_sup(&g, &a, i, cells).unwrap();
            let fi = if i <= pts.len() + 1 { g.univariate(i - 2) } else { 1.0 };
            let u_hi = 1.0 / cell_box(&g, a, i, 0.0).0;
            assert!((sup.value - (1.0 + fi * u_hi)).abs() < 1e-12, "cell ({i},last)");
        }
        let last = cell_sup(&g, &a, cells, cells).unwrap();
        assert!((last.value - (1.0 + 1.0 / a)).abs() < 1e-12);
    }

    #[test]
    fn exact_agrees_with_float() {
        for (n, k) in [(2, 4), (2, 8), (3, 3)] {
            let (_, g) = lp_solution(n, k);
            let a = default_a(g.grid());
            let float = upper_bound(&g, a).unwrap().bound_float;
            let (report, _) = certify_exact(&g, a).unwrap();
            assert!((float - report.bound_float).abs() <= 1e-7, "n={n} k={k}: {float} vs {}", report.bound_float);
            assert!(report.bound_decimal.parse::<f64>().unwrap() >= report.bound_float);
        }
    }

    #[test]
    fn sandwich() {
        for (n, k) in [(2, 2), (2, 6), (3, 4), (4, 2)] {
            let (lower, g) = lp_solution(n, k);
            let upper = upper_bound(&g, default_a(g.grid())).unwrap().bound_float;
            assert!(lower <= upper + 1e-8, "n={n} k={k}: {lower} > {upper}");
        }
    }

    #[test]
    fn repair_restores_a_cdf() {
        let g = FiniteCDF::from_values(2, GridSet::new(vec![1.0]).unwrap(), vec![0.9, 0.5, 1.0]).unwrap();
        assert!(check_n_increasing(&g, &N_INCREASING_TOL).is_some());
        let (fixed, clipped) = repair_to_cdf(&g);
        assert!((clipped - 0.4).abs() < 1e-12);
        assert!(check_n_increasing(&fixed, &0.0).is_none());
        assert_eq!(fixed.values().last(), Some(&1.0));
        // A valid CDF comes back unchanged.
        let p = FiniteCDF::product(2, uniform_grid(2).unwrap(), &[0.2, 0.5, 0.7]).unwrap();
        let (same, clipped) = repair_to_cdf(&p);
        assert_eq!(clipped, 0.0);
        for (a, b) in same.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let g = point_mass();
        assert!(sup_over_cells(&g, &1.0).is_err());
        assert!(choose_a(&g, SentinelChoice::Fixed(0.5)).is_err());
        let asym = FiniteCDF::from_values(2, GridSet::new(vec![1.0, 2.0]).unwrap(), vec![0.0; 6]).unwrap();
        assert!(upper_bound(&asym, 4.0).is_err());
    }

    #[test]
    fn auto_sentinel_is_no_worse() {
        let (_, g) = lp_solution(2, 5);
        let d = sup_over_cells(&g, &default_a(g.grid())).unwrap().value;
        let a = choose_a(&g, SentinelChoice::Auto).unwrap();
        assert!(sup_over_cells(&g, &a).unwrap().value <= d);
    }

    #[test]
    fn spot_checks_stay_below_cell_suprema() {
        let g = point_mass();
        for cell in [(2, 2), (2, 3), (3, 2), (1, 3)] {
            let check = ratio_spot_check(&g, 2.0, cell, 50, 7, 0.0).unwrap();
            assert_eq!(check.violations, 0);
            assert!(check.max_ratio <= 2.0 + 1e-12);
        }
        let (_, g) = lp_solution(3, 3);
        let a = default_a(g.grid());
        let cells = g.grid().len() + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let cell = (rng.random_range(1..=cells), rng.random_range(1..=cells));
            let check = ratio_spot_check(&g, a, cell, 10, rng.random(), 1e-6).unwrap();
            assert_eq!(check.violations, 0, "cell {cell:?}: {:?}", check.samples);
        }
    }

    #[test]
    fn eps_sensitivity() {
        // T_eps with n = 3 approaches phi of the bivariate margins at rate (n - 2) eps.
        let (_, g) = lp_solution(3, 3);
        let a = default_a(g.grid());
        let ext = extend(g.clone(), a).unwrap();
        let dist = ext.to_distribution().unwrap();
        for (x, y) in [(0.5, 1.5), (1.2, 1.1), (3.0, 1.4), (0.8, 2.2), (4.0, 1.0)] {
            let p = phi(&ext, &x, &y);
            for eps in [1e-2, 1e-4, 1e-6] {
                let r = expected_ratio(&dist, &worst_case_instance(&x, &y, 3, &eps).unwrap()).unwrap();
                assert!((r - p).abs() <= p.max(1.0) * eps + 1e-12, "({x},{y}) eps {eps}: {r} vs {p}");
            }
        }
    }
}
