//! Exact maximisation of `phi_two` over one interval pair.
//!
//! Write `u = 1/x`. On cell `I_i × I_j` the margins are single pieces, so
//! with `F(y) = 1 - c - d y` (`j > k`) `phi_two` is the quadratic
//!
//! `(1 - c) - c u + (c - d) y - d u y + d y^2 + G(u)`
//!
//! where `G(u) = u F(x)` is `α u + β u^2` for `i <= k` and `(1 - α) u - β`
//! for `i > k`. Its maximum over the polygon `cell ∩ {y >= u}` is attained at
//! a vertex, a stationary point of the restriction to an edge, or the
//! interior stationary point, all of which are rational in the data.
//!
//! For `j <= k` (which forces `i > k`), `phi_two` is increasing in `y` for
//! every member of the family, so the top edge `y = s_j` carries the maximum
//! and `phi_two` is affine in `u` there.

use rayon::prelude::*;

use super::family::PiecewiseRationalCDF;
use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct InnerMax<T = f64> {
    pub value: T,
    pub cell: (usize, usize),
    pub u: T,
    pub y: T,
}

impl<T: Scalar> InnerMax<T> {
    /// `x = 1/u`, `None` when the maximiser sits at `x → ∞`.
    pub fn x(&self) -> Option<T> {
        (!self.u.is_zero()).then(|| T::one() / self.u.clone())
    }
}

/// Cells `(i, j)` meeting `{xy >= 1}`, i.e. `i + j >= 2k + 1`, in
/// lexicographic order.
pub fn admissible_cells(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 1..=2 * k {
        for j in (2 * k + 1).saturating_sub(i).max(1)..=2 * k {
            out.push((i, j));
        }
    }
    out
}

/// `phi_two` on the closure of cell `(i, j)`, using that cell's pieces.
pub fn phi_cell<T: Scalar>(f: &PiecewiseRationalCDF<T>, i: usize, j: usize, u: &T, y: &T) -> T {
    let k = f.k();
    let one = T::one();
    let fy = if j <= k {
        if f.c1(j).is_zero() {
            f.c0(j).clone()
        } else {
            f.c0(j).clone() + f.c1(j).clone() / y.clone()
        }
    } else {
        let q = 2 * k + 1 - j;
        one.clone() - f.c0(q).clone() - f.c1(q).clone() * y.clone()
    };
    let g = if i <= k {
        f.c0(i).clone() * u.clone() + f.c1(i).clone() * u.clone() * u.clone()
    } else {
        let q = 2 * k + 1 - i;
        (one.clone() - f.c0(q).clone()) * u.clone() - f.c1(q).clone()
    };
    y.clone() - u.clone() + (one + u.clone() - y.clone()) * fy + g
}

/// Stationary `y` of `phi_two` along a line of fixed `u` when
/// `F(y) = 1 - c - d y`: `y* = (1 + u - c/d) / 2`.
pub fn stationary_y<T: Scalar>(c: &T, d: &T, u: &T) -> Option<T> {
    if d.is_zero() {
        return None;
    }
    Some((T::one() + u.clone() - c.clone() / d.clone()) / scalar::int::<T>(2))
}

/// `k0 + ku u + ky y + kuu u^2 + kuy u y + kyy y^2`.
#[derive(Clone, Debug)]
struct Quadratic<T> {
    k0: T,
    ku: T,
    ky: T,
    kuu: T,
    kuy: T,
    kyy: T,
}

impl<T: Scalar> Quadratic<T> {
    fn eval(&self, u: &T, y: &T) -> T {
        self.k0.clone()
            + self.ku.clone() * u.clone()
            + self.ky.clone() * y.clone()
            + self.kuu.clone() * u.clone() * u.clone()
            + self.kuy.clone() * u.clone() * y.clone()
            + self.kyy.clone() * y.clone() * y.clone()
    }

    fn grad(&self, u: &T, y: &T) -> (T, T) {
        let two = scalar::int::<T>(2);
        (
            self.ku.clone() + two.clone() * self.kuu.clone() * u.clone() + self.kuy.clone() * y.clone(),
            self.ky.clone() + self.kuy.clone() * u.clone() + two * self.kyy.clone() * y.clone(),
        )
    }
}

fn quadratic<T: Scalar>(f: &PiecewiseRationalCDF<T>, i: usize, j: usize) -> Quadratic<T> {
    let k = f.k();
    let one = T::one();
    let q = 2 * k + 1 - j;
    let (c, d) = (f.c0(q).clone(), f.c1(q).clone());
    let (g0, g1, g2) = if i <= k {
        (T::zero(), f.c0(i).clone(), f.c1(i).clone())
    } else {
        let p = 2 * k + 1 - i;
        (-f.c1(p).clone(), one.clone() - f.c0(p).clone(), T::zero())
    };
    Quadratic {
        k0: one - c.clone() + g0,
        ku: -c.clone() + g1,
        ky: c - d.clone(),
        kuu: g2,
        kuy: -d.clone(),
        kyy: d,
    }
}

/// Sutherland–Hodgman clip of a polygon to the half-plane `y >= u`.
fn clip_above_diagonal<T: Scalar>(poly: &[(T, T)]) -> Vec<(T, T)> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for idx in 0..poly.len() {
        let (p, q) = (&poly[idx], &poly[(idx + 1) % poly.len()]);
        let sp = p.1.clone() - p.0.clone();
        let sq = q.1.clone() - q.0.clone();
        let zero = T::zero();
        if sp >= zero {
            out.push(p.clone());
        }
        if (sp > zero && sq < zero) || (sp < zero && sq > zero) {
            let t = sp.clone() / (sp - sq);
            out.push((
                p.0.clone() + t.clone() * (q.0.clone() - p.0.clone()),
                p.1.clone() + t * (q.1.clone() - p.1.clone()),
            ));
        }
    }
    out
}

/// `sup phi_two` over `cl(I_i × I_j) ∩ {xy >= 1}` for an admissible cell.
pub fn inner_max<T: Scalar>(f: &PiecewiseRationalCDF<T>, i: usize, j: usize) -> Result<InnerMax<T>> {
    let k = f.k();
    if i == 0 || j == 0 || i > 2 * k || j > 2 * k || i + j < 2 * k + 1 {
        return Err(Error::InvalidArgument(format!("cell ({i}, {j}) does not meet xy >= 1")));
    }
    let one = T::one();
    let u_lo = if i == 2 * k { T::zero() } else { one.clone() / f.s(i).clone() };
    let u_hi = (i > 1).then(|| one.clone() / f.s(i - 1).clone());
    let y_lo = if j == 1 { T::zero() } else { f.s(j - 1).clone() };
    let y_hi = (j < 2 * k).then(|| f.s(j).clone());

    if j <= k {
        let y = y_hi.expect("lower intervals are bounded");
        let u_top = scalar::min(u_hi.expect("i > k has a positive left end"), y.clone());
        if u_lo > u_top {
            return Err(Error::InvalidArgument(format!("cell ({i}, {j}) misses xy >= 1")));
        }
        let best = [u_lo, u_top]
            .into_iter()
            .map(|u| InnerMax { value: phi_cell(f, i, j, &u, &y), cell: (i, j), u, y: y.clone() })
            .reduce(|a, b| if b.value > a.value { b } else { a })
            .expect("two candidates");
        return Ok(best);
    }

    let qd = quadratic(f, i, j);
    // Unbounded sides occur only where phi_two is constant along them
    // (f_1 ≡ 0); replace them by a finite stand-in.
    if (u_hi.is_none() && !(qd.ku.is_zero() && qd.kuu.is_zero() && qd.kuy.is_zero()))
        || (y_hi.is_none() && !(qd.ky.is_zero() && qd.kyy.is_zero() && qd.kuy.is_zero()))
    {
        return Err(Error::Invariant(format!("phi_two is not constant along the unbounded side of ({i}, {j})")));
    }
    let mut far = scalar::max(u_lo.clone(), y_lo.clone());
    for e in [&u_hi, &y_hi].into_iter().flatten() {
        far = scalar::max(far, e.clone());
    }
    far = far + one;
    let u_hi = u_hi.unwrap_or_else(|| far.clone());
    let y_hi = y_hi.unwrap_or(far);

    let rect = [
        (u_lo.clone(), y_lo.clone()),
        (u_hi.clone(), y_lo.clone()),
        (u_hi.clone(), y_hi.clone()),
        (u_lo.clone(), y_hi.clone()),
    ];
    let poly = clip_above_diagonal(&rect);
    if poly.is_empty() {
        return Err(Error::InvalidArgument(format!("cell ({i}, {j}) misses xy >= 1")));
    }
    let mut candidates: Vec<(T, T)> = poly.clone();
    let two = scalar::int::<T>(2);
    for idx in 0..poly.len() {
        let (p, q) = (&poly[idx], &poly[(idx + 1) % poly.len()]);
        let (du, dy) = (q.0.clone() - p.0.clone(), q.1.clone() - p.1.clone());
        let q2 = qd.kuu.clone() * du.clone() * du.clone()
            + qd.kuy.clone() * du.clone() * dy.clone()
            + qd.kyy.clone() * dy.clone() * dy.clone();
        if q2 < T::zero() {
            let (gu, gy) = qd.grad(&p.0, &p.1);
            let q1 = gu * du.clone() + gy * dy.clone();
            let t = -q1 / (two.clone() * q2);
            if t > T::zero() && t < T::one() {
                candidates.push((p.0.clone() + t.clone() * du, p.1.clone() + t * dy));
            }
        }
    }
    let det = scalar::int::<T>(4) * qd.kuu.clone() * qd.kyy.clone() - qd.kuy.clone() * qd.kuy.clone();
    if !det.is_zero() {
        let u = (-two.clone() * qd.ku.clone() * qd.kyy.clone() + qd.kuy.clone() * qd.ky.clone()) / det.clone();
        let y = (-two * qd.kuu.clone() * qd.ky.clone() + qd.ku.clone() * qd.kuy.clone()) / det;
        if u >= u_lo && u <= u_hi && y >= y_lo && y <= y_hi && y >= u {
            candidates.push((u, y));
        }
    }
    let best = candidates
        .into_iter()
        .map(|(u, y)| InnerMax { value: qd.eval(&u, &y), cell: (i, j), u, y })
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("nonempty polygon");
    Ok(best)
}

/// Maximum over all admissible cells; ties go to the smallest cell.
pub fn sweep<T: Scalar>(f: &PiecewiseRationalCDF<T>) -> Result<InnerMax<T>> {
    let cells = admissible_cells(f.k());
    let all: Result<Vec<InnerMax<T>>> = cells.par_iter().map(|&(i, j)| inner_max(f, i, j)).collect();
    Ok(all?
        .into_iter()
        .reduce(|a, b| if b.value > a.value || (b.value == a.value && b.cell < a.cell) { b } else { a })
        .expect("at least one admissible cell"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{uniform_grid, GridSet};
    use crate::two_task::phi_two;
    use num_rational::BigRational;

    fn member(k: usize, seed: u64) -> PiecewiseRationalCDF {
        // Deterministic increasing endpoint values in [0, 1/2].
        let n = 2 * (k - 1);
        let mut v = Vec::with_capacity(n);
        let mut acc = 0.0;
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        for _ in 0..n {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            acc += (state >> 33) as f64 / (1u64 << 31) as f64;
            v.push(acc);
        }
        let scale = 0.5 / (acc + 0.3);
        let vals: Vec<f64> = v.iter().map(|x| x * scale).collect();
        PiecewiseRationalCDF::from_endpoint_values(uniform_grid(k).unwrap(), &vals).unwrap()
    }

    #[test]
    fn admissible_cell_count() {
        // Pairs with i + j >= 2k + 1 in [1, 2k]^2: k(2k + 1).
        for k in 1..6 {
            assert_eq!(admissible_cells(k).len(), k * (2 * k + 1));
        }
    }

    #[test]
    fn phi_cell_agrees_with_phi_two_inside_cells() {
        let f = member(4, 3);
        for (i, j) in admissible_cells(4) {
            let lo_x = if i == 1 { 0.01 } else { *f.s(i - 1) };
            let hi_x = if i == 8 { lo_x * 3.0 } else { *f.s(i) };
            let lo_y = if j == 1 { 0.01 } else { *f.s(j - 1) };
            let hi_y = if j == 8 { lo_y * 3.0 } else { *f.s(j) };
            for a in 0..5 {
                for b in 0..5 {
                    let x = lo_x + (hi_x - lo_x) * (0.1 + 0.2 * a as f64);
                    let y = lo_y + (hi_y - lo_y) * (0.1 + 0.2 * b as f64);
                    if x * y >= 1.0 {
                        let direct = phi_two(&f, &x, &y).unwrap();
                        assert!((phi_cell(&f, i, j, &(1.0 / x), &y) - direct).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn quadratic_matches_phi_cell() {
        let f = member(5, 9);
        for (i, j) in admissible_cells(5).into_iter().filter(|&(_, j)| j > 5) {
            let q = quadratic(&f, i, j);
            for (u, y) in [(0.3, 1.1), (0.7, 2.5), (1.9, 4.0)] {
                assert!((q.eval(&u, &y) - phi_cell(&f, i, j, &u, &y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stationary_point_example() {
        // c = 0.1, d = 0.2, u = 1: y* = (2 - 0.5) / 2 = 0.75, below every upper interval.
        assert_eq!(stationary_y(&0.1, &0.2, &1.0), Some(0.75));
        assert_eq!(stationary_y(&0.1, &0.0, &1.0), None);
    }

    #[test]
    fn heaviside_cells() {
        let f = PiecewiseRationalCDF::heaviside(uniform_grid(1).unwrap()).unwrap();
        let best = sweep(&f).unwrap();
        assert_eq!(best.value, 2.0);
        // Last cell with F = 1 on both sides: phi = 1 + 1/x <= 1 + 1/s_{2k-1}.
        let f = PiecewiseRationalCDF::heaviside(uniform_grid(4).unwrap()).unwrap();
        let last = inner_max(&f, 8, 8).unwrap();
        assert!((last.value - (1.0 + 1.0 / 4.0)).abs() < 1e-12);
        assert_eq!(inner_max(&f, 1, 8).unwrap().value, 1.0);
        assert!(inner_max(&f, 1, 1).is_err());
    }

    fn scan(f: &PiecewiseRationalCDF, i: usize, j: usize, steps: usize) -> f64 {
        let k = f.k();
        let mut best = f64::NEG_INFINITY;
        for a in 0..steps {
            let t = a as f64 / steps as f64;
            let x = if i == 2 * k {
                1.0 / ((1.0 / f.s(i - 1)) * (1.0 - t))
            } else {
                let lo = if i == 1 { 0.0 } else { *f.s(i - 1) };
                lo + (f.s(i) - lo) * t
            };
            if !(x > 0.0) || !x.is_finite() {
                continue;
            }
            for b in 0..steps {
                let s = b as f64 / steps as f64;
                let y = if j == 2 * k {
                    f.s(j - 1) + 20.0 * s
                } else {
                    let lo = if j == 1 { 0.0 } else { *f.s(j - 1) };
                    lo + (f.s(j) - lo) * s
                };
                if x * y >= 1.0 && y > 0.0 {
                    best = best.max(phi_two(f, &x, &y).unwrap());
                }
            }
        }
        best
    }

    #[test]
    fn dominates_grid_scan() {
        for seed in 0..6 {
            let f = member(4, seed);
            for (i, j) in admissible_cells(4) {
                let m = inner_max(&f, i, j).unwrap();
                let s = scan(&f, i, j, 60);
                assert!(m.value >= s - 1e-9, "cell ({i},{j}) seed {seed}: {} < {s}", m.value);
                // The maximiser lies in the cell closure on the feasible side.
                assert!(m.y >= m.u - 1e-12);
            }
        }
    }

    #[test]
    fn exact_and_float_agree() {
        let f = member(3, 5);
        let exact = f.to_exact_on(GridSet::<BigRational>::uniform(3).unwrap()).unwrap();
        for (i, j) in admissible_cells(3) {
            let a = inner_max(&f, i, j).unwrap().value;
            let b = scalar::to_f64(&inner_max(&exact, i, j).unwrap().value);
            assert!((a - b).abs() < 1e-12, "({i},{j}) {a} {b}");
        }
    }
}
