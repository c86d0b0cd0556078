//! Symmetric grid functions `g` (the family of finite multivariate CDFs on a
//! sentinel-extended grid), the n-increasing check and the piecewise-constant
//! extension to the whole positive orthant.

use std::collections::HashSet;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Coord, ExtendedGrid, GridSet};
use crate::mechanism::{Atom, DiscreteThresholdDistribution, Margins};
use crate::scalar::{self, Scalar};

/// Ranking of size-`n` multisets over the alphabet `{0, .., m-1}` in
/// colexicographic order, via the combinatorial number system.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitIndex {
    n: usize,
    m: usize,
    count: usize,
    binom: Vec<Vec<usize>>,
}

impl OrbitIndex {
    pub fn new(n: usize, m: usize) -> Self {
        assert!(n >= 1 && m >= 1, "orbit index needs n >= 1 and m >= 1");
        let rows = m + n;
        let mut binom = vec![vec![0usize; n + 1]; rows + 1];
        for row in binom.iter_mut() {
            row[0] = 1;
        }
        for x in 1..=rows {
            for r in 1..=n {
                binom[x][r] = binom[x - 1][r - 1] + binom[x - 1][r];
            }
        }
        let count = binom[m + n - 1][n];
        Self { n, m, count, binom }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> usize {
        self.m
    }

    /// Number of multisets, `C(m + n - 1, n)`.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Rank of a nondecreasing tuple.
    pub fn rank(&self, sorted: &[u32]) -> usize {
        debug_assert_eq!(sorted.len(), self.n);
        debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
        sorted
            .iter()
            .enumerate()
            .map(|(i, &a)| self.binom[a as usize + i][i + 1])
            .sum()
    }

    pub fn rank_unsorted(&self, tuple: &[u32]) -> usize {
        let mut key = tuple.to_vec();
        key.sort_unstable();
        self.rank(&key)
    }

    /// All nondecreasing tuples, position `r` holding the tuple of rank `r`.
    pub fn keys(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.count];
        let mut cur = vec![0u32; self.n];
        loop {
            out[self.rank(&cur)] = cur.clone();
            // Next nondecreasing tuple in lexicographic order.
            let mut i = self.n;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if (cur[i] as usize) < self.m - 1 {
                    let v = cur[i] + 1;
                    for c in &mut cur[i..] {
                        *c = v;
                    }
                    break;
                }
            }
        }
    }
}

/// Symmetric function on `({0} ∪ S ∪ {∞})^n`, stored once per permutation
/// orbit. Orbits touching `0` are identically zero and not stored; the all-`∞`
/// orbit is pinned to one.
///
/// Symbols `0..|S|` index the grid points, symbol `|S|` is `∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteCDF<T = f64> {
    n: usize,
    grid: GridSet<T>,
    index: OrbitIndex,
    values: Vec<T>,
}

impl<T: Scalar> FiniteCDF<T> {
    /// Builds `g` from its values on orbit keys (nondecreasing symbol tuples).
    pub fn from_fn(n: usize, grid: GridSet<T>, mut f: impl FnMut(&[u32]) -> T) -> Self {
        let index = OrbitIndex::new(n, grid.len() + 1);
        let keys = index.keys();
        let mut values: Vec<T> = keys.iter().map(|k| f(k)).collect();
        *values.last_mut().expect("at least one orbit") = T::one();
        Self { n, grid, index, values }
    }

    /// Builds `g` from values listed by orbit rank.
    pub fn from_values(n: usize, grid: GridSet<T>, values: Vec<T>) -> Result<Self> {
        let index = OrbitIndex::new(n, grid.len() + 1);
        if values.len() != index.count() {
            return Err(Error::DimensionMismatch { expected: index.count(), got: values.len() });
        }
        let mut g = Self { n, grid, index, values };
        *g.values.last_mut().expect("at least one orbit") = T::one();
        Ok(g)
    }

    /// Product of `n` copies of a univariate grid function `f` (values on
    /// `S`, increasing, in `[0, 1]`), the CDF of i.i.d. thresholds.
    pub fn product(n: usize, grid: GridSet<T>, univariate: &[T]) -> Result<Self> {
        if univariate.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: univariate.len() });
        }
        let inf = grid.len() as u32;
        Ok(Self::from_fn(n, grid, |key| {
            key.iter().fold(T::one(), |acc, &s| {
                if s == inf {
                    acc
                } else {
                    acc * univariate[s as usize].clone()
                }
            })
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &GridSet<T> {
        &self.grid
    }

    pub fn index(&self) -> &OrbitIndex {
        &self.index
    }

    /// Values by orbit rank.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn inf_symbol(&self) -> u32 {
        self.grid.len() as u32
    }

    /// Value at a nondecreasing symbol tuple.
    pub fn value_sorted(&self, key: &[u32]) -> &T {
        &self.values[self.index.rank(key)]
    }

    pub fn value(&self, coords: &[Coord]) -> T {
        assert_eq!(coords.len(), self.n, "coordinate count must match dimension");
        let mut key = Vec::with_capacity(self.n);
        for c in coords {
            match c {
                Coord::Zero => return T::zero(),
                Coord::At(i) => key.push(*i as u32),
                Coord::Inf => key.push(self.inf_symbol()),
            }
        }
        key.sort_unstable();
        self.value_sorted(&key).clone()
    }

    /// `F(s_i) = g(s_i, ∞, .., ∞)`.
    pub fn univariate(&self, i: usize) -> T {
        let mut key = vec![self.inf_symbol(); self.n];
        key[0] = i as u32;
        self.value_sorted(&key).clone()
    }

    /// `H(s_i, s_j) = g(s_i, s_j, ∞, .., ∞)`.
    pub fn bivariate(&self, i: usize, j: usize) -> T {
        assert!(self.n >= 2, "bivariate margin needs n >= 2");
        let mut key = vec![self.inf_symbol(); self.n];
        key[0] = i.min(j) as u32;
        key[1] = i.max(j) as u32;
        self.value_sorted(&key).clone()
    }

    /// Signed vertex sum of the elementary box whose sorted interval key is
    /// `cell` (interval `t` spans symbols `t-1 .. t`, interval `0` starts at 0).
    pub fn box_sum(&self, cell: &[u32]) -> T {
        let n = self.n;
        let mut total = T::zero();
        let mut key = vec![0u32; n];
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
            let mut sorted = key.clone();
            sorted.sort_unstable();
            let v = self.value_sorted(&sorted).clone();
            total = if lower % 2 == 0 { total + v } else { total - v };
        }
        total
    }

    /// Probability masses of all elementary boxes, by sorted interval key.
    pub fn box_masses(&self) -> Vec<(Vec<u32>, T)> {
        self.index.keys().into_iter().map(|cell| {
            let mass = self.box_sum(&cell);
            (cell, mass)
        }).collect()
    }

    pub fn map<U: Scalar>(&self, grid: GridSet<U>, f: impl Fn(&T) -> U) -> FiniteCDF<U> {
        assert_eq!(grid.len(), self.grid.len(), "grid size must be preserved");
        FiniteCDF { n: self.n, grid, index: self.index.clone(), values: self.values.iter().map(f).collect() }
    }

    pub fn to_f64(&self) -> FiniteCDF<f64> {
        self.map(self.grid.to_f64(), scalar::to_f64)
    }
}

impl FiniteCDF<f64> {
    /// Exact copy with values converted without rounding and the grid given.
    pub fn to_exact_on(&self, grid: GridSet<BigRational>) -> FiniteCDF<BigRational> {
        self.map(grid, |v| scalar::from_f64(*v))
    }

    /// Clamps values into `[0, 1]` (solver round-off).
    pub fn clamped(mut self) -> Self {
        for v in &mut self.values {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }
}

/// An elementary box whose signed vertex sum is negative.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxViolation<T = f64> {
    /// Lower corner of the box.
    pub lower: Vec<Coord>,
    /// Upper corner of the box.
    pub upper: Vec<Coord>,
    pub sum: T,
}

/// Checks the n-increasing property on every elementary box of consecutive
/// extended coordinates. Symmetry of `g` makes the sorted boxes sufficient.
/// Returns the first box (in rank order) whose sum is below `-tol`.
pub fn check_n_increasing<T: Scalar>(g: &FiniteCDF<T>, tol: &T) -> Option<BoxViolation<T>> {
    let neg_tol = -tol.clone();
    let inf = g.inf_symbol();
    let sym = |s: u32| if s == inf { Coord::Inf } else { Coord::At(s as usize) };
    for cell in g.index().keys() {
        let sum = g.box_sum(&cell);
        if sum < neg_tol {
            let lower = cell.iter().map(|&t| if t == 0 { Coord::Zero } else { sym(t - 1) }).collect();
            let upper = cell.iter().map(|&t| sym(t)).collect();
            return Some(BoxViolation { lower, upper, sum });
        }
    }
    None
}

pub const N_INCREASING_TOL: f64 = 1e-10;

/// Smallest elementary-box sum, a measure of how far `g` is from a CDF.
pub fn min_box_sum<T: Scalar>(g: &FiniteCDF<T>) -> T {
    g.index()
        .keys()
        .into_iter()
        .map(|cell| g.box_sum(&cell))
        .fold(None, |acc: Option<T>, s| Some(match acc {
            Some(a) => scalar::min(a, s),
            None => s,
        }))
        .expect("at least one box")
}

/// Piecewise-constant extension of `g` to `[0, ∞)^n`: each coordinate is floored onto
/// `S ∪ {a}`, with `a` read as `∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseConstantCDF<T = f64> {
    source: FiniteCDF<T>,
    extended: ExtendedGrid<T>,
}

pub fn extend<T: Scalar>(g: FiniteCDF<T>, a: T) -> Result<PiecewiseConstantCDF<T>> {
    let extended = ExtendedGrid::new(g.grid().clone(), a)?;
    Ok(PiecewiseConstantCDF { source: g, extended })
}

impl<T: Scalar> PiecewiseConstantCDF<T> {
    pub fn source(&self) -> &FiniteCDF<T> {
        &self.source
    }

    pub fn extended(&self) -> &ExtendedGrid<T> {
        &self.extended
    }

    pub fn a(&self) -> &T {
        self.extended.a()
    }

    pub fn eval(&self, z: &[T]) -> T {
        let coords: Vec<Coord> = z.iter().map(|x| self.extended.floor(x)).collect();
        self.source.value(&coords)
    }

    /// The finite-support threshold law with CDF equal to this extension.
    /// Each elementary box carries its mass at the upper corner, `∞` placed
    /// at `a`. Negative masses from solver round-off are dropped and the
    /// remainder renormalised.
    pub fn to_distribution(&self) -> Result<DiscreteThresholdDistribution<T>> {
        let g = &self.source;
        let inf = g.inf_symbol();
        let point = |s: u32| {
            if s == inf {
                self.extended.a().clone()
            } else {
                g.grid().points()[s as usize].clone()
            }
        };
        let mut atoms = Vec::new();
        let mut total = T::zero();
        for (cell, mass) in g.box_masses() {
            if !(mass > T::zero()) {
                continue;
            }
            for perm in distinct_permutations(&cell) {
                atoms.push(Atom { z: perm.iter().map(|&s| point(s)).collect(), w: mass.clone() });
                total = total + mass.clone();
            }
        }
        for atom in &mut atoms {
            atom.w = atom.w.clone() / total.clone();
        }
        DiscreteThresholdDistribution::new(atoms)
    }
}

impl<T: Scalar> Margins<T> for PiecewiseConstantCDF<T> {
    fn cdf(&self, x: &T) -> T {
        let mut coords = vec![Coord::Inf; self.source.n()];
        coords[0] = self.extended.floor(x);
        self.source.value(&coords)
    }

    fn joint(&self, x: &T, y: &T) -> T {
        assert!(self.source.n() >= 2, "bivariate margin needs n >= 2");
        let mut coords = vec![Coord::Inf; self.source.n()];
        coords[0] = self.extended.floor(x);
        coords[1] = self.extended.floor(y);
        self.source.value(&coords)
    }
}

fn distinct_permutations(key: &[u32]) -> Vec<Vec<u32>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut cur = key.to_vec();
    permute(&mut cur, 0, &mut seen, &mut out);
    out
}

fn permute(cur: &mut Vec<u32>, at: usize, seen: &mut HashSet<Vec<u32>>, out: &mut Vec<Vec<u32>>) {
    if at == cur.len() {
        if seen.insert(cur.clone()) {
            out.push(cur.clone());
        }
        return;
    }
    for i in at..cur.len() {
        cur.swap(at, i);
        permute(cur, at + 1, seen, out);
        cur.swap(at, i);
    }
}

/// JSON form of a [`FiniteCDF`]: orbit keys list grid values, `"inf"` for ∞.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteCdfDoc {
    pub n: usize,
    pub grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    pub orbits: Vec<OrbitDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitDoc {
    pub key: Vec<KeyEntry>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeyEntry {
    Point(f64),
    Sentinel(String),
}

impl FiniteCDF<f64> {
    pub fn to_doc(&self, a: Option<f64>) -> FiniteCdfDoc {
        let inf = self.inf_symbol();
        let orbits = self
            .index
            .keys()
            .into_iter()
            .zip(&self.values)
            .map(|(key, &value)| OrbitDoc {
                key: key
                    .iter()
                    .map(|&s| {
                        if s == inf {
                            KeyEntry::Sentinel("inf".into())
                        } else {
                            KeyEntry::Point(self.grid.points()[s as usize])
                        }
                    })
                    .collect(),
                value,
            })
            .collect();
        FiniteCdfDoc { n: self.n, grid: self.grid.points().to_vec(), a, orbits }
    }

    pub fn from_doc(doc: &FiniteCdfDoc) -> Result<Self> {
        let grid = GridSet::new(doc.grid.clone())?;
        let index = OrbitIndex::new(doc.n, grid.len() + 1);
        let inf = grid.len() as u32;
        let mut values = vec![None; index.count()];
        for orbit in &doc.orbits {
            if orbit.key.len() != doc.n {
                return Err(Error::DimensionMismatch { expected: doc.n, got: orbit.key.len() });
            }
            let mut key = Vec::with_capacity(doc.n);
            for entry in &orbit.key {
                key.push(match entry {
                    KeyEntry::Sentinel(s) if s == "inf" => inf,
                    KeyEntry::Sentinel(s) => {
                        return Err(Error::InvalidArgument(format!("unknown key sentinel {s:?}")))
                    }
                    KeyEntry::Point(p) => grid
                        .points()
                        .iter()
                        .position(|q| q == p)
                        .ok_or_else(|| Error::InvalidArgument(format!("key point {p} is not on the grid")))?
                        as u32,
                });
            }
            key.sort_unstable();
            values[index.rank(&key)] = Some(orbit.value);
        }
        let last = values.len() - 1;
        values[last].get_or_insert(1.0);
        let values = values
            .into_iter()
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::InvalidArgument("orbit list is incomplete".into()))?;
        Self::from_values(doc.n, grid, values)
    }
}
