//! Finite ratio grids and the interval partitions they induce.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Relative tolerance used to recognise reciprocal pairs in float grids.
const RECIPROCAL_TOL: f64 = 1e-12;

/// Strictly increasing set of positive breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSet<T = f64> {
    points: Vec<T>,
    symmetric: bool,
}

impl<T: Scalar> GridSet<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid must contain at least one point".into()));
        }
        if !(points[0] > T::zero()) {
            return Err(Error::InvalidGrid("grid points must be positive".into()));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid("grid points must be strictly increasing".into()));
        }
        let symmetric = reciprocal_closed(&points);
        Ok(Self { points, symmetric })
    }

    /// The symmetric grid `{r_1, .., r_m, 1, 1/r_m, .., 1/r_1}`.
    pub fn from_ratios(mut ratios: Vec<T>) -> Result<Self> {
        ratios.sort_by(|a, b| a.partial_cmp(b).expect("comparable grid points"));
        if ratios.first().is_some_and(|r| !(r > &T::zero()))
            || ratios.last().is_some_and(|r| !(r < &T::one()))
        {
            return Err(Error::InvalidGrid("ratios must lie in (0, 1)".into()));
        }
        if ratios.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid("ratios must be distinct".into()));
        }
        let mut points = ratios.clone();
        points.push(T::one());
        points.extend(ratios.iter().rev().map(|r| T::one() / r.clone()));
        Ok(Self { points, symmetric: true })
    }

    /// `{1/k, .., (k-1)/k, 1, k/(k-1), .., k}`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidGrid("uniform grid needs k >= 1".into()));
        }
        let k = k as i64;
        let mut points: Vec<T> = (1..k).map(|i| scalar::ratio(i, k)).collect();
        points.push(T::one());
        // k/i directly rather than 1/(i/k), so float grids hold the correctly rounded value.
        points.extend((1..k).rev().map(|i| scalar::ratio(k, i)));
        Ok(Self { points, symmetric: true })
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// `k` such that the grid has `2k - 1` points, for symmetric grids.
    pub fn k(&self) -> Option<usize> {
        self.symmetric.then(|| self.points.len().div_ceil(2))
    }

    pub fn min(&self) -> &T {
        &self.points[0]
    }

    pub fn max(&self) -> &T {
        self.points.last().expect("nonempty grid")
    }

    /// Index of the largest grid point `<= x`.
    pub fn floor_index(&self, x: &T) -> Option<usize> {
        let above = self.points.partition_point(|p| p <= x);
        above.checked_sub(1)
    }

    pub fn to_f64(&self) -> GridSet<f64> {
        GridSet { points: self.points.iter().map(scalar::to_f64).collect(), symmetric: self.symmetric }
    }

    pub fn to_exact(&self) -> GridSet<BigRational> {
        GridSet {
            points: self.points.iter().map(|p| scalar::from_f64(scalar::to_f64(p))).collect(),
            symmetric: self.symmetric,
        }
    }
}

impl GridSet<f64> {
    /// Exact grid of the 8-digit (or `digits`) decimal roundings of the points.
    pub fn rounded_exact(&self, digits: u32) -> Result<GridSet<BigRational>> {
        let points = self.points.iter().map(|p| scalar::round_decimal(*p, digits)).collect();
        let mut grid = GridSet::new(points)?;
        grid.symmetric = self.symmetric;
        Ok(grid)
    }
}

fn reciprocal_closed<T: Scalar>(points: &[T]) -> bool {
    let m = points.len();
    if m % 2 == 0 {
        return false;
    }
    (0..=m / 2).all(|i| {
        let prod = scalar::to_f64(&(points[i].clone() * points[m - 1 - i].clone()));
        (prod - 1.0).abs() <= RECIPROCAL_TOL
    })
}

/// Position in the sentinel-extended grid `{0} ∪ S ∪ {∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Coord {
    Zero,
    At(usize),
    Inf,
}

/// A grid together with the sentinel `a > max(S)` standing in for infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedGrid<T = f64> {
    base: GridSet<T>,
    a: T,
}

impl<T: Scalar> ExtendedGrid<T> {
    pub fn new(base: GridSet<T>, a: T) -> Result<Self> {
        if !(&a > base.max()) {
            return Err(Error::InvalidGrid(format!(
                "sentinel a = {} must exceed the largest grid point {}",
                scalar::to_f64(&a),
                scalar::to_f64(base.max())
            )));
        }
        Ok(Self { base, a })
    }

    /// Default sentinel `2 max(S)`.
    pub fn with_default_a(base: GridSet<T>) -> Self {
        let a = base.max().clone() * scalar::int::<T>(2);
        Self { base, a }
    }

    pub fn base(&self) -> &GridSet<T> {
        &self.base
    }

    pub fn a(&self) -> &T {
        &self.a
    }

    pub fn intervals(&self) -> Vec<Interval<T>> {
        interval_cover(&self.base, Some(&self.a))
    }

    /// Floor of `x` in `S ∪ {a}`, with `a` reported as [`Coord::Inf`].
    pub fn floor(&self, x: &T) -> Coord {
        if x >= &self.a {
            Coord::Inf
        } else {
            self.base.floor_index(x).map_or(Coord::Zero, Coord::At)
        }
    }
}

/// Half-open interval `[lo, hi)`; `hi = None` is unbounded.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval<T = f64> {
    pub lo: T,
    pub hi: Option<T>,
}

impl<T: Scalar> Interval<T> {
    pub fn contains(&self, x: &T) -> bool {
        x >= &self.lo && self.hi.as_ref().map_or(true, |h| x < h)
    }
}

/// Partition of `[0, ∞)` by the grid points and, when given, the sentinel.
pub fn interval_cover<T: Scalar>(grid: &GridSet<T>, a: Option<&T>) -> Vec<Interval<T>> {
    let mut breaks: Vec<T> = grid.points().to_vec();
    if let Some(a) = a {
        breaks.push(a.clone());
    }
    let mut out = Vec::with_capacity(breaks.len() + 1);
    let mut lo = T::zero();
    for b in breaks {
        out.push(Interval { lo, hi: Some(b.clone()) });
        lo = b;
    }
    out.push(Interval { lo, hi: None });
    out
}

pub fn uniform_grid(k: usize) -> Result<GridSet<f64>> {
    GridSet::uniform(k)
}
