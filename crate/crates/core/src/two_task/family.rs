use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSet;
use crate::scalar::{self, Scalar};

/// Symmetric univariate CDF built from `k` affine pieces
/// `f_p(w) = c0_p + c1_p w`, `f_1 ≡ 0`, on the intervals
/// `I_1 = [0, s_1), .., I_{2k} = [s_{2k-1}, ∞)` of a symmetric grid:
///
/// * `F(x) = f_i(1/x)` on `I_i`, `i <= k`
/// * `F(x) = 1 - f_{2k+1-i}(x)` on `I_i`, `i > k`
///
/// so `F(x) + F(1/x) = 1` off the breakpoints. `F` is a CDF exactly when
/// `c1_p <= 0`, `f_p(1/s_p) <= f_{p+1}(1/s_p)` for `p < k` and
/// `f_k(1) <= 1/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseRationalCDF<T = f64> {
    k: usize,
    grid: GridSet<T>,
    c0: Vec<T>,
    c1: Vec<T>,
}

impl<T: Scalar> PiecewiseRationalCDF<T> {
    /// Coefficients are listed for `p = 1..=k`; `f_1` must be zero.
    pub fn new(grid: GridSet<T>, c0: Vec<T>, c1: Vec<T>) -> Result<Self> {
        let k = grid
            .k()
            .ok_or_else(|| Error::InvalidGrid("the piecewise family needs a symmetric grid".into()))?;
        if c0.len() != k || c1.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: c0.len().min(c1.len()) });
        }
        if !c0[0].is_zero() || !c1[0].is_zero() {
            return Err(Error::InvalidArgument("the first piece must be identically zero".into()));
        }
        Ok(Self { k, grid, c0, c1 })
    }

    /// All pieces zero: the point mass at 1.
    pub fn heaviside(grid: GridSet<T>) -> Result<Self> {
        let k = grid.k().ok_or_else(|| Error::InvalidGrid("grid must be symmetric".into()))?;
        Self::new(grid, vec![T::zero(); k], vec![T::zero(); k])
    }

    /// Builds the member whose piece `p >= 2` runs from `L_p` at `x = s_{p-1}`
    /// to `R_p` at `x = s_p`; `values = [L_2, R_2, .., L_k, R_k]`.
    pub fn from_endpoint_values(grid: GridSet<T>, values: &[T]) -> Result<Self> {
        let k = grid.k().ok_or_else(|| Error::InvalidGrid("grid must be symmetric".into()))?;
        if values.len() != 2 * (k - 1) {
            return Err(Error::DimensionMismatch { expected: 2 * (k - 1), got: values.len() });
        }
        let mut c0 = vec![T::zero(); k];
        let mut c1 = vec![T::zero(); k];
        for p in 2..=k {
            let w_l = T::one() / grid.points()[p - 2].clone();
            let w_r = T::one() / grid.points()[p - 1].clone();
            let (l, r) = (values[2 * (p - 2)].clone(), values[2 * (p - 2) + 1].clone());
            let slope = (l - r.clone()) / (w_l - w_r.clone());
            c0[p - 1] = r - slope.clone() * w_r;
            c1[p - 1] = slope;
        }
        Self::new(grid, c0, c1)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> &GridSet<T> {
        &self.grid
    }

    /// `c0_p`, `p` counted from 1.
    pub fn c0(&self, p: usize) -> &T {
        &self.c0[p - 1]
    }

    pub fn c1(&self, p: usize) -> &T {
        &self.c1[p - 1]
    }

    /// `s_m`, `m` counted from 1.
    pub fn s(&self, m: usize) -> &T {
        &self.grid.points()[m - 1]
    }

    pub fn piece(&self, p: usize, w: &T) -> T {
        if self.c1[p - 1].is_zero() {
            return self.c0[p - 1].clone();
        }
        self.c0[p - 1].clone() + self.c1[p - 1].clone() * w.clone()
    }

    /// Interval `I_i` containing `x`, numbered `1..=2k`.
    pub fn interval_of(&self, x: &T) -> usize {
        self.grid.floor_index(x).map_or(1, |m| m + 2)
    }

    pub fn cdf(&self, x: &T) -> T {
        let i = self.interval_of(x);
        if i <= self.k {
            if i == 1 {
                return T::zero();
            }
            self.piece(i, &(T::one() / x.clone()))
        } else {
            T::one() - self.piece(2 * self.k + 1 - i, x)
        }
    }

    /// Endpoint values `[L_2, R_2, .., L_k, R_k]`.
    pub fn endpoint_values(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(2 * (self.k - 1));
        for p in 2..=self.k {
            out.push(self.piece(p, &(T::one() / self.s(p - 1).clone())));
            out.push(self.piece(p, &(T::one() / self.s(p).clone())));
        }
        out
    }

    /// Violations of the family constraints larger than `tol`, as messages.
    pub fn family_violations(&self, tol: &T) -> Vec<String> {
        let mut out = Vec::new();
        let half = scalar::ratio::<T>(1, 2);
        for p in 2..=self.k {
            if self.c1[p - 1] > tol.clone() {
                out.push(format!("piece {p} decreases (c1 = {})", scalar::to_f64(&self.c1[p - 1])));
            }
        }
        for p in 1..self.k {
            let w = T::one() / self.s(p).clone();
            let gap = self.piece(p, &w) - self.piece(p + 1, &w);
            if gap > tol.clone() {
                out.push(format!("jump at s_{p} is negative ({})", -scalar::to_f64(&gap)));
            }
        }
        let top = self.piece(self.k, &T::one());
        if top > half.clone() + tol.clone() {
            out.push(format!("f_k(1) = {} exceeds 1/2", scalar::to_f64(&top)));
        }
        out
    }

    pub fn is_valid(&self, tol: &T) -> bool {
        self.family_violations(tol).is_empty()
    }

    /// Nearest valid member in endpoint-value space: the sequence
    /// `L_2 <= R_2 <= .. <= R_k` is made monotone by a running maximum and
    /// clipped to `[0, 1/2]`.
    pub fn repaired(&self) -> Self {
        if self.k == 1 {
            return self.clone();
        }
        let half = scalar::ratio::<T>(1, 2);
        let mut running = T::zero();
        let values: Vec<T> = self
            .endpoint_values()
            .into_iter()
            .map(|v| {
                running = scalar::min(scalar::max(running.clone(), v), half.clone());
                running.clone()
            })
            .collect();
        Self::from_endpoint_values(self.grid.clone(), &values).expect("same grid")
    }
}

impl PiecewiseRationalCDF<f64> {
    pub fn to_exact_on(&self, grid: GridSet<BigRational>) -> Result<PiecewiseRationalCDF<BigRational>> {
        PiecewiseRationalCDF::new(
            grid,
            self.c0.iter().map(|v| scalar::from_f64(*v)).collect(),
            self.c1.iter().map(|v| scalar::from_f64(*v)).collect(),
        )
    }

    pub fn to_doc(&self) -> PiecewiseRationalDoc {
        PiecewiseRationalDoc {
            k: self.k,
            grid: self.grid.points().to_vec(),
            pieces: self.c0.iter().zip(&self.c1).map(|(&c0, &c1)| PieceDoc { c0, c1 }).collect(),
        }
    }

    pub fn from_doc(doc: &PiecewiseRationalDoc) -> Result<Self> {
        let grid = GridSet::new(doc.grid.clone())?;
        if grid.k() != Some(doc.k) {
            return Err(Error::InvalidGrid(format!("grid does not have 2k - 1 = {} symmetric points", 2 * doc.k - 1)));
        }
        Self::new(grid, doc.pieces.iter().map(|p| p.c0).collect(), doc.pieces.iter().map(|p| p.c1).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseRationalDoc {
    pub k: usize,
    pub grid: Vec<f64>,
    pub pieces: Vec<PieceDoc>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceDoc {
    pub c0: f64,
    pub c1: f64,
}
