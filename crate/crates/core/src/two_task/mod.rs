//! Two-task specialisation: symmetric univariate CDFs coupled by the lower
//! Fréchet copula, a piecewise rational family of such CDFs, exact inner
//! maximisation per interval pair, and the cutting-plane loop.

mod copula;
mod cutting_plane;
mod family;
mod inner_max;

pub use copula::{copula_lower_frechet, CountermonotoneSampler, LowerFrechet};
pub use cutting_plane::{
    certify_two_task, cutting_plane, initial_cuts, master_lp, master_program, refine_grid, Cut,
    CuttingPlaneOptions, IterationRecord, LoopStatus, RefineDoc, RefineResult, TwoTaskCertificate,
    DEFAULT_MAX_ITER, DEFAULT_STOP_TOL,
};
pub use family::{PieceDoc, PiecewiseRationalCDF, PiecewiseRationalDoc};
pub use inner_max::{admissible_cells, inner_max, phi_cell, stationary_y, sweep, InnerMax};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `phi` for a symmetric `F` coupled by the lower Fréchet copula, valid on
/// `xy >= 1`: `y - 1/x + (1 + 1/x - y) F(y) + F(x)/x`.
pub fn phi_two<T: Scalar>(f: &PiecewiseRationalCDF<T>, x: &T, y: &T) -> Result<T> {
    if x.clone() * y.clone() < T::one() {
        return Err(Error::InvalidArgument("phi_two is defined on xy >= 1 only".into()));
    }
    let u = T::one() / x.clone();
    Ok(y.clone() - u.clone() + (T::one() + u.clone() - y.clone()) * f.cdf(y) + u * f.cdf(x))
}

/// The copula construction only yields a CDF for two tasks.
pub fn require_two_tasks(n: usize) -> Result<()> {
    if n == 2 {
        Ok(())
    } else {
        Err(Error::CopulaDimension { n })
    }
}
