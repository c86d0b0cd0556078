//! Serializable run reports.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Float,
    Exact,
}

/// Artifact version in `git describe` style: the package version, plus the
/// commit when the build environment provides one.
pub fn version() -> String {
    match option_env!("MIS_BOUNDS_GIT_DESCRIBE") {
        Some(desc) if !desc.is_empty() => desc.to_string(),
        _ => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

/// A certified bound with the data needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub k: Option<usize>,
    pub a: f64,
    pub bound_float: f64,
    /// Exact value as `p/q`, present in exact mode.
    #[serde(default)]
    pub bound_rational: Option<String>,
    /// Decimal rounded up, so it is itself a valid bound.
    pub bound_decimal: String,
    /// Cell `(i, j)` of the supremum, intervals numbered from 1.
    pub argmax_cell: [usize; 2],
    /// Limit point of the supremum; `x = null` stands for `x → ∞`.
    pub limit_x: Option<f64>,
    pub limit_y: f64,
    pub mode: Mode,
    /// Mass clipped when the exact data had to be repaired into a CDF.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repaired_mass: Option<f64>,
}
