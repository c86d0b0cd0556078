//! File formats read and written by the command-line tool.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mis_bounds::cdf::{FiniteCDF, FiniteCdfDoc};
use mis_bounds::grid::GridSet;
use mis_bounds::mechanism::{Atom, DiscreteThresholdDistribution, TimeMatrix};
use mis_bounds::two_task::{PiecewiseRationalCDF, PiecewiseRationalDoc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A grid file is a JSON array of points, or an object carrying one under
/// `grid` or `refined_grid` (as written by `two-task`).
pub fn read_grid(path: &Path) -> Result<GridSet<f64>> {
    let value = read_json(path)?;
    let points = match &value {
        Value::Array(_) => &value,
        Value::Object(map) => map
            .get("refined_grid")
            .or_else(|| map.get("grid"))
            .with_context(|| format!("{} has no `grid` field", path.display()))?,
        _ => bail!("{} is not a grid", path.display()),
    };
    let points: Vec<f64> = serde_json::from_value(points.clone())?;
    Ok(GridSet::new(points)?)
}

/// A grid CDF, either bare or embedded as `g` in a `lower` report.
pub fn read_finite_cdf(path: &Path) -> Result<FiniteCDF<f64>> {
    let value = read_json(path)?;
    let doc = value.get("g").cloned().unwrap_or(value);
    let doc: FiniteCdfDoc = serde_json::from_value(doc).context("expected a grid CDF document")?;
    Ok(FiniteCDF::from_doc(&doc)?)
}

/// A two-task CDF, either bare or embedded as `cdf` in a `two-task` report.
pub fn read_two_task_cdf(path: &Path) -> Result<PiecewiseRationalCDF> {
    let value = read_json(path)?;
    let doc = value.get("cdf").cloned().unwrap_or(value);
    let doc: PiecewiseRationalDoc = serde_json::from_value(doc).context("expected a piecewise CDF document")?;
    Ok(PiecewiseRationalCDF::from_doc(&doc)?)
}

#[derive(Serialize, Deserialize)]
struct DistributionDoc {
    atoms: Vec<Atom<f64>>,
}

/// `{"atoms": [{"z": [..], "w": ..}, ..]}`.
pub fn read_distribution(path: &Path) -> Result<DiscreteThresholdDistribution> {
    let doc: DistributionDoc = serde_json::from_value(read_json(path)?)?;
    Ok(DiscreteThresholdDistribution::new(doc.atoms)?)
}

/// Two CSV rows without header: machine 1 times, then machine 2 times.
pub fn read_time_matrix(path: &Path) -> Result<TimeMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().with_context(|| format!("bad number {f:?}")))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != 2 {
        bail!("{} must have exactly two rows, found {}", path.display(), rows.len());
    }
    let m2 = rows.pop().expect("two rows");
    let m1 = rows.pop().expect("two rows");
    Ok(TimeMatrix::new(m1, m2)?)
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}
