//! Spatial mean regression on spherical-harmonic regressors.
//!
//! Observations are averaged into half-open 1° latitude × 2° longitude cells
//! anchored at (−90°, −180°); the last row and column are closed so that
//! latitude 90° and longitude 180° fall inside the grid. The mean surface is
//! fitted to the cell averages by ordinary least squares over the columns of
//! [`mean_design_row`](crate::harmonics::mean_design_row).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::harmonics::basis::{mean_design_row, mean_design_terms, Trig, MEAN_DESIGN_LEN};
use crate::linalg::CompensatedSum;
use crate::observation::{split_row, Observation};

/// Averages of one nonempty cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinAverage {
    pub mean_lat: f64,
    pub mean_lon: f64,
    pub mean_value: f64,
    pub count: usize,
}

const LAT_CELL: f64 = 1.0;
const LON_CELL: f64 = 2.0;
const LAT_CELLS: i64 = 180;
const LON_CELLS: i64 = 180;

fn cell_of(lat: f64, lon: f64) -> (i64, i64) {
    let i = (((lat + 90.0) / LAT_CELL).floor() as i64).min(LAT_CELLS - 1);
    let j = (((lon + 180.0) / LON_CELL).floor() as i64).clamp(0, LON_CELLS - 1);
    (i, j)
}

/// Average latitude, longitude and value per cell, in cell order.
pub fn bin_average(obs: &[Observation]) -> Vec<BinAverage> {
    let mut cells: BTreeMap<(i64, i64), [CompensatedSum; 3]> = BTreeMap::new();
    let mut counts: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for o in obs {
        let key = cell_of(o.lat(), o.lon());
        let acc = cells.entry(key).or_default();
        acc[0].add(o.lat());
        acc[1].add(o.lon());
        acc[2].add(o.value);
        *counts.entry(key).or_default() += 1;
    }
    cells
        .into_iter()
        .map(|(key, acc)| {
            let n = counts[&key];
            let nf = n as f64;
            BinAverage {
                mean_lat: acc[0].value() / nf,
                mean_lon: acc[1].value() / nf,
                mean_value: acc[2].value() / nf,
                count: n,
            }
        })
        .collect()
}

/// Regression coefficients in [`mean_design_terms`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanModel {
    coefficients: Vec<f64>,
}

impl MeanModel {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != MEAN_DESIGN_LEN {
            return Err(invalid(format!(
                "expected {MEAN_DESIGN_LEN} coefficients, got {}",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid("mean coefficients must be finite"));
        }
        Ok(MeanModel { coefficients })
    }

    pub fn zeros() -> Self {
        MeanModel {
            coefficients: vec![0.0; MEAN_DESIGN_LEN],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Mean surface at a point (log scale).
    pub fn evaluate(&self, lat: f64, lon: f64) -> f64 {
        mean_design_row(lat, lon)
            .iter()
            .zip(&self.coefficients)
            .map(|(x, c)| x * c)
            .sum()
    }
}

/// Goodness of fit of a mean regression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFitReport {
    /// Fraction of variation explained among the bin averages.
    pub r2_bins: f64,
    /// Fraction of variation explained among the raw observations.
    pub r2_observations: f64,
    pub bins: usize,
    pub observations: usize,
}

fn r_squared(values: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().map(|(v, _)| v).sum::<f64>() / n;
    let tot: f64 = values.clone().map(|(v, _)| (v - mean).powi(2)).sum();
    let res: f64 = values.map(|(v, f)| (v - f).powi(2)).sum();
    1.0 - res / tot
}

fn solve_ols(bins: &[BinAverage], columns: &[usize]) -> Result<Vec<f64>> {
    let p = columns.len();
    if bins.len() < p {
        return Err(invalid(format!("need at least {p} bins, got {}", bins.len())));
    }
    let mut x = DMatrix::zeros(bins.len(), p);
    for (r, b) in bins.iter().enumerate() {
        let row = mean_design_row(b.mean_lat, b.mean_lon);
        for (k, &c) in columns.iter().enumerate() {
            x[(r, k)] = row[c];
        }
    }
    // scale columns to unit norm so the pivot test is relative
    let scale: Vec<f64> = (0..p).map(|k| x.column(k).norm()).collect();
    let mut deficient: Vec<usize> = Vec::new();
    for (k, &s) in scale.iter().enumerate() {
        if s == 0.0 {
            deficient.push(columns[k]);
        } else {
            x.column_mut(k).scale_mut(1.0 / s);
        }
    }
    let y = DVector::from_iterator(bins.len(), bins.iter().map(|b| b.mean_value));
    let qr = x.qr();
    let r = qr.r();
    for k in 0..p {
        if scale[k] != 0.0 && r[(k, k)].abs() < 1e-10 {
            deficient.push(columns[k]);
        }
    }
    if !deficient.is_empty() {
        deficient.sort_unstable();
        return Err(Error::SingularFit { columns: deficient });
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Factorization("triangular solve failed".into()))?;
    Ok((0..p).map(|k| beta[k] / scale[k]).collect())
}

fn fit_columns(bins: &[BinAverage], raw: &[Observation], columns: &[usize]) -> Result<(MeanModel, MeanFitReport)> {
    let beta = solve_ols(bins, columns)?;
    let mut coefficients = vec![0.0; MEAN_DESIGN_LEN];
    for (&c, b) in columns.iter().zip(beta) {
        coefficients[c] = b;
    }
    let model = MeanModel::new(coefficients)?;
    let r2_bins = r_squared(bins.iter().map(|b| (b.mean_value, model.evaluate(b.mean_lat, b.mean_lon))));
    let r2_observations = if raw.is_empty() {
        f64::NAN
    } else {
        r_squared(raw.iter().map(|o| (o.value, model.evaluate(o.lat(), o.lon()))))
    };
    Ok((
        model,
        MeanFitReport {
            r2_bins,
            r2_observations,
            bins: bins.len(),
            observations: raw.len(),
        },
    ))
}

/// Ordinary least squares of the bin averages on every mean regressor.
/// `raw` supplies the observations for the second R²; it may be empty.
pub fn fit_mean(bins: &[BinAverage], raw: &[Observation]) -> Result<(MeanModel, MeanFitReport)> {
    let cols: Vec<usize> = (0..MEAN_DESIGN_LEN).collect();
    fit_columns(bins, raw, &cols)
}

/// As [`fit_mean`] but restricted to the zonal (`m = 0`) regressors.
pub fn fit_mean_zonal(bins: &[BinAverage], raw: &[Observation]) -> Result<(MeanModel, MeanFitReport)> {
    let cols: Vec<usize> = mean_design_terms()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.1 == 0)
        .map(|(i, _)| i)
        .collect();
    fit_columns(bins, raw, &cols)
}

/// Subtract the mean surface from every observation value.
pub fn residuals(obs: &[Observation], model: &MeanModel) -> Vec<Observation> {
    obs.iter()
        .map(|o| Observation {
            value: o.value - model.evaluate(o.lat(), o.lon()),
            ..*o
        })
        .collect()
}

/// Tab-separated `n m trig coefficient`, one row per regressor in design order.
pub fn write_mean_model<W: Write>(mut w: W, model: &MeanModel) -> Result<()> {
    writeln!(w, "n\tm\ttrig\tcoefficient")?;
    for ((n, m, trig), c) in mean_design_terms().into_iter().zip(&model.coefficients) {
        writeln!(w, "{n}\t{m}\t{}\t{c:e}", trig.as_str())?;
    }
    Ok(())
}

/// `key value` lines of a mean fit report.
pub fn write_mean_report<W: Write>(mut w: W, report: &MeanFitReport) -> Result<()> {
    writeln!(w, "r2_bins\t{:e}", report.r2_bins)?;
    writeln!(w, "r2_observations\t{:e}", report.r2_observations)?;
    writeln!(w, "bins\t{}", report.bins)?;
    writeln!(w, "observations\t{}", report.observations)?;
    Ok(())
}

pub fn read_mean_model<R: BufRead>(reader: R) -> Result<MeanModel> {
    let terms = mean_design_terms();
    let mut coefficients = vec![f64::NAN; terms.len()];
    let mut seen = vec![false; terms.len()];
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        let perr = |message: String| Error::Parse { row, message };
        if row == 1 {
            if split_row(line.trim()) != ["n", "m", "trig", "coefficient"] {
                return Err(perr(format!("expected header `n m trig coefficient`, got `{line}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f = split_row(line.trim());
        if f.len() != 4 {
            return Err(perr(format!("expected 4 fields, got `{line}`")));
        }
        let n: usize = f[0].parse().map_err(|_| perr(format!("bad degree `{}`", f[0])))?;
        let m: usize = f[1].parse().map_err(|_| perr(format!("bad order `{}`", f[1])))?;
        let trig = match f[2] {
            "cos" => Trig::Cos,
            "sin" => Trig::Sin,
            other => return Err(perr(format!("bad trig `{other}`"))),
        };
        let c: f64 = f[3].parse().map_err(|_| perr(format!("bad coefficient `{}`", f[3])))?;
        let k = terms
            .iter()
            .position(|t| *t == (n, m, trig))
            .ok_or_else(|| perr(format!("no regressor ({n}, {m}, {})", trig.as_str())))?;
        coefficients[k] = c;
        seen[k] = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        let (n, m, t) = terms[k];
        return Err(invalid(format!("mean model lacks regressor ({n}, {m}, {})", t.as_str())));
    }
    MeanModel::new(coefficients)
}
