//! Simple kriging of zero-mean residuals and the per-orbit gridded product.
//!
//! Predictions are `kᵀC⁻¹z` and variances `K(t, t) + nugget − kᵀC⁻¹k`, where
//! `C` carries the nugget on its diagonal and `k` is the continuous
//! cross-covariance. Harmonic models with a positive nugget use the low-rank
//! solve: with `g = Fᵀ b(t)` and `M = σ²I + WᵀW`, the prediction is
//! `gᵀ M⁻¹ Wᵀz` and the variance is `σ² (1 + gᵀ M⁻¹ g)`.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::covariance::{CovarianceModel, HarmonicCovariance, SpatialCovariance};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::geom::GeoPoint;
use crate::harmonics::basis::basis_matrix;
use crate::harmonics::legendre::{NormalizedLegendre, Recurrence};
use crate::linalg::cholesky;
use crate::mean::MeanModel;
use crate::observation::{split_row, Observation, Orbit};

/// Predictions and prediction variances on the log scale.
#[derive(Clone, Debug, PartialEq)]
pub struct KrigingResult {
    pub predictions: Vec<f64>,
    pub variances: Vec<f64>,
}

fn check_variance(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -1e-10 {
        Ok(0.0)
    } else {
        Err(Error::Factorization(format!("negative kriging variance {v:e}")))
    }
}

/// Kriging by a dense Cholesky solve.
pub fn krige_dense<C: SpatialCovariance + ?Sized>(
    model: &C,
    obs: &[Observation],
    targets: &[GeoPoint],
    exec: Execution,
) -> Result<KrigingResult> {
    let pts: Vec<GeoPoint> = obs.iter().map(|o| o.point).collect();
    let z = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.value));
    let c = model.dense_covariance(&pts, exec);
    let ch = cholesky(c, "observation covariance")?;
    let k = model.cross_covariance(&pts, targets, exec);
    let alpha = ch.solve(&z);
    let v = ch.l().solve_lower_triangular(&k).expect("nonsingular factor");
    let mut predictions = Vec::with_capacity(targets.len());
    let mut variances = Vec::with_capacity(targets.len());
    for (j, t) in targets.iter().enumerate() {
        predictions.push(k.column(j).dot(&alpha));
        let var = model.continuous(t, t) + model.nugget() - v.column(j).norm_squared();
        variances.push(check_variance(var)?);
    }
    Ok(KrigingResult { predictions, variances })
}

/// Kriging through the rank-`(N+1)^2` structure; needs a positive nugget.
pub fn krige_lowrank<S: NormalizedLegendre + ?Sized>(
    model: &HarmonicCovariance,
    obs: &[Observation],
    targets: &[GeoPoint],
    source: &S,
    exec: Execution,
) -> Result<KrigingResult> {
    let s2 = model.nugget();
    if !(s2 > 0.0) {
        return Err(invalid("low-rank kriging needs a positive nugget"));
    }
    let n_t = model.truncation();
    let pts: Vec<GeoPoint> = obs.iter().map(|o| o.point).collect();
    let z = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.value));
    let f = model.sigma_factor();
    let w = basis_matrix(n_t, &pts, source, exec)? * &f;
    let mut m = w.tr_mul(&w);
    for i in 0..m.nrows() {
        m[(i, i)] += s2;
    }
    let ch = cholesky(m, "inner low-rank matrix")?;
    let u = ch.solve(&w.tr_mul(&z));
    let g: DMatrix<f64> = f.tr_mul(&basis_matrix(n_t, targets, source, exec)?.transpose());
    let mg = ch.solve(&g);
    let mut predictions = Vec::with_capacity(targets.len());
    let mut variances = Vec::with_capacity(targets.len());
    for j in 0..targets.len() {
        predictions.push(g.column(j).dot(&u));
        variances.push(check_variance(s2 * (1.0 + g.column(j).dot(&mg.column(j))))?);
    }
    Ok(KrigingResult { predictions, variances })
}

/// Low-rank solve for harmonic models with a positive nugget, dense otherwise.
pub fn krige_residuals(
    model: &CovarianceModel,
    obs: &[Observation],
    targets: &[GeoPoint],
    exec: Execution,
) -> Result<KrigingResult> {
    if obs.is_empty() {
        return Err(invalid("no observations to krige from"));
    }
    match model {
        CovarianceModel::Harmonic(h) if h.nugget() > 0.0 => krige_lowrank(h, obs, targets, &Recurrence, exec),
        _ => krige_dense(model, obs, targets, exec),
    }
}

/// Regular prediction grid: latitude cells of `lat_step` between `lat_min`
/// and `lat_max`, longitude cells of `lon_step` starting at −180°.
/// Predictions are made at cell centers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lat_step: f64,
    pub lon_step: f64,
}

impl GridSpec {
    /// 1° × 5° cells between 62.5°S and 57.5°S.
    pub fn southern_band() -> Self {
        GridSpec {
            lat_min: -62.5,
            lat_max: -57.5,
            lat_step: 1.0,
            lon_step: 5.0,
        }
    }

    pub fn lat_centers(&self) -> Vec<f64> {
        let n = ((self.lat_max - self.lat_min) / self.lat_step).round() as usize;
        (0..n).map(|i| self.lat_min + (i as f64 + 0.5) * self.lat_step).collect()
    }

    pub fn lon_centers(&self) -> Vec<f64> {
        let n = (360.0 / self.lon_step).round() as usize;
        (0..n).map(|k| -180.0 + (k as f64 + 0.5) * self.lon_step).collect()
    }
}

/// One cell prediction for one orbit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GriddedPrediction {
    pub point: GeoPoint,
    pub orbit_id: u32,
    pub representative_time: f64,
    pub predicted_median_du: f64,
    pub pred_variance_log: f64,
}

/// Wrapped longitude interval `[start, start + width]` covering `lons`, the
/// complement of the largest gap between neighbours on the circle.
pub fn longitude_coverage(lons: &[f64]) -> Option<(f64, f64)> {
    if lons.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = lons.iter().map(|l| l.rem_euclid(360.0)).collect();
    v.sort_by(f64::total_cmp);
    let mut gap = v[0] + 360.0 - v[v.len() - 1];
    let mut start = v[0];
    for w in v.windows(2) {
        if w[1] - w[0] > gap {
            gap = w[1] - w[0];
            start = w[1];
        }
    }
    Some((start, 360.0 - gap))
}

fn covers(cov: (f64, f64), pad: f64, lon: f64) -> bool {
    let (start, width) = cov;
    if width + 2.0 * pad >= 360.0 {
        return true;
    }
    (lon - (start - pad)).rem_euclid(360.0) <= width + 2.0 * pad
}

/// Options for [`level25_product`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProductConfig {
    pub grid: GridSpec,
    /// Observations with latitude in `[lo, hi]` are used.
    pub lat_window: (f64, f64),
    /// When set, only these orbits are processed.
    pub include: Option<Vec<u32>>,
}

impl Default for ProductConfig {
    fn default() -> Self {
        ProductConfig {
            grid: GridSpec::southern_band(),
            lat_window: (-65.0, -55.0),
            include: None,
        }
    }
}

/// Per-orbit kriged medians on the grid. `orbits` hold residual observations.
/// Returns the records, ordered by orbit, latitude and longitude, and notices
/// about skipped orbits.
pub fn level25_product(
    orbits: &[Orbit],
    model: &CovarianceModel,
    mean: &MeanModel,
    cfg: &ProductConfig,
    exec: Execution,
) -> Result<(Vec<GriddedPrediction>, Vec<String>)> {
    let (lo, hi) = cfg.lat_window;
    let lats = cfg.grid.lat_centers();
    let lons = cfg.grid.lon_centers();
    let selected: Vec<&Orbit> = orbits
        .iter()
        .filter(|o| cfg.include.as_ref().is_none_or(|ids| ids.contains(&o.orbit_id())))
        .collect();
    let results = exec.map(&selected, |orbit| -> Result<std::result::Result<Vec<GriddedPrediction>, String>> {
        let sub: Vec<Observation> = orbit
            .observations()
            .iter()
            .filter(|o| o.lat() >= lo && o.lat() <= hi)
            .copied()
            .collect();
        if sub.is_empty() {
            return Ok(Err(format!("orbit {}: no observations in the latitude window, skipped", orbit.orbit_id())));
        }
        let coverage = longitude_coverage(&sub.iter().map(|o| o.lon()).collect::<Vec<_>>()).expect("nonempty");
        let mut targets = Vec::new();
        for &la in &lats {
            for &lg in &lons {
                if covers(coverage, cfg.grid.lon_step, lg) {
                    targets.push(GeoPoint::new(la, lg)?);
                }
            }
        }
        let time = sub.iter().map(|o| o.time).sum::<f64>() / sub.len() as f64;
        let k = krige_residuals(model, &sub, &targets, Execution::Sequential)?;
        Ok(Ok(targets
            .iter()
            .zip(k.predictions.iter().zip(&k.variances))
            .map(|(t, (p, v))| GriddedPrediction {
                point: *t,
                orbit_id: orbit.orbit_id(),
                representative_time: time,
                predicted_median_du: (p + mean.evaluate(t.lat(), t.lon())).exp(),
                pred_variance_log: *v,
            })
            .collect()))
    });
    let mut out = Vec::new();
    let mut notices = Vec::new();
    for r in results {
        match r? {
            Ok(v) => out.extend(v),
            Err(msg) => notices.push(msg),
        }
    }
    out.sort_by(|a, b| {
        a.orbit_id
            .cmp(&b.orbit_id)
            .then(a.point.lat().total_cmp(&b.point.lat()))
            .then(a.point.lon().total_cmp(&b.point.lon()))
    });
    Ok((out, notices))
}

pub const PRODUCT_HEADER: [&str; 6] = ["orbit_id", "time_s", "lat_deg", "lon_deg", "ozone_du_median", "var_log"];

pub fn write_product<W: Write>(mut w: W, records: &[GriddedPrediction]) -> Result<()> {
    writeln!(w, "{}", PRODUCT_HEADER.join("\t"))?;
    for r in records {
        writeln!(
            w,
            "{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}",
            r.orbit_id,
            r.representative_time,
            r.point.lat(),
            r.point.lon(),
            r.predicted_median_du,
            r.pred_variance_log
        )?;
    }
    Ok(())
}

pub fn read_product<R: BufRead>(reader: R) -> Result<Vec<GriddedPrediction>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        let perr = |message: String| Error::Parse { row, message };
        let f = split_row(line.trim());
        if row == 1 {
            if f != PRODUCT_HEADER {
                return Err(perr(format!("expected header `{}`", PRODUCT_HEADER.join(" "))));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if f.len() != 6 {
            return Err(perr(format!("expected 6 fields, got `{line}`")));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| perr(format!("{}: cannot parse `{}`", PRODUCT_HEADER[k], f[k])));
        out.push(GriddedPrediction {
            orbit_id: f[0].parse().map_err(|_| perr(format!("orbit_id: cannot parse `{}`", f[0])))?,
            representative_time: num(1)?,
            point: GeoPoint::new(num(2)?, num(3)?).map_err(|e| perr(e.to_string()))?,
            predicted_median_du: num(4)?,
            pred_variance_log: num(5)?,
        });
    }
    Ok(out)
}

pub const TARGET_HEADER: [&str; 2] = ["lat_deg", "lon_deg"];

/// Read prediction targets: a `lat_deg, lon_deg` header then one point per row.
pub fn read_targets<R: BufRead>(reader: R) -> Result<Vec<GeoPoint>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        let perr = |message: String| Error::Parse { row, message };
        let f = split_row(line.trim());
        if row == 1 {
            if f != TARGET_HEADER {
                return Err(perr(format!("expected header `{}`", TARGET_HEADER.join(" "))));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if f.len() != 2 {
            return Err(perr(format!("expected 2 fields, got `{line}`")));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| perr(format!("{}: cannot parse `{}`", TARGET_HEADER[k], f[k])));
        out.push(GeoPoint::new(num(0)?, num(1)?).map_err(|e| perr(e.to_string()))?);
    }
    Ok(out)
}

/// Tab-separated `lat_deg lon_deg prediction var_log`, log scale.
pub fn write_predictions<W: Write>(mut w: W, targets: &[GeoPoint], k: &KrigingResult) -> Result<()> {
    writeln!(w, "lat_deg\tlon_deg\tprediction\tvar_log")?;
    for (t, (p, v)) in targets.iter().zip(k.predictions.iter().zip(&k.variances)) {
        writeln!(w, "{:e}\t{:e}\t{p:e}\t{v:e}", t.lat(), t.lon())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::ExpChordalModel;

    fn ob(lat: f64, lon: f64, v: f64) -> Observation {
        Observation::new(1, 0.0, GeoPoint::new(lat, lon).unwrap(), v).unwrap()
    }

    #[test]
    fn exact_interpolation_without_nugget() {
        let m = CovarianceModel::ExpChordal(ExpChordalModel::new(1.0, 0.2, 0.0).unwrap());
        let obs = vec![ob(-60.0, 10.0, 0.3), ob(-61.0, 14.0, -0.2), ob(-58.5, 12.0, 0.1)];
        let r = krige_residuals(&m, &obs, &[obs[1].point], Execution::Sequential).unwrap();
        assert!((r.predictions[0] + 0.2).abs() < 1e-12);
        assert!(r.variances[0].abs() < 1e-12);
    }

    #[test]
    fn nugget_only_model() {
        let obs = vec![ob(-60.0, 10.0, 0.3), ob(-61.0, 14.0, -0.2)];
        let t = [GeoPoint::new(-59.0, 11.0).unwrap()];
        for m in [
            CovarianceModel::Harmonic(HarmonicCovariance::zeros(3, 0.4).unwrap()),
            CovarianceModel::ExpChordal(ExpChordalModel::new(0.0, 1.0, 0.4).unwrap()),
        ] {
            let r = krige_residuals(&m, &obs, &t, Execution::Sequential).unwrap();
            assert!(r.predictions[0].abs() < 1e-15);
            assert!((r.variances[0] - 0.4).abs() < 1e-14);
        }
    }

    #[test]
    fn coverage_wraps() {
        let (s, w) = longitude_coverage(&[170.0, -175.0, 178.0]).unwrap();
        assert_eq!(s, 170.0);
        assert!((w - 15.0).abs() < 1e-12);
        assert!(covers((s, w), 5.0, -172.5));
        assert!(covers((s, w), 5.0, 167.5));
        assert!(!covers((s, w), 5.0, 0.0));
        assert_eq!(GridSpec::southern_band().lat_centers(), vec![-62.0, -61.0, -60.0, -59.0, -58.0]);
        assert_eq!(GridSpec::southern_band().lon_centers().len(), 72);
    }

    #[test]
    fn product_io_round_trip() {
        let r = vec![GriddedPrediction {
            point: GeoPoint::new(-60.0, 12.5).unwrap(),
            orbit_id: 7,
            representative_time: 1234.5,
            predicted_median_du: 301.25,
            pred_variance_log: 1e-4,
        }];
        let mut buf = Vec::new();
        write_product(&mut buf, &r).unwrap();
        assert_eq!(read_product(buf.as_slice()).unwrap(), r);
    }
}
