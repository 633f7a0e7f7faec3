//! Binned empirical variograms from pairs of observations on the same orbit
//! (or on orbits a fixed number of passes apart).
//!
//! The first point of a pair must lie in a band `[10p, 10p + 1)` for
//! `p = -7..=8`. The latitude offset is first minus second, the longitude
//! offset is `lon_diff(first, second)`, and pairs are kept when the offsets
//! fall in `[-9, 9) × [-20, 20)`. Within each `(L0, j, k)` bin the semivariance
//! is half the mean squared difference, reported at the mean offsets of the
//! contributing pairs.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geom::lon_diff;
use crate::linalg::CompensatedSum;
use crate::observation::{split_row, Observation, Orbit};

/// Pair-selection and binning geometry, all in degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairConfig {
    pub band_anchor_step: f64,
    pub band_width: f64,
    pub band_min: i64,
    pub band_max: i64,
    pub max_lat_offset: f64,
    pub max_lon_offset: f64,
    pub lat_bin: f64,
    pub lon_bin: f64,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            band_anchor_step: 10.0,
            band_width: 1.0,
            band_min: -7,
            band_max: 8,
            max_lat_offset: 9.0,
            max_lon_offset: 20.0,
            lat_bin: 1.0,
            lon_bin: 1.0,
        }
    }
}

impl PairConfig {
    /// Band lower edge containing `lat`, if any.
    pub fn band_of(&self, lat: f64) -> Option<f64> {
        let p = (lat / self.band_anchor_step).floor();
        let pi = p as i64;
        if pi < self.band_min || pi > self.band_max {
            return None;
        }
        let edge = p * self.band_anchor_step;
        (lat - edge < self.band_width).then_some(edge)
    }

    fn lat_bins(&self) -> i64 {
        (self.max_lat_offset / self.lat_bin).round() as i64
    }

    fn lon_bins(&self) -> i64 {
        (self.max_lon_offset / self.lon_bin).round() as i64
    }

    /// Bin indices of an offset, if admissible.
    pub fn bin_of(&self, dlat: f64, dlon: f64) -> Option<(i64, i64)> {
        let j = (dlat / self.lat_bin).floor() as i64;
        let k = (dlon / self.lon_bin).floor() as i64;
        let (nj, nk) = (self.lat_bins(), self.lon_bins());
        (j >= -nj && j < nj && k >= -nk && k < nk).then_some((j, k))
    }
}

/// One admissible ordered pair, as indices into the orbit observations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair {
    pub first: usize,
    pub second: usize,
    pub band: f64,
    pub j: i64,
    pub k: i64,
    pub dlat: f64,
    pub dlon: f64,
}

fn lat_order(obs: &[Observation]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..obs.len()).collect();
    idx.sort_by(|&a, &b| obs[a].lat().total_cmp(&obs[b].lat()).then(a.cmp(&b)));
    idx
}

/// Visit admissible pairs with `first` from `a` and `second` from `b`. When
/// `same` is set the two slices are the same orbit and a point is never
/// paired with itself.
fn for_each_pair<F: FnMut(Pair)>(a: &[Observation], b: &[Observation], same: bool, cfg: &PairConfig, mut f: F) {
    let order = lat_order(b);
    let lats: Vec<f64> = order.iter().map(|&i| b[i].lat()).collect();
    for (i, p) in a.iter().enumerate() {
        let Some(band) = cfg.band_of(p.lat()) else { continue };
        // second latitudes with first - second in [-max, max]
        let lo = lats.partition_point(|&l| l < p.lat() - cfg.max_lat_offset);
        let hi = lats.partition_point(|&l| l <= p.lat() + cfg.max_lat_offset);
        for &s in &order[lo..hi] {
            if same && s == i {
                continue;
            }
            let q = &b[s];
            let dlat = p.lat() - q.lat();
            let dlon = lon_diff(p.lon(), q.lon()).expect("finite longitudes");
            if let Some((j, k)) = cfg.bin_of(dlat, dlon) {
                f(Pair { first: i, second: s, band, j, k, dlat, dlon });
            }
        }
    }
}

/// All admissible ordered pairs within one orbit, ordered by first index and
/// then by second latitude.
pub fn enumerate_pairs(orbit: &Orbit, cfg: &PairConfig) -> Vec<Pair> {
    let mut out = Vec::new();
    for_each_pair(orbit.observations(), orbit.observations(), true, cfg, |p| out.push(p));
    out
}

/// One variogram bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariogramRecord {
    /// Lower edge of the first point's latitude band.
    pub l0: f64,
    pub j: i64,
    pub k: i64,
    pub mean_dlat: f64,
    pub mean_dlon: f64,
    pub gamma_hat: f64,
    pub count: usize,
}

#[derive(Clone, Copy, Default)]
struct BinAcc {
    count: usize,
    dlat: CompensatedSum,
    dlon: CompensatedSum,
    sq: CompensatedSum,
}

impl BinAcc {
    fn merge(&mut self, o: &BinAcc) {
        self.count += o.count;
        self.dlat.merge(&o.dlat);
        self.dlon.merge(&o.dlon);
        self.sq.merge(&o.sq);
    }
}

// band edges are multiples of the anchor step, so an integer key is exact
type BinKey = (i64, i64, i64);
type BinMap = BTreeMap<BinKey, BinAcc>;

fn accumulate(a: &[Observation], b: &[Observation], same: bool, cfg: &PairConfig) -> BinMap {
    let mut map = BinMap::new();
    for_each_pair(a, b, same, cfg, |p| {
        let key = ((p.band / cfg.band_anchor_step).round() as i64, p.j, p.k);
        let acc = map.entry(key).or_default();
        let d = a[p.first].value - b[p.second].value;
        acc.count += 1;
        acc.dlat.add(p.dlat);
        acc.dlon.add(p.dlon);
        acc.sq.add(d * d);
    });
    map
}

fn finish(maps: Vec<BinMap>, cfg: &PairConfig) -> Vec<VariogramRecord> {
    let mut total = BinMap::new();
    for m in maps {
        for (key, acc) in m {
            total.entry(key).or_default().merge(&acc);
        }
    }
    total
        .into_iter()
        .map(|((p, j, k), acc)| {
            let n = acc.count as f64;
            VariogramRecord {
                l0: p as f64 * cfg.band_anchor_step,
                j,
                k,
                mean_dlat: acc.dlat.value() / n,
                mean_dlon: acc.dlon.value() / n,
                gamma_hat: 0.5 * acc.sq.value() / n,
                count: acc.count,
            }
        })
        .collect()
}

/// Within-orbit variogram pooled over all orbits. Orbits are processed
/// independently and merged in slice order.
pub fn bin_variogram(orbits: &[Orbit], cfg: &PairConfig, exec: Execution) -> Vec<VariogramRecord> {
    let maps = exec.map(orbits, |o| accumulate(o.observations(), o.observations(), true, cfg));
    finish(maps, cfg)
}

/// Variogram of pairs whose second point comes from the orbit `t` positions
/// later in `orbits` (earlier for negative `t`). Missing partners are skipped.
pub fn cross_orbit_variogram(
    orbits: &[Orbit],
    t: i64,
    cfg: &PairConfig,
    exec: Execution,
) -> Vec<VariogramRecord> {
    let maps = exec.map_range(orbits.len(), |i| {
        let partner = i as i64 + t;
        if partner < 0 || partner >= orbits.len() as i64 {
            return BinMap::new();
        }
        let b = &orbits[partner as usize];
        accumulate(orbits[i].observations(), b.observations(), t == 0, cfg)
    });
    finish(maps, cfg)
}

pub const VARIOGRAM_HEADER: [&str; 7] = ["L0", "j", "k", "mean_dlat", "mean_dlon", "gamma_hat", "count"];

pub fn write_variogram<W: Write>(mut w: W, records: &[VariogramRecord]) -> Result<()> {
    writeln!(w, "{}", VARIOGRAM_HEADER.join("\t"))?;
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}\t{:e}\t{:e}\t{:e}\t{}",
            r.l0, r.j, r.k, r.mean_dlat, r.mean_dlon, r.gamma_hat, r.count
        )?;
    }
    Ok(())
}

pub fn read_variogram<R: BufRead>(reader: R) -> Result<Vec<VariogramRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        let perr = |message: String| Error::Parse { row, message };
        let f = split_row(line.trim());
        if row == 1 {
            if f != VARIOGRAM_HEADER {
                return Err(perr(format!("expected header `{}`", VARIOGRAM_HEADER.join(" "))));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if f.len() != 7 {
            return Err(perr(format!("expected 7 fields, got `{line}`")));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| perr(format!("{}: cannot parse `{}`", VARIOGRAM_HEADER[k], f[k])));
        let int = |k: usize| f[k].parse::<i64>().map_err(|_| perr(format!("{}: cannot parse `{}`", VARIOGRAM_HEADER[k], f[k])));
        let count = f[6].parse::<usize>().map_err(|_| perr(format!("count: cannot parse `{}`", f[6])))?;
        let rec = VariogramRecord {
            l0: num(0)?,
            j: int(1)?,
            k: int(2)?,
            mean_dlat: num(3)?,
            mean_dlon: num(4)?,
            gamma_hat: num(5)?,
            count,
        };
        if count == 0 || !(rec.gamma_hat >= 0.0) {
            return Err(perr("count must be >= 1 and gamma_hat >= 0".into()));
        }
        out.push(rec);
    }
    Ok(out)
}
