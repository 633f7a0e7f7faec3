//! Observations, orbits, and the delimited observation file format.
//!
//! An observation file is delimited text (tab or comma) with a header row and
//! five columns: `orbit_id, time_s, lat_deg, lon_deg, <value>`. The name of the
//! fifth column selects its unit:
//!
//! * `ozone_du`: raw Dobson units; the natural log is taken on ingestion.
//! * `log_ozone`, `value` or `residual`: already on the log scale.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::geom::GeoPoint;

/// One measurement. `value` is on the natural-log scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub orbit_id: u32,
    pub time: f64,
    pub point: GeoPoint,
    pub value: f64,
}

impl Observation {
    pub fn new(orbit_id: u32, time: f64, point: GeoPoint, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(invalid(format!("non-finite observation value {value}")));
        }
        if !time.is_finite() {
            return Err(invalid(format!("non-finite observation time {time}")));
        }
        Ok(Observation {
            orbit_id,
            time,
            point,
            value,
        })
    }

    pub fn lat(&self) -> f64 {
        self.point.lat()
    }

    pub fn lon(&self) -> f64 {
        self.point.lon()
    }
}

/// All observations of one orbit, ordered by time.
#[derive(Clone, Debug, PartialEq)]
pub struct Orbit {
    orbit_id: u32,
    observations: Vec<Observation>,
}

impl Orbit {
    /// Build an orbit. Observations are stably sorted by time.
    pub fn new(orbit_id: u32, mut observations: Vec<Observation>) -> Result<Self> {
        if let Some(o) = observations.iter().find(|o| o.orbit_id != orbit_id) {
            return Err(invalid(format!(
                "observation with orbit id {} in orbit {orbit_id}",
                o.orbit_id
            )));
        }
        observations.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(Orbit {
            orbit_id,
            observations,
        })
    }

    pub fn orbit_id(&self) -> u32 {
        self.orbit_id
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Split observations into orbits, ordered by orbit id.
pub fn group_orbits(obs: &[Observation]) -> Vec<Orbit> {
    let mut map: BTreeMap<u32, Vec<Observation>> = BTreeMap::new();
    for o in obs {
        map.entry(o.orbit_id).or_default().push(*o);
    }
    map.into_iter()
        .map(|(id, v)| Orbit::new(id, v).expect("grouped by id"))
        .collect()
}

/// Unit of the value column in an observation file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueColumn {
    /// Raw Dobson units (`ozone_du`).
    OzoneDu,
    /// Log Dobson units (`log_ozone`).
    LogOzone,
    /// Residual log values (`residual`).
    Residual,
}

impl ValueColumn {
    pub fn header(self) -> &'static str {
        match self {
            ValueColumn::OzoneDu => "ozone_du",
            ValueColumn::LogOzone => "log_ozone",
            ValueColumn::Residual => "residual",
        }
    }

    fn parse(name: &str) -> Option<Self> {
        match name {
            "ozone_du" => Some(ValueColumn::OzoneDu),
            "log_ozone" | "value" => Some(ValueColumn::LogOzone),
            "residual" => Some(ValueColumn::Residual),
            _ => None,
        }
    }
}

const COORD_COLUMNS: [&str; 4] = ["orbit_id", "time_s", "lat_deg", "lon_deg"];

pub(crate) fn split_row(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split(',').map(str::trim).collect()
    }
}

/// Read an observation file. Returns the observations (log scale) and the
/// unit found in the header.
pub fn read_observations<R: BufRead>(reader: R) -> Result<(Vec<Observation>, ValueColumn)> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Parse {
                row: 1,
                message: "missing header row".into(),
            })
        }
    };
    let cols = split_row(header.trim_end_matches('\r'));
    if cols.len() != 5 || cols[..4] != COORD_COLUMNS {
        return Err(Error::Parse {
            row: 1,
            message: format!(
                "expected header `orbit_id, time_s, lat_deg, lon_deg, ozone_du|log_ozone|residual`, got `{}`",
                header.trim()
            ),
        });
    }
    let unit = ValueColumn::parse(cols[4]).ok_or_else(|| Error::Parse {
        row: 1,
        message: format!("unknown value column `{}`", cols[4]),
    })?;

    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_row(line, unit).map_err(|message| Error::Parse { row, message })?);
    }
    Ok((out, unit))
}

fn parse_row(line: &str, unit: ValueColumn) -> std::result::Result<Observation, String> {
    let f = split_row(line);
    if f.len() != 5 || f.iter().any(|s| s.is_empty()) {
        return Err(format!("expected 5 non-empty fields, got `{line}`"));
    }
    let num = |k: usize| -> std::result::Result<f64, String> {
        f[k].parse::<f64>()
            .map_err(|_| format!("{}: cannot parse `{}`", COORD_COLUMNS.get(k).unwrap_or(&"value"), f[k]))
    };
    let orbit_id: u32 = f[0]
        .parse()
        .map_err(|_| format!("orbit_id: cannot parse `{}` as a non-negative integer", f[0]))?;
    let time = num(1)?;
    let point = GeoPoint::new(num(2)?, num(3)?).map_err(|e| e.to_string())?;
    let raw = num(4)?;
    let value = match unit {
        ValueColumn::OzoneDu => {
            if !(raw > 0.0) {
                return Err(format!("ozone_du must be positive, got {raw}"));
            }
            raw.ln()
        }
        _ => raw,
    };
    Observation::new(orbit_id, time, point, value).map_err(|e| e.to_string())
}

/// Write observations as tab-separated text. With [`ValueColumn::OzoneDu`]
/// the log values are exponentiated back to Dobson units.
pub fn write_observations<W: Write>(
    mut w: W,
    obs: &[Observation],
    unit: ValueColumn,
) -> Result<()> {
    writeln!(w, "{}\t{}", COORD_COLUMNS.join("\t"), unit.header())?;
    for o in obs {
        let v = match unit {
            ValueColumn::OzoneDu => o.value.exp(),
            _ => o.value,
        };
        writeln!(
            w,
            "{}\t{:e}\t{:e}\t{:e}\t{:e}",
            o.orbit_id,
            o.time,
            o.lat(),
            o.lon(),
            v
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_raw_and_logs() {
        let text = "orbit_id,time_s,lat_deg,lon_deg,ozone_du\n1,10,45,190,300\n1,5,-10,-180,250\n";
        let (obs, unit) = read_observations(text.as_bytes()).unwrap();
        assert_eq!(unit, ValueColumn::OzoneDu);
        assert_eq!(obs.len(), 2);
        assert!((obs[0].value - 300f64.ln()).abs() < 1e-15);
        assert_eq!(obs[0].lon(), -170.0);
        assert_eq!(obs[1].lon(), 180.0);
    }

    #[test]
    fn missing_field_is_row_numbered() {
        let text = "orbit_id\ttime_s\tlat_deg\tlon_deg\tozone_du\n1\t0\t0\t0\t300\n1\t0\t0\t\t300\n";
        match read_observations(text.as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
        let short = "orbit_id,time_s,lat_deg,lon_deg,ozone_du\n1,0,0,0\n";
        assert!(matches!(
            read_observations(short.as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));
        let neg = "orbit_id,time_s,lat_deg,lon_deg,ozone_du\n1,0,0,0,-3\n";
        assert!(matches!(
            read_observations(neg.as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));
        let bad_header = "a,b,c,d,e\n";
        assert!(matches!(
            read_observations(bad_header.as_bytes()),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn write_read_roundtrip_is_exact() {
        let obs = vec![
            Observation::new(3, 12.25, GeoPoint::new(-61.3, 17.1).unwrap(), 0.012345678901).unwrap(),
            Observation::new(4, 1e9 / 3.0, GeoPoint::new(89.0, -179.9).unwrap(), -1e-7 / 3.0).unwrap(),
        ];
        let mut buf = Vec::new();
        write_observations(&mut buf, &obs, ValueColumn::Residual).unwrap();
        let (back, unit) = read_observations(buf.as_slice()).unwrap();
        assert_eq!(unit, ValueColumn::Residual);
        assert_eq!(back, obs);
    }

    #[test]
    fn orbits_grouped_and_sorted() {
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        let obs = vec![
            Observation::new(2, 5.0, p, 0.0).unwrap(),
            Observation::new(1, 3.0, p, 0.0).unwrap(),
            Observation::new(2, 1.0, p, 0.0).unwrap(),
        ];
        let orbits = group_orbits(&obs);
        assert_eq!(orbits.len(), 2);
        assert_eq!(orbits[0].orbit_id(), 1);
        assert_eq!(orbits[1].observations()[0].time, 1.0);
        assert!(Orbit::new(7, obs).is_err());
    }
}
