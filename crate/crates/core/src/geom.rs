//! Coordinates on the unit sphere.
//!
//! Public interfaces take and return degrees. Latitude lies in `[-90, 90]`,
//! longitude is normalized to `(-180, 180]`.

use crate::error::{invalid, Result};

/// A point on the sphere, in degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    /// Build a point, normalizing the longitude into `(-180, 180]`.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(invalid(format!("non-finite coordinate ({lat}, {lon})")));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(invalid(format!("latitude {lat} outside [-90, 90]")));
        }
        Ok(GeoPoint {
            lat,
            lon: normalize_lon(lon),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Cartesian embedding on the unit sphere.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (sl, cl) = self.lat.to_radians().sin_cos();
        let (so, co) = self.lon.to_radians().sin_cos();
        [cl * co, cl * so, sl]
    }

    /// Bitwise coordinate equality, the notion of "coincident" used for the nugget.
    pub fn coincident(&self, other: &GeoPoint) -> bool {
        self.lat.to_bits() == other.lat.to_bits() && self.lon.to_bits() == other.lon.to_bits()
    }
}

/// Wrap an angle in degrees into `(-180, 180]`.
pub fn normalize_lon(lon: f64) -> f64 {
    let r = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if r <= -180.0 {
        r + 360.0
    } else {
        r
    }
}

/// `l1 - l2` wrapped into `(-180, 180]`.
pub fn lon_diff(l1: f64, l2: f64) -> Result<f64> {
    if !l1.is_finite() || !l2.is_finite() {
        return Err(invalid(format!("non-finite longitude ({l1}, {l2})")));
    }
    Ok(normalize_lon(l1 - l2))
}

/// Great-circle angle between two points, in degrees.
pub fn central_angle(p: &GeoPoint, q: &GeoPoint) -> f64 {
    let a = p.unit_vector();
    let b = q.unit_vector();
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    sin.atan2(cos).to_degrees()
}

/// Straight-line distance between the unit-sphere embeddings, in `[0, 2]`.
pub fn chordal_distance(p: &GeoPoint, q: &GeoPoint) -> f64 {
    let a = p.unit_vector();
    let b = q.unit_vector();
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}
