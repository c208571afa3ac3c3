//! Spherical-Earth coordinate conversions.
//!
//! Three frames are involved:
//!
//! * geodetic: longitude/latitude (radians) plus distance from the Earth center,
//! * ECEF: Earth-centered Cartesian, X through (lon 0, lat 0), Z through the north pole,
//! * ENU: East-North-Up frame tangent to the sphere at a given position.
//!
//! The ENU rotation rotates *displacement* vectors. To express vessel `b` in
//! the frame of vessel `a`, subtract first:
//! `ecef_to_enu(geodetic_to_ecef(b) - geodetic_to_ecef(a), a)`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPosition {
    /// Longitude in radians, `(-pi, pi]`.
    pub lon: f64,
    /// Latitude in radians, `[-pi/2, pi/2]`.
    pub lat: f64,
    /// Distance from the Earth center in meters.
    pub radius: f64,
}

impl GeodeticPosition {
    /// Builds a validated position; longitude is wrapped into `(-pi, pi]`.
    pub fn new(lon: f64, lat: f64, radius: f64) -> Result<Self> {
        if !lon.is_finite() {
            return Err(Error::validation("lon", "must be finite"));
        }
        if !(lat.is_finite() && (-PI / 2.0..=PI / 2.0).contains(&lat)) {
            return Err(Error::validation(
                "lat",
                format!("{lat} outside [-pi/2, pi/2]"),
            ));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::validation("radius", "must be positive"));
        }
        Ok(Self {
            lon: normalize_angle(lon),
            lat,
            radius,
        })
    }

    /// A point on the mean Earth sphere.
    pub fn on_surface(lon: f64, lat: f64) -> Result<Self> {
        Self::new(lon, lat, EARTH_RADIUS_M)
    }

    pub fn from_degrees(lon_deg: f64, lat_deg: f64) -> Result<Self> {
        Self::on_surface(lon_deg.to_radians(), lat_deg.to_radians())
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon.to_degrees()
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat.to_degrees()
    }

    /// Unit vector pointing radially outward, in ECEF.
    pub fn radial_unit(&self) -> Vector3<f64> {
        let (sin_lat, cos_lat) = self.lat.sin_cos();
        let (sin_lon, cos_lon) = self.lon.sin_cos();
        Vector3::new(cos_lat * cos_lon, cos_lat * sin_lon, sin_lat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EcefVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefVector {
    pub const ZERO: Self = Self {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

impl Sub for EcefVector {
    type Output = EcefVector;

    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Add for EcefVector {
    type Output = EcefVector;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnuVector {
    pub e: f64,
    pub n: f64,
    pub u: f64,
}

impl EnuVector {
    pub const ZERO: Self = Self {
        e: 0.0,
        n: 0.0,
        u: 0.0,
    };

    pub fn new(e: f64, n: f64, u: f64) -> Self {
        Self { e, n, u }
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.e, self.n, self.u)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// ECEF-to-ENU rotation. Rows are the East, North and Up axes expressed in ECEF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub Matrix3<f64>);

impl RotationMatrix {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Matrix3<f64> {
        self.0.transpose()
    }

    pub fn east(&self) -> Vector3<f64> {
        self.0.row(0).transpose()
    }

    pub fn north(&self) -> Vector3<f64> {
        self.0.row(1).transpose()
    }

    pub fn up(&self) -> Vector3<f64> {
        self.0.row(2).transpose()
    }
}

/// `radius * (cos(lat) cos(lon), cos(lat) sin(lon), sin(lat))`.
pub fn geodetic_to_ecef(p: &GeodeticPosition) -> EcefVector {
    EcefVector::from_vector(p.radial_unit() * p.radius)
}

/// Inverse of [`geodetic_to_ecef`]. Fails for the zero vector.
pub fn ecef_to_geodetic(v: &EcefVector) -> Result<GeodeticPosition> {
    let radius = v.norm();
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::validation("ecef", "vector has no direction"));
    }
    let lat = (v.z / radius).clamp(-1.0, 1.0).asin();
    let lon = v.y.atan2(v.x);
    GeodeticPosition::new(lon, lat, radius)
}

pub fn enu_rotation(p: &GeodeticPosition) -> RotationMatrix {
    let (sin_lon, cos_lon) = p.lon.sin_cos();
    let (sin_lat, cos_lat) = p.lat.sin_cos();
    #[rustfmt::skip]
    let m = Matrix3::new(
        -sin_lon,            cos_lon,            0.0,
        -cos_lon * sin_lat, -sin_lon * sin_lat,  cos_lat,
         cos_lon * cos_lat,  sin_lon * cos_lat,  sin_lat,
    );
    RotationMatrix(m)
}

pub fn ecef_to_enu(v: &EcefVector, origin: &GeodeticPosition) -> EnuVector {
    EnuVector::from_vector(enu_rotation(origin).0 * v.to_vector())
}

pub fn enu_to_ecef(v: &EnuVector, origin: &GeodeticPosition) -> EcefVector {
    EcefVector::from_vector(enu_rotation(origin).transpose() * v.to_vector())
}

/// Position of `target` relative to `origin`, in the ENU frame at `origin`.
pub fn relative_enu(origin: &GeodeticPosition, target: &GeodeticPosition) -> EnuVector {
    ecef_to_enu(
        &(geodetic_to_ecef(target) - geodetic_to_ecef(origin)),
        origin,
    )
}

/// Central angle between two positions, in radians.
pub fn central_angle(a: &GeodeticPosition, b: &GeodeticPosition) -> f64 {
    let ua = a.radial_unit();
    let ub = b.radial_unit();
    ua.cross(&ub).norm().atan2(ua.dot(&ub))
}

/// Great-circle distance on the sphere of `a`'s radius.
pub fn great_circle_distance(a: &GeodeticPosition, b: &GeodeticPosition) -> f64 {
    central_angle(a, b) * a.radius
}

/// Initial great-circle heading from `from` toward `to`, measured from local
/// East, counter-clockwise positive. `None` when the points coincide or are antipodal.
pub fn heading_towards(from: &GeodeticPosition, to: &GeodeticPosition) -> Option<f64> {
    let rel = relative_enu(from, to);
    let horizontal = rel.e.hypot(rel.n);
    if horizontal < 1e-6 {
        return None;
    }
    Some(rel.n.atan2(rel.e))
}

/// Moves along the great circle leaving `start` at `heading` (from East, CCW)
/// for `distance` meters. Fails if the arc passes over a pole.
pub fn destination(
    start: &GeodeticPosition,
    heading: f64,
    distance: f64,
) -> Result<GeodeticPosition> {
    if distance == 0.0 {
        return Ok(*start);
    }
    let rot = enu_rotation(start);
    let radial = start.radial_unit();
    let (sin_h, cos_h) = heading.sin_cos();
    let tangent = rot.east() * cos_h + rot.north() * sin_h;
    let sigma = distance / start.radius;

    // Highest |z| reached along the arc; the pole lies on it iff that reaches 1.
    for sign in [1.0, -1.0] {
        let rz = sign * radial.z;
        let tz = sign * tangent.z;
        let peak_at = tz.atan2(rz);
        if peak_at >= 0.0 && peak_at <= sigma && rz.hypot(tz) >= 1.0 - 1e-15 {
            return Err(Error::PoleCrossing {
                lat_deg: sign * 90.0,
            });
        }
    }

    let (sin_s, cos_s) = sigma.sin_cos();
    let unit = radial * cos_s + tangent * sin_s;
    let lat = unit.z.clamp(-1.0, 1.0).asin();
    if (PI / 2.0 - lat.abs()) < 1e-9 {
        return Err(Error::PoleCrossing {
            lat_deg: lat.to_degrees(),
        });
    }
    GeodeticPosition::new(unit.y.atan2(unit.x), lat, start.radius)
}
