//! Geographic ↔ local planar conversion.
//!
//! All bubble and prediction math runs in a flat frame measured in meters
//! (x east, y north) around a per-session origin. The mapping is the
//! equirectangular projection, which is sub-centimeter accurate at street
//! scale and exactly invertible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Maximum |Δlat| and |Δlon| (degrees) a point may sit from the frame origin.
pub const MAX_FRAME_SPAN_DEG: f64 = 1.0;

/// Maximum |x| or |y| (meters) accepted by [`to_geo`].
pub const MAX_LOCAL_EXTENT_M: f64 = 100_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("latitude {0} outside [-90, 90]")]
    LatOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LonOutOfRange(f64),
    #[error("point lies more than {MAX_FRAME_SPAN_DEG} degree from the frame origin")]
    OutsideFrame,
    #[error("local offset {0} m exceeds the {MAX_LOCAL_EXTENT_M} m frame extent")]
    OutsideExtent(f64),
    #[error("frame origin at a pole is singular")]
    SingularFrame,
    #[error("earth radius must be positive and finite")]
    InvalidRadius,
}

/// Latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint<T> {
    pub lat: T,
    pub lon: T,
}

impl<T: Scalar> GeoPoint<T> {
    pub fn new(lat: T, lon: T) -> Result<Self, GeoError> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !self.lat.is_finite() || !self.lon.is_finite() {
            return Err(GeoError::NonFinite);
        }
        if self.lat.abs() > T::lit(90.0) {
            return Err(GeoError::LatOutOfRange(self.lat.to_f64_lossy()));
        }
        if self.lon.abs() > T::lit(180.0) {
            return Err(GeoError::LonOutOfRange(self.lon.to_f64_lossy()));
        }
        Ok(())
    }
}

/// Planar position in meters relative to a [`FrameOrigin`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> LocalPoint<T> {
    pub fn new(x: T, y: T) -> Self {
        LocalPoint { x, y }
    }

    pub fn origin() -> Self {
        LocalPoint { x: T::zero(), y: T::zero() }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn offset(&self, dx: T, dy: T) -> Self {
        LocalPoint { x: self.x + dx, y: self.y + dy }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Tangent-plane anchor for a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameOrigin<T> {
    pub origin: GeoPoint<T>,
    pub earth_radius: T,
}

impl<T: Scalar> FrameOrigin<T> {
    pub fn new(origin: GeoPoint<T>) -> Result<Self, GeoError> {
        Self::with_radius(origin, T::lit(EARTH_RADIUS_M))
    }

    pub fn with_radius(origin: GeoPoint<T>, earth_radius: T) -> Result<Self, GeoError> {
        origin.validate()?;
        if !(earth_radius.is_finite() && earth_radius > T::zero()) {
            return Err(GeoError::InvalidRadius);
        }
        Ok(FrameOrigin { origin, earth_radius })
    }

    fn cos_lat(&self) -> T {
        self.origin.lat.to_radians().cos()
    }
}

/// Wraps a longitude difference into (-180, 180].
fn wrap_lon_delta<T: Scalar>(d: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let w = d - full * ((d + half) / full).floor();
    if w == -half {
        half
    } else {
        w
    }
}

/// Projects `p` into the local frame `f`.
pub fn to_local<T: Scalar>(p: &GeoPoint<T>, f: &FrameOrigin<T>) -> Result<LocalPoint<T>, GeoError> {
    p.validate()?;
    let dlat = p.lat - f.origin.lat;
    let dlon = wrap_lon_delta(p.lon - f.origin.lon);
    let span = T::lit(MAX_FRAME_SPAN_DEG);
    if dlat.abs() >= span || dlon.abs() >= span {
        return Err(GeoError::OutsideFrame);
    }
    Ok(LocalPoint { x: f.earth_radius * dlon.to_radians() * f.cos_lat(), y: f.earth_radius * dlat.to_radians() })
}

/// Inverse of [`to_local`].
pub fn to_geo<T: Scalar>(p: &LocalPoint<T>, f: &FrameOrigin<T>) -> Result<GeoPoint<T>, GeoError> {
    if !p.is_finite() {
        return Err(GeoError::NonFinite);
    }
    let extent = T::lit(MAX_LOCAL_EXTENT_M);
    if p.x.abs() >= extent || p.y.abs() >= extent {
        return Err(GeoError::OutsideExtent(p.x.abs().max(p.y.abs()).to_f64_lossy()));
    }
    let cos_lat = f.cos_lat();
    if f.origin.lat.abs() >= T::lit(90.0) || cos_lat.abs() < T::lit(1e-12) {
        return Err(GeoError::SingularFrame);
    }
    let lat = f.origin.lat + (p.y / f.earth_radius).to_degrees();
    let mut lon = f.origin.lon + (p.x / (f.earth_radius * cos_lat)).to_degrees();
    if lon > T::lit(180.0) {
        lon = lon - T::lit(360.0);
    } else if lon < T::lit(-180.0) {
        lon = lon + T::lit(360.0);
    }
    Ok(GeoPoint { lat, lon })
}

/// Converts a compass heading (degrees clockwise from North) to a math angle
/// (radians counterclockwise from East) in (-π, π].
pub fn heading_to_theta<T: Scalar>(heading_deg: T) -> Result<T, GeoError> {
    if !heading_deg.is_finite() {
        return Err(GeoError::NonFinite);
    }
    let h = normalize_heading(heading_deg);
    Ok(wrap_angle(T::FRAC_PI_2() - h.to_radians()))
}

/// Inverse of [`heading_to_theta`]; result in [0, 360).
pub fn theta_to_heading<T: Scalar>(theta: T) -> T {
    normalize_heading(T::lit(90.0) - theta.to_degrees())
}

fn normalize_heading<T: Scalar>(h: T) -> T {
    let full = T::lit(360.0);
    let r = h % full;
    let r = if r < T::zero() { r + full } else { r };
    // -1e-20 % 360 + 360 rounds to 360
    if r >= full {
        T::zero()
    } else {
        r
    }
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut w = a % two_pi;
    if w <= -T::PI() {
        w = w + two_pi;
    } else if w > T::PI() {
        w = w - two_pi;
    }
    w
}
