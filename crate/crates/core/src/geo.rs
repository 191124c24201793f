//! Locations, postal-code keys and the client-side area filter.
//!
//! Distances use the haversine formula on a sphere of radius 6,371 km.
//! Trigonometry comes from `libm`, so results are bit-identical on every
//! platform, which matters because the on-chain scan uses the same code.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub const EARTH_RADIUS_METERS: f64 = 6_371_000.0;

const MICRO: f64 = 1_000_000.0;
const MAX_LAT_MICRO: i32 = 90_000_000;
const MAX_LON_MICRO: i32 = 180_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum GeoError {
    #[error("latitude must be within [-90, 90]")]
    Latitude,
    #[error("longitude must be within [-180, 180]")]
    Longitude,
    #[error("distance must be finite and non-negative")]
    Distance,
}

/// A point on the sphere stored as integer micro-degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Degrees", into = "Degrees")]
pub struct GeoPoint {
    lat_micro: i32,
    lon_micro: i32,
}

#[derive(Serialize, Deserialize)]
struct Degrees {
    lat: f64,
    lon: f64,
}

impl TryFrom<Degrees> for GeoPoint {
    type Error = GeoError;
    fn try_from(d: Degrees) -> Result<Self, GeoError> {
        GeoPoint::from_degrees(d.lat, d.lon)
    }
}

impl From<GeoPoint> for Degrees {
    fn from(p: GeoPoint) -> Self {
        Degrees { lat: p.lat(), lon: p.lon() }
    }
}

impl GeoPoint {
    pub fn from_micro(lat_micro: i32, lon_micro: i32) -> Result<Self, GeoError> {
        if !(-MAX_LAT_MICRO..=MAX_LAT_MICRO).contains(&lat_micro) {
            return Err(GeoError::Latitude);
        }
        if !(-MAX_LON_MICRO..=MAX_LON_MICRO).contains(&lon_micro) {
            return Err(GeoError::Longitude);
        }
        Ok(GeoPoint { lat_micro, lon_micro })
    }

    /// Rounds to the nearest micro-degree.
    pub fn from_degrees(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let lat = to_micro(lat).ok_or(GeoError::Latitude)?;
        let lon = to_micro(lon).ok_or(GeoError::Longitude)?;
        Self::from_micro(lat, lon)
    }

    pub fn lat_micro(&self) -> i32 {
        self.lat_micro
    }

    pub fn lon_micro(&self) -> i32 {
        self.lon_micro
    }

    pub fn lat(&self) -> f64 {
        self.lat_micro as f64 / MICRO
    }

    pub fn lon(&self) -> f64 {
        self.lon_micro as f64 / MICRO
    }
}

fn to_micro(deg: f64) -> Option<i32> {
    if !deg.is_finite() {
        return None;
    }
    let scaled = libm::round(deg * MICRO);
    if scaled.abs() > MAX_LON_MICRO as f64 {
        return None;
    }
    Some(scaled as i32)
}

/// Non-negative distance in meters.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistanceMeters(f64);

impl DistanceMeters {
    pub const ZERO: DistanceMeters = DistanceMeters(0.0);

    pub fn new(meters: f64) -> Result<Self, GeoError> {
        if meters.is_finite() && meters >= 0.0 {
            Ok(DistanceMeters(meters))
        } else {
            Err(GeoError::Distance)
        }
    }

    pub fn from_km(km: f64) -> Result<Self, GeoError> {
        Self::new(km * 1000.0)
    }

    pub fn meters(self) -> f64 {
        self.0
    }

    pub fn km(self) -> f64 {
        self.0 / 1000.0
    }
}

fn radians_from_micro(micro: i32) -> f64 {
    (micro as f64 / MICRO).to_radians()
}

/// Great-circle distance between two points.
///
/// Coordinate differences are taken as absolute integer micro-degree deltas
/// before conversion, so `haversine(a, b) == haversine(b, a)` holds exactly.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> DistanceMeters {
    let dlat = radians_from_micro((a.lat_micro - b.lat_micro).abs());
    let dlon = radians_from_micro((a.lon_micro - b.lon_micro).abs());
    let cos_product = libm::cos(radians_from_micro(a.lat_micro)) * libm::cos(radians_from_micro(b.lat_micro));

    let sin_lat = libm::sin(dlat / 2.0);
    let sin_lon = libm::sin(dlon / 2.0);
    let h = sin_lat * sin_lat + cos_product * sin_lon * sin_lon;
    let central = 2.0 * libm::asin(libm::sqrt(h.clamp(0.0, 1.0)));
    DistanceMeters(EARTH_RADIUS_METERS * central)
}

/// Anything with a position that can be area-filtered.
pub trait Located {
    fn location(&self) -> GeoPoint;
}

impl Located for GeoPoint {
    fn location(&self) -> GeoPoint {
        *self
    }
}

/// Keeps the items strictly closer than `diameter` to `buyer`, preserving
/// input order.
///
/// The parameter is named after the listing-area filter it implements and is
/// compared literally against the point-to-point distance, so in geometric
/// terms it acts as a radius.
pub fn filter_by_diameter<T: Located>(buyer: GeoPoint, diameter: DistanceMeters, items: &[T]) -> Vec<&T> {
    items
        .iter()
        .filter(|item| haversine(item.location(), buyer).meters() < diameter.meters())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid postal code")]
pub struct InvalidPostalCode;

/// Normalized postal code: whitespace removed, ASCII uppercase, 3 to 10
/// alphanumeric characters. Treated as an opaque region key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PostalCode(String);

impl PostalCode {
    pub const MIN_LEN: usize = 3;
    pub const MAX_LEN: usize = 10;

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub fn normalize_postal(raw: &str) -> Result<PostalCode, InvalidPostalCode> {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars().filter(|c| !c.is_whitespace()) {
        if !c.is_ascii_alphanumeric() {
            return Err(InvalidPostalCode);
        }
        out.push(c.to_ascii_uppercase());
    }
    if !(PostalCode::MIN_LEN..=PostalCode::MAX_LEN).contains(&out.len()) {
        return Err(InvalidPostalCode);
    }
    Ok(PostalCode(out))
}

impl TryFrom<String> for PostalCode {
    type Error = InvalidPostalCode;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        normalize_postal(&s)
    }
}

impl From<PostalCode> for String {
    fn from(p: PostalCode) -> String {
        p.0
    }
}

impl core::str::FromStr for PostalCode {
    type Err = InvalidPostalCode;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_postal(s)
    }
}

impl fmt::Display for PostalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}
