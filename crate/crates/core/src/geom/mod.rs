//! Geometry and geodesy primitives: points, clouds, planar and rigid
//! transforms, and the WGS84 anchor that ties the local map frame to the
//! globe.

mod geodesy;
mod se2;
mod se3;

pub use geodesy::{enu_to_wgs84, utm_epsg_for, wgs84_to_enu, wgs84_to_utm};
pub use se2::Se2Transform;
pub use se3::{interpolate_pose, Se3Pose};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("coordinate ({lat}, {lon}) outside local tangent-plane validity of anchor ({lat0}, {lon0})")]
    OutOfTangentPlane {
        lat: f64,
        lon: f64,
        lat0: f64,
        lon0: f64,
    },
    #[error("invalid anchor: lat0 {0} or lon0 {1} out of range")]
    InvalidAnchor(f64, f64),
    #[error("timestamp {t} outside trajectory range [{first}, {last}]")]
    TimeOutOfRange { t: f64, first: f64, last: f64 },
    #[error("trajectory must contain at least one pose")]
    EmptyTrajectory,
}

/// WGS84 reference point defining the local east-north-up frame.
///
/// Everything downstream of GNSS ingest lives in the ENU frame anchored
/// here; `epsg` names the projected CRS used only for raster export.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeoAnchor {
    /// Latitude of the anchor, degrees WGS84.
    pub lat0: f64,
    /// Longitude of the anchor, degrees WGS84.
    pub lon0: f64,
    /// Ellipsoidal altitude of the anchor, meters.
    pub alt0: f64,
    /// Projected CRS code for raster export (e.g. 32617 for UTM 17N).
    pub epsg: u16,
}

impl GeoAnchor {
    /// Anchor at the given WGS84 point, with `epsg` derived from the UTM
    /// zone containing it.
    pub fn new(lat0: f64, lon0: f64, alt0: f64) -> Result<Self, GeomError> {
        if !(-90.0..=90.0).contains(&lat0) || !(-180.0..=180.0).contains(&lon0) {
            return Err(GeomError::InvalidAnchor(lat0, lon0));
        }
        Ok(Self {
            lat0,
            lon0,
            alt0,
            epsg: utm_epsg_for(lat0, lon0),
        })
    }
}

/// One LiDAR return: position in a right-handed local frame plus the
/// optional reflectance channel carried through the whole pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Reflectance in [0, 255] when the sensor provides it.
    pub intensity: Option<f64>,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self {
            x,
            y,
            z,
            intensity: None,
        }
    }

    pub fn with_intensity(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self {
            x,
            y,
            z,
            intensity: Some(intensity),
        }
    }
}

/// Coordinate frame a cloud lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// SLAM map frame (arbitrary origin, gravity-aligned z).
    Map,
    /// Raw sensor frame.
    Sensor,
    /// Local east-north-up frame; requires an anchor.
    Enu,
}

/// A point cloud with optional per-point RGB used for semantic overlays.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub frame: Frame,
    pub anchor: Option<GeoAnchor>,
    /// Per-point color, same length as `points` when present.
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, frame: Frame) -> Self {
        Self {
            points,
            frame,
            anchor: None,
            colors: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True when every point carries an intensity value.
    pub fn has_intensity(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.intensity.is_some())
    }

    /// Horizontal bounding box (min_x, min_y, max_x, max_y).
    pub fn bounds_xy(&self) -> Option<(f64, f64, f64, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut b = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in &self.points {
            b.0 = b.0.min(p.x);
            b.1 = b.1.min(p.y);
            b.2 = b.2.max(p.x);
            b.3 = b.3.max(p.y);
        }
        Some(b)
    }

    /// Apply a planar transform to every point (z untouched).
    pub fn transformed_se2(&self, t: &Se2Transform) -> PointCloud {
        let points = self
            .points
            .iter()
            .map(|p| {
                let (x, y) = t.apply(p.x, p.y);
                Point3 {
                    x,
                    y,
                    z: p.z,
                    intensity: p.intensity,
                }
            })
            .collect();
        PointCloud {
            points,
            frame: self.frame,
            anchor: self.anchor,
            colors: self.colors.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_rejects_out_of_range() {
        assert!(GeoAnchor::new(91.0, 0.0, 0.0).is_err());
        assert!(GeoAnchor::new(0.0, -181.0, 0.0).is_err());
        assert!(GeoAnchor::new(40.44, -79.95, 300.0).is_ok());
    }

    #[test]
    fn anchor_derives_utm_zone() {
        // Pittsburgh is in UTM zone 17 north.
        let a = GeoAnchor::new(40.44, -79.95, 300.0).unwrap();
        assert_eq!(a.epsg, 32617);
        // Sydney is in zone 56 south.
        let s = GeoAnchor::new(-33.87, 151.21, 50.0).unwrap();
        assert_eq!(s.epsg, 32756);
    }

    #[test]
    fn cloud_intensity_flag() {
        let mut c = PointCloud::new(
            vec![Point3::with_intensity(0.0, 0.0, 0.0, 10.0)],
            Frame::Map,
        );
        assert!(c.has_intensity());
        c.points.push(Point3::new(1.0, 1.0, 1.0));
        assert!(!c.has_intensity());
    }
}
