//! WGS84 geodesy: local tangent-plane ENU conversion and the transverse
//! Mercator projection used for raster export.
//!
//! The ENU frame is a single tangent plane at the anchor; site extents are
//! small enough that plane curvature error is far below evaluation
//! tolerances, so no full projected-CRS math happens inside the pipeline.

use nalgebra::Vector3;

use super::{GeoAnchor, GeomError};

/// WGS84 ellipsoid semi-major axis, meters.
const WGS84_A: f64 = 6_378_137.0;
/// WGS84 flattening.
const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// First eccentricity squared.
const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Tangent-plane validity half-width around the anchor, degrees.
const TANGENT_VALIDITY_DEG: f64 = 1.0;

fn geodetic_to_ecef(lat_deg: f64, lon_deg: f64, alt: f64) -> Vector3<f64> {
    let lat = lat_deg.to_radians();
    let lon = lon_deg.to_radians();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
    Vector3::new(
        (n + alt) * cos_lat * cos_lon,
        (n + alt) * cos_lat * sin_lon,
        (n * (1.0 - WGS84_E2) + alt) * sin_lat,
    )
}

fn ecef_to_geodetic(p: &Vector3<f64>) -> (f64, f64, f64) {
    let lon = p.y.atan2(p.x);
    let rho = (p.x * p.x + p.y * p.y).sqrt();
    // Fixed-point iteration on latitude; converges to machine precision in
    // a handful of steps for near-surface points.
    let mut lat = (p.z / (rho * (1.0 - WGS84_E2))).atan();
    let mut alt = 0.0;
    for _ in 0..8 {
        let sin_lat = lat.sin();
        let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
        alt = rho / lat.cos() - n;
        lat = (p.z / (rho * (1.0 - WGS84_E2 * n / (n + alt)))).atan();
    }
    (lat.to_degrees(), lon.to_degrees(), alt)
}

/// Convert a WGS84 point to local ENU coordinates on the anchor's tangent
/// plane. Errors when the point is more than one degree from the anchor.
pub fn wgs84_to_enu(
    lat: f64,
    lon: f64,
    alt: f64,
    anchor: &GeoAnchor,
) -> Result<Vector3<f64>, GeomError> {
    if (lat - anchor.lat0).abs() >= TANGENT_VALIDITY_DEG
        || (lon - anchor.lon0).abs() >= TANGENT_VALIDITY_DEG
    {
        return Err(GeomError::OutOfTangentPlane {
            lat,
            lon,
            lat0: anchor.lat0,
            lon0: anchor.lon0,
        });
    }
    let p = geodetic_to_ecef(lat, lon, alt);
    let p0 = geodetic_to_ecef(anchor.lat0, anchor.lon0, anchor.alt0);
    let d = p - p0;
    let lat0 = anchor.lat0.to_radians();
    let lon0 = anchor.lon0.to_radians();
    let (sin_lat, cos_lat) = lat0.sin_cos();
    let (sin_lon, cos_lon) = lon0.sin_cos();
    Ok(Vector3::new(
        -sin_lon * d.x + cos_lon * d.y,
        -sin_lat * cos_lon * d.x - sin_lat * sin_lon * d.y + cos_lat * d.z,
        cos_lat * cos_lon * d.x + cos_lat * sin_lon * d.y + sin_lat * d.z,
    ))
}

/// Inverse of [`wgs84_to_enu`]: local ENU back to (lat, lon, alt).
pub fn enu_to_wgs84(enu: &Vector3<f64>, anchor: &GeoAnchor) -> (f64, f64, f64) {
    let lat0 = anchor.lat0.to_radians();
    let lon0 = anchor.lon0.to_radians();
    let (sin_lat, cos_lat) = lat0.sin_cos();
    let (sin_lon, cos_lon) = lon0.sin_cos();
    let d = Vector3::new(
        -sin_lon * enu.x - sin_lat * cos_lon * enu.y + cos_lat * cos_lon * enu.z,
        cos_lon * enu.x - sin_lat * sin_lon * enu.y + cos_lat * sin_lon * enu.z,
        cos_lat * enu.y + sin_lat * enu.z,
    );
    let p0 = geodetic_to_ecef(anchor.lat0, anchor.lon0, anchor.alt0);
    ecef_to_geodetic(&(p0 + d))
}

/// EPSG code of the WGS84 UTM zone containing the point.
pub fn utm_epsg_for(lat: f64, lon: f64) -> u16 {
    let zone = (((lon + 180.0) / 6.0).floor() as i32).clamp(0, 59) + 1;
    if lat >= 0.0 {
        32600 + zone as u16
    } else {
        32700 + zone as u16
    }
}

/// Forward transverse Mercator (UTM) projection: (easting, northing) in the
/// zone implied by `epsg`. Kruger series in the third flattening, good to
/// well under a millimeter within a zone.
pub fn wgs84_to_utm(lat: f64, lon: f64, epsg: u16) -> (f64, f64) {
    let zone = (epsg % 100) as f64;
    let south = (32700..=32760).contains(&epsg);
    let lon0 = (zone - 1.0) * 6.0 - 180.0 + 3.0;

    let n = WGS84_F / (2.0 - WGS84_F);
    let n2 = n * n;
    let n3 = n2 * n;
    let big_a = WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n2 * n2 / 64.0);
    let alpha = [
        n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0,
        13.0 * n2 / 48.0 - 3.0 * n3 / 5.0,
        61.0 * n3 / 240.0,
    ];

    let phi = lat.to_radians();
    let dl = (lon - lon0).to_radians();
    let e_n = 2.0 * n.sqrt() / (1.0 + n);
    let t = (phi.sin().atanh() - e_n * (e_n * phi.sin()).atanh()).sinh();
    let xi = (t / dl.cos()).atan();
    let eta = (dl.sin() / (1.0 + t * t).sqrt()).atanh();

    let k0 = 0.9996;
    let mut e = eta;
    let mut nrt = xi;
    for (j, a) in alpha.iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        e += a * (k * xi).cos() * (k * eta).sinh();
        nrt += a * (k * xi).sin() * (k * eta).cosh();
    }
    let easting = 500_000.0 + k0 * big_a * e;
    let mut northing = k0 * big_a * nrt;
    if south {
        northing += 10_000_000.0;
    }
    (easting, northing)
}
