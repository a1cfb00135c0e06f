//! Geospatial grounding: project image-space detections into the map,
//! build semantic point overlays, and export GIS layers.

mod geotiff;
mod kml;

pub use geotiff::{read_geotiff, write_geotiff, GeoTiffRaster, NODATA};
pub use kml::{write_kml, DEFAULT_CLUSTER_RADIUS};

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Isometry3, Matrix4, Vector3};
use thiserror::Error;

use crate::geom::{interpolate_pose, GeoAnchor, Point3, PointCloud, Se3Pose};
use crate::grid::GridField;

#[derive(Debug, Error)]
pub enum GeotagError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad camera calibration: {0}")]
    BadCalibration(String),
    #[error("overlay is empty")]
    EmptyOverlay,
    #[error("raster too large: {0} bytes")]
    RasterTooLarge(u64),
    #[error("malformed GeoTIFF: {0}")]
    MalformedTiff(String),
    #[error("field has no anchor; cannot georeference")]
    MissingAnchor,
}

/// One image-space detector output.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Detection {
    pub t: f64,
    pub image: String,
    pub class: String,
    pub conf: f64,
    /// (x, y, w, h) in pixels, origin top-left.
    pub bbox: [f64; 4],
}

impl Detection {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.bbox[0]
            && u <= self.bbox[0] + self.bbox[2]
            && v >= self.bbox[1]
            && v <= self.bbox[1] + self.bbox[3]
    }
}

/// Pinhole camera intrinsics plus the camera-LiDAR extrinsic.
#[derive(Debug, Clone)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Maps points from the LiDAR (sensor) frame into the camera frame.
    pub t_cam_lidar: Isometry3<f64>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CameraJson {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    #[serde(rename = "T_cam_lidar")]
    t_cam_lidar: [f64; 16],
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        t_cam_lidar: Isometry3<f64>,
    ) -> Result<Self, GeotagError> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeotagError::BadCalibration("focal length must be positive".into()));
        }
        if cx <= 0.0 || cx >= width as f64 || cy <= 0.0 || cy >= height as f64 {
            return Err(GeotagError::BadCalibration(
                "principal point outside image".into(),
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            t_cam_lidar,
        })
    }

    pub fn read_json(path: &Path) -> Result<Self, GeotagError> {
        let text = std::fs::read_to_string(path)?;
        let raw: CameraJson = serde_json::from_str(&text)
            .map_err(|e| GeotagError::BadCalibration(e.to_string()))?;
        let m = Matrix4::from_row_slice(&raw.t_cam_lidar);
        let iso = matrix_to_isometry(&m)?;
        Self::new(raw.fx, raw.fy, raw.cx, raw.cy, raw.width, raw.height, iso)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), GeotagError> {
        let m = self.t_cam_lidar.to_homogeneous();
        let mut flat = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                flat[r * 4 + c] = m[(r, c)];
            }
        }
        let raw = CameraJson {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            t_cam_lidar: flat,
        };
        std::fs::write(path, serde_json::to_string_pretty(&raw).expect("serializes"))?;
        Ok(())
    }
}

fn matrix_to_isometry(m: &Matrix4<f64>) -> Result<Isometry3<f64>, GeotagError> {
    let r = m.fixed_view::<3, 3>(0, 0).into_owned();
    if (r * r.transpose() - nalgebra::Matrix3::identity()).norm() > 1e-6 {
        return Err(GeotagError::BadCalibration(
            "rotation block is not orthonormal".into(),
        ));
    }
    let rot = nalgebra::Rotation3::from_matrix_unchecked(r);
    let t = Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]);
    Ok(Isometry3::from_parts(
        t.into(),
        nalgebra::UnitQuaternion::from_rotation_matrix(&rot),
    ))
}

/// Minimum depth in front of the camera, meters.
pub const MIN_DEPTH: f64 = 0.1;
/// Z-buffer cell size in pixels for the occlusion test.
const ZBUFFER_CELL_PX: f64 = 4.0;
/// Points within this distance of the nearest depth in their z-buffer cell
/// survive the occlusion test, meters.
const ZBUFFER_TOLERANCE: f64 = 1.5;
/// Default association range, meters.
pub const DEFAULT_MAX_RANGE: f64 = 40.0;

/// Image-plane projection of a map point through a trajectory pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectedPoint {
    Pixel { u: f64, v: f64, depth: f64 },
    BehindCamera,
}

/// Project a map-frame point into the image at the given pose.
pub fn project_point(
    p_map: &Vector3<f64>,
    pose_at_t: &Se3Pose,
    cam: &CameraModel,
) -> ProjectedPoint {
    let p_sensor = pose_at_t.inverse_transform_point(p_map);
    let p_cam = cam.t_cam_lidar * nalgebra::Point3::from(p_sensor);
    if p_cam.z <= MIN_DEPTH {
        return ProjectedPoint::BehindCamera;
    }
    ProjectedPoint::Pixel {
        u: cam.fx * p_cam.x / p_cam.z + cam.cx,
        v: cam.fy * p_cam.y / p_cam.z + cam.cy,
        depth: p_cam.z,
    }
}

/// One tagged map point.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayEntry {
    /// Index into the map cloud this overlay was built from.
    pub index: usize,
    pub point: Point3,
    pub class: String,
    pub conf: f64,
}

/// Semantic point overlay: per-point class and max detection confidence.
#[derive(Debug, Clone, Default)]
pub struct SemanticOverlay {
    /// Entries sorted by map index.
    pub entries: Vec<OverlayEntry>,
    /// Detections whose timestamp fell outside the trajectory.
    pub skipped_detections: usize,
}

impl SemanticOverlay {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Associate detections with map points: a point is tagged when it lies
/// within `max_range` of the interpolated sensor position, projects inside
/// the detection's bbox, and survives the per-detection z-buffer occlusion
/// test. Per point the highest-confidence detection wins.
pub fn tag_points(
    map: &PointCloud,
    traj: &[Se3Pose],
    detections: &[Detection],
    cam: &CameraModel,
    max_range: f64,
) -> SemanticOverlay {
    let mut tags: HashMap<usize, (String, f64)> = HashMap::new();
    let mut skipped = 0usize;

    for det in detections {
        let Ok(pose) = interpolate_pose(traj, det.t) else {
            skipped += 1;
            continue;
        };
        let sensor = pose.translation;
        let max_range_sq = max_range * max_range;

        // Candidates inside the bbox, with projected depth.
        let mut candidates: Vec<(usize, f64, f64, f64)> = Vec::new();
        for (i, p) in map.points.iter().enumerate() {
            let d = Vector3::new(p.x - sensor.x, p.y - sensor.y, p.z - sensor.z);
            if d.norm_squared() > max_range_sq {
                continue;
            }
            let proj = project_point(&Vector3::new(p.x, p.y, p.z), &pose, cam);
            if let ProjectedPoint::Pixel { u, v, depth } = proj {
                if u >= 0.0
                    && v >= 0.0
                    && u <= cam.width as f64
                    && v <= cam.height as f64
                    && det.contains(u, v)
                {
                    candidates.push((i, u, v, depth));
                }
            }
        }

        // Z-buffer the bbox so points behind the detected tree stay
        // unlabeled.
        let mut min_depth: HashMap<(i64, i64), f64> = HashMap::new();
        for &(_, u, v, depth) in &candidates {
            let key = (
                ((u - det.bbox[0]) / ZBUFFER_CELL_PX).floor() as i64,
                ((v - det.bbox[1]) / ZBUFFER_CELL_PX).floor() as i64,
            );
            min_depth
                .entry(key)
                .and_modify(|d| *d = d.min(depth))
                .or_insert(depth);
        }
        for &(i, u, v, depth) in &candidates {
            let key = (
                ((u - det.bbox[0]) / ZBUFFER_CELL_PX).floor() as i64,
                ((v - det.bbox[1]) / ZBUFFER_CELL_PX).floor() as i64,
            );
            if depth > min_depth[&key] + ZBUFFER_TOLERANCE {
                continue;
            }
            match tags.get_mut(&i) {
                Some(existing) if existing.1 >= det.conf => {}
                Some(existing) => *existing = (det.class.clone(), det.conf),
                None => {
                    tags.insert(i, (det.class.clone(), det.conf));
                }
            }
        }
    }

    let mut indices: Vec<usize> = tags.keys().copied().collect();
    indices.sort_unstable();
    let entries = indices
        .into_iter()
        .map(|i| {
            let (class, conf) = tags.remove(&i).unwrap();
            OverlayEntry {
                index: i,
                point: map.points[i],
                class,
                conf,
            }
        })
        .collect();
    SemanticOverlay {
        entries,
        skipped_detections: skipped,
    }
}

/// Color the map cloud: tagged points red with intensity proportional to
/// confidence, untagged points grayscale by LiDAR intensity.
pub fn overlay_to_cloud(map: &PointCloud, overlay: &SemanticOverlay) -> PointCloud {
    let mut colors: Vec<[u8; 3]> = map
        .points
        .iter()
        .map(|p| {
            let g = p.intensity.map_or(128.0, |i| i.clamp(0.0, 255.0)).round() as u8;
            [g, g, g]
        })
        .collect();
    for e in &overlay.entries {
        let r = (255.0 * e.conf).round().clamp(0.0, 255.0) as u8;
        colors[e.index] = [r, 0, 0];
    }
    let mut out = map.clone();
    out.colors = Some(colors);
    out
}

/// Rasterize the overlay: per cell, the max confidence among overlay
/// points in the cell; empty cells carry the nodata sentinel.
pub fn rasterize_overlay(
    overlay: &SemanticOverlay,
    resolution: f64,
    anchor: &GeoAnchor,
) -> Result<GridField, GeotagError> {
    if overlay.is_empty() {
        return Err(GeotagError::EmptyOverlay);
    }
    let mut b = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for e in &overlay.entries {
        b.0 = b.0.min(e.point.x);
        b.1 = b.1.min(e.point.y);
        b.2 = b.2.max(e.point.x);
        b.3 = b.3.max(e.point.y);
    }
    let width = (((b.2 - b.0) / resolution).ceil() as usize).max(1);
    let height = (((b.3 - b.1) / resolution).ceil() as usize).max(1);
    let mut field = GridField::new(b.0, b.1, resolution, width, height)
        .map_err(|e| GeotagError::BadCalibration(e.to_string()))?;
    field.anchor = Some(*anchor);
    field.values.fill(NODATA);
    for e in &overlay.entries {
        let fx = ((e.point.x - b.0) / resolution).floor();
        let fy = ((e.point.y - b.1) / resolution).floor();
        let ix = (fx as usize).min(width - 1);
        let iy = (fy as usize).min(height - 1);
        let i = field.idx(ix, iy);
        if field.values[i] < e.conf {
            field.values[i] = e.conf;
        }
    }
    Ok(field)
}
