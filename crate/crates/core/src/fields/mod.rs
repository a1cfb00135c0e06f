//! Aerial and terrestrial tree-likelihood fields.
//!
//! The aerial route goes point cloud -> ground -> canopy height model ->
//! multi-scale Laplacian-of-Gaussian response; the terrestrial route goes
//! point cloud -> ground -> breast-height trunk clusters -> Gaussian kernel
//! density field. Both end as rasters normalized to [0, 1] that the
//! alignment module consumes.

mod log_response;

pub use log_response::{aerial_likelihood, log_kernel_1d, log_response};

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::cluster::cluster_points;
use crate::geom::PointCloud;
use crate::grid::{normalize_field, GridField};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error("cell size must be positive, got {0}")]
    BadCellSize(f64),
    #[error("scale sigma {sigma} is below grid resolution {resolution}; kernel unresolvable")]
    KernelUnresolvable { sigma: f64, resolution: f64 },
    #[error("scales must be strictly increasing and positive")]
    BadScales,
    #[error("KDE bandwidth must be positive, got {0}")]
    BadBandwidth(f64),
    #[error("trunk set is empty; likelihood field would be degenerate")]
    EmptyTrunkSet,
    #[error("cloud carries no intensity channel")]
    MissingIntensity,
    #[error("extent is empty or inverted")]
    BadExtent,
}

/// 2D trunk locations extracted from a terrestrial cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct TrunkSet {
    pub positions: Vec<Vector2<f64>>,
}

impl TrunkSet {
    pub fn new(positions: Vec<Vector2<f64>>) -> Self {
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Crown-relevant LoG scales, strictly increasing, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSet {
    sigmas: Vec<f64>,
}

impl ScaleSet {
    pub fn new(sigmas: Vec<f64>) -> Result<Self, FieldError> {
        if sigmas.is_empty() || sigmas.windows(2).any(|w| w[0] >= w[1]) || sigmas[0] <= 0.0 {
            return Err(FieldError::BadScales);
        }
        Ok(Self { sigmas })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }
}

impl Default for ScaleSet {
    /// Crown radii of mature deciduous trees run roughly 2-5 m.
    fn default() -> Self {
        Self {
            sigmas: vec![1.0, 2.0, 3.0, 4.0],
        }
    }
}

/// Breast-height slice used for trunk extraction, meters above ground.
pub const TRUNK_SLICE: (f64, f64) = (1.0, 1.6);
/// Trunk cluster linking radius, meters.
pub const TRUNK_LINK_RADIUS: f64 = 0.3;
/// Minimum points for a trunk cluster.
pub const TRUNK_MIN_POINTS: usize = 10;
/// Maximum horizontal extent of a trunk cluster, meters.
pub const TRUNK_MAX_EXTENT: f64 = 1.5;

/// Default reflective-marker intensity threshold.
pub const MARKER_INTENSITY_THRESHOLD: f64 = 200.0;
/// Marker cluster linking radius, meters.
pub const MARKER_LINK_RADIUS: f64 = 0.2;
/// Minimum points for a marker cluster.
pub const MARKER_MIN_POINTS: usize = 5;

fn grid_over_bounds(
    bounds: (f64, f64, f64, f64),
    cell: f64,
) -> Result<GridField, FieldError> {
    let (min_x, min_y, max_x, max_y) = bounds;
    if max_x < min_x || max_y < min_y {
        return Err(FieldError::BadExtent);
    }
    let width = (((max_x - min_x) / cell).ceil() as usize).max(1);
    let height = (((max_y - min_y) / cell).ceil() as usize).max(1);
    GridField::new(min_x, min_y, cell, width, height)
        .map_err(|_| FieldError::BadCellSize(cell))
}

fn clamped_cell(field: &GridField, x: f64, y: f64) -> (usize, usize) {
    let fx = ((x - field.origin_x) / field.resolution).floor();
    let fy = ((y - field.origin_y) / field.resolution).floor();
    let ix = (fx.max(0.0) as usize).min(field.width - 1);
    let iy = (fy.max(0.0) as usize).min(field.height - 1);
    (ix, iy)
}

/// Ground sample at (x, y): bilinear inside the field, nearest cell value
/// at and beyond the border.
pub fn sample_ground(ground: &GridField, x: f64, y: f64) -> f64 {
    ground.sample_bilinear(x, y).unwrap_or_else(|| {
        let (ix, iy) = clamped_cell(ground, x, y);
        ground.get(ix, iy)
    })
}

/// Estimate per-cell ground elevation: 5th percentile of z per cell,
/// nearest-neighbor fill of empty cells, then a 3x3 median pass.
pub fn estimate_ground(cloud: &PointCloud, cell: f64) -> Result<GridField, FieldError> {
    Ok(estimate_ground_with_mask(cloud, cell)?.0)
}

/// As [`estimate_ground`], also returning which cells held actual points
/// before the fill (needed when comparing two ground fields).
pub fn estimate_ground_with_mask(
    cloud: &PointCloud,
    cell: f64,
) -> Result<(GridField, Vec<bool>), FieldError> {
    if cell <= 0.0 || !cell.is_finite() {
        return Err(FieldError::BadCellSize(cell));
    }
    let bounds = cloud.bounds_xy().ok_or(FieldError::EmptyCloud)?;
    let mut field = grid_over_bounds(bounds, cell)?;

    let mut cell_zs: Vec<Vec<f64>> = vec![Vec::new(); field.width * field.height];
    for p in &cloud.points {
        let (ix, iy) = clamped_cell(&field, p.x, p.y);
        cell_zs[field.idx(ix, iy)].push(p.z);
    }
    let occupied: Vec<bool> = cell_zs.iter().map(|v| !v.is_empty()).collect();

    // Nearest-rank 5th percentile per occupied cell.
    for (i, zs) in cell_zs.iter_mut().enumerate() {
        if zs.is_empty() {
            continue;
        }
        zs.sort_by(f64::total_cmp);
        let rank = ((0.05 * zs.len() as f64).ceil() as usize).max(1) - 1;
        field.values[i] = zs[rank];
    }

    // Multi-source BFS fill from occupied cells (4-neighborhood).
    let (w, h) = (field.width, field.height);
    let mut filled = occupied.clone();
    let mut frontier: Vec<usize> = (0..w * h).filter(|&i| filled[i]).collect();
    if frontier.is_empty() {
        return Err(FieldError::EmptyCloud);
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &i in &frontier {
            let (ix, iy) = (i % w, i / w);
            let mut push = |jx: usize, jy: usize, next: &mut Vec<usize>| {
                let j = jy * w + jx;
                if !filled[j] {
                    filled[j] = true;
                    field.values[j] = field.values[i];
                    next.push(j);
                }
            };
            if ix > 0 {
                push(ix - 1, iy, &mut next);
            }
            if ix + 1 < w {
                push(ix + 1, iy, &mut next);
            }
            if iy > 0 {
                push(ix, iy - 1, &mut next);
            }
            if iy + 1 < h {
                push(ix, iy + 1, &mut next);
            }
        }
        frontier = next;
    }

    // 3x3 median smoothing.
    let src = field.values.clone();
    let mut window = [0.0f64; 9];
    for iy in 0..h {
        for ix in 0..w {
            let mut n = 0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                    if jx >= 0 && jy >= 0 && (jx as usize) < w && (jy as usize) < h {
                        window[n] = src[jy as usize * w + jx as usize];
                        n += 1;
                    }
                }
            }
            window[..n].sort_by(f64::total_cmp);
            field.values[iy * w + ix] = window[n / 2];
        }
    }
    Ok((field, occupied))
}

/// Canopy height model: per-cell max z minus ground elevation, clamped at
/// zero; cells without points are zero (absent canopy).
pub fn compute_chm(
    cloud: &PointCloud,
    ground: &GridField,
    resolution: f64,
) -> Result<GridField, FieldError> {
    if resolution <= 0.0 || !resolution.is_finite() {
        return Err(FieldError::BadResolution(resolution));
    }
    let bounds = cloud.bounds_xy().ok_or(FieldError::EmptyCloud)?;
    let mut chm = grid_over_bounds(bounds, resolution)?;
    let mut max_z = vec![f64::NEG_INFINITY; chm.width * chm.height];
    for p in &cloud.points {
        let (ix, iy) = clamped_cell(&chm, p.x, p.y);
        let i = chm.idx(ix, iy);
        max_z[i] = max_z[i].max(p.z);
    }
    for iy in 0..chm.height {
        for ix in 0..chm.width {
            let i = chm.idx(ix, iy);
            if max_z[i] > f64::NEG_INFINITY {
                let (cx, cy) = chm.cell_center(ix, iy);
                chm.values[i] = (max_z[i] - sample_ground(ground, cx, cy)).max(0.0);
            }
        }
    }
    Ok(chm)
}

/// Extract trunk centroids from the breast-height slice of a terrestrial
/// cloud.
pub fn extract_trunks(cloud: &PointCloud, ground: &GridField) -> TrunkSet {
    let slice: Vec<(f64, f64)> = cloud
        .points
        .iter()
        .filter(|p| {
            let above = p.z - sample_ground(ground, p.x, p.y);
            (TRUNK_SLICE.0..=TRUNK_SLICE.1).contains(&above)
        })
        .map(|p| (p.x, p.y))
        .collect();
    let clusters = cluster_points(&slice, TRUNK_LINK_RADIUS, TRUNK_MIN_POINTS);
    let positions = clusters
        .iter()
        .filter(|c| c.extent_xy(&slice) <= TRUNK_MAX_EXTENT)
        .map(|c| {
            let (x, y) = c.centroid_xy(&slice);
            Vector2::new(x, y)
        })
        .collect();
    TrunkSet::new(positions)
}

/// Terrestrial likelihood: exact Gaussian KDE over trunk positions,
/// evaluated at every cell center, then normalized to [0, 1].
pub fn terrestrial_likelihood(
    trunks: &TrunkSet,
    bandwidth: f64,
    resolution: f64,
    extent: (f64, f64, f64, f64),
) -> Result<GridField, FieldError> {
    if bandwidth <= 0.0 || !bandwidth.is_finite() {
        return Err(FieldError::BadBandwidth(bandwidth));
    }
    if resolution <= 0.0 || !resolution.is_finite() {
        return Err(FieldError::BadResolution(resolution));
    }
    if trunks.is_empty() {
        return Err(FieldError::EmptyTrunkSet);
    }
    let mut field = grid_over_bounds(extent, resolution)?;
    let inv_2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    for iy in 0..field.height {
        for ix in 0..field.width {
            let (cx, cy) = field.cell_center(ix, iy);
            let mut v = 0.0;
            for p in &trunks.positions {
                let dx = cx - p.x;
                let dy = cy - p.y;
                v += (-(dx * dx + dy * dy) * inv_2h2).exp();
            }
            field.set(ix, iy, v);
        }
    }
    Ok(normalize_field(&field))
}

/// Raw (un-normalized) KDE value at a single probe point; the test oracle
/// for the gridded field.
pub fn kde_at(trunks: &TrunkSet, bandwidth: f64, x: f64, y: f64) -> f64 {
    let inv_2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    trunks
        .positions
        .iter()
        .map(|p| {
            let (dx, dy) = (x - p.x, y - p.y);
            (-(dx * dx + dy * dy) * inv_2h2).exp()
        })
        .sum()
}

/// Centroids of high-intensity clusters (reflective tape on marked trees).
pub fn extract_markers(
    cloud: &PointCloud,
    intensity_threshold: f64,
) -> Result<Vec<Vector3<f64>>, FieldError> {
    if !cloud.has_intensity() {
        return Err(FieldError::MissingIntensity);
    }
    let bright: Vec<&crate::geom::Point3> = cloud
        .points
        .iter()
        .filter(|p| p.intensity.unwrap() > intensity_threshold)
        .collect();
    let xy: Vec<(f64, f64)> = bright.iter().map(|p| (p.x, p.y)).collect();
    let clusters = cluster_points(&xy, MARKER_LINK_RADIUS, MARKER_MIN_POINTS);
    Ok(clusters
        .iter()
        .map(|c| {
            let n = c.len() as f64;
            let sum = c.indices.iter().fold(Vector3::zeros(), |acc, &i| {
                acc + Vector3::new(bright[i].x, bright[i].y, bright[i].z)
            });
            sum / n
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Frame, Point3};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn flat_cloud(z: f64, n: usize, extent: f64) -> PointCloud {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let points = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random::<f64>() * extent,
                    rng.random::<f64>() * extent,
                    z,
                )
            })
            .collect();
        PointCloud::new(points, Frame::Map)
    }

    #[test]
    fn flat_cloud_gives_constant_ground() {
        let cloud = flat_cloud(2.0, 4000, 20.0);
        let g = estimate_ground(&cloud, 1.0).unwrap();
        for &v in &g.values {
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ground_ignores_tree_points() {
        // Flat ground at z=0 plus dense vertical columns up to z=10.
        let mut cloud = flat_cloud(0.0, 8000, 30.0);
        for t in 0..20 {
            let (cx, cy) = ((t % 5) as f64 * 6.0 + 2.0, (t / 5) as f64 * 6.0 + 2.0);
            for k in 0..40 {
                cloud
                    .points
                    .push(Point3::new(cx, cy, 0.25 * k as f64 + 0.1));
            }
        }
        let g = estimate_ground(&cloud, 1.0).unwrap();
        for &v in &g.values {
            assert!(v.abs() < 0.1, "ground estimate {v} too far from 0");
        }
    }

    #[test]
    fn single_point_cloud_gives_1x1_field() {
        let cloud = PointCloud::new(vec![Point3::new(3.0, 4.0, 7.5)], Frame::Map);
        let g = estimate_ground(&cloud, 1.0).unwrap();
        assert_eq!((g.width, g.height), (1, 1));
        assert_eq!(g.values[0], 7.5);
    }

    #[test]
    fn empty_cloud_errors() {
        let cloud = PointCloud::new(vec![], Frame::Map);
        assert!(matches!(
            estimate_ground(&cloud, 1.0),
            Err(FieldError::EmptyCloud)
        ));
    }

    #[test]
    fn chm_zero_on_ground_coincident_cloud() {
        let cloud = flat_cloud(1.0, 3000, 20.0);
        let g = estimate_ground(&cloud, 1.0).unwrap();
        let chm = compute_chm(&cloud, &g, 0.5).unwrap();
        for &v in &chm.values {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn chm_paraboloid_crown_peaks_at_apex() {
        // Crown surface z = 8 - (r/3)^2 * 8 over a flat ground at z = 0.
        let mut cloud = flat_cloud(0.0, 5000, 20.0);
        let (cx, cy, h, r0) = (10.0, 10.0, 8.0, 3.0);
        for i in 0..60 {
            for j in 0..60 {
                let (x, y) = (cx - r0 + i as f64 * 0.1, cy - r0 + j as f64 * 0.1);
                let r2 = ((x - cx).powi(2) + (y - cy).powi(2)) / (r0 * r0);
                if r2 <= 1.0 {
                    cloud.points.push(Point3::new(x, y, h * (1.0 - r2)));
                }
            }
        }
        let g = estimate_ground(&cloud, 1.0).unwrap();
        let chm = compute_chm(&cloud, &g, 0.25).unwrap();
        let (ix, iy) = chm.cell_of(cx, cy).unwrap();
        assert_abs_diff_eq!(chm.get(ix, iy), h, epsilon = 0.2);
    }

    #[test]
    fn chm_two_crowns_two_maxima() {
        let mut cloud = flat_cloud(0.0, 20000, 30.0);
        for (cx, cy, h) in [(8.0, 15.0, 5.0), (22.0, 15.0, 10.0)] {
            for i in 0..40 {
                for j in 0..40 {
                    let (x, y) = (cx - 2.0 + i as f64 * 0.1, cy - 2.0 + j as f64 * 0.1);
                    let r2 = ((x - cx).powi(2) + (y - cy).powi(2)) / 4.0;
                    if r2 <= 1.0 {
                        cloud.points.push(Point3::new(x, y, h * (1.0 - 0.5 * r2)));
                    }
                }
            }
        }
        let g = estimate_ground(&cloud, 1.0).unwrap();
        let chm = compute_chm(&cloud, &g, 0.25).unwrap();
        let (i1x, i1y) = chm.cell_of(8.0, 15.0).unwrap();
        let (i2x, i2y) = chm.cell_of(22.0, 15.0).unwrap();
        assert_abs_diff_eq!(chm.get(i1x, i1y), 5.0, epsilon = 0.3);
        assert_abs_diff_eq!(chm.get(i2x, i2y), 10.0, epsilon = 0.3);
    }

    #[test]
    fn chm_rejects_bad_resolution() {
        let cloud = flat_cloud(0.0, 10, 5.0);
        let g = estimate_ground(&cloud, 1.0).unwrap();
        assert!(matches!(
            compute_chm(&cloud, &g, 0.0),
            Err(FieldError::BadResolution(_))
        ));
    }

    fn cylinder_forest(n: usize, extent: f64, seed: u64) -> (PointCloud, Vec<(f64, f64)>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut cloud = flat_cloud(0.0, 6000, extent);
        let mut truth = Vec::new();
        for _ in 0..n {
            let cx = 2.0 + rng.random::<f64>() * (extent - 4.0);
            let cy = 2.0 + rng.random::<f64>() * (extent - 4.0);
            if truth
                .iter()
                .any(|&(tx, ty): &(f64, f64)| ((tx - cx).powi(2) + (ty - cy).powi(2)).sqrt() < 3.0)
            {
                continue;
            }
            truth.push((cx, cy));
            let r = 0.15;
            for _ in 0..120 {
                let ang = rng.random::<f64>() * std::f64::consts::TAU;
                let z = rng.random::<f64>() * 3.0;
                cloud
                    .points
                    .push(Point3::new(cx + r * ang.cos(), cy + r * ang.sin(), z));
            }
        }
        (cloud, truth)
    }

    #[test]
    fn trunks_recovered_on_cylinder_forest() {
        let (cloud, truth) = cylinder_forest(25, 40.0, 3);
        let g = estimate_ground(&cloud, 1.0).unwrap();
        let trunks = extract_trunks(&cloud, &g);
        let mut found = 0;
        let mut sq_err = 0.0;
        for &(tx, ty) in &truth {
            if let Some(best) = trunks
                .positions
                .iter()
                .map(|p| ((p.x - tx).powi(2) + (p.y - ty).powi(2)).sqrt())
                .min_by(f64::total_cmp)
            {
                if best < 0.3 {
                    found += 1;
                    sq_err += best * best;
                }
            }
        }
        let recall = found as f64 / truth.len() as f64;
        let rmse = (sq_err / found.max(1) as f64).sqrt();
        assert!(recall >= 0.95, "recall {recall}");
        assert!(rmse < 0.15, "rmse {rmse}");
        for &(tx, ty) in &truth {
            let best = trunks
                .positions
                .iter()
                .map(|p| ((p.x - tx).powi(2) + (p.y - ty).powi(2)).sqrt())
                .min_by(f64::total_cmp)
                .unwrap();
            assert!(best < 0.15, "trunk centroid {best} m from axis");
        }
    }

    #[test]
    fn empty_slice_gives_empty_trunkset() {
        let cloud = flat_cloud(0.0, 500, 10.0);
        let g = estimate_ground(&cloud, 1.0).unwrap();
        assert!(extract_trunks(&cloud, &g).is_empty());
    }

    #[test]
    fn wide_wall_rejected_by_extent_filter() {
        let mut cloud = flat_cloud(0.0, 2000, 10.0);
        for i in 0..300 {
            cloud
                .points
                .push(Point3::new(2.0 + 3.0 * i as f64 / 300.0, 5.0, 1.3));
        }
        let g = estimate_ground(&cloud, 1.0).unwrap();
        let trunks = extract_trunks(&cloud, &g);
        assert!(trunks.is_empty(), "3 m wall must be rejected");
    }

    #[test]
    fn kde_peak_and_half_height() {
        let h = 1.0;
        // Trunk exactly on a cell center: extent chosen so centers land on
        // integer coordinates.
        let trunks = TrunkSet::new(vec![Vector2::new(0.0, 0.0)]);
        let field =
            terrestrial_likelihood(&trunks, h, 1.0, (-10.5, -10.5, 10.5, 10.5)).unwrap();
        let (ix, iy) = field.cell_of(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(field.get(ix, iy), 1.0, epsilon = 1e-12);
        // Closed form: value falls to half peak at distance h*sqrt(2 ln 2).
        let d = h * (2.0_f64 * 2.0_f64.ln()).sqrt();
        let raw_half = kde_at(&trunks, h, d, 0.0);
        assert_abs_diff_eq!(raw_half, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn kde_matches_direct_summation_at_probes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let trunks = TrunkSet::new(
            (0..40)
                .map(|_| Vector2::new(rng.random::<f64>() * 50.0, rng.random::<f64>() * 50.0))
                .collect(),
        );
        let h = 1.3;
        for _ in 0..100 {
            let (x, y) = (rng.random::<f64>() * 50.0, rng.random::<f64>() * 50.0);
            let direct: f64 = trunks
                .positions
                .iter()
                .map(|p| {
                    let d2 = (x - p.x).powi(2) + (y - p.y).powi(2);
                    (-d2 / (2.0 * h * h)).exp()
                })
                .sum();
            assert_abs_diff_eq!(kde_at(&trunks, h, x, y), direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn kde_two_far_trunks_superpose() {
        let h = 0.5;
        let trunks = TrunkSet::new(vec![Vector2::new(0.0, 0.0), Vector2::new(10.0 * h, 0.0)]);
        let mid = kde_at(&trunks, h, 5.0 * h, 0.0);
        let peak = kde_at(&trunks, h, 0.0, 0.0);
        assert!(mid / peak < 1e-5, "midpoint {mid} not isolated");
    }

    #[test]
    fn kde_empty_trunks_error() {
        let trunks = TrunkSet::new(vec![]);
        assert!(matches!(
            terrestrial_likelihood(&trunks, 1.0, 0.5, (0.0, 0.0, 1.0, 1.0)),
            Err(FieldError::EmptyTrunkSet)
        ));
    }

    #[test]
    fn markers_extracted_from_tape_patches() {
        let mut cloud = flat_cloud(0.0, 1000, 10.0);
        for p in cloud.points.iter_mut() {
            p.intensity = Some(40.0);
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for (cx, cy) in [(2.0, 2.0), (7.0, 2.0)] {
            for _ in 0..30 {
                cloud.points.push(Point3::with_intensity(
                    cx + (rng.random::<f64>() - 0.5) * 0.06,
                    cy + (rng.random::<f64>() - 0.5) * 0.06,
                    1.3 + (rng.random::<f64>() - 0.5) * 0.2,
                    250.0,
                ));
            }
        }
        let markers = extract_markers(&cloud, MARKER_INTENSITY_THRESHOLD).unwrap();
        assert_eq!(markers.len(), 2);
        for (cx, cy) in [(2.0, 2.0), (7.0, 2.0)] {
            let best = markers
                .iter()
                .map(|m| ((m.x - cx).powi(2) + (m.y - cy).powi(2)).sqrt())
                .min_by(f64::total_cmp)
                .unwrap();
            assert!(best < 0.05, "marker centroid {best} m off");
        }
    }

    #[test]
    fn markers_empty_when_nothing_bright() {
        let mut cloud = flat_cloud(0.0, 200, 5.0);
        for p in cloud.points.iter_mut() {
            p.intensity = Some(10.0);
        }
        assert!(extract_markers(&cloud, 200.0).unwrap().is_empty());
    }

    #[test]
    fn markers_require_intensity() {
        let cloud = flat_cloud(0.0, 10, 5.0);
        assert!(matches!(
            extract_markers(&cloud, 200.0),
            Err(FieldError::MissingIntensity)
        ));
    }
}
