//! `geotag`: project detections into the map and export the semantic
//! overlay, GeoTIFF layer, and KML placemarks.

use std::path::Path;

use understory::geotag::{
    overlay_to_cloud, rasterize_overlay, tag_points, write_geotiff, write_kml, CameraModel,
    SemanticOverlay,
};
use understory::io::{read_detections, read_ply, read_trajectory, write_ply};

use crate::commands::{ensure_dir, read_anchor, require_file};
use crate::config::{GeotagConfig, PipelineConfig};
use crate::{AppError, GeotagArgs};

/// Shared by the standalone command and the pipeline: tag, color, raster,
/// and placemark outputs into `out_dir`. Returns the overlay for
/// reporting.
pub fn geotag_outputs(
    map: &understory::geom::PointCloud,
    traj: &[understory::geom::Se3Pose],
    detections: &[understory::geotag::Detection],
    camera: &CameraModel,
    anchor: &understory::geom::GeoAnchor,
    cfg: &GeotagConfig,
    out_dir: &Path,
) -> Result<SemanticOverlay, AppError> {
    let overlay = tag_points(map, traj, detections, camera, cfg.max_range);
    let colored = overlay_to_cloud(map, &overlay);
    write_ply(&colored, &out_dir.join("overlay.ply"))?;
    if overlay.is_empty() {
        return Err(AppError::runtime(
            "no map points were tagged by any detection; cannot rasterize",
        ));
    }
    let raster = rasterize_overlay(&overlay, cfg.raster_resolution, anchor)?;
    write_geotiff(&raster, anchor, &out_dir.join("layer.tif"))?;
    write_kml(
        &overlay,
        anchor,
        cfg.kml_cluster_radius,
        &out_dir.join("placemarks.kml"),
    )?;
    Ok(overlay)
}

pub fn run(args: GeotagArgs, mut config: PipelineConfig) -> Result<(), AppError> {
    for p in [&args.map, &args.trajectory, &args.detections, &args.camera] {
        require_file(p)?;
    }
    if let Some(v) = args.max_range {
        config.geotag.max_range = v;
    }
    config.validate()?;

    let map = read_ply(&args.map)?;
    let traj = read_trajectory(&args.trajectory)?;
    let detections = read_detections(&args.detections)?;
    let camera = CameraModel::read_json(&args.camera)?;
    let anchor = read_anchor(&args.anchor_file)?;
    ensure_dir(&args.out)?;

    let overlay = geotag_outputs(
        &map,
        &traj,
        &detections,
        &camera,
        &anchor,
        &config.geotag,
        &args.out,
    )?;
    println!(
        "geotag: {} points tagged from {} detections ({} skipped) -> {}",
        overlay.len(),
        detections.len(),
        overlay.skipped_detections,
        args.out.display()
    );
    Ok(())
}
