//! `pipeline`: chain pose-graph fusion, field construction, alignment,
//! geotagging, and evaluation over a scene directory, with a
//! reproducibility manifest at the end.

use std::path::Path;

use serde::Serialize;

use understory::align::{align_multistart, vertical_align, NmiConfig};
use understory::eval::{ate, AlignMode};
use understory::geotag::CameraModel;
use understory::io::{read_detections, read_gnss, read_ply, read_trajectory, write_trajectory};
use understory::pgo::{build_graph, optimize, BuildConfig};

use crate::commands::align::{build_alignment_fields, region_from_config};
use crate::commands::geotag::geotag_outputs;
use crate::commands::{ensure_dir, parse_gnss_mode, parse_kernel, read_anchor, require_file};
use crate::config::PipelineConfig;
use crate::manifest::Manifest;
use crate::{AppError, PipelineArgs};

#[derive(Serialize)]
struct AlignmentReport {
    tx: f64,
    ty: f64,
    psi_deg: f64,
    z_offset: f64,
    nmi: f64,
}

#[derive(Serialize)]
struct Report {
    pgo_nodes: usize,
    pgo_gnss_factors: usize,
    pgo_final_cost: f64,
    trunks_extracted: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    alignment: Option<AlignmentReport>,
    overlay_points: usize,
    skipped_detections: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    ate_fused_mean_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ate_fused_std_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ate_odometry_mean_m: Option<f64>,
}

pub fn run(args: PipelineArgs, mut config: PipelineConfig) -> Result<(), AppError> {
    if let Some(seed) = args.seed {
        config.align.seed = seed;
        config.synth.seed = seed;
    }
    config.validate()?;
    let scene_dir = args
        .scene
        .clone()
        .or_else(|| config.paths.scene_dir.clone())
        .ok_or_else(|| AppError::usage("no scene directory: pass --scene or set paths.scene_dir"))?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.paths.out_dir.clone())
        .ok_or_else(|| AppError::usage("no output directory: pass --out or set paths.out_dir"))?;
    let scene = |name: &str| scene_dir.join(name);
    for name in ["odometry.csv", "gnss.csv", "terrestrial.ply", "anchor.json"] {
        require_file(&scene(name))?;
    }
    ensure_dir(&out_dir)?;
    let out = |name: &str| out_dir.join(name);

    let mut manifest = Manifest::new("pipeline", config.align.seed, &config);
    let mut record_in = |p: &Path| manifest.record_input(p);

    // Stage 1: pose-graph fusion.
    let anchor = read_anchor(&scene("anchor.json"))?;
    let odometry = read_trajectory(&scene("odometry.csv"))?;
    let (gnss, _) = read_gnss(&scene("gnss.csv"), Some(anchor))?;
    record_in(&scene("odometry.csv"))?;
    record_in(&scene("gnss.csv"))?;
    record_in(&scene("anchor.json"))?;
    let mode = parse_gnss_mode(&config.pgo.mode, &config.pgo)?;
    let kernel = parse_kernel(&config.pgo.kernel, config.pgo.delta)?;
    let graph = build_graph(&odometry, &gnss, mode, kernel, &BuildConfig::default())?;
    let pgo_report = optimize(&graph)?;
    write_trajectory(&pgo_report.nodes, &out("fused.csv"))?;

    // Stage 2 + 3: likelihood fields and optional alignment.
    let terrestrial = read_ply(&scene("terrestrial.ply"))?;
    record_in(&scene("terrestrial.ply"))?;
    let mut alignment = None;
    let mut trunks_extracted = 0usize;
    let aerial_path = scene("aerial.ply");
    if !args.no_align && aerial_path.is_file() {
        let aerial = read_ply(&aerial_path)?;
        record_in(&aerial_path)?;
        let (la, lt, trunks) = build_alignment_fields(&aerial, &terrestrial, &config.fields)?;
        trunks_extracted = trunks.len();
        let region = region_from_config(&config.align)?;
        let nmi_cfg = NmiConfig {
            bins: config.align.bins,
            min_overlap_fraction: config.align.min_overlap_fraction,
        };
        let mut result = align_multistart(
            &la,
            &lt,
            &region,
            config.align.starts,
            &nmi_cfg,
            config.align.seed,
        )?;
        result.z_offset = vertical_align(&aerial, &terrestrial, &result.theta)?;
        alignment = Some(AlignmentReport {
            tx: result.theta.tx,
            ty: result.theta.ty,
            psi_deg: result.theta.psi.to_degrees(),
            z_offset: result.z_offset,
            nmi: result.objective,
        });
    }

    // Stage 4: geotagging against the fused trajectory.
    let detections = read_detections(&scene("detections.jsonl"))?;
    let camera = CameraModel::read_json(&scene("camera.json"))?;
    record_in(&scene("detections.jsonl"))?;
    record_in(&scene("camera.json"))?;
    let overlay = geotag_outputs(
        &terrestrial,
        &pgo_report.nodes,
        &detections,
        &camera,
        &anchor,
        &config.geotag,
        &out_dir,
    )?;

    // Stage 5: evaluation against ground truth when available.
    let truth_path = scene("traj_truth.csv");
    let (mut ate_fused_mean, mut ate_fused_std, mut ate_odo_mean) = (None, None, None);
    if truth_path.is_file() {
        let truth = read_trajectory(&truth_path)?;
        record_in(&truth_path)?;
        if let Ok(r) = ate(&pgo_report.nodes, &truth, AlignMode::None) {
            ate_fused_mean = Some(r.mean);
            ate_fused_std = Some(r.std);
        }
        if let Ok(r) = ate(&odometry, &truth, AlignMode::None) {
            ate_odo_mean = Some(r.mean);
        }
    }

    let report = Report {
        pgo_nodes: pgo_report.nodes.len(),
        pgo_gnss_factors: graph.gnss_factors.len(),
        pgo_final_cost: pgo_report.final_cost,
        trunks_extracted,
        alignment,
        overlay_points: overlay.len(),
        skipped_detections: overlay.skipped_detections,
        ate_fused_mean_m: ate_fused_mean,
        ate_fused_std_m: ate_fused_std,
        ate_odometry_mean_m: ate_odo_mean,
    };
    std::fs::write(
        out("report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;

    for name in [
        "fused.csv",
        "overlay.ply",
        "layer.tif",
        "placemarks.kml",
        "report.json",
    ] {
        manifest.record_output(&out(name))?;
    }
    manifest.write(&out("manifest.json"))?;

    println!(
        "pipeline: fused {} poses, tagged {} points{} -> {}",
        report.pgo_nodes,
        report.overlay_points,
        report
            .ate_fused_mean_m
            .map(|m| format!(", ATE {m:.3} m"))
            .unwrap_or_default(),
        out_dir.display()
    );
    Ok(())
}
