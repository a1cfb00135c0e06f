//! `synth forest`: generate a scene directory with clouds, trajectories,
//! GNSS, detections, camera calibration, and ground truth.

use std::io::Write;

use understory::geom::GeoAnchor;
use understory::io::{write_detections, write_gnss, write_ply, write_trajectory};
use understory::synth::{
    default_camera, generate_forest, generate_trajectory, synth_detections, ForestSpec,
    OdomNoiseSpec,
};

use crate::commands::{ensure_dir, write_anchor};
use crate::config::PipelineConfig;
use crate::manifest::Manifest;
use crate::{AppError, SynthForestArgs};

/// Seconds between synthetic camera frames.
const FRAME_PERIOD: f64 = 2.0;

pub fn run(args: SynthForestArgs, mut config: PipelineConfig) -> Result<(), AppError> {
    let s = &mut config.synth;
    if let Some(v) = args.trees {
        s.trees = v;
    }
    if let Some(v) = &args.extent {
        s.extent = [v[0], v[1]];
    }
    if let Some(v) = args.density {
        s.density = v;
    }
    if let Some(v) = args.slope {
        s.slope = v;
    }
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = args.traj_length {
        s.traj_length = v;
    }
    config.validate()?;
    let s = &config.synth;

    let spec = ForestSpec {
        extent: (s.extent[0], s.extent[1]),
        n_trees: s.trees,
        ground_slope: s.slope,
        point_density: s.density,
        seed: s.seed,
        ..ForestSpec::default()
    };
    let noise = OdomNoiseSpec {
        trans_bias_per_m: s.odom_bias_per_m,
        trans_noise_per_m: s.odom_noise_per_m,
        yaw_bias_per_m: 0.0,
        yaw_noise_per_m: s.yaw_noise_per_m,
        gnss_sigma: s.gnss_sigma,
        gnss_degraded_sigma: s.gnss_degraded_sigma,
        gnss_degraded_fraction: s.gnss_degraded_fraction,
    };
    let anchor = GeoAnchor::new(s.anchor_lat, s.anchor_lon, s.anchor_alt)
        .map_err(|e| AppError::usage(e.to_string()))?;

    let scene = generate_forest(&spec).map_err(|e| AppError::runtime(e.to_string()))?;
    let sample = generate_trajectory(&scene, s.traj_length, &noise, s.seed);
    let camera = default_camera();
    let detections = synth_detections(&scene, &sample.truth, &camera, FRAME_PERIOD, s.seed);

    ensure_dir(&args.out)?;
    let out = |name: &str| args.out.join(name);
    write_ply(&scene.aerial_cloud, &out("aerial.ply"))?;
    write_ply(&scene.terrestrial_cloud, &out("terrestrial.ply"))?;
    write_trajectory(&sample.truth, &out("traj_truth.csv"))?;
    write_trajectory(&sample.odometry, &out("odometry.csv"))?;
    write_gnss(&sample.gnss, &anchor, &out("gnss.csv"))?;
    write_detections(&detections, &out("detections.jsonl"))?;
    camera.write_json(&out("camera.json"))?;
    write_anchor(&anchor, &out("anchor.json"))?;
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(out("trunks.csv"))?);
        writeln!(w, "x,y")?;
        for p in &scene.trunk_truth.positions {
            writeln!(w, "{},{}", p.x, p.y)?;
        }
    }

    let mut manifest = Manifest::new("synth forest", s.seed, &config);
    for name in [
        "aerial.ply",
        "terrestrial.ply",
        "traj_truth.csv",
        "odometry.csv",
        "gnss.csv",
        "detections.jsonl",
        "camera.json",
        "anchor.json",
        "trunks.csv",
    ] {
        manifest.record_output(&out(name))?;
    }
    manifest.write(&out("manifest.json"))?;

    println!(
        "scene: {} trees, {} aerial / {} terrestrial points, {} poses, {} fixes, {} detections -> {}",
        scene.trees.len(),
        scene.aerial_cloud.len(),
        scene.terrestrial_cloud.len(),
        sample.truth.len(),
        sample.gnss.len(),
        detections.len(),
        args.out.display()
    );
    Ok(())
}
