//! Deterministic synthetic forests, trajectories, and sensor streams.
//!
//! Everything here is a pure function of its spec and seed, so the
//! acceptance benchmarks have exact ground truth: tree positions, the
//! true trajectory, and the true aerial-terrestrial alignment.
//!
//! Scene model: ground is a plane rising along +x at `ground_slope`; each
//! tree is a vertical cylinder trunk plus an anisotropic Gaussian crown
//! blob whose amplitude is the tree height. The aerial cloud samples the
//! canopy surface (max over blobs) plus sparsely visible ground in gaps;
//! the terrestrial cloud samples trunks, understory, ground, and only the
//! low crown skirt, so the two views share little beyond the terrain.

use nalgebra::{Matrix3, UnitQuaternion, Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::fields::TrunkSet;
use crate::geom::{Frame, Point3, PointCloud, Se2Transform, Se3Pose};
use crate::geotag::{CameraModel, Detection, ProjectedPoint};
use crate::pgo::GnssFix;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("could not place {placed} of {requested} trees at min spacing {spacing:.2} m in a {w:.0}x{h:.0} m extent")]
    ExtentTooSmall {
        placed: usize,
        requested: usize,
        spacing: f64,
        w: f64,
        h: f64,
    },
    #[error("invalid spec: {0}")]
    BadSpec(String),
}

/// Forest generation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestSpec {
    /// Extent in meters (x, y).
    pub extent: (f64, f64),
    pub n_trees: usize,
    /// Trunk radius range, meters.
    pub trunk_radius: (f64, f64),
    /// Crown radius range, meters (sampled per axis for anisotropy).
    pub crown_radius: (f64, f64),
    /// Tree height range, meters.
    pub height: (f64, f64),
    /// Ground rise per meter of +x.
    pub ground_slope: f64,
    /// Sampling density, points per square meter.
    pub point_density: f64,
    pub seed: u64,
}

impl Default for ForestSpec {
    fn default() -> Self {
        Self {
            extent: (100.0, 100.0),
            n_trees: 50,
            trunk_radius: (0.12, 0.25),
            crown_radius: (2.0, 3.5),
            height: (8.0, 15.0),
            ground_slope: 0.0,
            point_density: 50.0,
            seed: 0,
        }
    }
}

impl ForestSpec {
    fn validate(&self) -> Result<(), SynthError> {
        let ordered = |r: (f64, f64)| r.0 > 0.0 && r.0 <= r.1;
        if self.n_trees == 0 {
            return Err(SynthError::BadSpec("n_trees must be at least 1".into()));
        }
        if !ordered(self.trunk_radius) || !ordered(self.crown_radius) || !ordered(self.height) {
            return Err(SynthError::BadSpec("ranges must be positive and ordered".into()));
        }
        if self.extent.0 <= 0.0 || self.extent.1 <= 0.0 || self.point_density <= 0.0 {
            return Err(SynthError::BadSpec("extent and density must be positive".into()));
        }
        Ok(())
    }
}

/// One generated tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tree {
    pub center: Vector2<f64>,
    pub trunk_radius: f64,
    pub crown_rx: f64,
    pub crown_ry: f64,
    pub height: f64,
}

impl Tree {
    /// Crown blob height above ground at a horizontal offset.
    pub fn crown_height(&self, dx: f64, dy: f64) -> f64 {
        self.height
            * (-(dx * dx / (2.0 * self.crown_rx * self.crown_rx)
                + dy * dy / (2.0 * self.crown_ry * self.crown_ry)))
                .exp()
    }
}

/// A synthetic forest with full ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: ForestSpec,
    pub trees: Vec<Tree>,
    pub aerial_cloud: PointCloud,
    pub terrestrial_cloud: PointCloud,
    pub trunk_truth: TrunkSet,
    pub ground_truth_traj: Vec<Se3Pose>,
    /// SE(2) transform aligning the terrestrial frame to the aerial frame.
    pub true_alignment: Se2Transform,
}

impl SyntheticScene {
    /// Terrain height at (x, y).
    pub fn ground_z(&self, x: f64, _y: f64) -> f64 {
        self.spec.ground_slope * x
    }

    /// Canopy surface height above ground (max over crown blobs).
    pub fn canopy_height(&self, x: f64, y: f64) -> f64 {
        self.trees
            .iter()
            .map(|t| t.crown_height(x - t.center.x, y - t.center.y))
            .fold(0.0, f64::max)
    }

    /// Displace the terrestrial cloud by `perturbation`; the recorded true
    /// alignment becomes its inverse (the transform that re-aligns the
    /// terrestrial map to the aerial map).
    pub fn perturb_terrestrial(&self, perturbation: &Se2Transform) -> SyntheticScene {
        let mut out = self.clone();
        out.terrestrial_cloud = self.terrestrial_cloud.transformed_se2(perturbation);
        out.true_alignment = perturbation.inverse().compose(&self.true_alignment);
        out
    }
}

/// Minimum canopy height treated as canopy rather than a gap, meters.
const CANOPY_CUTOFF: f64 = 0.2;
/// Probability that ground is visible from above in a canopy gap.
const AERIAL_GROUND_VISIBILITY: f64 = 0.05;
/// Probability that an aerial pulse penetrates the canopy to the ground.
/// High enough that the 5th-percentile ground rule sees a few returns in
/// every occupied cell at typical densities.
const CANOPY_PENETRATION: f64 = 0.10;
/// Terrestrial crown-skirt sampling density relative to `point_density`.
const SKIRT_DENSITY_FACTOR: f64 = 0.015;
/// Terrestrial ground sampling density relative to `point_density`
/// (oblique grazing returns are sparser than nadir ones).
const TERRESTRIAL_GROUND_FACTOR: f64 = 0.5;
/// Understory density relative to `point_density`.
const UNDERSTORY_DENSITY_FACTOR: f64 = 0.2;
/// Trunk bark sampling density relative to `point_density`.
const BARK_DENSITY_FACTOR: f64 = 2.0;
/// Fraction of tree height visible from below.
const TERRESTRIAL_CROWN_LIMIT: f64 = 0.7;
/// Surface sampling noise, meters.
const SURFACE_NOISE: f64 = 0.02;

fn sub_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Generate a forest scene: Poisson-disk tree placement, then aerial and
/// terrestrial clouds sampled from the analytic surface model. Exact under
/// `spec.seed`.
pub fn generate_forest(spec: &ForestSpec) -> Result<SyntheticScene, SynthError> {
    spec.validate()?;
    let min_spacing = 2.0 * spec.crown_radius.1 * 0.6;
    let margin = spec.crown_radius.1.min(spec.extent.0 / 4.0);

    // Dart-throwing Poisson disk.
    let mut place_rng = sub_rng(spec.seed, 1);
    let mut centers: Vec<Vector2<f64>> = Vec::with_capacity(spec.n_trees);
    let mut attempts = 0usize;
    let max_attempts = 2000 * spec.n_trees;
    while centers.len() < spec.n_trees {
        if attempts >= max_attempts {
            return Err(SynthError::ExtentTooSmall {
                placed: centers.len(),
                requested: spec.n_trees,
                spacing: min_spacing,
                w: spec.extent.0,
                h: spec.extent.1,
            });
        }
        attempts += 1;
        let c = Vector2::new(
            margin + place_rng.random::<f64>() * (spec.extent.0 - 2.0 * margin).max(0.0),
            margin + place_rng.random::<f64>() * (spec.extent.1 - 2.0 * margin).max(0.0),
        );
        if centers.iter().all(|p| (p - c).norm() >= min_spacing) {
            centers.push(c);
        }
    }

    let mut attr_rng = sub_rng(spec.seed, 2);
    let sample_range = |rng: &mut ChaCha8Rng, r: (f64, f64)| r.0 + rng.random::<f64>() * (r.1 - r.0);
    let trees: Vec<Tree> = centers
        .iter()
        .map(|&center| Tree {
            center,
            trunk_radius: sample_range(&mut attr_rng, spec.trunk_radius),
            crown_rx: sample_range(&mut attr_rng, spec.crown_radius),
            crown_ry: sample_range(&mut attr_rng, spec.crown_radius),
            height: sample_range(&mut attr_rng, spec.height),
        })
        .collect();

    let ground = |x: f64| spec.ground_slope * x;
    let canopy = |x: f64, y: f64| -> f64 {
        trees
            .iter()
            .map(|t| t.crown_height(x - t.center.x, y - t.center.y))
            .fold(0.0, f64::max)
    };
    let area = spec.extent.0 * spec.extent.1;
    let noise = Normal::new(0.0, SURFACE_NOISE).expect("valid normal");

    // Aerial: canopy surface plus sparse ground in gaps.
    let mut air_rng = sub_rng(spec.seed, 3);
    let n_samples = (spec.point_density * area) as usize;
    let mut aerial = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let x = air_rng.random::<f64>() * spec.extent.0;
        let y = air_rng.random::<f64>() * spec.extent.1;
        let c = canopy(x, y);
        if c > CANOPY_CUTOFF {
            // Most pulses return from the canopy surface; a few punch
            // through to the ground, which is what makes terrain under
            // crowns recoverable from the aerial view.
            let z = if air_rng.random::<f64>() < CANOPY_PENETRATION {
                ground(x) + noise.sample(&mut air_rng).abs()
            } else {
                ground(x) + c + noise.sample(&mut air_rng)
            };
            aerial.push(Point3::with_intensity(x, y, z, 30.0 + air_rng.random::<f64>() * 50.0));
        } else if air_rng.random::<f64>() < AERIAL_GROUND_VISIBILITY {
            let z = ground(x) + noise.sample(&mut air_rng).abs();
            aerial.push(Point3::with_intensity(x, y, z, 30.0 + air_rng.random::<f64>() * 50.0));
        }
    }

    // Terrestrial: ground + trunks + understory + low crown skirt.
    let mut ter_rng = sub_rng(spec.seed, 4);
    let mut terrestrial = Vec::new();
    let n_ground = (TERRESTRIAL_GROUND_FACTOR * spec.point_density * area) as usize;
    for _ in 0..n_ground {
        let x = ter_rng.random::<f64>() * spec.extent.0;
        let y = ter_rng.random::<f64>() * spec.extent.1;
        let z = ground(x) + noise.sample(&mut ter_rng).abs();
        terrestrial.push(Point3::with_intensity(x, y, z, 30.0 + ter_rng.random::<f64>() * 50.0));
    }
    for t in &trees {
        let trunk_height = TERRESTRIAL_CROWN_LIMIT * t.height;
        let bark_area = std::f64::consts::TAU * t.trunk_radius * trunk_height;
        // Trunks are close-range targets for an under-canopy scanner and
        // come back denser than the nominal areal density.
        let n_trunk = (BARK_DENSITY_FACTOR * spec.point_density * bark_area).ceil() as usize;
        for _ in 0..n_trunk {
            let ang = ter_rng.random::<f64>() * std::f64::consts::TAU;
            let zz = ter_rng.random::<f64>() * trunk_height;
            let x = t.center.x + t.trunk_radius * ang.cos();
            let y = t.center.y + t.trunk_radius * ang.sin();
            terrestrial.push(Point3::with_intensity(
                x,
                y,
                ground(t.center.x) + zz,
                30.0 + ter_rng.random::<f64>() * 50.0,
            ));
        }
        let skirt_samples =
            (SKIRT_DENSITY_FACTOR * spec.point_density * 16.0 * t.crown_rx * t.crown_ry) as usize;
        for _ in 0..skirt_samples {
            let dx = (ter_rng.random::<f64>() * 4.0 - 2.0) * t.crown_rx;
            let dy = (ter_rng.random::<f64>() * 4.0 - 2.0) * t.crown_ry;
            let b = t.crown_height(dx, dy);
            if b > CANOPY_CUTOFF && b <= TERRESTRIAL_CROWN_LIMIT * t.height {
                let x = t.center.x + dx;
                let y = t.center.y + dy;
                terrestrial.push(Point3::with_intensity(
                    x,
                    y,
                    ground(x) + b,
                    30.0 + ter_rng.random::<f64>() * 50.0,
                ));
            }
        }
    }
    let n_under = (UNDERSTORY_DENSITY_FACTOR * spec.point_density * area) as usize;
    for _ in 0..n_under {
        let x = ter_rng.random::<f64>() * spec.extent.0;
        let y = ter_rng.random::<f64>() * spec.extent.1;
        let z = ground(x) + ter_rng.random::<f64>() * 0.9;
        terrestrial.push(Point3::with_intensity(x, y, z, 30.0 + ter_rng.random::<f64>() * 50.0));
    }

    Ok(SyntheticScene {
        spec: *spec,
        trunk_truth: TrunkSet::new(centers),
        trees,
        aerial_cloud: PointCloud::new(aerial, Frame::Map),
        terrestrial_cloud: PointCloud::new(terrestrial, Frame::Map),
        ground_truth_traj: Vec::new(),
        true_alignment: Se2Transform::identity(),
    })
}

/// Odometry and GNSS noise model for trajectory generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdomNoiseSpec {
    /// Along-track translation bias per meter of travel.
    pub trans_bias_per_m: f64,
    /// White translation noise per meter of travel (per axis sigma).
    pub trans_noise_per_m: f64,
    /// Yaw bias per meter of travel, radians.
    pub yaw_bias_per_m: f64,
    /// White yaw noise per meter of travel, radians.
    pub yaw_noise_per_m: f64,
    /// Horizontal sigma of good GNSS fixes, meters (vertical is half).
    pub gnss_sigma: f64,
    /// Horizontal sigma of degraded fixes, meters.
    pub gnss_degraded_sigma: f64,
    /// Fraction of fixes that are degraded (canopy effects).
    pub gnss_degraded_fraction: f64,
}

impl OdomNoiseSpec {
    pub fn noiseless() -> Self {
        Self {
            trans_bias_per_m: 0.0,
            trans_noise_per_m: 0.0,
            yaw_bias_per_m: 0.0,
            yaw_noise_per_m: 0.0,
            gnss_sigma: 0.0,
            gnss_degraded_sigma: 0.0,
            gnss_degraded_fraction: 0.0,
        }
    }
}

/// Trajectory generation output.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub truth: Vec<Se3Pose>,
    pub odometry: Vec<Se3Pose>,
    pub gnss: Vec<GnssFix>,
}

const WALK_SPEED: f64 = 1.5; // m/s
const POSE_RATE: f64 = 10.0; // Hz
const GNSS_PERIOD: f64 = 1.0; // s
const SENSOR_HEIGHT: f64 = 1.5; // m above ground

/// Generate a lawn-mower ground-truth path of the requested length inside
/// the scene, odometry drifted per the noise spec, and 1 Hz GNSS with
/// honestly recorded covariance. Deterministic under `seed`.
pub fn generate_trajectory(
    scene: &SyntheticScene,
    length: f64,
    noise: &OdomNoiseSpec,
    seed: u64,
) -> TrajectorySample {
    let (w, h) = scene.spec.extent;
    let margin = (0.1 * w.min(h)).clamp(2.0, 10.0);
    let row_len = w - 2.0 * margin;
    let n_rows = ((length / row_len).ceil() as usize).max(2);
    let row_gap = (h - 2.0 * margin) / (n_rows - 1) as f64;

    // Lawn-mower polyline.
    let mut waypoints: Vec<Vector2<f64>> = Vec::new();
    for r in 0..n_rows {
        let y = margin + r as f64 * row_gap;
        let (x0, x1) = if r % 2 == 0 {
            (margin, w - margin)
        } else {
            (w - margin, margin)
        };
        waypoints.push(Vector2::new(x0, y));
        waypoints.push(Vector2::new(x1, y));
    }

    // Walk the polyline at constant speed.
    let dt = 1.0 / POSE_RATE;
    let mut truth = Vec::new();
    let mut seg = 0usize;
    let mut seg_pos = 0.0f64;
    let mut traveled = 0.0f64;
    let mut t = 0.0f64;
    while traveled <= length && seg + 1 < waypoints.len() {
        let a = waypoints[seg];
        let b = waypoints[seg + 1];
        let seg_len = (b - a).norm();
        if seg_pos > seg_len {
            seg_pos -= seg_len;
            seg += 1;
            continue;
        }
        let dir = (b - a) / seg_len;
        let p = a + dir * seg_pos;
        let yaw = dir.y.atan2(dir.x);
        truth.push(Se3Pose::new(
            t,
            Vector3::new(p.x, p.y, scene.ground_z(p.x, p.y) + SENSOR_HEIGHT),
            UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
        ));
        t += dt;
        seg_pos += WALK_SPEED * dt;
        traveled += WALK_SPEED * dt;
    }
    if truth.len() < 2 {
        truth.push(Se3Pose::identity(0.0));
        truth.push(Se3Pose::new(
            dt,
            Vector3::new(WALK_SPEED * dt, 0.0, SENSOR_HEIGHT),
            UnitQuaternion::identity(),
        ));
    }

    // Odometry: integrate drifted relative poses.
    let mut odo_rng = sub_rng(seed, 11);
    let trans_noise = Normal::new(0.0, 1.0).expect("valid normal");
    let mut odometry = vec![truth[0]];
    for pair in truth.windows(2) {
        let mut rel = pair[0].between(&pair[1]);
        let step = rel.translation.norm();
        if noise.trans_bias_per_m != 0.0 || noise.trans_noise_per_m != 0.0 {
            let sigma = noise.trans_noise_per_m * step;
            rel.translation.x += noise.trans_bias_per_m * step + trans_noise.sample(&mut odo_rng) * sigma;
            rel.translation.y += trans_noise.sample(&mut odo_rng) * sigma;
            rel.translation.z += trans_noise.sample(&mut odo_rng) * sigma * 0.3;
        }
        if noise.yaw_bias_per_m != 0.0 || noise.yaw_noise_per_m != 0.0 {
            let dyaw = noise.yaw_bias_per_m * step
                + trans_noise.sample(&mut odo_rng) * noise.yaw_noise_per_m * step;
            rel.rotation *= UnitQuaternion::from_euler_angles(0.0, 0.0, dyaw);
        }
        let last = *odometry.last().unwrap();
        odometry.push(last.compose(&rel));
    }

    // GNSS at 1 Hz on the truth, noise drawn from the recorded covariance.
    let mut gnss_rng = sub_rng(seed, 12);
    let mut gnss = Vec::new();
    let t_end = truth.last().unwrap().t;
    let mut tg = truth[0].t;
    while tg <= t_end {
        if let Ok(pose) = crate::geom::interpolate_pose(&truth, tg) {
            let degraded = gnss_rng.random::<f64>() < noise.gnss_degraded_fraction;
            let sigma = if degraded {
                noise.gnss_degraded_sigma
            } else {
                noise.gnss_sigma
            };
            let mut p = pose.translation;
            if sigma > 0.0 {
                p.x += trans_noise.sample(&mut gnss_rng) * sigma;
                p.y += trans_noise.sample(&mut gnss_rng) * sigma;
                p.z += trans_noise.sample(&mut gnss_rng) * sigma * 0.5;
            }
            let s = sigma.max(1e-6);
            let cov = Matrix3::from_diagonal(&Vector3::new(s * s, s * s, 0.25 * s * s));
            gnss.push(GnssFix::new(tg, p, cov).expect("synth covariance is SPD"));
        }
        tg += GNSS_PERIOD;
    }

    TrajectorySample {
        truth,
        odometry,
        gnss,
    }
}

/// Forward-looking synthetic camera matching the payload geometry: camera
/// z along sensor +x, image x to the right (-y), image y down (-z).
pub fn default_camera() -> CameraModel {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(Matrix3::new(
        0.0, -1.0, 0.0, //
        0.0, 0.0, -1.0, //
        1.0, 0.0, 0.0,
    ));
    let iso = nalgebra::Isometry3::from_parts(
        Vector3::zeros().into(),
        UnitQuaternion::from_rotation_matrix(&rot),
    );
    CameraModel::new(500.0, 500.0, 320.0, 240.0, 640, 480, iso).expect("valid camera")
}

/// Synthesize detections by projecting tree trunks into the camera along
/// the trajectory; one pass every `frame_period` seconds. Used by the
/// end-to-end pipeline demo where no real detector runs.
pub fn synth_detections(
    scene: &SyntheticScene,
    traj: &[Se3Pose],
    cam: &CameraModel,
    frame_period: f64,
    seed: u64,
) -> Vec<Detection> {
    let mut rng = sub_rng(seed, 21);
    let mut out = Vec::new();
    if traj.is_empty() {
        return out;
    }
    let mut t = traj[0].t;
    let t_end = traj.last().unwrap().t;
    let mut frame = 0usize;
    while t <= t_end {
        let Ok(pose) = crate::geom::interpolate_pose(traj, t) else {
            t += frame_period;
            continue;
        };
        for tree in &scene.trees {
            let gz = scene.ground_z(tree.center.x, tree.center.y);
            let dist = (Vector3::new(tree.center.x, tree.center.y, gz + 2.0) - pose.translation)
                .norm();
            if !(2.0..=35.0).contains(&dist) {
                continue;
            }
            // Project the trunk's vertical extent to form a bbox.
            let mut lo = (f64::MAX, f64::MAX);
            let mut hi = (f64::MIN, f64::MIN);
            let mut ok = true;
            for (dx, dy) in [(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)] {
                for z in [gz + 0.3, gz + 0.7 * tree.height] {
                    let p = Vector3::new(
                        tree.center.x + dx * tree.trunk_radius * 2.0,
                        tree.center.y + dy * tree.trunk_radius * 2.0,
                        z,
                    );
                    match crate::geotag::project_point(&p, &pose, cam) {
                        ProjectedPoint::Pixel { u, v, .. } => {
                            lo = (lo.0.min(u), lo.1.min(v));
                            hi = (hi.0.max(u), hi.1.max(v));
                        }
                        ProjectedPoint::BehindCamera => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    break;
                }
            }
            if !ok {
                continue;
            }
            let (bw, bh) = (hi.0 - lo.0, hi.1 - lo.1);
            if bw < 4.0
                || bh < 20.0
                || lo.0 < 0.0
                || lo.1 < 0.0
                || hi.0 > cam.width as f64
                || hi.1 > cam.height as f64
            {
                continue;
            }
            out.push(Detection {
                t,
                image: format!("frame_{frame:05}.jpg"),
                class: "tree_of_heaven".into(),
                conf: 0.4 + rng.random::<f64>() * 0.55,
                bbox: [lo.0, lo.1, bw, bh],
            });
        }
        frame += 1;
        t += frame_period;
    }
    out
}
