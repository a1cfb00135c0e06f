//! TOML run configuration: one section per pipeline stage, unknown keys
//! rejected, command-line flags override file values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::AppError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub fields: FieldsConfig,
    pub align: AlignConfig,
    pub pgo: PgoConfig,
    pub geotag: GeotagConfig,
    pub synth: SynthConfig,
}


/// Input/output locations for `pipeline`; command-line flags win.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub scene_dir: Option<std::path::PathBuf>,
    pub out_dir: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldsConfig {
    /// Ground estimation cell size, meters.
    pub ground_cell: f64,
    /// Canopy height model resolution, meters.
    pub chm_resolution: f64,
    /// Likelihood field resolution, meters.
    pub field_resolution: f64,
    /// KDE bandwidth, meters.
    pub kde_bandwidth: f64,
    /// LoG scale set, meters, strictly increasing.
    pub scales: Vec<f64>,
}

impl Default for FieldsConfig {
    fn default() -> Self {
        Self {
            ground_cell: 1.0,
            chm_resolution: 0.25,
            field_resolution: 0.25,
            kde_bandwidth: 1.0,
            scales: vec![1.0, 2.0, 3.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignConfig {
    pub tx_range: [f64; 2],
    pub ty_range: [f64; 2],
    pub psi_range_deg: [f64; 2],
    pub starts: usize,
    pub bins: usize,
    pub min_overlap_fraction: f64,
    pub seed: u64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            tx_range: [-7.0, 7.0],
            ty_range: [-7.0, 7.0],
            psi_range_deg: [-30.0, 30.0],
            starts: 64,
            bins: 32,
            min_overlap_fraction: 0.3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgoConfig {
    /// GNSS integration: "none", "constant", or "covariance".
    pub mode: String,
    /// Robust kernel: "squared" or "huber".
    pub kernel: String,
    /// Huber threshold on the whitened residual norm.
    pub delta: f64,
    /// Sigma for constant-scaling mode, meters.
    pub sigma_constant: f64,
}

impl Default for PgoConfig {
    fn default() -> Self {
        Self {
            mode: "covariance".into(),
            kernel: "huber".into(),
            delta: 1.0,
            sigma_constant: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeotagConfig {
    /// Detection-to-point association range, meters.
    pub max_range: f64,
    /// Detection raster resolution, meters.
    pub raster_resolution: f64,
    /// KML placemark clustering radius, meters.
    pub kml_cluster_radius: f64,
}

impl Default for GeotagConfig {
    fn default() -> Self {
        Self {
            max_range: 40.0,
            raster_resolution: 0.5,
            kml_cluster_radius: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub trees: usize,
    pub extent: [f64; 2],
    pub density: f64,
    pub slope: f64,
    pub seed: u64,
    pub traj_length: f64,
    pub odom_bias_per_m: f64,
    pub odom_noise_per_m: f64,
    pub yaw_noise_per_m: f64,
    pub gnss_sigma: f64,
    pub gnss_degraded_sigma: f64,
    pub gnss_degraded_fraction: f64,
    pub anchor_lat: f64,
    pub anchor_lon: f64,
    pub anchor_alt: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            trees: 50,
            extent: [100.0, 100.0],
            density: 50.0,
            slope: 0.0,
            seed: 7,
            traj_length: 400.0,
            odom_bias_per_m: 0.005,
            odom_noise_per_m: 0.01,
            yaw_noise_per_m: 0.0005,
            gnss_sigma: 0.05,
            gnss_degraded_sigma: 3.0,
            gnss_degraded_fraction: 0.2,
            anchor_lat: 40.44,
            anchor_lon: -79.95,
            anchor_alt: 300.0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            AppError::usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| AppError::usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, AppError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let check = |ok: bool, msg: &str| -> Result<(), AppError> {
            if ok {
                Ok(())
            } else {
                Err(AppError::usage(format!("invalid config value: {msg}")))
            }
        };
        check(self.fields.ground_cell > 0.0, "fields.ground_cell must be positive")?;
        check(self.fields.chm_resolution > 0.0, "fields.chm_resolution must be positive")?;
        check(self.fields.field_resolution > 0.0, "fields.field_resolution must be positive")?;
        check(self.fields.kde_bandwidth > 0.0, "fields.kde_bandwidth must be positive")?;
        check(
            !self.fields.scales.is_empty()
                && self.fields.scales.windows(2).all(|w| w[0] < w[1])
                && self.fields.scales[0] > 0.0,
            "fields.scales must be positive and strictly increasing",
        )?;
        check(self.align.starts >= 1, "align.starts must be at least 1")?;
        check(self.align.bins >= 2, "align.bins must be at least 2")?;
        check(
            self.align.min_overlap_fraction > 0.0 && self.align.min_overlap_fraction <= 1.0,
            "align.min_overlap_fraction must be in (0, 1]",
        )?;
        check(self.align.tx_range[0] < self.align.tx_range[1], "align.tx_range must be ordered")?;
        check(self.align.ty_range[0] < self.align.ty_range[1], "align.ty_range must be ordered")?;
        check(
            self.align.psi_range_deg[0] < self.align.psi_range_deg[1],
            "align.psi_range_deg must be ordered",
        )?;
        check(
            matches!(self.pgo.mode.as_str(), "none" | "constant" | "covariance"),
            "pgo.mode must be none, constant, or covariance",
        )?;
        check(
            matches!(self.pgo.kernel.as_str(), "squared" | "huber"),
            "pgo.kernel must be squared or huber",
        )?;
        check(self.pgo.delta > 0.0, "pgo.delta must be positive")?;
        check(self.pgo.sigma_constant > 0.0, "pgo.sigma_constant must be positive")?;
        check(self.geotag.max_range > 0.0, "geotag.max_range must be positive")?;
        check(self.geotag.raster_resolution > 0.0, "geotag.raster_resolution must be positive")?;
        check(self.synth.trees >= 1, "synth.trees must be at least 1")?;
        Ok(())
    }
}
