//! Subcommand implementations.

pub mod align;
pub mod corrupt;
pub mod eval;
pub mod fields;
pub mod geotag;
pub mod pgo;
pub mod pipeline;
pub mod synth;

use std::path::Path;

use understory::geom::GeoAnchor;
use understory::pgo::{GnssMode, RobustKernel};

use crate::config::PgoConfig;
use crate::AppError;

/// Fail early with the offending path in the message.
pub fn require_file(path: &Path) -> Result<(), AppError> {
    if !path.is_file() {
        return Err(AppError::runtime(format!(
            "missing input file: {}",
            path.display()
        )));
    }
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(path)
        .map_err(|e| AppError::runtime(format!("cannot create {}: {e}", path.display())))
}

pub fn read_anchor(path: &Path) -> Result<GeoAnchor, AppError> {
    require_file(path)?;
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| AppError::runtime(format!("bad anchor file {}: {e}", path.display())))
}

pub fn write_anchor(anchor: &GeoAnchor, path: &Path) -> Result<(), AppError> {
    std::fs::write(path, serde_json::to_string_pretty(anchor).expect("anchor serializes"))?;
    Ok(())
}

pub fn parse_gnss_mode(mode: &str, cfg: &PgoConfig) -> Result<GnssMode, AppError> {
    match mode {
        "none" => Ok(GnssMode::None),
        "constant" => Ok(GnssMode::ConstantScaling {
            sigma: cfg.sigma_constant,
        }),
        "covariance" => Ok(GnssMode::CovarianceAware),
        other => Err(AppError::usage(format!(
            "unknown GNSS mode {other:?}; expected none, constant, or covariance"
        ))),
    }
}

pub fn parse_kernel(kernel: &str, delta: f64) -> Result<RobustKernel, AppError> {
    match kernel {
        "squared" => Ok(RobustKernel::Squared),
        "huber" => RobustKernel::huber(delta).map_err(|e| AppError::usage(e.to_string())),
        other => Err(AppError::usage(format!(
            "unknown kernel {other:?}; expected squared or huber"
        ))),
    }
}
