//! `corrupt-gnss`: degrade a GNSS stream with spikes, dropouts, and
//! constant offsets.

use understory::io::{read_gnss, write_gnss};
use understory::pgo::{corrupt_gnss, CorruptionSpec, CovarianceMode};

use crate::commands::require_file;
use crate::config::PipelineConfig;
use crate::{AppError, CorruptArgs};

pub fn run(args: CorruptArgs, _config: PipelineConfig) -> Result<(), AppError> {
    require_file(&args.input)?;
    let covariance_mode = match args.mode.as_str() {
        "deceptive" => CovarianceMode::Deceptive,
        "honest" => CovarianceMode::HonestCovariance,
        other => {
            return Err(AppError::usage(format!(
                "unknown covariance mode {other:?}; expected deceptive or honest"
            )))
        }
    };
    if !(0.0..=1.0).contains(&args.spikes) {
        return Err(AppError::usage("spike probability must be in [0, 1]"));
    }
    let (gnss, anchor) = read_gnss(&args.input, None)?;
    let anchor =
        anchor.ok_or_else(|| AppError::runtime("GNSS file is empty; nothing to corrupt"))?;
    let spec = CorruptionSpec {
        spike_probability: args.spikes,
        dropout_rate_per_minute: args.dropouts,
        offset_segments: args.offsets,
        covariance_mode,
    };
    let corrupted = corrupt_gnss(&gnss, &spec, args.seed);
    write_gnss(&corrupted, &anchor, &args.out)?;
    println!(
        "corrupt-gnss: {} fixes in, {} out ({} dropped) -> {}",
        gnss.len(),
        corrupted.len(),
        gnss.len() - corrupted.len(),
        args.out.display()
    );
    Ok(())
}
