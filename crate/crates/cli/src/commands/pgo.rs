//! `pgo`: fuse an odometry trajectory with GNSS priors.

use understory::io::{read_gnss, read_trajectory, write_trajectory};
use understory::pgo::{build_graph, optimize, BuildConfig, GnssMode};

use crate::commands::{parse_gnss_mode, parse_kernel, read_anchor, require_file};
use crate::config::PipelineConfig;
use crate::{AppError, PgoArgs};

pub fn run(args: PgoArgs, mut config: PipelineConfig) -> Result<(), AppError> {
    require_file(&args.odometry)?;
    if let Some(v) = &args.mode {
        config.pgo.mode = v.clone();
    }
    if let Some(v) = &args.kernel {
        config.pgo.kernel = v.clone();
    }
    if let Some(v) = args.delta {
        config.pgo.delta = v;
    }
    config.validate()?;

    let odometry = read_trajectory(&args.odometry)?;
    let mode = parse_gnss_mode(&config.pgo.mode, &config.pgo)?;
    let kernel = parse_kernel(&config.pgo.kernel, config.pgo.delta)?;

    let gnss = match (&args.gnss, mode) {
        (_, GnssMode::None) | (None, _) => Vec::new(),
        (Some(path), _) => {
            require_file(path)?;
            let anchor = match &args.anchor_file {
                Some(p) => Some(read_anchor(p)?),
                None => None,
            };
            read_gnss(path, anchor)?.0
        }
    };

    let graph = build_graph(&odometry, &gnss, mode, kernel, &BuildConfig::default())?;
    let report = optimize(&graph)?;
    write_trajectory(&report.nodes, &args.out)?;
    println!(
        "pgo: {} nodes, {} GNSS factors, cost {:.6} after {} iterations -> {}",
        report.nodes.len(),
        graph.gnss_factors.len(),
        report.final_cost,
        report.iterations,
        args.out.display()
    );
    Ok(())
}
