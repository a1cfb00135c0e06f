//! `eval ate` / `eval mre`: metric reports as JSON.

use std::io::BufRead;
use std::path::Path;

use nalgebra::UnitQuaternion;
use serde::Serialize;

use understory::eval::{ate, mre_dbh, AlignMode};
use understory::geom::Se3Pose;
use understory::io::{read_dbh_records, read_gnss, read_trajectory};

use crate::commands::require_file;
use crate::{AppError, EvalAteArgs, EvalMreArgs};

#[derive(Serialize)]
struct AteJson {
    mean_m: f64,
    /// Population (not sample) standard deviation.
    std_m: f64,
    std_kind: &'static str,
    n_matched: usize,
    align_mode: &'static str,
}

#[derive(Serialize)]
struct MreJson {
    mre: f64,
    n_trees: usize,
}

/// A reference may be a trajectory CSV or a GNSS CSV (positions only);
/// sniff the header.
fn read_reference(path: &Path) -> Result<Vec<Se3Pose>, AppError> {
    require_file(path)?;
    let first_line = {
        let f = std::fs::File::open(path)?;
        let mut r = std::io::BufReader::new(f);
        let mut line = String::new();
        r.read_line(&mut line)?;
        line
    };
    if first_line.trim_end().starts_with("t,lat,lon,alt") {
        let (fixes, _) = read_gnss(path, None)?;
        Ok(fixes
            .iter()
            .map(|f| Se3Pose::new(f.t, f.position, UnitQuaternion::identity()))
            .collect())
    } else {
        Ok(read_trajectory(path)?)
    }
}

fn emit(json: &impl Serialize, out: &Option<std::path::PathBuf>) -> Result<(), AppError> {
    let text = serde_json::to_string_pretty(json).expect("report serializes");
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

pub fn run_ate(args: EvalAteArgs) -> Result<(), AppError> {
    require_file(&args.est)?;
    let est = read_trajectory(&args.est)?;
    let reference = read_reference(&args.reference)?;
    let mode = if args.umeyama {
        AlignMode::Umeyama
    } else {
        AlignMode::None
    };
    let report = ate(&est, &reference, mode)?;
    emit(
        &AteJson {
            mean_m: report.mean,
            std_m: report.std,
            std_kind: "population",
            n_matched: report.n_matched,
            align_mode: if args.umeyama { "umeyama" } else { "none" },
        },
        &args.out,
    )
}

pub fn run_mre(args: EvalMreArgs) -> Result<(), AppError> {
    require_file(&args.dbh)?;
    let records = read_dbh_records(&args.dbh)?;
    let mre = mre_dbh(&records)?;
    emit(
        &MreJson {
            mre,
            n_trees: records.len(),
        },
        &args.out,
    )
}
