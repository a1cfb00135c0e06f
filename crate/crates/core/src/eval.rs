//! Error metrics: absolute trajectory error, SE(2) alignment error, and
//! DBH mean relative error.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geom::{Se2Transform, Se3Pose};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 timestamp matches within {window} s, found {found}")]
    TooFewMatches { window: f64, found: usize },
    #[error("DBH record list is empty")]
    EmptyDbh,
    #[error("DBH ground truth must be positive, got {0} for tree {1}")]
    NonPositiveDbh(f64, String),
}

/// Association window for matching estimated to reference poses, seconds.
pub const ATE_ASSOCIATION_WINDOW: f64 = 0.05;

/// Trajectory alignment applied before differencing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    /// Compare in the shared (georeferenced) frame directly.
    None,
    /// Remove the best rigid transform (no scale) before differencing.
    Umeyama,
}

/// Absolute trajectory error: mean and population standard deviation of
/// per-pose translation distances.
#[derive(Debug, Clone)]
pub struct AteReport {
    pub mean: f64,
    /// Population (not sample) standard deviation.
    pub std: f64,
    pub per_pose: Vec<f64>,
    pub n_matched: usize,
}

/// One tree's estimated and tape-measured diameter at breast height.
#[derive(Debug, Clone, PartialEq)]
pub struct DbhRecord {
    pub id: String,
    pub dbh_est: f64,
    pub dbh_gt: f64,
}

fn match_by_time<'a>(
    estimated: &'a [Se3Pose],
    reference: &'a [Se3Pose],
) -> Vec<(&'a Se3Pose, &'a Se3Pose)> {
    let mut pairs = Vec::new();
    for e in estimated {
        // Reference is time-sorted: nearest is one of the two bracketing poses.
        let hi = reference.partition_point(|p| p.t < e.t);
        let mut best: Option<&Se3Pose> = None;
        for cand in [hi.checked_sub(1).and_then(|i| reference.get(i)), reference.get(hi)]
            .into_iter()
            .flatten()
        {
            if (cand.t - e.t).abs() <= ATE_ASSOCIATION_WINDOW
                && best.is_none_or(|b| (cand.t - e.t).abs() < (b.t - e.t).abs())
            {
                best = Some(cand);
            }
        }
        if let Some(r) = best {
            pairs.push((e, r));
        }
    }
    pairs
}

/// Best rigid transform (R, t), no scale, mapping `src` onto `dst` in the
/// least-squares sense.
fn umeyama_rigid(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> (Matrix3<f64>, Vector3<f64>) {
    let n = src.len() as f64;
    let mu_s = src.iter().sum::<Vector3<f64>>() / n;
    let mu_d = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        cov += (d - mu_d) * (s - mu_s).transpose();
    }
    let svd = cov.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut s = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * vt;
    let t = mu_d - r * mu_s;
    (r, t)
}

/// Absolute trajectory error between an estimated and a reference
/// trajectory, associated by nearest timestamp.
pub fn ate(
    estimated: &[Se3Pose],
    reference: &[Se3Pose],
    align_mode: AlignMode,
) -> Result<AteReport, EvalError> {
    let pairs = match_by_time(estimated, reference);
    if pairs.len() < 2 {
        return Err(EvalError::TooFewMatches {
            window: ATE_ASSOCIATION_WINDOW,
            found: pairs.len(),
        });
    }
    let est: Vec<Vector3<f64>> = pairs.iter().map(|(e, _)| e.translation).collect();
    let refp: Vec<Vector3<f64>> = pairs.iter().map(|(_, r)| r.translation).collect();
    let per_pose: Vec<f64> = match align_mode {
        AlignMode::None => est
            .iter()
            .zip(&refp)
            .map(|(e, r)| (e - r).norm())
            .collect(),
        AlignMode::Umeyama => {
            let (r, t) = umeyama_rigid(&est, &refp);
            est.iter()
                .zip(&refp)
                .map(|(e, rp)| (r * e + t - rp).norm())
                .collect()
        }
    };
    let n = per_pose.len() as f64;
    let mean = per_pose.iter().sum::<f64>() / n;
    let var = per_pose.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(AteReport {
        mean,
        std: var.sqrt(),
        n_matched: per_pose.len(),
        per_pose,
    })
}

/// Alignment error of an estimated SE(2) transform against truth:
/// translation error is the Euclidean norm of the residual translation,
/// yaw error is the wrapped signed difference in degrees.
pub fn se2_error(estimated: &Se2Transform, truth: &Se2Transform) -> (f64, f64) {
    let delta = truth.inverse().compose(estimated);
    let trans = (delta.tx * delta.tx + delta.ty * delta.ty).sqrt();
    (trans, delta.psi.to_degrees())
}

/// Mean relative error of DBH estimates: `(1/N) sum |est - gt| / gt`.
pub fn mre_dbh(records: &[DbhRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyDbh);
    }
    let mut acc = 0.0;
    for r in records {
        if r.dbh_gt <= 0.0 {
            return Err(EvalError::NonPositiveDbh(r.dbh_gt, r.id.clone()));
        }
        acc += (r.dbh_est - r.dbh_gt).abs() / r.dbh_gt;
    }
    Ok(acc / records.len() as f64)
}
