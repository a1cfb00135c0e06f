//! Pose-graph trajectory optimization: odometry between-factors fused with
//! robustified, covariance-aware GNSS position priors.
//!
//! The GNSS residual is whitened by the factor information before the
//! robust kernel applies, so the Huber threshold `delta` is dimensionless.
//! Three integration modes mirror the usual ablation: no GNSS at all, a
//! fixed scalar covariance, and the per-fix reported covariance.

mod corrupt;
mod solver;

pub use corrupt::{corrupt_gnss, CorruptionSpec, CovarianceMode};
pub use solver::{
    gnss_jacobian, gnss_residual, odom_jacobians, odom_residual, optimize, retract,
    right_jacobian_inv, skew, OptimizeReport,
};

use nalgebra::{Matrix3, Matrix6, Vector3};
use thiserror::Error;

use crate::geom::Se3Pose;

#[derive(Debug, Error)]
pub enum PgoError {
    #[error("odometry is empty")]
    EmptyOdometry,
    #[error("GNSS covariance at t={t} is not symmetric positive-definite")]
    BadCovariance { t: f64 },
    #[error("kernel delta must be positive, got {0}")]
    BadDelta(f64),
    #[error("pose graph is not connected via odometry factors")]
    NotConnected,
    #[error("normal equations are not positive-definite even under damping")]
    SolverBreakdown,
}

/// A GNSS position fix in the local ENU frame with its reported covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GnssFix {
    pub t: f64,
    pub position: Vector3<f64>,
    pub covariance: Matrix3<f64>,
}

impl GnssFix {
    /// Validates symmetry (to 1e-9) and positive-definiteness.
    pub fn new(t: f64, position: Vector3<f64>, covariance: Matrix3<f64>) -> Result<Self, PgoError> {
        let asym = (covariance - covariance.transpose()).norm();
        if asym > 1e-9 {
            return Err(PgoError::BadCovariance { t });
        }
        let sym = (covariance + covariance.transpose()) * 0.5;
        if sym.cholesky().is_none() {
            return Err(PgoError::BadCovariance { t });
        }
        Ok(Self {
            t,
            position,
            covariance: sym,
        })
    }
}

/// Robust loss applied to the whitened GNSS residual norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RobustKernel {
    /// Plain squared loss: rho(r) = r^2 / 2.
    Squared,
    /// Huber loss with threshold `delta` on the whitened residual norm.
    Huber { delta: f64 },
}

impl RobustKernel {
    pub fn huber(delta: f64) -> Result<Self, PgoError> {
        if delta <= 0.0 || !delta.is_finite() {
            return Err(PgoError::BadDelta(delta));
        }
        Ok(RobustKernel::Huber { delta })
    }

    /// rho(r) for this kernel.
    pub fn rho(&self, r: f64) -> f64 {
        match self {
            RobustKernel::Squared => 0.5 * r * r,
            RobustKernel::Huber { delta } => huber_rho(r, *delta),
        }
    }
}

/// Huber loss: quadratic inside `delta`, linear outside, C1 at the joint.
pub fn huber_rho(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

/// IRLS weight `rho'(r) / r` for a non-negative residual norm; the limit
/// at r -> 0 is 1.
pub fn robust_weight(r: f64, kernel: &RobustKernel) -> f64 {
    match kernel {
        RobustKernel::Squared => 1.0,
        RobustKernel::Huber { delta } => {
            if r <= *delta {
                1.0
            } else {
                delta / r
            }
        }
    }
}

/// How GNSS fixes enter the graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GnssMode {
    /// Drop GNSS entirely (odometry-only baseline).
    None,
    /// Fixed scalar covariance: information (1/sigma^2) I.
    ConstantScaling { sigma: f64 },
    /// Per-fix inverse of the reported covariance.
    CovarianceAware,
}

/// Between-factor connecting nodes `i < j` with a measured relative pose.
#[derive(Debug, Clone)]
pub struct OdomFactor {
    pub i: usize,
    pub j: usize,
    pub relative: Se3Pose,
    /// 6x6 information, ordered (translation, rotation).
    pub information: Matrix6<f64>,
}

/// Unary position prior from one GNSS fix.
#[derive(Debug, Clone)]
pub struct GnssFactor {
    pub node: usize,
    pub fix: GnssFix,
    pub information: Matrix3<f64>,
    pub kernel: RobustKernel,
}

/// Trajectory nodes plus the factors constraining them.
#[derive(Debug, Clone)]
pub struct PoseGraph {
    pub nodes: Vec<Se3Pose>,
    pub odom_factors: Vec<OdomFactor>,
    pub gnss_factors: Vec<GnssFactor>,
    /// Weak full-pose prior anchoring node 0 when no GNSS constrains the
    /// gauge; (pose, scalar information).
    pub anchor_prior: Option<(Se3Pose, f64)>,
}

/// Graph construction knobs.
#[derive(Debug, Clone, Copy)]
pub struct BuildConfig {
    /// Translation information per meter of travel, m^-2.
    pub odom_trans_info: f64,
    /// Rotation information per meter of travel, rad^-2.
    pub odom_rot_info: f64,
    /// GNSS fix to node association window, seconds.
    pub association_window: f64,
    /// Information of the weak gauge prior used when no GNSS is present.
    pub anchor_info: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            odom_trans_info: 100.0,
            odom_rot_info: 400.0,
            association_window: 0.1,
            anchor_info: 1e-3,
        }
    }
}

/// Build a pose graph: one node per odometry pose, between-factors from
/// consecutive relative poses, and each GNSS fix attached to the node with
/// the nearest timestamp within the association window (dropped otherwise).
pub fn build_graph(
    odometry: &[Se3Pose],
    gnss: &[GnssFix],
    mode: GnssMode,
    kernel: RobustKernel,
    cfg: &BuildConfig,
) -> Result<PoseGraph, PgoError> {
    if odometry.is_empty() {
        return Err(PgoError::EmptyOdometry);
    }
    let mut odom_factors = Vec::with_capacity(odometry.len().saturating_sub(1));
    for (i, pair) in odometry.windows(2).enumerate() {
        let relative = pair[0].between(&pair[1]);
        let travel = relative.translation.norm().max(0.01);
        let mut information = Matrix6::zeros();
        for k in 0..3 {
            information[(k, k)] = cfg.odom_trans_info / travel;
            information[(k + 3, k + 3)] = cfg.odom_rot_info / travel;
        }
        odom_factors.push(OdomFactor {
            i,
            j: i + 1,
            relative,
            information,
        });
    }

    let mut gnss_factors = Vec::new();
    if mode != GnssMode::None {
        for fix in gnss {
            let hi = odometry.partition_point(|p| p.t < fix.t);
            let mut best: Option<(usize, f64)> = None;
            for idx in [hi.checked_sub(1), Some(hi)].into_iter().flatten() {
                if let Some(node) = odometry.get(idx) {
                    let dt = (node.t - fix.t).abs();
                    if dt <= cfg.association_window
                        && best.is_none_or(|(_, bd)| dt < bd)
                    {
                        best = Some((idx, dt));
                    }
                }
            }
            if let Some((node, _)) = best {
                let information = match mode {
                    GnssMode::ConstantScaling { sigma } => {
                        Matrix3::identity() / (sigma * sigma)
                    }
                    GnssMode::CovarianceAware => fix
                        .covariance
                        .try_inverse()
                        .ok_or(PgoError::BadCovariance { t: fix.t })?,
                    GnssMode::None => unreachable!(),
                };
                gnss_factors.push(GnssFactor {
                    node,
                    fix: fix.clone(),
                    information,
                    kernel,
                });
            }
        }
    }

    let anchor_prior = if gnss_factors.is_empty() {
        Some((odometry[0], cfg.anchor_info))
    } else {
        None
    };

    Ok(PoseGraph {
        nodes: odometry.to_vec(),
        odom_factors,
        gnss_factors,
        anchor_prior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::UnitQuaternion;

    fn straight_odometry(n: usize, dt: f64, step: f64) -> Vec<Se3Pose> {
        (0..n)
            .map(|i| {
                Se3Pose::new(
                    i as f64 * dt,
                    Vector3::new(i as f64 * step, 0.0, 0.0),
                    UnitQuaternion::identity(),
                )
            })
            .collect()
    }

    #[test]
    fn huber_branch_values() {
        assert_abs_diff_eq!(huber_rho(0.5, 1.0), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(huber_rho(2.0, 1.0), 1.5, epsilon = 1e-15);
        // Both branches agree at |r| = delta.
        let delta = 0.7;
        assert_abs_diff_eq!(huber_rho(delta, delta), delta * delta / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            huber_rho(delta + 1e-12, delta),
            delta * delta / 2.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn huber_is_c1_at_delta() {
        let delta = 1.0;
        let h = 1e-6;
        let d_minus = (huber_rho(delta, delta) - huber_rho(delta - h, delta)) / h;
        let d_plus = (huber_rho(delta + h, delta) - huber_rho(delta, delta)) / h;
        assert_abs_diff_eq!(d_minus, d_plus, epsilon = 1e-5);
        assert_abs_diff_eq!(d_minus, delta, epsilon = 1e-5);
    }

    #[test]
    fn weights() {
        assert_eq!(robust_weight(17.0, &RobustKernel::Squared), 1.0);
        let huber = RobustKernel::huber(1.0).unwrap();
        assert_abs_diff_eq!(robust_weight(4.0, &huber), 0.25, epsilon = 1e-15);
        assert_eq!(robust_weight(0.0, &huber), 1.0);
        assert_eq!(robust_weight(1.0, &huber), 1.0);
        // Monotone non-increasing, in (0, 1].
        let mut prev = 1.0;
        for k in 0..100 {
            let w = robust_weight(k as f64 * 0.1, &huber);
            assert!(w > 0.0 && w <= 1.0 && w <= prev + 1e-15);
            prev = w;
        }
    }

    #[test]
    fn build_counts_factors() {
        let odo = straight_odometry(10, 0.1, 0.2);
        let g = build_graph(&odo, &[], GnssMode::CovarianceAware, RobustKernel::Squared, &BuildConfig::default()).unwrap();
        assert_eq!(g.odom_factors.len(), 9);
        assert_eq!(g.gnss_factors.len(), 0);
        assert!(g.anchor_prior.is_some());
    }

    #[test]
    fn association_window_applies() {
        let odo = straight_odometry(5, 1.0, 0.5);
        let near = GnssFix::new(1.05, Vector3::zeros(), Matrix3::identity()).unwrap();
        let far = GnssFix::new(2.5, Vector3::zeros(), Matrix3::identity()).unwrap();
        let g = build_graph(
            &odo,
            &[near, far],
            GnssMode::CovarianceAware,
            RobustKernel::Squared,
            &BuildConfig::default(),
        )
        .unwrap();
        assert_eq!(g.gnss_factors.len(), 1);
        assert_eq!(g.gnss_factors[0].node, 1);
        assert!(g.anchor_prior.is_none());
    }

    #[test]
    fn covariance_aware_inverts_covariance() {
        let odo = straight_odometry(2, 1.0, 0.5);
        let cov = Matrix3::from_diagonal(&Vector3::new(4.0, 4.0, 9.0));
        let fix = GnssFix::new(0.0, Vector3::zeros(), cov).unwrap();
        let g = build_graph(&odo, &[fix], GnssMode::CovarianceAware, RobustKernel::Squared, &BuildConfig::default()).unwrap();
        let info = g.gnss_factors[0].information;
        assert_abs_diff_eq!(info[(0, 0)], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(info[(1, 1)], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(info[(2, 2)], 1.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_scaling_information() {
        let odo = straight_odometry(2, 1.0, 0.5);
        let fix = GnssFix::new(0.0, Vector3::zeros(), Matrix3::identity() * 100.0).unwrap();
        let g = build_graph(
            &odo,
            &[fix],
            GnssMode::ConstantScaling { sigma: 2.0 },
            RobustKernel::Squared,
            &BuildConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(g.gnss_factors[0].information[(0, 0)], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn bad_covariance_rejected() {
        let not_pd = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert!(GnssFix::new(0.0, Vector3::zeros(), not_pd).is_err());
        let mut asym = Matrix3::identity();
        asym[(0, 1)] = 0.5;
        assert!(GnssFix::new(0.0, Vector3::zeros(), asym).is_err());
    }

    #[test]
    fn empty_odometry_rejected() {
        assert!(matches!(
            build_graph(&[], &[], GnssMode::None, RobustKernel::Squared, &BuildConfig::default()),
            Err(PgoError::EmptyOdometry)
        ));
    }
}
