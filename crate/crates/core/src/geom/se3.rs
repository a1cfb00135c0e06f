//! Timestamped rigid-body poses and trajectory interpolation.

use nalgebra::{UnitQuaternion, Vector3};

use super::GeomError;

/// A timestamped pose of the sensor body in the map frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se3Pose {
    /// Timestamp, seconds.
    pub t: f64,
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Se3Pose {
    pub fn new(t: f64, translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            t,
            translation,
            rotation,
        }
    }

    pub fn identity(t: f64) -> Self {
        Self {
            t,
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    /// Map a point from the body frame into the map frame.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Map a point from the map frame into the body frame.
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    /// Relative pose `self^-1 * other` (timestamp taken from `other`).
    pub fn between(&self, other: &Se3Pose) -> Se3Pose {
        let rot = self.rotation.inverse() * other.rotation;
        let trans = self.rotation.inverse() * (other.translation - self.translation);
        Se3Pose::new(other.t, trans, rot)
    }

    /// Compose with a relative pose: `self * rel`.
    pub fn compose(&self, rel: &Se3Pose) -> Se3Pose {
        Se3Pose::new(
            rel.t,
            self.rotation * rel.translation + self.translation,
            self.rotation * rel.rotation,
        )
    }
}

/// Interpolate a pose at time `t`: linear in translation, slerp in rotation.
/// No extrapolation; `t` must lie within the trajectory's time span.
pub fn interpolate_pose(traj: &[Se3Pose], t: f64) -> Result<Se3Pose, GeomError> {
    let first = traj.first().ok_or(GeomError::EmptyTrajectory)?;
    let last = traj.last().unwrap();
    if t < first.t || t > last.t {
        return Err(GeomError::TimeOutOfRange {
            t,
            first: first.t,
            last: last.t,
        });
    }
    // Index of the first pose with timestamp >= t.
    let hi = traj.partition_point(|p| p.t < t);
    if hi < traj.len() && traj[hi].t == t {
        return Ok(traj[hi]);
    }
    let (a, b) = (&traj[hi - 1], &traj[hi]);
    let alpha = (t - a.t) / (b.t - a.t);
    let translation = a.translation + (b.translation - a.translation) * alpha;
    let rotation = a
        .rotation
        .try_slerp(&b.rotation, alpha, 1e-9)
        .unwrap_or(a.rotation);
    Ok(Se3Pose::new(t, translation, rotation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn yaw_pose(t: f64, x: f64, yaw: f64) -> Se3Pose {
        Se3Pose::new(
            t,
            Vector3::new(x, 0.0, 0.0),
            UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
        )
    }

    #[test]
    fn exact_node_timestamp_returns_node() {
        let traj = vec![yaw_pose(0.0, 0.0, 0.0), yaw_pose(1.0, 2.0, 0.0)];
        let p = interpolate_pose(&traj, 1.0).unwrap();
        assert_eq!(p.translation, traj[1].translation);
    }

    #[test]
    fn midpoint_translation_is_mean() {
        let traj = vec![yaw_pose(0.0, 0.0, 0.0), yaw_pose(2.0, 4.0, 0.0)];
        let p = interpolate_pose(&traj, 1.0).unwrap();
        assert_abs_diff_eq!(p.translation.x, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn midpoint_of_quarter_yaw_is_eighth_turn() {
        let traj = vec![yaw_pose(0.0, 0.0, 0.0), yaw_pose(1.0, 0.0, FRAC_PI_2)];
        let p = interpolate_pose(&traj, 0.5).unwrap();
        let (_, _, yaw) = p.rotation.euler_angles();
        assert_abs_diff_eq!(yaw, FRAC_PI_2 / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.rotation.norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn no_extrapolation() {
        let traj = vec![yaw_pose(1.0, 0.0, 0.0), yaw_pose(2.0, 0.0, 0.0)];
        assert!(interpolate_pose(&traj, 0.5).is_err());
        assert!(interpolate_pose(&traj, 2.5).is_err());
    }

    #[test]
    fn between_then_compose_round_trips() {
        let a = yaw_pose(0.0, 1.0, 0.3);
        let b = yaw_pose(1.0, 4.0, -0.7);
        let rel = a.between(&b);
        let b2 = a.compose(&rel);
        assert_abs_diff_eq!((b2.translation - b.translation).norm(), 0.0, epsilon = 1e-12);
        assert!(b2.rotation.angle_to(&b.rotation) < 1e-12);
    }
}
