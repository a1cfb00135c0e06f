//! Planar rigid transforms: translation plus yaw.

use std::f64::consts::PI;

/// An SE(2) transform `[tx, ty, psi]`: rotation by `psi` followed by
/// translation. `psi` is kept normalized to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Se2Transform {
    pub tx: f64,
    pub ty: f64,
    pub psi: f64,
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

impl Se2Transform {
    pub fn new(tx: f64, ty: f64, psi: f64) -> Self {
        Self {
            tx,
            ty,
            psi: wrap_angle(psi),
        }
    }

    pub fn identity() -> Self {
        Self {
            tx: 0.0,
            ty: 0.0,
            psi: 0.0,
        }
    }

    /// `R(psi) * p + t`.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.psi.sin_cos();
        (c * x - s * y + self.tx, c * y + s * x + self.ty)
    }

    pub fn inverse(&self) -> Se2Transform {
        let (s, c) = self.psi.sin_cos();
        // R(-psi) * (-t)
        Se2Transform {
            tx: -(c * self.tx + s * self.ty),
            ty: -(c * self.ty - s * self.tx),
            psi: wrap_angle(-self.psi),
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Se2Transform) -> Se2Transform {
        let (s, c) = self.psi.sin_cos();
        Se2Transform {
            tx: c * other.tx - s * other.ty + self.tx,
            ty: c * other.ty + s * other.tx + self.ty,
            psi: wrap_angle(self.psi + other.psi),
        }
    }

    /// Mixed-unit parameter norm `sqrt(tx^2 + ty^2 + psi^2)`, used only for
    /// tie-breaking candidates closest to the search-region center.
    pub fn param_norm(&self) -> f64 {
        (self.tx * self.tx + self.ty * self.ty + self.psi * self.psi).sqrt()
    }
}
