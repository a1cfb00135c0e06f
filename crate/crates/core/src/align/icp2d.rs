//! Point-to-point 2D ICP baseline: nearest-neighbor correspondences plus a
//! closed-form SE(2) fit per iteration. Kept as the comparison method the
//! correspondence-free NMI alignment is measured against.

use nalgebra::Vector2;

use super::AlignError;
use crate::geom::Se2Transform;

const MAX_ITERATIONS: usize = 100;
const MEAN_DIST_TOL: f64 = 1e-6;

fn degenerate(points: &[Vector2<f64>]) -> bool {
    if points.len() < 3 {
        return true;
    }
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vector2<f64>>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    // Smaller eigenvalue of the 2x2 covariance.
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let lam_min = tr / 2.0 - disc;
    lam_min <= 1e-12 * tr.max(1e-300)
}

/// Closed-form least-squares SE(2) (no scale) mapping `src[i]` onto
/// `dst[i]`.
fn fit_se2(src: &[Vector2<f64>], dst: &[Vector2<f64>]) -> Se2Transform {
    let n = src.len() as f64;
    let ms = src.iter().sum::<Vector2<f64>>() / n;
    let md = dst.iter().sum::<Vector2<f64>>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let a = s - ms;
        let b = d - md;
        num += a.x * b.y - a.y * b.x;
        den += a.x * b.x + a.y * b.y;
    }
    let psi = num.atan2(den);
    let (sin, cos) = psi.sin_cos();
    let tx = md.x - (cos * ms.x - sin * ms.y);
    let ty = md.y - (cos * ms.y + sin * ms.x);
    Se2Transform::new(tx, ty, psi)
}

/// Estimate the SE(2) transform taking `source` onto `target` by iterated
/// nearest-neighbor correspondence and closed-form refitting.
pub fn icp2d_baseline(
    source: &[Vector2<f64>],
    target: &[Vector2<f64>],
    init: &Se2Transform,
) -> Result<Se2Transform, AlignError> {
    if degenerate(source) || degenerate(target) {
        return Err(AlignError::DegenerateIcpInput);
    }
    let mut transform = *init;
    let mut prev_mean = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let moved: Vec<Vector2<f64>> = source
            .iter()
            .map(|p| {
                let (x, y) = transform.apply(p.x, p.y);
                Vector2::new(x, y)
            })
            .collect();
        let mut matched = Vec::with_capacity(moved.len());
        let mut mean_dist = 0.0;
        for m in &moved {
            let nearest = target
                .iter()
                .min_by(|a, b| (*a - m).norm_squared().total_cmp(&(*b - m).norm_squared()))
                .expect("target nonempty");
            matched.push(*nearest);
            mean_dist += (nearest - m).norm();
        }
        mean_dist /= moved.len() as f64;
        if (prev_mean - mean_dist).abs() < MEAN_DIST_TOL {
            break;
        }
        prev_mean = mean_dist;
        transform = fit_se2(source, &matched);
    }
    Ok(transform)
}
