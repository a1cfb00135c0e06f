//! Multi-scale Laplacian-of-Gaussian response over a canopy height model.
//!
//! Per scale sigma the response is `sigma^2 * (d2G/dx2 + d2G/dy2) * C`,
//! computed separably (each Laplacian term factors into a 1D second
//! derivative along one axis and a plain Gaussian along the other). The
//! scale normalization by `sigma^2` keeps responses comparable across the
//! scale set; without it the max is dominated by the smallest sigma.
//! Borders replicate the edge value so a constant field has exactly zero
//! response everywhere. The aerial likelihood is the per-cell max of
//! absolute responses over all scales, normalized to [0, 1].

use super::{FieldError, ScaleSet};
use crate::grid::{normalize_field, GridField};

/// Kernels are truncated at this many sigmas.
const TRUNCATION_SIGMAS: f64 = 4.0;

/// Responses below this fraction of the CHM magnitude are discretization
/// noise, not canopy structure, and are clamped to zero.
const RESPONSE_FLOOR_REL: f64 = 1e-9;

/// Sampled 1D kernels for scale `sigma` on a grid of spacing `resolution`:
/// a unit-sum Gaussian and a zero-sum second derivative of the Gaussian.
/// The 2D LoG stencil is `gpp (x) g + g (x) gpp` (outer products).
pub fn log_kernel_1d(sigma: f64, resolution: f64) -> (Vec<f64>, Vec<f64>) {
    let radius = (TRUNCATION_SIGMAS * sigma / resolution).ceil() as i64;
    let inv_2s2 = 1.0 / (2.0 * sigma * sigma);
    let mut g: Vec<f64> = (-radius..=radius)
        .map(|i| {
            let x = i as f64 * resolution;
            (-x * x * inv_2s2).exp()
        })
        .collect();
    let sum: f64 = g.iter().sum();
    for v in g.iter_mut() {
        *v /= sum;
    }
    let mut gpp: Vec<f64> = (-radius..=radius)
        .zip(&g)
        .map(|(i, &gv)| {
            let x = i as f64 * resolution;
            (x * x - sigma * sigma) / sigma.powi(4) * gv
        })
        .collect();
    // Force exact zero DC so constant inputs produce zero response.
    let mean: f64 = gpp.iter().sum::<f64>() / gpp.len() as f64;
    for v in gpp.iter_mut() {
        *v -= mean;
    }
    (g, gpp)
}

/// 1D convolution along rows (x axis) with replicated borders.
fn convolve_rows(src: &GridField, kernel: &[f64]) -> Vec<f64> {
    let (w, h) = (src.width, src.height);
    let radius = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; w * h];
    for iy in 0..h {
        let row = &src.values[iy * w..(iy + 1) * w];
        for ix in 0..w as i64 {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let j = (ix + k as i64 - radius).clamp(0, w as i64 - 1) as usize;
                acc += kv * row[j];
            }
            out[iy * w + ix as usize] = acc;
        }
    }
    out
}

/// 1D convolution along columns (y axis) with replicated borders.
fn convolve_cols(values: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; w * h];
    for iy in 0..h as i64 {
        for ix in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let j = (iy + k as i64 - radius).clamp(0, h as i64 - 1) as usize;
                acc += kv * values[j * w + ix];
            }
            out[iy as usize * w + ix] = acc;
        }
    }
    out
}

/// Scale-normalized LoG response field at a single scale (un-normalized,
/// signed).
pub fn log_response(chm: &GridField, sigma: f64) -> Result<Vec<f64>, FieldError> {
    if sigma < chm.resolution {
        return Err(FieldError::KernelUnresolvable {
            sigma,
            resolution: chm.resolution,
        });
    }
    let (g, gpp) = log_kernel_1d(sigma, chm.resolution);
    let (w, h) = (chm.width, chm.height);
    let rxx = convolve_cols(&convolve_rows(chm, &gpp), w, h, &g);
    let ryy = convolve_cols(&convolve_rows(chm, &g), w, h, &gpp);
    let s2 = sigma * sigma;
    Ok(rxx
        .iter()
        .zip(&ryy)
        .map(|(&a, &b)| s2 * (a + b))
        .collect())
}

/// Aerial tree-likelihood field: max over scales of the absolute
/// scale-normalized LoG response, normalized to [0, 1].
pub fn aerial_likelihood(chm: &GridField, scales: &ScaleSet) -> Result<GridField, FieldError> {
    let mut best = vec![0.0f64; chm.width * chm.height];
    for &sigma in scales.sigmas() {
        let r = log_response(chm, sigma)?;
        for (b, v) in best.iter_mut().zip(&r) {
            *b = b.max(v.abs());
        }
    }
    let chm_mag = chm.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let floor = RESPONSE_FLOOR_REL * chm_mag.max(1.0);
    for b in best.iter_mut() {
        if *b < floor {
            *b = 0.0;
        }
    }
    let mut out = GridField::zeros_like(chm);
    out.values = best;
    Ok(normalize_field(&out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_bump_chm(w: usize, h: usize, res: f64, cx: f64, cy: f64, sigma: f64) -> GridField {
        let mut chm = GridField::new(0.0, 0.0, res, w, h).unwrap();
        for iy in 0..h {
            for ix in 0..w {
                let (x, y) = chm.cell_center(ix, iy);
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                let v = 10.0 * (-d2 / (2.0 * sigma * sigma)).exp();
                chm.set(ix, iy, v);
            }
        }
        chm
    }

    #[test]
    fn constant_chm_gives_zero_field() {
        let mut chm = GridField::new(0.0, 0.0, 0.5, 40, 40).unwrap();
        for v in chm.values.iter_mut() {
            *v = 13.25;
        }
        let scales = ScaleSet::new(vec![1.0, 2.0]).unwrap();
        let l = aerial_likelihood(&chm, &scales).unwrap();
        assert!(l.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bump_center_is_global_max() {
        let sigma = 2.0;
        let chm = gaussian_bump_chm(80, 80, 0.5, 20.0, 20.0, sigma);
        let scales = ScaleSet::new(vec![1.0, 2.0, 3.0]).unwrap();
        let l = aerial_likelihood(&chm, &scales).unwrap();
        let (best_idx, _) = l
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let (bx, by) = (best_idx % l.width, best_idx / l.width);
        let (x, y) = l.cell_center(bx, by);
        assert!((x - 20.0).abs() <= 0.5 && (y - 20.0).abs() <= 0.5,
            "max at ({x}, {y}), expected near (20, 20)");
    }

    #[test]
    fn two_equal_bumps_two_equal_maxima() {
        let sigma = 1.5;
        let mut chm = GridField::new(0.0, 0.0, 0.5, 100, 60).unwrap();
        for iy in 0..60 {
            for ix in 0..100 {
                let (x, y) = chm.cell_center(ix, iy);
                let mut v = 0.0;
                for (cx, cy) in [(15.0, 15.0), (35.0, 15.0)] {
                    let d2: f64 = (x - cx).powi(2) + (y - cy).powi(2);
                    v += 8.0 * (-d2 / (2.0 * sigma * sigma)).exp();
                }
                chm.set(ix, iy, v);
            }
        }
        let scales = ScaleSet::new(vec![1.0, 1.5, 2.0]).unwrap();
        let l = aerial_likelihood(&chm, &scales).unwrap();
        let v1 = l.get(l.cell_of(15.0, 15.0).unwrap().0, l.cell_of(15.0, 15.0).unwrap().1);
        let v2 = l.get(l.cell_of(35.0, 15.0).unwrap().0, l.cell_of(35.0, 15.0).unwrap().1);
        assert!((v1 - v2).abs() / v1.max(v2) < 0.02, "peaks {v1} vs {v2}");
        assert!(v1 > 0.98, "peak {v1} should be the normalized max");
    }

    #[test]
    fn sigma_below_resolution_rejected() {
        let chm = GridField::new(0.0, 0.0, 0.5, 10, 10).unwrap();
        let scales = ScaleSet::new(vec![0.25]).unwrap();
        assert!(matches!(
            aerial_likelihood(&chm, &scales),
            Err(FieldError::KernelUnresolvable { .. })
        ));
    }

    /// Dense direct 2D convolution with the same stencil and border rule;
    /// the independent oracle for the separable implementation.
    fn dense_log_response(chm: &GridField, sigma: f64) -> Vec<f64> {
        let (g, gpp) = log_kernel_1d(sigma, chm.resolution);
        let radius = (g.len() / 2) as i64;
        let (w, h) = (chm.width as i64, chm.height as i64);
        let mut out = vec![0.0; (w * h) as usize];
        let s2 = sigma * sigma;
        for iy in 0..h {
            for ix in 0..w {
                let mut acc = 0.0;
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        let jx = (ix + dx).clamp(0, w - 1) as usize;
                        let jy = (iy + dy).clamp(0, h - 1) as usize;
                        let kx = (dx + radius) as usize;
                        let ky = (dy + radius) as usize;
                        let k2 = gpp[kx] * g[ky] + g[kx] * gpp[ky];
                        acc += k2 * chm.values[jy * chm.width + jx];
                    }
                }
                out[(iy * w + ix) as usize] = s2 * acc;
            }
        }
        out
    }

    #[test]
    fn separable_matches_dense_oracle_on_small_grid() {
        let chm = gaussian_bump_chm(32, 32, 0.5, 8.0, 8.0, 1.5);
        for sigma in [0.5, 1.0, 2.0] {
            let fast = log_response(&chm, sigma).unwrap();
            let dense = dense_log_response(&chm, sigma);
            let scale = dense.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            for (a, b) in fast.iter().zip(&dense) {
                assert!(
                    (a - b).abs() <= 1e-6 * scale,
                    "separable {a} vs dense {b} at sigma {sigma}"
                );
            }
        }
    }
}
