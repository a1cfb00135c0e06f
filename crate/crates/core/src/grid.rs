//! 2D scalar rasters over the horizontal plane.
//!
//! `GridField` carries everything the pipeline rasterizes: ground
//! elevation, canopy height, likelihood fields, and detection layers. The
//! grid is row-major with row 0 at the south edge; cell `(ix, iy)` covers
//! `[origin + i*res, origin + (i+1)*res)` and its center sits at
//! `origin + (i + 0.5) * res`.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geom::GeoAnchor;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error("grid dimensions must be at least 1x1, got {0}x{1}")]
    BadDimensions(usize, usize),
    #[error("value buffer length {got} does not match {w}x{h}")]
    BadLength { got: usize, w: usize, h: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed field dump: {0}")]
    MalformedDump(String),
}

/// A georeferenceable 2D raster of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    /// World x of the lower-left corner of cell (0, 0), meters.
    pub origin_x: f64,
    /// World y of the lower-left corner of cell (0, 0), meters.
    pub origin_y: f64,
    /// Cell edge length, meters.
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major values, row 0 = south.
    pub values: Vec<f64>,
    pub anchor: Option<GeoAnchor>,
}

impl GridField {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        resolution: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GridError> {
        if resolution <= 0.0 || !resolution.is_finite() {
            return Err(GridError::BadResolution(resolution));
        }
        if width == 0 || height == 0 {
            return Err(GridError::BadDimensions(width, height));
        }
        Ok(Self {
            origin_x,
            origin_y,
            resolution,
            width,
            height,
            values: vec![0.0; width * height],
            anchor: None,
        })
    }

    /// A field with the same geometry (and anchor) but zeroed values.
    pub fn zeros_like(other: &GridField) -> Self {
        Self {
            origin_x: other.origin_x,
            origin_y: other.origin_y,
            resolution: other.resolution,
            width: other.width,
            height: other.height,
            values: vec![0.0; other.width * other.height],
            anchor: other.anchor,
        }
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.idx(ix, iy)]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        let i = self.idx(ix, iy);
        self.values[i] = v;
    }

    /// World coordinates of the center of cell `(ix, iy)`.
    #[inline]
    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin_x + (ix as f64 + 0.5) * self.resolution,
            self.origin_y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell index containing world point (x, y), or None if outside.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.origin_x) / self.resolution;
        let fy = (y - self.origin_y) / self.resolution;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        if ix >= self.width || iy >= self.height {
            return None;
        }
        Some((ix, iy))
    }

    /// Bilinear sample at world point (x, y) between cell centers.
    /// Returns None when the point's pre-image falls outside the span of
    /// cell centers (with a tiny tolerance so exact centers on the border
    /// stay inside).
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        const EDGE_EPS: f64 = 1e-9;
        let u = (x - self.origin_x) / self.resolution - 0.5;
        let v = (y - self.origin_y) / self.resolution - 0.5;
        let (w1, h1) = (self.width as f64 - 1.0, self.height as f64 - 1.0);
        if u < -EDGE_EPS || u > w1 + EDGE_EPS || v < -EDGE_EPS || v > h1 + EDGE_EPS {
            return None;
        }
        let u = u.clamp(0.0, w1);
        let v = v.clamp(0.0, h1);
        let mut ix = u.floor() as usize;
        let mut iy = v.floor() as usize;
        if ix >= self.width - 1 {
            ix = self.width.saturating_sub(2).min(ix);
        }
        if iy >= self.height - 1 {
            iy = self.height.saturating_sub(2).min(iy);
        }
        if self.width == 1 && self.height == 1 {
            return Some(self.get(0, 0));
        }
        let (ix1, iy1) = ((ix + 1).min(self.width - 1), (iy + 1).min(self.height - 1));
        let fu = u - ix as f64;
        let fv = v - iy as f64;
        let v00 = self.get(ix, iy);
        let v10 = self.get(ix1, iy);
        let v01 = self.get(ix, iy1);
        let v11 = self.get(ix1, iy1);
        Some(
            v00 * (1.0 - fu) * (1.0 - fv)
                + v10 * fu * (1.0 - fv)
                + v01 * (1.0 - fu) * fv
                + v11 * fu * fv,
        )
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Binary dump: origin_x, origin_y, resolution as little-endian f64,
    /// width, height as little-endian u32, then row-major f32 values.
    pub fn write_binary(&self, path: &Path) -> Result<(), GridError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&self.origin_x.to_le_bytes())?;
        w.write_all(&self.origin_y.to_le_bytes())?;
        w.write_all(&self.resolution.to_le_bytes())?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        for &v in &self.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<GridField, GridError> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut f8 = [0u8; 8];
        let mut f4 = [0u8; 4];
        let mut read_f64 = |r: &mut dyn Read| -> Result<f64, GridError> {
            r.read_exact(&mut f8)
                .map_err(|_| GridError::MalformedDump("truncated header".into()))?;
            Ok(f64::from_le_bytes(f8))
        };
        let origin_x = read_f64(&mut r)?;
        let origin_y = read_f64(&mut r)?;
        let resolution = read_f64(&mut r)?;
        let mut read_u32 = |r: &mut dyn Read| -> Result<u32, GridError> {
            r.read_exact(&mut f4)
                .map_err(|_| GridError::MalformedDump("truncated header".into()))?;
            Ok(u32::from_le_bytes(f4))
        };
        let width = read_u32(&mut r)? as usize;
        let height = read_u32(&mut r)? as usize;
        let mut field = GridField::new(origin_x, origin_y, resolution, width, height)?;
        let mut buf = [0u8; 4];
        for v in field.values.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| GridError::MalformedDump("truncated values".into()))?;
            *v = f32::from_le_bytes(buf) as f64;
        }
        Ok(field)
    }
}

/// Min-max normalize to [0, 1]; a constant field maps to all zeros.
pub fn normalize_field(f: &GridField) -> GridField {
    let (lo, hi) = f.min_max();
    let mut out = f.clone();
    if hi > lo {
        let span = hi - lo;
        for v in out.values.iter_mut() {
            *v = (*v - lo) / span;
        }
    } else {
        for v in out.values.iter_mut() {
            *v = 0.0;
        }
    }
    out
}
