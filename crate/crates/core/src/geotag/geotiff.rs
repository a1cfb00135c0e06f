//! Single-band float32 GeoTIFF writer and a matching reader.
//!
//! Classic little-endian TIFF, one uncompressed strip, with the
//! georeference tags GIS tools need: ModelPixelScale, ModelTiepoint, a
//! GeoKey directory naming the projected CRS, and GDAL's ASCII nodata tag.
//! Pixel (0,0) is the north-west corner, so rows are flipped relative to
//! the south-origin `GridField` convention.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::GeotagError;
use crate::geom::{wgs84_to_utm, GeoAnchor};
use crate::grid::GridField;

/// Nodata sentinel for detection rasters.
pub const NODATA: f64 = -1.0;

// TIFF tag ids.
const TAG_IMAGE_WIDTH: u16 = 256;
const TAG_IMAGE_LENGTH: u16 = 257;
const TAG_BITS_PER_SAMPLE: u16 = 258;
const TAG_COMPRESSION: u16 = 259;
const TAG_PHOTOMETRIC: u16 = 262;
const TAG_STRIP_OFFSETS: u16 = 273;
const TAG_SAMPLES_PER_PIXEL: u16 = 277;
const TAG_ROWS_PER_STRIP: u16 = 278;
const TAG_STRIP_BYTE_COUNTS: u16 = 279;
const TAG_SAMPLE_FORMAT: u16 = 339;
const TAG_MODEL_PIXEL_SCALE: u16 = 33550;
const TAG_MODEL_TIEPOINT: u16 = 33922;
const TAG_GEO_KEY_DIRECTORY: u16 = 34735;
const TAG_GDAL_NODATA: u16 = 42113;

// TIFF field types.
const TYPE_ASCII: u16 = 2;
const TYPE_SHORT: u16 = 3;
const TYPE_LONG: u16 = 4;
const TYPE_DOUBLE: u16 = 12;

// GeoKeys.
const KEY_MODEL_TYPE: u16 = 1024;
const KEY_PROJECTED_CS_TYPE: u16 = 3072;
const MODEL_TYPE_PROJECTED: u16 = 1;

struct IfdEntry {
    tag: u16,
    ty: u16,
    count: u32,
    value: u32,
}

fn entry(tag: u16, ty: u16, count: u32, value: u32) -> IfdEntry {
    IfdEntry {
        tag,
        ty,
        count,
        value,
    }
}

/// Write a georeferenced single-band float32 raster. The grid origin is in
/// ENU meters relative to `anchor`; the tiepoint ties pixel (0,0) to the
/// projected coordinates of the grid's north-west corner.
pub fn write_geotiff(field: &GridField, anchor: &GeoAnchor, path: &Path) -> Result<(), GeotagError> {
    let strip_bytes = field.width as u64 * field.height as u64 * 4;
    if strip_bytes > (1 << 31) {
        return Err(GeotagError::RasterTooLarge(strip_bytes));
    }
    let (anchor_e, anchor_n) = wgs84_to_utm(anchor.lat0, anchor.lon0, anchor.epsg);
    let e_nw = anchor_e + field.origin_x;
    let n_nw = anchor_n + field.origin_y + field.height as f64 * field.resolution;

    let pixel_scale = [field.resolution, field.resolution, 0.0];
    let tiepoint = [0.0, 0.0, 0.0, e_nw, n_nw, 0.0];
    let geokeys: [u16; 12] = [
        1, 1, 0, 2, // version, revision, minor, key count
        KEY_MODEL_TYPE, 0, 1, MODEL_TYPE_PROJECTED,
        KEY_PROJECTED_CS_TYPE, 0, 1, anchor.epsg,
    ];

    // Layout: header(8) | IFD | pixel scale | tiepoint | geokeys | strip.
    const N_ENTRIES: u32 = 14;
    let ifd_offset: u32 = 8;
    let ifd_len = 2 + N_ENTRIES * 12 + 4;
    let scale_offset = ifd_offset + ifd_len;
    let tiepoint_offset = scale_offset + 24;
    let geokeys_offset = tiepoint_offset + 48;
    let strip_offset = geokeys_offset + 24;

    let entries = [
        entry(TAG_IMAGE_WIDTH, TYPE_LONG, 1, field.width as u32),
        entry(TAG_IMAGE_LENGTH, TYPE_LONG, 1, field.height as u32),
        entry(TAG_BITS_PER_SAMPLE, TYPE_SHORT, 1, 32),
        entry(TAG_COMPRESSION, TYPE_SHORT, 1, 1),
        entry(TAG_PHOTOMETRIC, TYPE_SHORT, 1, 1),
        entry(TAG_STRIP_OFFSETS, TYPE_LONG, 1, strip_offset),
        entry(TAG_SAMPLES_PER_PIXEL, TYPE_SHORT, 1, 1),
        entry(TAG_ROWS_PER_STRIP, TYPE_LONG, 1, field.height as u32),
        entry(TAG_STRIP_BYTE_COUNTS, TYPE_LONG, 1, strip_bytes as u32),
        entry(TAG_SAMPLE_FORMAT, TYPE_SHORT, 1, 3),
        entry(TAG_MODEL_PIXEL_SCALE, TYPE_DOUBLE, 3, scale_offset),
        entry(TAG_MODEL_TIEPOINT, TYPE_DOUBLE, 6, tiepoint_offset),
        entry(TAG_GEO_KEY_DIRECTORY, TYPE_SHORT, 12, geokeys_offset),
        // "-1" + NUL fits inline in the value field.
        entry(TAG_GDAL_NODATA, TYPE_ASCII, 3, u32::from_le_bytes(*b"-1\0\0")),
    ];

    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(b"II")?;
    w.write_all(&42u16.to_le_bytes())?;
    w.write_all(&ifd_offset.to_le_bytes())?;

    w.write_all(&(N_ENTRIES as u16).to_le_bytes())?;
    for e in &entries {
        w.write_all(&e.tag.to_le_bytes())?;
        w.write_all(&e.ty.to_le_bytes())?;
        w.write_all(&e.count.to_le_bytes())?;
        w.write_all(&e.value.to_le_bytes())?;
    }
    w.write_all(&0u32.to_le_bytes())?; // no next IFD

    for v in pixel_scale {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in tiepoint {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in geokeys {
        w.write_all(&v.to_le_bytes())?;
    }
    // North-up rows: flip the south-origin grid.
    for iy in (0..field.height).rev() {
        for ix in 0..field.width {
            w.write_all(&(field.get(ix, iy) as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// A decoded GeoTIFF raster (rows north-up, as stored).
#[derive(Debug, Clone)]
pub struct GeoTiffRaster {
    pub width: usize,
    pub height: usize,
    pub pixel_scale: [f64; 3],
    pub tiepoint: [f64; 6],
    pub epsg: Option<u16>,
    pub nodata: Option<String>,
    /// Row-major f32 values, row 0 = north.
    pub values: Vec<f32>,
}

impl GeoTiffRaster {
    /// Values flipped back to the south-origin `GridField` row order.
    pub fn values_south_up(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        for iy in (0..self.height).rev() {
            for ix in 0..self.width {
                out.push(self.values[iy * self.width + ix] as f64);
            }
        }
        out
    }
}

fn bad(msg: impl Into<String>) -> GeotagError {
    GeotagError::MalformedTiff(msg.into())
}

/// Read a GeoTIFF produced by [`write_geotiff`] (little-endian, single
/// band, single uncompressed strip).
pub fn read_geotiff(path: &Path) -> Result<GeoTiffRaster, GeotagError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[0..2] != b"II" {
        return Err(bad("not a little-endian TIFF"));
    }
    let u16_at = |o: usize| -> Result<u16, GeotagError> {
        bytes
            .get(o..o + 2)
            .map(|b| u16::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| bad("truncated"))
    };
    let u32_at = |o: usize| -> Result<u32, GeotagError> {
        bytes
            .get(o..o + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| bad("truncated"))
    };
    let f64_at = |o: usize| -> Result<f64, GeotagError> {
        bytes
            .get(o..o + 8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| bad("truncated"))
    };
    if u16_at(2)? != 42 {
        return Err(bad("bad magic"));
    }
    let ifd = u32_at(4)? as usize;
    let n = u16_at(ifd)? as usize;

    let mut width = 0usize;
    let mut height = 0usize;
    let mut strip_offset = 0usize;
    let mut strip_bytes = 0usize;
    let mut pixel_scale = [0.0; 3];
    let mut tiepoint = [0.0; 6];
    let mut epsg = None;
    let mut nodata = None;
    let mut sample_format = 1u16;
    let mut bits = 0u16;
    let mut compression = 1u16;

    for k in 0..n {
        let e = ifd + 2 + k * 12;
        let tag = u16_at(e)?;
        let ty = u16_at(e + 2)?;
        let count = u32_at(e + 4)? as usize;
        let value = u32_at(e + 8)?;
        let scalar = || -> u32 {
            if ty == TYPE_SHORT {
                value & 0xFFFF
            } else {
                value
            }
        };
        match tag {
            TAG_IMAGE_WIDTH => width = scalar() as usize,
            TAG_IMAGE_LENGTH => height = scalar() as usize,
            TAG_BITS_PER_SAMPLE => bits = scalar() as u16,
            TAG_COMPRESSION => compression = scalar() as u16,
            TAG_STRIP_OFFSETS => {
                if count != 1 {
                    return Err(bad("multi-strip TIFF not supported"));
                }
                strip_offset = value as usize;
            }
            TAG_STRIP_BYTE_COUNTS => strip_bytes = scalar() as usize,
            TAG_SAMPLE_FORMAT => sample_format = scalar() as u16,
            TAG_MODEL_PIXEL_SCALE => {
                if count != 3 || ty != TYPE_DOUBLE {
                    return Err(bad("bad ModelPixelScale"));
                }
                for (i, v) in pixel_scale.iter_mut().enumerate() {
                    *v = f64_at(value as usize + 8 * i)?;
                }
            }
            TAG_MODEL_TIEPOINT => {
                if count != 6 || ty != TYPE_DOUBLE {
                    return Err(bad("bad ModelTiepoint"));
                }
                for (i, v) in tiepoint.iter_mut().enumerate() {
                    *v = f64_at(value as usize + 8 * i)?;
                }
            }
            TAG_GEO_KEY_DIRECTORY => {
                let base = value as usize;
                let nkeys = u16_at(base + 6)? as usize;
                for j in 0..nkeys {
                    let ko = base + 8 + j * 8;
                    if u16_at(ko)? == KEY_PROJECTED_CS_TYPE {
                        epsg = Some(u16_at(ko + 6)?);
                    }
                }
            }
            TAG_GDAL_NODATA => {
                let raw: Vec<u8> = if count <= 4 {
                    value.to_le_bytes()[..count].to_vec()
                } else {
                    bytes
                        .get(value as usize..value as usize + count)
                        .ok_or_else(|| bad("truncated nodata"))?
                        .to_vec()
                };
                let s = String::from_utf8_lossy(&raw)
                    .trim_end_matches('\0')
                    .to_string();
                nodata = Some(s);
            }
            _ => {}
        }
    }

    if compression != 1 {
        return Err(bad("compressed TIFF not supported"));
    }
    if bits != 32 || sample_format != 3 {
        return Err(bad("only float32 samples supported"));
    }
    if width == 0 || height == 0 {
        return Err(bad("missing dimensions"));
    }
    if strip_bytes != width * height * 4 {
        return Err(bad("strip byte count does not match dimensions"));
    }
    let data = bytes
        .get(strip_offset..strip_offset + strip_bytes)
        .ok_or_else(|| bad("truncated strip"))?;
    let values: Vec<f32> = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GeoTiffRaster {
        width,
        height,
        pixel_scale,
        tiepoint,
        epsg,
        nodata,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchor() -> GeoAnchor {
        GeoAnchor::new(40.44, -79.95, 300.0).unwrap()
    }

    #[test]
    fn two_by_two_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tif");
        let mut field = GridField::new(-10.0, 20.0, 0.5, 2, 2).unwrap();
        field.values = vec![0.0, 1.0, 2.0, 3.0];
        write_geotiff(&field, &anchor(), &path).unwrap();
        let raster = read_geotiff(&path).unwrap();
        assert_eq!((raster.width, raster.height), (2, 2));
        assert_eq!(raster.values_south_up(), field.values);
        assert_eq!(raster.pixel_scale, [0.5, 0.5, 0.0]);
        assert_eq!(raster.epsg, Some(32617));
        assert_eq!(raster.nodata.as_deref(), Some("-1"));
    }

    #[test]
    fn tiepoint_is_projected_nw_corner() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tif");
        let a = anchor();
        let mut field = GridField::new(25.0, -40.0, 0.5, 8, 6).unwrap();
        field.values[0] = 5.0;
        write_geotiff(&field, &a, &path).unwrap();
        let raster = read_geotiff(&path).unwrap();
        let (ae, an) = wgs84_to_utm(a.lat0, a.lon0, a.epsg);
        assert!((raster.tiepoint[3] - (ae + 25.0)).abs() < 1e-6);
        assert!((raster.tiepoint[4] - (an - 40.0 + 3.0)).abs() < 1e-6);
        assert_eq!(raster.tiepoint[..3], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn values_exact_for_f32_payloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tif");
        let mut field = GridField::new(0.0, 0.0, 1.0, 17, 9).unwrap();
        for (i, v) in field.values.iter_mut().enumerate() {
            *v = (i as f32 * 0.129 - 3.0) as f64;
        }
        field.values[5] = NODATA;
        write_geotiff(&field, &anchor(), &path).unwrap();
        let raster = read_geotiff(&path).unwrap();
        assert_eq!(raster.values_south_up(), field.values);
    }

    #[test]
    fn rejects_non_tiff() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tif");
        std::fs::write(&path, b"MM junk").unwrap();
        assert!(read_geotiff(&path).is_err());
    }
}
