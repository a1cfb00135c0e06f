//! Minimal PLY reader/writer for the vertex layouts this pipeline uses:
//! `float x, y, z`, optional `float intensity`, optional
//! `uchar red/green/blue`. Writes binary little-endian; reads both binary
//! little-endian and ASCII.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geom::{Frame, Point3, PointCloud};

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported property type or layout: {0}")]
    UnsupportedProperty(String),
    #[error("element count mismatch: header declares {declared} vertices, file holds {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("malformed vertex data at vertex {0}: {1}")]
    MalformedVertex(usize, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Prop {
    X,
    Y,
    Z,
    Intensity,
    Red,
    Green,
    Blue,
}

impl Prop {
    fn is_float(self) -> bool {
        matches!(self, Prop::X | Prop::Y | Prop::Z | Prop::Intensity)
    }
}

/// Write a cloud as binary little-endian PLY. The intensity property is
/// emitted only when every point carries one; RGB only when colors are set.
pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<(), PlyError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let with_intensity = cloud.has_intensity();
    let with_rgb = cloud.colors.is_some();
    if let Some(colors) = &cloud.colors {
        assert_eq!(colors.len(), cloud.points.len(), "color/point length mismatch");
    }
    write!(w, "ply\nformat binary_little_endian 1.0\n")?;
    writeln!(w, "element vertex {}", cloud.points.len())?;
    write!(w, "property float x\nproperty float y\nproperty float z\n")?;
    if with_intensity {
        writeln!(w, "property float intensity")?;
    }
    if with_rgb {
        write!(w, "property uchar red\nproperty uchar green\nproperty uchar blue\n")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        w.write_all(&(p.x as f32).to_le_bytes())?;
        w.write_all(&(p.y as f32).to_le_bytes())?;
        w.write_all(&(p.z as f32).to_le_bytes())?;
        if with_intensity {
            w.write_all(&(p.intensity.unwrap_or(0.0) as f32).to_le_bytes())?;
        }
        if with_rgb {
            w.write_all(&cloud.colors.as_ref().unwrap()[i])?;
        }
    }
    Ok(())
}

/// Read a PLY vertex cloud. The returned cloud is in the map frame; callers
/// re-tag the frame when they know better.
pub fn read_ply(path: &Path) -> Result<PointCloud, PlyError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let (format, count, props) = parse_header(&mut r)?;
    let mut points = Vec::with_capacity(count);
    let mut colors: Vec<[u8; 3]> = Vec::new();
    let has_rgb = props.contains(&Prop::Red);
    let has_intensity = props.contains(&Prop::Intensity);

    match format {
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = props.iter().map(|p| if p.is_float() { 4 } else { 1 }).sum();
            let mut buf = vec![0u8; stride];
            for i in 0..count {
                if let Err(e) = r.read_exact(&mut buf) {
                    if e.kind() == std::io::ErrorKind::UnexpectedEof {
                        return Err(PlyError::CountMismatch {
                            declared: count,
                            found: i,
                        });
                    }
                    return Err(PlyError::Io(e));
                }
                let mut off = 0usize;
                let mut p = Point3::new(0.0, 0.0, 0.0);
                let mut rgb = [0u8; 3];
                for prop in &props {
                    if prop.is_float() {
                        let v =
                            f32::from_le_bytes(buf[off..off + 4].try_into().unwrap()) as f64;
                        off += 4;
                        match prop {
                            Prop::X => p.x = v,
                            Prop::Y => p.y = v,
                            Prop::Z => p.z = v,
                            Prop::Intensity => p.intensity = Some(v),
                            _ => unreachable!(),
                        }
                    } else {
                        let v = buf[off];
                        off += 1;
                        match prop {
                            Prop::Red => rgb[0] = v,
                            Prop::Green => rgb[1] = v,
                            Prop::Blue => rgb[2] = v,
                            _ => unreachable!(),
                        }
                    }
                }
                points.push(p);
                if has_rgb {
                    colors.push(rgb);
                }
            }
        }
        PlyFormat::Ascii => {
            for i in 0..count {
                let mut line = String::new();
                let n = r.read_line(&mut line)?;
                if n == 0 {
                    return Err(PlyError::CountMismatch {
                        declared: count,
                        found: i,
                    });
                }
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != props.len() {
                    return Err(PlyError::MalformedVertex(
                        i,
                        format!("expected {} fields, got {}", props.len(), fields.len()),
                    ));
                }
                let mut p = Point3::new(0.0, 0.0, 0.0);
                let mut rgb = [0u8; 3];
                for (prop, field) in props.iter().zip(&fields) {
                    let v: f64 = field
                        .parse()
                        .map_err(|_| PlyError::MalformedVertex(i, format!("bad number {field:?}")))?;
                    match prop {
                        Prop::X => p.x = v,
                        Prop::Y => p.y = v,
                        Prop::Z => p.z = v,
                        Prop::Intensity => p.intensity = Some(v),
                        Prop::Red => rgb[0] = v as u8,
                        Prop::Green => rgb[1] = v as u8,
                        Prop::Blue => rgb[2] = v as u8,
                    }
                }
                points.push(p);
                if has_rgb {
                    colors.push(rgb);
                }
            }
        }
    }
    // Intensity is all-or-nothing per file by construction of the header.
    debug_assert!(!has_intensity || points.iter().all(|p| p.intensity.is_some()));
    let mut cloud = PointCloud::new(points, Frame::Map);
    if has_rgb {
        cloud.colors = Some(colors);
    }
    Ok(cloud)
}

fn parse_header<R: BufRead>(r: &mut R) -> Result<(PlyFormat, usize, Vec<Prop>), PlyError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(PlyError::MalformedHeader("missing 'ply' magic".into()));
    }
    let mut format = None;
    let mut count = None;
    let mut props: Vec<Prop> = Vec::new();
    let mut in_vertex_element = false;
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(PlyError::MalformedHeader("missing end_header".into()));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["comment", ..] => {}
            ["format", "ascii", "1.0"] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", "1.0"] => {
                format = Some(PlyFormat::BinaryLittleEndian)
            }
            ["format", f, ..] => {
                return Err(PlyError::UnsupportedProperty(format!("format {f}")))
            }
            ["element", "vertex", n] => {
                count = Some(n.parse().map_err(|_| {
                    PlyError::MalformedHeader(format!("bad vertex count {n:?}"))
                })?);
                in_vertex_element = true;
            }
            ["element", name, _] => {
                // Other elements (faces, edges) are not supported.
                if count.is_some() {
                    return Err(PlyError::UnsupportedProperty(format!("element {name}")));
                }
                in_vertex_element = false;
            }
            ["property", "list", ..] => {
                return Err(PlyError::UnsupportedProperty("list property".into()))
            }
            ["property", ty, name] if in_vertex_element => {
                let prop = match *name {
                    "x" => Prop::X,
                    "y" => Prop::Y,
                    "z" => Prop::Z,
                    "intensity" => Prop::Intensity,
                    "red" => Prop::Red,
                    "green" => Prop::Green,
                    "blue" => Prop::Blue,
                    other => {
                        return Err(PlyError::UnsupportedProperty(format!("property {other}")))
                    }
                };
                let ok = match *ty {
                    "float" | "float32" => prop.is_float(),
                    "uchar" | "uint8" => !prop.is_float(),
                    _ => false,
                };
                if !ok {
                    return Err(PlyError::UnsupportedProperty(format!(
                        "property {ty} {name}"
                    )));
                }
                props.push(prop);
            }
            ["property", ..] => {}
            _ => {
                return Err(PlyError::MalformedHeader(format!(
                    "unrecognized line {:?}",
                    line.trim_end()
                )))
            }
        }
    }
    let format = format.ok_or_else(|| PlyError::MalformedHeader("missing format".into()))?;
    let count = count.ok_or_else(|| PlyError::MalformedHeader("missing vertex element".into()))?;
    for required in [Prop::X, Prop::Y, Prop::Z] {
        if !props.contains(&required) {
            return Err(PlyError::MalformedHeader(format!(
                "missing required property {required:?}"
            )));
        }
    }
    Ok((format, count, props))
}
