//! Record-stream I/O: trajectory CSV, GNSS CSV, detection JSON-lines, and
//! DBH record CSV.
//!
//! Formats:
//! - trajectory: `t,tx,ty,tz,qx,qy,qz,qw` (seconds, meters, scalar-last quaternion)
//! - GNSS: `t,lat,lon,alt,cxx,cxy,cxz,cyy,cyz,czz` (upper-triangle position
//!   covariance in m^2 on ENU axes)
//! - detections: one JSON object per line:
//!   `{"t": .., "image": .., "class": .., "conf": .., "bbox": [x, y, w, h]}`
//! - DBH: `id,dbh_est_m,dbh_gt_m`
//!
//! Timestamps must be strictly increasing; any violation (including
//! duplicates) is reported with its line number.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::eval::DbhRecord;
use crate::geom::{enu_to_wgs84, wgs84_to_enu, GeoAnchor, Se3Pose};
use crate::geotag::Detection;
use crate::pgo::GnssFix;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn parse_err(line: usize, msg: impl Into<String>) -> RecordError {
    RecordError::Parse {
        line,
        msg: msg.into(),
    }
}

fn split_row<'a>(
    row: &'a str,
    expected: &[&str],
    line: usize,
) -> Result<Vec<&'a str>, RecordError> {
    let fields: Vec<&str> = row.trim_end().split(',').collect();
    if fields.len() != expected.len() {
        return Err(parse_err(
            line,
            format!("expected {} columns, got {}", expected.len(), fields.len()),
        ));
    }
    Ok(fields)
}

fn parse_finite(s: &str, col: &str, line: usize) -> Result<f64, RecordError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("column {col}: not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("column {col}: non-finite value")));
    }
    Ok(v)
}

fn check_header(line1: &str, expected: &[&str]) -> Result<(), RecordError> {
    let got: Vec<&str> = line1.trim_end().split(',').map(str::trim).collect();
    for e in expected {
        if !got.contains(e) {
            return Err(parse_err(1, format!("missing column {e:?} in header")));
        }
    }
    if got != expected {
        return Err(parse_err(
            1,
            format!("header must be exactly {:?}, got {:?}", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

const TRAJ_COLS: [&str; 8] = ["t", "tx", "ty", "tz", "qx", "qy", "qz", "qw"];
const GNSS_COLS: [&str; 10] = [
    "t", "lat", "lon", "alt", "cxx", "cxy", "cxz", "cyy", "cyz", "czz",
];
const DBH_COLS: [&str; 3] = ["id", "dbh_est_m", "dbh_gt_m"];

/// Read a trajectory CSV. An empty file (or header-only file) yields an
/// empty trajectory.
pub fn read_trajectory(path: &Path) -> Result<Vec<Se3Pose>, RecordError> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out: Vec<Se3Pose> = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if lineno == 1 {
            if line.trim().is_empty() {
                return Ok(out);
            }
            check_header(&line, &TRAJ_COLS)?;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f = split_row(&line, &TRAJ_COLS, lineno)?;
        let mut v = [0.0f64; 8];
        for (k, (field, col)) in f.iter().zip(TRAJ_COLS).enumerate() {
            v[k] = parse_finite(field, col, lineno)?;
        }
        if v[0] <= last_t {
            return Err(parse_err(
                lineno,
                format!("non-monotone timestamp {} (previous {})", v[0], last_t),
            ));
        }
        last_t = v[0];
        let q = Quaternion::new(v[7], v[4], v[5], v[6]); // w, x, y, z
        if (q.norm_squared() - 1.0).abs() > 1e-6 {
            return Err(parse_err(lineno, "quaternion is not unit norm"));
        }
        out.push(Se3Pose::new(
            v[0],
            Vector3::new(v[1], v[2], v[3]),
            UnitQuaternion::from_quaternion(q),
        ));
    }
    Ok(out)
}

pub fn write_trajectory(traj: &[Se3Pose], path: &Path) -> Result<(), RecordError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", TRAJ_COLS.join(","))?;
    for p in traj {
        let q = p.rotation.quaternion();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            p.t, p.translation.x, p.translation.y, p.translation.z, q.i, q.j, q.k, q.w
        )?;
    }
    Ok(())
}

/// Read a GNSS CSV, converting positions to ENU. When `anchor` is None the
/// first fix becomes the anchor (the conventional choice for a run).
/// Returns the fixes and the anchor actually used.
pub fn read_gnss(
    path: &Path,
    anchor: Option<GeoAnchor>,
) -> Result<(Vec<GnssFix>, Option<GeoAnchor>), RecordError> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut rows: Vec<(usize, [f64; 10])> = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if lineno == 1 {
            if line.trim().is_empty() {
                return Ok((Vec::new(), anchor));
            }
            check_header(&line, &GNSS_COLS)?;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f = split_row(&line, &GNSS_COLS, lineno)?;
        let mut v = [0.0f64; 10];
        for (k, (field, col)) in f.iter().zip(GNSS_COLS).enumerate() {
            v[k] = parse_finite(field, col, lineno)?;
        }
        if v[0] <= last_t {
            return Err(parse_err(
                lineno,
                format!("non-monotone timestamp {} (previous {})", v[0], last_t),
            ));
        }
        last_t = v[0];
        rows.push((lineno, v));
    }
    if rows.is_empty() {
        return Ok((Vec::new(), anchor));
    }
    let anchor = match anchor {
        Some(a) => a,
        None => GeoAnchor::new(rows[0].1[1], rows[0].1[2], rows[0].1[3])
            .map_err(|e| parse_err(rows[0].0, e.to_string()))?,
    };
    let mut fixes = Vec::with_capacity(rows.len());
    for (lineno, v) in rows {
        let position = wgs84_to_enu(v[1], v[2], v[3], &anchor)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        let covariance = Matrix3::new(
            v[4], v[5], v[6], //
            v[5], v[7], v[8], //
            v[6], v[8], v[9],
        );
        let fix = GnssFix::new(v[0], position, covariance)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        fixes.push(fix);
    }
    Ok((fixes, Some(anchor)))
}

/// Write GNSS fixes back to the CSV schema, converting ENU to WGS84.
pub fn write_gnss(fixes: &[GnssFix], anchor: &GeoAnchor, path: &Path) -> Result<(), RecordError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", GNSS_COLS.join(","))?;
    for f in fixes {
        let (lat, lon, alt) = enu_to_wgs84(&f.position, anchor);
        let c = &f.covariance;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            f.t,
            lat,
            lon,
            alt,
            c[(0, 0)],
            c[(0, 1)],
            c[(0, 2)],
            c[(1, 1)],
            c[(1, 2)],
            c[(2, 2)]
        )?;
    }
    Ok(())
}

/// Read detection records from JSON-lines, sorted (and validated) by time.
pub fn read_detections(path: &Path) -> Result<Vec<Detection>, RecordError> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out: Vec<Detection> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let det: Detection = serde_json::from_str(&line)
            .map_err(|e| parse_err(lineno, format!("bad detection record: {e}")))?;
        if !det.t.is_finite() || !det.conf.is_finite() || det.bbox.iter().any(|v| !v.is_finite())
        {
            return Err(parse_err(lineno, "non-finite value in detection"));
        }
        if det.bbox[2] <= 0.0 || det.bbox[3] <= 0.0 {
            return Err(parse_err(lineno, "bbox width/height must be positive"));
        }
        if !(0.0..=1.0).contains(&det.conf) {
            return Err(parse_err(lineno, "confidence outside [0, 1]"));
        }
        out.push(det);
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

pub fn write_detections(dets: &[Detection], path: &Path) -> Result<(), RecordError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for d in dets {
        writeln!(w, "{}", serde_json::to_string(d).expect("detection serializes"))?;
    }
    Ok(())
}

/// Read DBH estimate/ground-truth records.
pub fn read_dbh_records(path: &Path) -> Result<Vec<DbhRecord>, RecordError> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if lineno == 1 {
            if line.trim().is_empty() {
                return Ok(out);
            }
            check_header(&line, &DBH_COLS)?;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f = split_row(&line, &DBH_COLS, lineno)?;
        let dbh_est = parse_finite(f[1], "dbh_est_m", lineno)?;
        let dbh_gt = parse_finite(f[2], "dbh_gt_m", lineno)?;
        if dbh_est <= 0.0 || dbh_gt <= 0.0 {
            return Err(parse_err(lineno, "DBH values must be positive"));
        }
        out.push(DbhRecord {
            id: f[0].trim().to_string(),
            dbh_est,
            dbh_gt,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn empty_file_is_empty_list() {
        let dir = tmp();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "").unwrap();
        assert!(read_trajectory(&p).unwrap().is_empty());
        let (fixes, _) = read_gnss(&p, None).unwrap();
        assert!(fixes.is_empty());
    }

    #[test]
    fn one_row_trajectory() {
        let dir = tmp();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "t,tx,ty,tz,qx,qy,qz,qw\n0.5,1,2,3,0,0,0,1\n").unwrap();
        let traj = read_trajectory(&p).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj[0].translation, Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn non_monotone_time_reports_line() {
        let dir = tmp();
        let p = dir.path().join("t.csv");
        std::fs::write(
            &p,
            "t,tx,ty,tz,qx,qy,qz,qw\n1.0,0,0,0,0,0,0,1\n1.0,1,0,0,0,0,0,1\n",
        )
        .unwrap();
        match read_trajectory(&p) {
            Err(RecordError::Parse { line: 3, .. }) => {}
            other => panic!("expected parse error at line 3, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_reports_header() {
        let dir = tmp();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "t,tx,ty,tz,qx,qy,qz\n").unwrap();
        match read_trajectory(&p) {
            Err(RecordError::Parse { line: 1, msg }) => assert!(msg.contains("qw")),
            other => panic!("expected header error, got {other:?}"),
        }
    }

    #[test]
    fn nan_covariance_reports_line() {
        let dir = tmp();
        let p = dir.path().join("g.csv");
        std::fs::write(
            &p,
            "t,lat,lon,alt,cxx,cxy,cxz,cyy,cyz,czz\n0,40.44,-79.95,300,1,0,0,NaN,0,1\n",
        )
        .unwrap();
        match read_gnss(&p, None) {
            Err(RecordError::Parse { line: 2, msg }) => assert!(msg.contains("cyy")),
            other => panic!("expected parse error at line 2, got {other:?}"),
        }
    }

    #[test]
    fn gnss_anchor_defaults_to_first_fix() {
        let dir = tmp();
        let p = dir.path().join("g.csv");
        std::fs::write(
            &p,
            "t,lat,lon,alt,cxx,cxy,cxz,cyy,cyz,czz\n0,40.44,-79.95,300,1,0,0,1,0,1\n1,40.4401,-79.95,300,1,0,0,1,0,1\n",
        )
        .unwrap();
        let (fixes, anchor) = read_gnss(&p, None).unwrap();
        let anchor = anchor.unwrap();
        assert_eq!(anchor.lat0, 40.44);
        assert!(fixes[0].position.norm() < 1e-9);
        assert!(fixes[1].position.y > 10.0); // ~11 m north
    }

    #[test]
    fn gnss_round_trip_through_csv() {
        let dir = tmp();
        let p = dir.path().join("g.csv");
        std::fs::write(
            &p,
            "t,lat,lon,alt,cxx,cxy,cxz,cyy,cyz,czz\n0,40.44,-79.95,300,4,0.1,0,4,0,9\n2,40.4405,-79.9504,301,2,0,0,2,0,3\n",
        )
        .unwrap();
        let (fixes, anchor) = read_gnss(&p, None).unwrap();
        let anchor = anchor.unwrap();
        let p2 = dir.path().join("g2.csv");
        write_gnss(&fixes, &anchor, &p2).unwrap();
        let (fixes2, _) = read_gnss(&p2, Some(anchor)).unwrap();
        for (a, b) in fixes.iter().zip(&fixes2) {
            assert!((a.position - b.position).norm() < 1e-6);
            assert!((a.covariance - b.covariance).norm() < 1e-9);
        }
    }

    #[test]
    fn detections_sorted_and_validated() {
        let dir = tmp();
        let p = dir.path().join("d.jsonl");
        std::fs::write(
            &p,
            concat!(
                "{\"t\": 2.0, \"image\": \"b.jpg\", \"class\": \"toh\", \"conf\": 0.9, \"bbox\": [10, 20, 30, 40]}\n",
                "{\"t\": 1.0, \"image\": \"a.jpg\", \"class\": \"toh\", \"conf\": 0.5, \"bbox\": [1, 2, 3, 4]}\n",
            ),
        )
        .unwrap();
        let dets = read_detections(&p).unwrap();
        assert_eq!(dets.len(), 2);
        assert_eq!(dets[0].t, 1.0);
    }

    #[test]
    fn bad_detection_reports_line() {
        let dir = tmp();
        let p = dir.path().join("d.jsonl");
        std::fs::write(
            &p,
            "{\"t\": 1.0, \"image\": \"a.jpg\", \"class\": \"toh\", \"conf\": 1.5, \"bbox\": [1, 2, 3, 4]}\n",
        )
        .unwrap();
        match read_detections(&p) {
            Err(RecordError::Parse { line: 1, .. }) => {}
            other => panic!("expected line-1 error, got {other:?}"),
        }
    }
}
