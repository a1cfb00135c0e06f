//! KML placemark export: overlay points clustered to per-tree placemarks
//! at WGS84 coordinates.

use std::io::{BufWriter, Write};
use std::path::Path;

use super::{GeotagError, SemanticOverlay};
use crate::cluster::cluster_points;
use crate::geom::{enu_to_wgs84, GeoAnchor};

/// Default placemark clustering radius, meters.
pub const DEFAULT_CLUSTER_RADIUS: f64 = 3.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

/// Write one placemark per overlay cluster. Placemark names carry the
/// dominant class and the cluster's max confidence; positions are cluster
/// centroids converted to WGS84 through the anchor.
pub fn write_kml(
    overlay: &SemanticOverlay,
    anchor: &GeoAnchor,
    cluster_radius: f64,
    path: &Path,
) -> Result<(), GeotagError> {
    if overlay.is_empty() {
        return Err(GeotagError::EmptyOverlay);
    }
    let xy: Vec<(f64, f64)> = overlay
        .entries
        .iter()
        .map(|e| (e.point.x, e.point.y))
        .collect();
    let clusters = cluster_points(&xy, cluster_radius, 1);

    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(w, r#"<kml xmlns="http://www.opengis.net/kml/2.2">"#)?;
    writeln!(w, "  <Document>")?;
    for c in &clusters {
        let (cx, cy) = c.centroid_xy(&xy);
        let best = c
            .indices
            .iter()
            .map(|&i| &overlay.entries[i])
            .max_by(|a, b| a.conf.total_cmp(&b.conf))
            .expect("cluster is nonempty");
        let (lat, lon, _) = enu_to_wgs84(&nalgebra::Vector3::new(cx, cy, 0.0), anchor);
        writeln!(w, "    <Placemark>")?;
        writeln!(
            w,
            "      <name>{} ({:.2})</name>",
            xml_escape(&best.class),
            best.conf
        )?;
        writeln!(
            w,
            "      <description>{} tagged points</description>",
            c.len()
        )?;
        writeln!(w, "      <Point>")?;
        writeln!(w, "        <coordinates>{lon},{lat},0</coordinates>")?;
        writeln!(w, "      </Point>")?;
        writeln!(w, "    </Placemark>")?;
    }
    writeln!(w, "  </Document>")?;
    writeln!(w, "</kml>")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use crate::geotag::OverlayEntry;

    fn overlay_of(points: &[(f64, f64, f64)]) -> SemanticOverlay {
        SemanticOverlay {
            entries: points
                .iter()
                .enumerate()
                .map(|(i, &(x, y, conf))| OverlayEntry {
                    index: i,
                    point: Point3::new(x, y, 0.0),
                    class: "tree<of>heaven".into(),
                    conf,
                })
                .collect(),
            skipped_detections: 0,
        }
    }

    fn anchor() -> GeoAnchor {
        GeoAnchor::new(40.44, -79.95, 300.0).unwrap()
    }

    fn count_placemarks(path: &Path) -> usize {
        std::fs::read_to_string(path)
            .unwrap()
            .matches("<Placemark>")
            .count()
    }

    #[test]
    fn single_point_single_placemark() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.kml");
        write_kml(&overlay_of(&[(0.0, 0.0, 0.9)]), &anchor(), 3.0, &path).unwrap();
        assert_eq!(count_placemarks(&path), 1);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("tree&lt;of&gt;heaven"));
        assert!(text.contains("<coordinates>-79.95"));
    }

    #[test]
    fn nearby_points_merge_far_points_split() {
        let dir = tempfile::tempdir().unwrap();
        let near = dir.path().join("near.kml");
        write_kml(
            &overlay_of(&[(0.0, 0.0, 0.5), (1.0, 0.0, 0.8)]),
            &anchor(),
            3.0,
            &near,
        )
        .unwrap();
        assert_eq!(count_placemarks(&near), 1);
        let text = std::fs::read_to_string(&near).unwrap();
        assert!(text.contains("(0.80)"), "max confidence in name: {text}");

        let far = dir.path().join("far.kml");
        write_kml(
            &overlay_of(&[(0.0, 0.0, 0.5), (20.0, 0.0, 0.8)]),
            &anchor(),
            3.0,
            &far,
        )
        .unwrap();
        assert_eq!(count_placemarks(&far), 2);
    }

    #[test]
    fn structure_is_well_formed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.kml");
        write_kml(&overlay_of(&[(0.0, 0.0, 1.0)]), &anchor(), 3.0, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for (open, close) in [
            ("<kml", "</kml>"),
            ("<Document>", "</Document>"),
            ("<Placemark>", "</Placemark>"),
            ("<name>", "</name>"),
            ("<description>", "</description>"),
            ("<Point>", "</Point>"),
            ("<coordinates>", "</coordinates>"),
        ] {
            assert_eq!(
                text.matches(open).count(),
                text.matches(close).count(),
                "unbalanced {open}"
            );
            assert!(text.contains(open), "missing {open}");
        }
    }

    #[test]
    fn empty_overlay_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.kml");
        assert!(write_kml(&SemanticOverlay::default(), &anchor(), 3.0, &path).is_err());
    }
}
