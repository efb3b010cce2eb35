//! Geometry files: JSON with square tensor-product patches.
//!
//! Layout: `{"patches": [{"degree", "num_spans", "regularity",
//! "control_points": [[wx, wy, w], ...]}], "interfaces": [{"a": {"patch",
//! "edge"}, "b": {...}, "flip"}], "boundary": [{"patch", "edge"}]}` with
//! edges encoded 0 = u0, 1 = u1, 2 = v0, 3 = v1 and control points v-major.
//! The writer emits 17 significant digits so saved files reload bit-exactly.

use super::{BoundaryEdge, Edge, GeometryError, Interface, MultiPatchGeometry, Patch};
use crate::splines::SplineSpace2D;
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Deserialize)]
struct FilePatch {
    degree: usize,
    num_spans: usize,
    regularity: usize,
    control_points: Vec<[f64; 3]>,
}

#[derive(Deserialize)]
struct FileEdgeRef {
    patch: usize,
    edge: u8,
}

#[derive(Deserialize)]
struct FileInterface {
    a: FileEdgeRef,
    b: FileEdgeRef,
    flip: bool,
}

#[derive(Deserialize)]
struct FileGeometry {
    patches: Vec<FilePatch>,
    interfaces: Vec<FileInterface>,
    boundary: Vec<FileEdgeRef>,
}

fn bad(msg: impl Into<String>) -> GeometryError {
    GeometryError::File(msg.into())
}

fn edge_ref(e: &FileEdgeRef) -> Result<(usize, Edge), GeometryError> {
    let edge = Edge::from_index(e.edge).ok_or_else(|| bad(format!("bad edge code {}", e.edge)))?;
    Ok((e.patch, edge))
}

/// Load and fully validate a geometry file.
pub fn load_geometry(path: &Path) -> Result<MultiPatchGeometry, GeometryError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let file: FileGeometry =
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;

    let mut patches = Vec::with_capacity(file.patches.len());
    for (i, fp) in file.patches.iter().enumerate() {
        if fp.degree < 1 || fp.num_spans < 1 {
            return Err(bad(format!(
                "patch {i}: degree and num_spans must be at least 1"
            )));
        }
        let space = SplineSpace2D::square(fp.degree, fp.regularity, fp.num_spans);
        if fp.control_points.len() != space.dim() {
            return Err(bad(format!(
                "patch {i}: {} control points, space needs {}",
                fp.control_points.len(),
                space.dim()
            )));
        }
        patches.push(Patch::new(space, fp.control_points.clone()));
    }
    let mut interfaces = Vec::with_capacity(file.interfaces.len());
    for fi in &file.interfaces {
        interfaces.push(Interface {
            a: edge_ref(&fi.a)?,
            b: edge_ref(&fi.b)?,
            flip: fi.flip,
        });
    }
    let mut boundary = Vec::with_capacity(file.boundary.len());
    for fb in &file.boundary {
        let (patch, edge) = edge_ref(fb)?;
        boundary.push(BoundaryEdge { patch, edge });
    }

    let geom = MultiPatchGeometry {
        patches,
        interfaces,
        boundary,
    };
    geom.validate()?;
    Ok(geom)
}

/// Write a geometry file that `load_geometry` reloads bit-exactly.
/// Only square patch spaces (equal u and v parameters) are representable.
pub fn save_geometry(geom: &MultiPatchGeometry, path: &Path) -> Result<(), GeometryError> {
    let mut out = String::new();
    out.push_str("{\n  \"patches\": [\n");
    for (i, patch) in geom.patches.iter().enumerate() {
        let s = patch.space;
        if s.u != s.v {
            return Err(bad(format!(
                "patch {i}: asymmetric spaces cannot be saved"
            )));
        }
        let _ = write!(
            out,
            "    {{\n      \"degree\": {},\n      \"num_spans\": {},\n      \"regularity\": {},\n      \"control_points\": [\n",
            s.u.degree, s.u.spans, s.u.regularity
        );
        for (k, cp) in patch.cps.iter().enumerate() {
            let _ = write!(
                out,
                "        [{:.16e}, {:.16e}, {:.16e}]{}\n",
                cp[0],
                cp[1],
                cp[2],
                if k + 1 < patch.cps.len() { "," } else { "" }
            );
        }
        let _ = write!(
            out,
            "      ]\n    }}{}\n",
            if i + 1 < geom.patches.len() { "," } else { "" }
        );
    }
    out.push_str("  ],\n  \"interfaces\": [\n");
    for (i, itf) in geom.interfaces.iter().enumerate() {
        let _ = write!(
            out,
            "    {{\"a\": {{\"patch\": {}, \"edge\": {}}}, \"b\": {{\"patch\": {}, \"edge\": {}}}, \"flip\": {}}}{}\n",
            itf.a.0,
            itf.a.1.to_index(),
            itf.b.0,
            itf.b.1.to_index(),
            itf.flip,
            if i + 1 < geom.interfaces.len() { "," } else { "" }
        );
    }
    out.push_str("  ],\n  \"boundary\": [\n");
    for (i, be) in geom.boundary.iter().enumerate() {
        let _ = write!(
            out,
            "    {{\"patch\": {}, \"edge\": {}}}{}\n",
            be.patch,
            be.edge.to_index(),
            if i + 1 < geom.boundary.len() { "," } else { "" }
        );
    }
    out.push_str("  ]\n}\n");
    std::fs::write(path, out).map_err(|e| bad(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::super::catalog;
    use super::*;

    #[test]
    fn every_catalog_geometry_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        for name in super::super::catalog_names() {
            let geom = catalog(name).unwrap();
            let path = dir.path().join(format!("{name}.json"));
            save_geometry(&geom, &path).unwrap();
            let loaded = load_geometry(&path).unwrap();
            assert_eq!(geom, loaded, "{name} changed across save/load");
        }
    }

    #[test]
    fn hand_written_file_matches_catalog_builder() {
        let text = r#"{
          "patches": [
            {"degree": 1, "num_spans": 1, "regularity": 0,
             "control_points": [[-1, 0, 1], [0, 0, 1], [-1, 1, 1], [0, 1, 1]]},
            {"degree": 1, "num_spans": 1, "regularity": 0,
             "control_points": [[0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]]}
          ],
          "interfaces": [
            {"a": {"patch": 0, "edge": 1}, "b": {"patch": 1, "edge": 0}, "flip": false}
          ],
          "boundary": [
            {"patch": 0, "edge": 0}, {"patch": 0, "edge": 2}, {"patch": 0, "edge": 3},
            {"patch": 1, "edge": 1}, {"patch": 1, "edge": 2}, {"patch": 1, "edge": 3}
          ]
        }"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("two.json");
        std::fs::write(&path, text).unwrap();
        let loaded = load_geometry(&path).unwrap();
        assert_eq!(loaded, catalog("two_patch_identity").unwrap());
    }

    #[test]
    fn loader_rejects_non_c0_interfaces() {
        // Right patch shifted by 0.1: edges no longer meet.
        let text = r#"{
          "patches": [
            {"degree": 1, "num_spans": 1, "regularity": 0,
             "control_points": [[-1, 0, 1], [0, 0, 1], [-1, 1, 1], [0, 1, 1]]},
            {"degree": 1, "num_spans": 1, "regularity": 0,
             "control_points": [[0.1, 0, 1], [1, 0, 1], [0.1, 1, 1], [1, 1, 1]]}
          ],
          "interfaces": [
            {"a": {"patch": 0, "edge": 1}, "b": {"patch": 1, "edge": 0}, "flip": false}
          ],
          "boundary": [
            {"patch": 0, "edge": 0}, {"patch": 0, "edge": 2}, {"patch": 0, "edge": 3},
            {"patch": 1, "edge": 1}, {"patch": 1, "edge": 2}, {"patch": 1, "edge": 3}
          ]
        }"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_geometry(&path),
            Err(GeometryError::C0Mismatch { interface: 0, .. })
        ));
    }

    #[test]
    fn loader_rejects_nonpositive_weights_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let neg = r#"{
          "patches": [
            {"degree": 1, "num_spans": 1, "regularity": 0,
             "control_points": [[0, 0, -1], [1, 0, 1], [0, 1, 1], [1, 1, 1]]}
          ],
          "interfaces": [],
          "boundary": [
            {"patch": 0, "edge": 0}, {"patch": 0, "edge": 1},
            {"patch": 0, "edge": 2}, {"patch": 0, "edge": 3}
          ]
        }"#;
        let path = dir.path().join("neg.json");
        std::fs::write(&path, neg).unwrap();
        assert!(matches!(
            load_geometry(&path),
            Err(GeometryError::NonpositiveWeight { patch: 0, .. })
        ));

        let path = dir.path().join("garbage.json");
        std::fs::write(&path, "not json").unwrap();
        assert!(matches!(
            load_geometry(&path),
            Err(GeometryError::File(_))
        ));

        let path = dir.path().join("count.json");
        std::fs::write(
            &path,
            r#"{"patches": [{"degree": 2, "num_spans": 1, "regularity": 1,
                "control_points": [[0, 0, 1]]}],
                "interfaces": [], "boundary": []}"#,
        )
        .unwrap();
        assert!(matches!(
            load_geometry(&path),
            Err(GeometryError::File(_))
        ));
    }
}
