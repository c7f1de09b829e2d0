//! Unstructured triangular meshes and their ADCIRC-style text formats.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::GridError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshNode {
    pub lon: f64,
    pub lat: f64,
    /// Water depth in meters, positive down (negative on dry land).
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<MeshNode>,
    pub triangles: Vec<[usize; 3]>,
}

/// Minimum |signed area| accepted for a triangle, square degrees.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

pub fn signed_area(a: &MeshNode, b: &MeshNode, c: &MeshNode) -> f64 {
    0.5 * ((b.lon - a.lon) * (c.lat - a.lat) - (c.lon - a.lon) * (b.lat - a.lat))
}

impl Mesh {
    pub fn new(nodes: Vec<MeshNode>, triangles: Vec<[usize; 3]>) -> Result<Self, GridError> {
        let mesh = Mesh { nodes, triangles };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        for (k, n) in self.nodes.iter().enumerate() {
            if !(n.lon.is_finite() && n.lat.is_finite() && n.depth.is_finite()) {
                return Err(GridError::Mesh(format!("node {k} has non-finite values")));
            }
        }
        for (k, tri) in self.triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= self.nodes.len()) {
                return Err(GridError::Mesh(format!(
                    "triangle {k} references node {bad} of {}",
                    self.nodes.len()
                )));
            }
            let area = self.triangle_area(k);
            if area.abs() <= MIN_TRIANGLE_AREA {
                return Err(GridError::Mesh(format!("triangle {k} is degenerate (area {area:e})")));
            }
        }
        Ok(())
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangles[k];
        signed_area(&self.nodes[a], &self.nodes[b], &self.nodes[c])
    }

    pub fn depths(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.depth).collect()
    }

    /// Parses a fort.14-style grid: title, `NE NP`, NP node lines, NE element
    /// lines. Trailing boundary sections are ignored.
    pub fn parse_fort14(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: String| GridError::MeshParse { line, message };

        lines.next().ok_or_else(|| err(1, "missing title line".into()))?;
        let (ln, counts) = lines.next().ok_or_else(|| err(2, "missing counts line".into()))?;
        let mut it = counts.split_whitespace();
        let mut count = |what: &str| -> Result<usize, GridError> {
            it.next()
                .ok_or_else(|| err(ln, format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|e| err(ln, format!("bad {what}: {e}")))
        };
        let ne = count("element count")?;
        let np = count("node count")?;

        let mut nodes = Vec::with_capacity(np);
        let mut id_map = std::collections::HashMap::with_capacity(np);
        for k in 0..np {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| err(3 + k, format!("expected {np} node lines, found {k}")))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 4 {
                return Err(err(ln, "node line needs `id lon lat depth`".into()));
            }
            let id: i64 = f[0].parse().map_err(|e| err(ln, format!("bad node id: {e}")))?;
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(ln, format!("bad number {s:?}: {e}")));
            nodes.push(MeshNode {
                lon: num(f[1])?,
                lat: num(f[2])?,
                depth: num(f[3])?,
            });
            if id_map.insert(id, k).is_some() {
                return Err(err(ln, format!("duplicate node id {id}")));
            }
        }

        let mut triangles = Vec::with_capacity(ne);
        for k in 0..ne {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| err(3 + np + k, format!("expected {ne} element lines, found {k}")))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 5 || f[1] != "3" {
                return Err(err(ln, "element line needs `id 3 n1 n2 n3`".into()));
            }
            let mut tri = [0usize; 3];
            for (slot, s) in tri.iter_mut().zip(&f[2..5]) {
                let id: i64 = s.parse().map_err(|e| err(ln, format!("bad node reference: {e}")))?;
                *slot = *id_map
                    .get(&id)
                    .ok_or_else(|| err(ln, format!("unknown node id {id}")))?;
            }
            triangles.push(tri);
        }
        Mesh::new(nodes, triangles)
    }

    pub fn read_fort14(path: &Path) -> Result<Self, GridError> {
        Self::parse_fort14(&std::fs::read_to_string(path)?)
    }

    /// Writes the fort.14 layout with 1-based ids.
    pub fn to_fort14(&self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{title}");
        let _ = writeln!(out, "{} {}", self.triangles.len(), self.nodes.len());
        for (k, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{} {} {} {}", k + 1, n.lon, n.lat, n.depth);
        }
        for (k, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(out, "{} 3 {} {} {}", k + 1, t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }
}

/// Parses a nodal scalar file: one value per non-blank line, `NaN` allowed for
/// dry nodes. Lines of the form `id value` are also accepted.
pub fn parse_nodal_field(text: &str, expected_nodes: usize) -> Result<Vec<f64>, GridError> {
    let mut values = Vec::with_capacity(expected_nodes);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let token = line.split_whitespace().last().expect("non-empty line");
        let v = if token.eq_ignore_ascii_case("nan") {
            f64::NAN
        } else {
            token.parse::<f64>().map_err(|e| GridError::MeshParse {
                line: i + 1,
                message: format!("bad nodal value {token:?}: {e}"),
            })?
        };
        values.push(v);
    }
    if values.len() != expected_nodes {
        return Err(GridError::Shape(format!(
            "nodal field has {} values, mesh has {expected_nodes} nodes",
            values.len()
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "toy\n2 4\n1 0.0 0.0 10.0\n2 1.0 0.0 12.0\n3 1.0 1.0 -1.0\n4 0.0 1.0 5.0\n1 3 1 2 3\n2 3 1 3 4\n";

    #[test]
    fn parses_fort14() {
        let mesh = Mesh::parse_fort14(SMALL).unwrap();
        assert_eq!(mesh.nodes.len(), 4);
        assert_eq!(mesh.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(mesh.nodes[2].depth, -1.0);
        let again = Mesh::parse_fort14(&mesh.to_fort14("toy")).unwrap();
        assert_eq!(again, mesh);
    }

    #[test]
    fn rejects_bad_references_and_degenerates() {
        let bad = SMALL.replace("2 3 1 3 4", "2 3 1 3 9");
        assert!(matches!(Mesh::parse_fort14(&bad), Err(GridError::MeshParse { line: 8, .. })));
        let degenerate = SMALL.replace("2 3 1 3 4", "2 3 1 1 4");
        assert!(matches!(Mesh::parse_fort14(&degenerate), Err(GridError::Mesh(_))));
        assert!(matches!(
            Mesh::parse_fort14("toy\n1 2\n1 0 0 1\n"),
            Err(GridError::MeshParse { .. })
        ));
    }

    #[test]
    fn nodal_field_with_dry_nodes() {
        let v = parse_nodal_field("1.5\nNaN\n\n2 0.25\n-3\n", 4).unwrap();
        assert_eq!(v[0], 1.5);
        assert!(v[1].is_nan());
        assert_eq!(&v[2..], &[0.25, -3.0]);
        assert!(parse_nodal_field("1\n2\n", 3).is_err());
    }
}
