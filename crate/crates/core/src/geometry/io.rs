//! JSON mesh export / import.

use super::{Chart, ComplexParts, Edge, MetricComplex, Shortcut};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexRecord {
    pub mass: f64,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub w: f64,
    pub len: f64,
    pub per: f64,
}

/// On-disk mesh layout. Vertices are in builder order, edges in
/// lexicographic `(i, j)` order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshFile {
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
    pub boundary: Vec<usize>,
    pub dim: usize,
    #[serde(rename = "K")]
    pub k: f64,
    pub description: String,
    #[serde(default)]
    pub shortcuts: Vec<Shortcut>,
    #[serde(default)]
    pub triangles: Vec<[usize; 3]>,
    #[serde(default = "graph_chart")]
    pub chart: Chart,
}

fn graph_chart() -> Chart {
    Chart::Graph
}

impl From<&MetricComplex> for MeshFile {
    fn from(c: &MetricComplex) -> Self {
        MeshFile {
            vertices: (0..c.num_vertices())
                .map(|v| VertexRecord {
                    mass: c.mass(v),
                    coords: c.coord(v).map(|x| x.to_vec()).unwrap_or_default(),
                })
                .collect(),
            edges: c
                .edges()
                .iter()
                .map(|e| EdgeRecord {
                    i: e.i,
                    j: e.j,
                    w: e.w,
                    len: e.len,
                    per: e.per,
                })
                .collect(),
            boundary: c.boundary_vertices(),
            dim: c.intrinsic_dim(),
            k: c.curvature_bound(),
            description: c.description().to_string(),
            shortcuts: c.shortcuts().to_vec(),
            triangles: c.triangles().to_vec(),
            chart: c.chart().clone(),
        }
    }
}

impl TryFrom<MeshFile> for MetricComplex {
    type Error = Error;

    fn try_from(m: MeshFile) -> Result<Self> {
        let n = m.vertices.len();
        let mut boundary = vec![false; n];
        for &b in &m.boundary {
            if b >= n {
                return Err(Error::Parse(format!("boundary vertex {b} out of range")));
            }
            boundary[b] = true;
        }
        let coords: Vec<Vec<f64>> = if m.vertices.iter().all(|v| v.coords.is_empty()) {
            vec![]
        } else {
            m.vertices.iter().map(|v| v.coords.clone()).collect()
        };
        MetricComplex::from_parts(ComplexParts {
            masses: m.vertices.iter().map(|v| v.mass).collect(),
            coords,
            edges: m
                .edges
                .iter()
                .map(|e| Edge {
                    i: e.i,
                    j: e.j,
                    w: e.w,
                    len: e.len,
                    per: e.per,
                })
                .collect(),
            shortcuts: m.shortcuts,
            boundary,
            triangles: m.triangles,
            intrinsic_dim: m.dim,
            curvature_bound: m.k,
            description: m.description,
            chart: m.chart,
        })
    }
}

impl Serialize for MetricComplex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeshFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricComplex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = MeshFile::deserialize(d)?;
        MetricComplex::try_from(m).map_err(serde::de::Error::custom)
    }
}

impl MetricComplex {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MeshFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MeshFile = serde_json::from_str(text)?;
        MetricComplex::try_from(m)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use crate::geometry::*;

    #[test]
    fn json_round_trip_preserves_complex() {
        let line = build_interval_between(5, -1.0, 1.0).unwrap();
        let fiber = build_doubled_triangle(1.0, 2).unwrap();
        for c in [
            build_rectangle(4, 3, 1.0, 2.0).unwrap(),
            build_cone(2.0, 3, 5, 1.0).unwrap(),
            build_product(&line, &fiber).unwrap(),
        ] {
            let text = c.to_json().unwrap();
            let back = MetricComplex::from_json(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_json().unwrap(), text);
        }
    }

    #[test]
    fn json_rejects_invalid_mass() {
        let c = build_interval(3, 1.0).unwrap();
        let text = c
            .to_json()
            .unwrap()
            .replacen("\"mass\": 0.25", "\"mass\": -1.0", 1);
        assert!(MetricComplex::from_json(&text).is_err());
    }
}
