//! Triangle meshes: Wavefront OBJ loading and a few procedural shapes used by
//! the synthetic benchmarks.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len() as u32;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidMesh(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }
        Ok(Self { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, i: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Parses the `v`/`f` subset of Wavefront OBJ. Polygons are fan
    /// triangulated; texture and normal indices are ignored.
    pub fn from_obj_str(src: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, raw) in src.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            let mut it = content.split_whitespace();
            match it.next() {
                Some("v") => {
                    let mut c = [0.0; 3];
                    for slot in &mut c {
                        let tok = it.next().ok_or_else(|| Error::MalformedObj {
                            line,
                            reason: "vertex needs three coordinates".into(),
                        })?;
                        *slot = tok.parse::<f64>().map_err(|e| Error::MalformedObj {
                            line,
                            reason: format!("bad coordinate {tok:?}: {e}"),
                        })?;
                        if !slot.is_finite() {
                            return Err(Error::MalformedObj {
                                line,
                                reason: "non-finite coordinate".into(),
                            });
                        }
                    }
                    vertices.push(Vector3::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for tok in it {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|e| Error::MalformedObj {
                            line,
                            reason: format!("bad face index {tok:?}: {e}"),
                        })?;
                        let n = vertices.len() as i64;
                        let resolved = if i > 0 { i - 1 } else { n + i };
                        if i == 0 || resolved < 0 || resolved >= n {
                            return Err(Error::MalformedObj {
                                line,
                                reason: format!("face index {i} out of range"),
                            });
                        }
                        idx.push(resolved as u32);
                    }
                    if idx.len() < 3 {
                        return Err(Error::MalformedObj {
                            line,
                            reason: "face needs at least three vertices".into(),
                        });
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        let src = std::fs::read_to_string(path)?;
        Self::from_obj_str(&src)
    }

    pub fn to_obj_string(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
        }
        for t in &self.triangles {
            out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        out
    }

    /// SHA-256 over the vertex and index buffers.
    pub fn content_digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"pftrack-mesh");
        h.update((self.vertices.len() as u64).to_le_bytes());
        for v in &self.vertices {
            for c in v.iter() {
                h.update(c.to_le_bytes());
            }
        }
        h.update((self.triangles.len() as u64).to_le_bytes());
        for t in &self.triangles {
            for i in t {
                h.update(i.to_le_bytes());
            }
        }
        h.finalize().into()
    }

    /// Largest distance from the model origin to a vertex.
    pub fn bounding_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max((a - b).norm_squared());
            }
        }
        best.sqrt()
    }

    pub fn transformed(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Result<Self> {
        Self::new(self.vertices.iter().map(f).collect(), self.triangles.clone())
    }

    /// Icosphere of the given radius and subdivision level.
    pub fn icosphere(radius: f64, level: u32) -> Self {
        let (verts, tris) = icosphere(level);
        Self {
            vertices: verts.into_iter().map(|v| v * radius).collect(),
            triangles: tris,
        }
    }

    /// Smooth, asymmetric closed surface: an icosphere whose radius is
    /// modulated by a few low-order harmonics.
    pub fn blob(radius: f64, level: u32) -> Self {
        let (verts, tris) = icosphere(level);
        let vertices = verts
            .into_iter()
            .map(|d| {
                let s = 1.0
                    + 0.22 * (2.0 * d.x + 0.4).sin() * (1.3 * d.y).cos()
                    + 0.15 * (3.0 * d.z - 0.5 * d.x).cos()
                    + 0.18 * d.x * d.y
                    + 0.12 * d.z;
                d.component_mul(&Vector3::new(1.25, 0.9, 0.8)) * (radius * s)
            })
            .collect();
        Self { vertices, triangles: tris }
    }

    /// Closed cylinder along the model z axis, centred on the origin.
    pub fn cylinder(radius: f64, height: f64, segments: usize, rings: usize) -> Self {
        let segments = segments.max(3);
        let rings = rings.max(1);
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for r in 0..=rings {
            let z = -height / 2.0 + height * r as f64 / rings as f64;
            for s in 0..segments {
                let a = std::f64::consts::TAU * s as f64 / segments as f64;
                vertices.push(Vector3::new(radius * a.cos(), radius * a.sin(), z));
            }
        }
        let at = |r: usize, s: usize| (r * segments + s % segments) as u32;
        for r in 0..rings {
            for s in 0..segments {
                triangles.push([at(r, s), at(r, s + 1), at(r + 1, s + 1)]);
                triangles.push([at(r, s), at(r + 1, s + 1), at(r + 1, s)]);
            }
        }
        let bottom = vertices.len() as u32;
        vertices.push(Vector3::new(0.0, 0.0, -height / 2.0));
        let top = vertices.len() as u32;
        vertices.push(Vector3::new(0.0, 0.0, height / 2.0));
        for s in 0..segments {
            triangles.push([bottom, at(0, s + 1), at(0, s)]);
            triangles.push([top, at(rings, s), at(rings, s + 1)]);
        }
        Self { vertices, triangles }
    }

    /// Axis-aligned box centred on the origin.
    pub fn cuboid(size: Vector3<f64>) -> Self {
        let h = size / 2.0;
        let vertices = (0..8)
            .map(|i| {
                Vector3::new(
                    if i & 1 == 0 { -h.x } else { h.x },
                    if i & 2 == 0 { -h.y } else { h.y },
                    if i & 4 == 0 { -h.z } else { h.z },
                )
            })
            .collect();
        let quads = [
            [0, 2, 3, 1],
            [4, 5, 7, 6],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 4, 6, 2],
            [1, 3, 7, 5],
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        Self { vertices, triangles }
    }
}

/// Unit icosphere: vertices are the deduplicated, normalized corners of a
/// recursively subdivided icosahedron (`10 * 4^level + 2` of them).
pub fn icosphere(level: u32) -> (Vec<Vector3<f64>>, Vec<[u32; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vector3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = ((verts[a as usize] + verts[b as usize]) / 2.0).normalize();
                verts.push(m);
                (verts.len() - 1) as u32
            })
        };
        for [a, b, c] in tris {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    (verts, tris)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_obj_subset() {
        let src = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n";
        let m = TriangleMesh::from_obj_str(src).unwrap();
        assert_eq!(m.vertices().len(), 4);
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_negative_indices() {
        let m = TriangleMesh::from_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_errors_carry_line_numbers() {
        let err = TriangleMesh::from_obj_str("v 0 0 0\nv 1 0\n").unwrap_err();
        assert!(matches!(err, Error::MalformedObj { line: 2, .. }));
        let err = TriangleMesh::from_obj_str("v 0 0 0\nf 1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::MalformedObj { line: 2, .. }));
        assert!(TriangleMesh::from_obj_str("v 0 0 0\n").is_err());
    }

    #[test]
    fn obj_round_trip() {
        let m = TriangleMesh::cuboid(Vector3::new(0.1, 0.2, 0.3));
        let back = TriangleMesh::from_obj_str(&m.to_obj_string()).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.content_digest(), back.content_digest());
    }

    #[test]
    fn icosphere_counts() {
        for level in 0..4 {
            let (v, t) = icosphere(level);
            assert_eq!(v.len(), 10 * 4usize.pow(level) + 2);
            assert_eq!(t.len(), 20 * 4usize.pow(level));
        }
    }

    #[test]
    fn primitives_are_valid() {
        for m in [
            TriangleMesh::icosphere(0.1, 2),
            TriangleMesh::blob(0.05, 3),
            TriangleMesh::cylinder(0.04, 0.12, 32, 4),
            TriangleMesh::cuboid(Vector3::new(1.0, 1.0, 1.0)),
        ] {
            TriangleMesh::new(m.vertices().to_vec(), m.triangles().to_vec()).unwrap();
        }
        let c = TriangleMesh::cylinder(0.04, 0.12, 32, 4);
        let d = c.diameter();
        assert!((d - (0.08f64.powi(2) + 0.12f64.powi(2)).sqrt()).abs() < 1e-9);
    }
}
