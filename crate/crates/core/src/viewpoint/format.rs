//! Little-endian template file:
//!
//! ```text
//! "PFVM" | u32 version | [u8; 32] mesh digest | u32 views | f32 sphere radius
//! per view: 3 f32 view_dir | 12 f32 pose (row-major R, t)
//!           u32 n_cnt | n_cnt x 6 f32 (X, N) | u32 n_in | n_in x 3 f32
//! u32 CRC32 of everything before it
//! ```

use nalgebra::Vector3;

use super::{ContourPoint, ViewpointModel, ViewpointTemplate};
use crate::error::{Error, Result};
use crate::geometry::Pose;

pub const MAGIC: &[u8; 4] = b"PFVM";
pub const FORMAT_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f32(&mut self, v: f64) {
        self.0.extend_from_slice(&(v as f32).to_le_bytes());
    }

    fn vec3(&mut self, v: &Vector3<f64>) {
        v.iter().for_each(|&c| self.f32(c));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::MalformedTemplate(format!("unexpected end of data while reading {what}"))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f64> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as f64)
    }

    fn vec3(&mut self, what: &str) -> Result<Vector3<f64>> {
        Ok(Vector3::new(self.f32(what)?, self.f32(what)?, self.f32(what)?))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Reads a count of records of `record` bytes each, refusing counts the
    /// remaining data cannot hold.
    fn count(&mut self, record: usize, what: &str) -> Result<usize> {
        let n = self.u32(what)? as usize;
        if n.saturating_mul(record) > self.remaining() {
            return Err(Error::MalformedTemplate(format!(
                "{what} count {n} exceeds the remaining {} bytes",
                self.remaining()
            )));
        }
        Ok(n)
    }
}

impl ViewpointModel {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.0.extend_from_slice(&self.mesh_hash);
        w.u32(self.views.len() as u32);
        w.f32(self.sphere_radius);
        for v in &self.views {
            w.vec3(&v.view_dir);
            v.view_pose.to_array().iter().for_each(|&x| w.f32(x));
            w.u32(v.contour_points.len() as u32);
            for c in &v.contour_points {
                w.vec3(&c.position);
                w.vec3(&c.normal);
            }
            w.u32(v.interior_points.len() as u32);
            v.interior_points.iter().for_each(|p| w.vec3(p));
        }
        let crc = crc32fast::hash(&w.0);
        w.u32(crc);
        w.0
    }

    pub fn decode(data: &[u8]) -> Result<Self> {
        if data.len() < 8 || &data[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if data.len() < 12 {
            return Err(Error::ChecksumMismatch);
        }
        let (body, trailer) = data.split_at(data.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
            return Err(Error::ChecksumMismatch);
        }

        let mut r = Reader { buf: body, pos: 8 };
        let mut mesh_hash = [0u8; 32];
        mesh_hash.copy_from_slice(r.take(32, "mesh digest")?);
        // smallest possible view: dir + pose + two zero counts
        let n_views = r.count((3 + 12 + 2) * 4, "view")?;
        let sphere_radius = r.f32("sphere radius")?;
        let mut views = Vec::with_capacity(n_views);
        for _ in 0..n_views {
            let view_dir = r.vec3("view direction")?;
            let mut pose = [0.0; 12];
            for p in &mut pose {
                *p = r.f32("view pose")?;
            }
            let n_cnt = r.count(24, "contour point")?;
            let mut contour_points = Vec::with_capacity(n_cnt);
            for _ in 0..n_cnt {
                contour_points.push(ContourPoint {
                    position: r.vec3("contour point")?,
                    normal: r.vec3("contour normal")?,
                });
            }
            let n_in = r.count(12, "interior point")?;
            let mut interior_points = Vec::with_capacity(n_in);
            for _ in 0..n_in {
                interior_points.push(r.vec3("interior point")?);
            }
            views.push(ViewpointTemplate {
                view_dir,
                view_pose: Pose::from_array_raw(&pose),
                contour_points,
                interior_points,
            });
        }
        if r.remaining() != 0 {
            return Err(Error::MalformedTemplate(format!(
                "{} trailing bytes after the last view",
                r.remaining()
            )));
        }
        if views.is_empty() {
            return Err(Error::MalformedTemplate("model has no views".into()));
        }
        Ok(Self {
            views,
            sphere_radius,
            mesh_hash,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriangleMesh;
    use crate::viewpoint::{generate_model, generate_viewpoints, view_pose, TemplateParams};

    fn small_model() -> ViewpointModel {
        let mesh = TriangleMesh::blob(0.05, 3);
        let params = TemplateParams {
            subdivision_level: 0,
            n_cnt: 40,
            n_in: 30,
            image_size: 160,
            ..Default::default()
        };
        generate_model(&mesh, &params).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = small_model();
        assert_eq!(m.views.len(), 12);
        let back = ViewpointModel::decode(&m.encode()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn round_trip_through_file() {
        let m = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pfvm");
        m.save(&path).unwrap();
        assert_eq!(ViewpointModel::load(&path).unwrap(), m);
    }

    #[test]
    fn truncated_file_fails_checksum() {
        let bytes = small_model().encode();
        for cut in [bytes.len() - 1, bytes.len() - 5, bytes.len() / 2, 13] {
            assert!(matches!(
                ViewpointModel::decode(&bytes[..cut]),
                Err(Error::ChecksumMismatch)
            ));
        }
    }

    #[test]
    fn header_errors() {
        let mut bytes = small_model().encode();
        assert!(matches!(ViewpointModel::decode(b"PF"), Err(Error::BadMagic)));
        bytes[4] = 2;
        assert!(matches!(
            ViewpointModel::decode(&bytes),
            Err(Error::VersionMismatch { found: 2, .. })
        ));
        bytes[4] = 1;
        let n = bytes.len();
        bytes[n - 10] ^= 0xff;
        assert!(matches!(ViewpointModel::decode(&bytes), Err(Error::ChecksumMismatch)));
    }

    #[test]
    fn oversized_counts_are_rejected_not_allocated() {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.0.extend_from_slice(&[0; 32]);
        w.u32(u32::MAX);
        w.f32(1.0);
        let crc = crc32fast::hash(&w.0);
        w.u32(crc);
        assert!(matches!(
            ViewpointModel::decode(&w.0),
            Err(Error::MalformedTemplate(_))
        ));
    }

    #[test]
    fn full_size_file_footprint() {
        // 642 views with 200 + 200 points each.
        let views = generate_viewpoints(3)
            .into_iter()
            .map(|d| ViewpointTemplate {
                view_dir: d,
                view_pose: view_pose(&d, 1.0),
                contour_points: vec![
                    ContourPoint { position: Vector3::zeros(), normal: Vector3::x() };
                    200
                ],
                interior_points: vec![Vector3::zeros(); 200],
            })
            .collect::<Vec<_>>();
        assert_eq!(views.len(), 642);
        let m = ViewpointModel { views, sphere_radius: 1.0, mesh_hash: [7; 32] };
        let size = m.encode().len();
        let payload = 642 * 400 * 24;
        let expected = 4 + 4 + 32 + 4 + 4 + 642 * (12 + 48 + 4 + 200 * 24 + 4 + 200 * 12) + 4;
        assert_eq!(size, expected);
        assert!(size <= 2 * payload && 2 * size >= payload);
    }
}
