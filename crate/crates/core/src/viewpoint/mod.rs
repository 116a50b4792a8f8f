//! Sparse viewpoint templates.
//!
//! Offline, the mesh is rendered from directions on an icosphere. Each view
//! keeps a random sample of silhouette pixels (lifted to 3D points with 3D
//! normals) and of interior pixels (lifted to 3D points). At runtime the view
//! whose direction best matches the current camera direction supplies the
//! points to project.

mod format;

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::imaging::Mask;
use crate::mesh::{icosphere, TriangleMesh};
use crate::rasterizer::{mask_from_depth, rasterize_depth, DepthMap};

pub use format::{FORMAT_VERSION, MAGIC};

/// Default number of contour and of interior points per view.
pub const DEFAULT_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourPoint {
    /// Model frame, meters.
    pub position: Vector3<f64>,
    /// Outward unit normal in the model frame, perpendicular to the view
    /// direction.
    pub normal: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointTemplate {
    /// Unit direction from the model origin towards the virtual camera.
    pub view_dir: Vector3<f64>,
    /// `T_CM` of the virtual camera.
    pub view_pose: Pose,
    pub contour_points: Vec<ContourPoint>,
    pub interior_points: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointModel {
    pub views: Vec<ViewpointTemplate>,
    pub sphere_radius: f64,
    pub mesh_hash: [u8; 32],
}

/// Virtual camera used to render templates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateCamera {
    pub intrinsics: CameraIntrinsics,
    pub width: usize,
    pub height: usize,
}

impl TemplateCamera {
    /// Square camera of `size` pixels whose image of a sphere of
    /// `bounding_radius` seen from `distance` fills about 90% of the width.
    pub fn fitted(bounding_radius: f64, distance: f64, size: usize) -> Result<Self> {
        if !(distance > bounding_radius && bounding_radius > 0.0) {
            return Err(Error::Config(format!(
                "template distance {distance} must exceed the bounding radius {bounding_radius}"
            )));
        }
        let half_angle = (bounding_radius / distance).asin();
        let f = 0.45 * size as f64 / half_angle.tan();
        let c = (size as f64 - 1.0) / 2.0;
        Ok(Self {
            intrinsics: CameraIntrinsics::new(f, f, c, c)?,
            width: size,
            height: size,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateParams {
    pub subdivision_level: u32,
    /// Camera distance; `None` picks 2.5 bounding-sphere diameters.
    pub radius: Option<f64>,
    pub n_cnt: usize,
    pub n_in: usize,
    pub image_size: usize,
    pub seed: u64,
}

impl Default for TemplateParams {
    fn default() -> Self {
        Self {
            subdivision_level: 3,
            radius: None,
            n_cnt: DEFAULT_POINTS,
            n_in: DEFAULT_POINTS,
            image_size: 400,
            seed: 0,
        }
    }
}

/// Unit directions at the vertices of an icosphere, `10 * 4^level + 2` of them.
pub fn generate_viewpoints(level: u32) -> Vec<Vector3<f64>> {
    icosphere(level).0
}

fn quantize(x: f64) -> f64 {
    x as f32 as f64
}

fn quantize_vec(v: Vector3<f64>) -> Vector3<f64> {
    v.map(quantize)
}

fn quantize_pose(p: &Pose) -> Pose {
    Pose::from_array_raw(&p.to_array().map(quantize))
}

/// Virtual camera pose at `radius` along `view_dir`, looking at the origin.
pub fn view_pose(view_dir: &Vector3<f64>, radius: f64) -> Pose {
    let eye = view_dir.normalize() * radius;
    // Any up vector not parallel to the view direction works.
    let up = if view_dir.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    Pose::look_at(eye, Vector3::zeros(), up)
}

/// Foreground pixels with at least one 4-neighbour in the background or
/// outside the image.
pub fn boundary_pixels(mask: &Mask) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..mask.height {
        for x in 0..mask.width {
            if !mask.get(x, y) {
                continue;
            }
            let (xi, yi) = (x as isize, y as isize);
            if !mask.get_or_false(xi - 1, yi)
                || !mask.get_or_false(xi + 1, yi)
                || !mask.get_or_false(xi, yi - 1)
                || !mask.get_or_false(xi, yi + 1)
            {
                out.push((x, y));
            }
        }
    }
    out
}

/// Foreground pixels whose whole `(2r+1)^2` neighbourhood is foreground.
pub fn interior_pixels(mask: &Mask, r: usize) -> Vec<(usize, usize)> {
    let r = r as isize;
    let mut out = Vec::new();
    for y in 0..mask.height {
        for x in 0..mask.width {
            if !mask.get(x, y) {
                continue;
            }
            let (xi, yi) = (x as isize, y as isize);
            let inside = (-r..=r).all(|dy| (-r..=r).all(|dx| mask.get_or_false(xi + dx, yi + dy)));
            if inside {
                out.push((x, y));
            }
        }
    }
    out
}

const NORMAL_SIGMA: f64 = 1.5;
const NORMAL_RADIUS: isize = 4;

/// Outward unit normal of the silhouette at boundary pixel `(x, y)`: the
/// negated gradient of the Gaussian-smoothed mask, flipped if probing the
/// mask says it points inward.
pub fn boundary_normal(mask: &Mask, x: usize, y: usize) -> Option<Vector2<f64>> {
    // Accumulates minus the gradient of the smoothed mask, which points
    // from foreground towards background.
    let mut g = Vector2::zeros();
    let s2 = NORMAL_SIGMA * NORMAL_SIGMA;
    for dy in -NORMAL_RADIUS..=NORMAL_RADIUS {
        for dx in -NORMAL_RADIUS..=NORMAL_RADIUS {
            if mask.get_or_false(x as isize + dx, y as isize + dy) {
                let (fx, fy) = (dx as f64, dy as f64);
                let w = (-(fx * fx + fy * fy) / (2.0 * s2)).exp();
                g -= Vector2::new(fx, fy) * (w / s2);
            }
        }
    }
    let n = g.norm();
    if n < 1e-9 {
        return None;
    }
    let mut normal = g / n;
    let probe = |s: f64| {
        mask.get_or_false(
            (x as f64 + s * normal.x).round() as isize,
            (y as f64 + s * normal.y).round() as isize,
        )
    };
    if probe(2.0) && !probe(-2.0) {
        normal = -normal;
    }
    Some(normal)
}

/// Mesh edge between a front-facing and a back-facing (or missing)
/// triangle, with both ends projected.
struct RimSegment {
    a: Vector3<f64>,
    b: Vector3<f64>,
    pa: Vector2<f64>,
    pb: Vector2<f64>,
}

/// Occluding-contour edges of the mesh as seen from `pose`.
fn rim_segments(mesh: &TriangleMesh, k: &CameraIntrinsics, pose: &Pose) -> Vec<RimSegment> {
    let eye = pose.camera_center();
    let mut faces: HashMap<(u32, u32), [Option<bool>; 2]> = HashMap::new();
    for (i, t) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = mesh.triangle(i);
        let front = (b - a).cross(&(c - a)).dot(&(eye - a)) > 0.0;
        for (u, v) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let slot = faces.entry((u.min(v), u.max(v))).or_insert([None; 2]);
            let j = usize::from(slot[0].is_some());
            slot[j] = Some(front);
        }
    }
    let vs = mesh.vertices();
    let mut out: Vec<RimSegment> = faces
        .into_iter()
        .filter(|(_, f)| matches!(f, [Some(x), Some(y)] if x != y) || matches!(f, [Some(true), None]))
        .filter_map(|((u, v), _)| {
            let (a, b) = (vs[u as usize], vs[v as usize]);
            Some(RimSegment { a, b, pa: k.project(pose, &a).ok()?, pb: k.project(pose, &b).ok()? })
        })
        .collect();
    // Hash order is arbitrary; sort so ties resolve the same way every run.
    out.sort_by(|l, r| l.pa.x.total_cmp(&r.pa.x).then(l.pa.y.total_cmp(&r.pa.y)));
    out
}

/// Point on the closest rim edge within a pixel of `at`.
fn snap_to_rim(rim: &[RimSegment], at: &Vector2<f64>) -> Option<Vector3<f64>> {
    let mut best: Option<(f64, Vector3<f64>)> = None;
    for seg in rim {
        let d = seg.pb - seg.pa;
        let len2 = d.norm_squared();
        let s = if len2 > 0.0 { ((at - seg.pa).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let dist = (seg.pa + d * s - at).norm();
        if dist <= 1.0 && best.is_none_or(|(b, _)| dist < b) {
            best = Some((dist, seg.a + (seg.b - seg.a) * s));
        }
    }
    best.map(|(_, p)| p)
}

/// Renders one view and samples its contour and interior points.
pub fn build_template(
    mesh: &TriangleMesh,
    camera: &TemplateCamera,
    view_dir: &Vector3<f64>,
    radius: f64,
    n_cnt: usize,
    n_in: usize,
    seed: u64,
) -> Result<ViewpointTemplate> {
    let view_dir = quantize_vec(view_dir.normalize());
    let pose = quantize_pose(&view_pose(&view_dir, radius));
    let k = &camera.intrinsics;
    let depth = rasterize_depth(mesh, k, &pose, camera.width, camera.height)?;
    let mask = mask_from_depth(&depth);

    let boundary: Vec<((usize, usize), Vector2<f64>)> = boundary_pixels(&mask)
        .into_iter()
        .filter_map(|(x, y)| boundary_normal(&mask, x, y).map(|n| ((x, y), n)))
        .collect();
    if boundary.len() < n_cnt {
        return Err(Error::InsufficientCoverage {
            kind: "boundary",
            found: boundary.len(),
            needed: n_cnt,
        });
    }
    let interior = interior_pixels(&mask, 2);
    if interior.len() < n_in {
        return Err(Error::InsufficientCoverage {
            kind: "interior",
            found: interior.len(),
            needed: n_in,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model_from_camera = pose.inverse();
    let lift = |x: usize, y: usize, offset: Vector2<f64>, depth: &DepthMap| -> Result<Vector3<f64>> {
        let at = Vector2::new(x as f64, y as f64) + offset;
        let xc = k.backproject(&at, depth.get(x, y) as f64)?;
        Ok(model_from_camera.transform_point(&xc))
    };

    let rim = rim_segments(mesh, k, &pose);
    let mut contour_points = Vec::with_capacity(n_cnt);
    for i in rand::seq::index::sample(&mut rng, boundary.len(), n_cnt).into_iter() {
        let ((x, y), n) = boundary[i];
        // Boundary pixel centres sit half a pixel inside the silhouette.
        // The rim edge nearest the pixel edge gives the exact 3D contour;
        // lifting the pixel edge at its depth is the fallback.
        let at = Vector2::new(x as f64, y as f64) + n * 0.5;
        let position = match snap_to_rim(&rim, &at) {
            Some(p) => quantize_vec(p),
            None => quantize_vec(lift(x, y, n * 0.5, &depth)?),
        };
        let normal = quantize_vec(model_from_camera.transform_vector(&Vector3::new(n.x, n.y, 0.0)));
        contour_points.push(ContourPoint { position, normal });
    }
    let mut interior_points = Vec::with_capacity(n_in);
    for i in rand::seq::index::sample(&mut rng, interior.len(), n_in).into_iter() {
        let (x, y) = interior[i];
        interior_points.push(quantize_vec(lift(x, y, Vector2::zeros(), &depth)?));
    }

    Ok(ViewpointTemplate {
        view_dir,
        view_pose: pose,
        contour_points,
        interior_points,
    })
}

/// Builds templates for every icosphere direction.
pub fn generate_model(mesh: &TriangleMesh, params: &TemplateParams) -> Result<ViewpointModel> {
    let bounding = mesh.bounding_radius();
    let radius = params.radius.unwrap_or(2.5 * 2.0 * bounding);
    let camera = TemplateCamera::fitted(bounding, radius, params.image_size)?;
    let views = generate_viewpoints(params.subdivision_level)
        .iter()
        .enumerate()
        .map(|(i, dir)| {
            let seed = params.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
            build_template(mesh, &camera, dir, radius, params.n_cnt, params.n_in, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ViewpointModel {
        views,
        sphere_radius: quantize(radius),
        mesh_hash: mesh.content_digest(),
    })
}

/// Index of the view whose direction is closest to the direction from the
/// model origin to the camera centre. Ties go to the lower index.
pub fn closest_view(views: &[ViewpointTemplate], pose: &Pose) -> usize {
    let c = pose.camera_center();
    let dir = if c.norm() > 0.0 { c.normalize() } else { Vector3::z() };
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in views.iter().enumerate() {
        let d = v.view_dir.dot(&dir);
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

impl ViewpointModel {
    pub fn closest_view(&self, pose: &Pose) -> usize {
        closest_view(&self.views, pose)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    pub fn check_mesh(&self, mesh: &TriangleMesh) -> Result<()> {
        if self.mesh_hash == mesh.content_digest() {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }
}

pub fn save_model(model: &ViewpointModel, path: impl AsRef<Path>) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ViewpointModel> {
    ViewpointModel::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_setup() -> (TriangleMesh, TemplateCamera, f64) {
        let mesh = TriangleMesh::icosphere(0.05, 4);
        let radius = 0.5;
        let camera = TemplateCamera::fitted(0.05, radius, 300).unwrap();
        (mesh, camera, radius)
    }

    #[test]
    fn viewpoint_counts() {
        assert_eq!(generate_viewpoints(0).len(), 12);
        assert_eq!(generate_viewpoints(2).len(), 162);
        for v in generate_viewpoints(1) {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn viewpoints_are_roughly_uniform() {
        // Brute-force nearest-neighbour angle of every direction.
        let dirs = generate_viewpoints(3);
        let mut nn: Vec<f64> = dirs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                dirs.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, b)| a.dot(b).clamp(-1.0, 1.0).acos())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = nn[nn.len() / 2];
        // Midpoint subdivision is not perfectly uniform: a brute-force run
        // gives ratios in [0.991, 1.136] at level 3.
        assert!(nn.iter().all(|&a| a >= 0.9 * median && a <= 1.15 * median));
        let within_10 = nn.iter().filter(|&&a| a <= 1.1 * median).count();
        assert!(within_10 >= 580, "{within_10}");
    }

    #[test]
    fn sphere_template_contour_is_a_circle() {
        let (mesh, camera, radius) = sphere_setup();
        let dir = Vector3::new(0.3, -0.4, 0.8).normalize();
        let t = build_template(&mesh, &camera, &dir, radius, 200, 200, 1).unwrap();
        assert_eq!(t.contour_points.len(), 200);
        assert_eq!(t.interior_points.len(), 200);
        let dists: Vec<f64> = t
            .contour_points
            .iter()
            .map(|c| {
                let p = c.position;
                (p - t.view_dir * p.dot(&t.view_dir)).norm()
            })
            .collect();
        let r = 0.05;
        let expected = r * (1.0 - (r / radius).powi(2)).sqrt();
        for d in dists {
            assert!((d - expected).abs() / expected < 0.02, "{d} vs {expected}");
        }
        for c in &t.contour_points {
            assert!((c.normal.norm() - 1.0).abs() < 1e-6);
            assert!(c.normal.dot(&t.view_dir).abs() < 1e-6);
            // outward: normal points away from the view axis
            let radial = c.position - t.view_dir * c.position.dot(&t.view_dir);
            assert!(c.normal.dot(&radial.normalize()) > 0.9);
        }
    }

    #[test]
    fn template_points_reproject_onto_mask() {
        let mesh = TriangleMesh::blob(0.05, 3);
        let camera = TemplateCamera::fitted(mesh.bounding_radius(), 0.4, 300).unwrap();
        let dir = Vector3::new(-0.2, 0.7, 0.3).normalize();
        let t = build_template(&mesh, &camera, &dir, 0.4, 150, 150, 9).unwrap();
        let k = camera.intrinsics;
        let depth = rasterize_depth(&mesh, &k, &t.view_pose, camera.width, camera.height).unwrap();
        let mask = mask_from_depth(&depth);
        let boundary = boundary_pixels(&mask);
        for c in &t.contour_points {
            let x = k.project(&t.view_pose, &c.position).unwrap();
            let d = boundary
                .iter()
                .map(|&(bx, by)| (Vector2::new(bx as f64, by as f64) - x).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d <= 1.0, "{d}");
            // Lifted normal, back in the camera frame, is the 2D normal.
            let nc = t.view_pose.transform_vector(&c.normal);
            assert!(nc.z.abs() < 1e-6);
        }
        for p in &t.interior_points {
            let x = k.project(&t.view_pose, p).unwrap();
            let (u, v) = (x.x.round() as usize, x.y.round() as usize);
            assert!(mask.get(u, v));
            assert!((x - Vector2::new(u as f64, v as f64)).norm() < 1e-3);
        }
    }

    #[test]
    fn template_is_deterministic() {
        let (mesh, camera, radius) = sphere_setup();
        let a = build_template(&mesh, &camera, &Vector3::z(), radius, 50, 50, 4).unwrap();
        let b = build_template(&mesh, &camera, &Vector3::z(), radius, 50, 50, 4).unwrap();
        assert_eq!(a, b);
        let c = build_template(&mesh, &camera, &Vector3::z(), radius, 50, 50, 5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn insufficient_coverage() {
        let (mesh, camera, radius) = sphere_setup();
        let err = build_template(&mesh, &camera, &Vector3::z(), radius, 100_000, 10, 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientCoverage { kind: "boundary", .. }));
        let err = build_template(&mesh, &camera, &Vector3::z(), radius, 10, 1_000_000, 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientCoverage { kind: "interior", .. }));
    }

    fn tiny_model(level: u32) -> ViewpointModel {
        let views = generate_viewpoints(level)
            .into_iter()
            .map(|d| ViewpointTemplate {
                view_dir: d,
                view_pose: view_pose(&d, 1.0),
                contour_points: vec![],
                interior_points: vec![],
            })
            .collect();
        ViewpointModel { views, sphere_radius: 1.0, mesh_hash: [0; 32] }
    }

    #[test]
    fn closest_view_examples() {
        let single = ViewpointModel { views: tiny_model(0).views[..1].to_vec(), ..tiny_model(0) };
        assert_eq!(single.closest_view(&Pose::from_translation(Vector3::new(0.0, 0.0, 1.0))), 0);

        let m = tiny_model(2);
        for (i, v) in m.views.iter().enumerate() {
            let pose = view_pose(&v.view_dir, 0.7);
            assert_eq!(m.closest_view(&pose), i);
        }
    }

    #[test]
    fn closest_view_matches_brute_force() {
        use rand::Rng;
        let m = tiny_model(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let xi = crate::geometry::Twist::from_slice(&std::array::from_fn(|_| rng.gen_range(-3.0..3.0)));
            let pose = xi.exp();
            let c = pose.camera_center().normalize();
            let mut oracle = 0;
            for i in 0..m.views.len() {
                if m.views[i].view_dir.dot(&c) > m.views[oracle].view_dir.dot(&c) {
                    oracle = i;
                }
            }
            assert_eq!(m.closest_view(&pose), oracle);
        }
    }
}
