//! CPU z-buffer rasterization of triangle meshes.
//!
//! Pixel centres sit on integer coordinates, matching [`CameraIntrinsics`].
//! Coverage uses edge functions with a top-left fill rule and depth is
//! interpolated perspective-correctly as `1/z`. Triangles are visited in
//! index order and a pixel is only overwritten by a strictly nearer
//! fragment, so equal-depth ties go to the lower triangle index.

use image::{Rgb, RgbImage};
use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::imaging::{Mask, Rect};
use crate::mesh::TriangleMesh;

const NEAR: f64 = 1e-4;

/// Per-pixel depth along the optical axis; [`DepthMap::INVALID`] marks
/// background.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f32>,
}

impl DepthMap {
    pub const INVALID: f32 = 0.0;

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.depth[y * self.width + x]
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.get(x, y) > 0.0
    }
}

/// Depth map plus the index of the triangle that won each pixel.
#[derive(Debug, Clone)]
pub struct Raster {
    pub depth: DepthMap,
    pub triangle: Vec<u32>,
}

impl Raster {
    pub const NO_TRIANGLE: u32 = u32::MAX;
}

#[inline]
fn edge(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

#[inline]
fn is_top_left(a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
    let d = b - a;
    d.y < 0.0 || (d.y == 0.0 && d.x > 0.0)
}

/// Rasterizes `mesh` seen from `pose`. Only pixels inside `clip` are
/// touched; the output always has the full `width x height` size.
pub fn rasterize_clipped(
    mesh: &TriangleMesh,
    k: &CameraIntrinsics,
    pose: &Pose,
    width: usize,
    height: usize,
    clip: Rect,
) -> Result<Raster> {
    let mut depth = vec![f32::INFINITY; width * height];
    let mut tri_id = vec![Raster::NO_TRIANGLE; width * height];
    let cam: Vec<Vector3<f64>> = mesh.vertices().iter().map(|v| pose.transform_point(v)).collect();
    let clip_x1 = clip.right().min(width);
    let clip_y1 = clip.bottom().min(height);
    let mut any_in_front = false;

    for (ti, t) in mesh.triangles().iter().enumerate() {
        let p = [cam[t[0] as usize], cam[t[1] as usize], cam[t[2] as usize]];
        if p.iter().any(|q| q.z <= NEAR) {
            continue;
        }
        any_in_front = true;
        let s = p.map(|q| Vector2::new(k.fx * q.x / q.z + k.cx, k.fy * q.y / q.z + k.cy));
        let inv_z = p.map(|q| 1.0 / q.z);
        let (a, mut b, mut c) = (s[0], s[1], s[2]);
        let (za, mut zb, mut zc) = (inv_z[0], inv_z[1], inv_z[2]);
        let mut area = edge(&a, &b, &c);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        if area < 0.0 {
            std::mem::swap(&mut b, &mut c);
            std::mem::swap(&mut zb, &mut zc);
            area = -area;
        }
        let min_x = a.x.min(b.x).min(c.x).ceil().max(clip.x as f64);
        let min_y = a.y.min(b.y).min(c.y).ceil().max(clip.y as f64);
        let max_x = a.x.max(b.x).max(c.x).floor().min(clip_x1 as f64 - 1.0);
        let max_y = a.y.max(b.y).max(c.y).floor().min(clip_y1 as f64 - 1.0);
        if min_x > max_x || min_y > max_y {
            continue;
        }
        let tl = [is_top_left(&b, &c), is_top_left(&c, &a), is_top_left(&a, &b)];
        let inside = |w: f64, top_left: bool| w > 0.0 || (w == 0.0 && top_left);
        for py in min_y as usize..=max_y as usize {
            for px in min_x as usize..=max_x as usize {
                let q = Vector2::new(px as f64, py as f64);
                let w0 = edge(&b, &c, &q);
                let w1 = edge(&c, &a, &q);
                let w2 = edge(&a, &b, &q);
                if !(inside(w0, tl[0]) && inside(w1, tl[1]) && inside(w2, tl[2])) {
                    continue;
                }
                let iz = (w0 * za + w1 * zb + w2 * zc) / area;
                let z = (1.0 / iz) as f32;
                let idx = py * width + px;
                if z < depth[idx] {
                    depth[idx] = z;
                    tri_id[idx] = ti as u32;
                }
            }
        }
    }
    if !any_in_front {
        return Err(Error::DegenerateMesh);
    }
    for d in &mut depth {
        if !d.is_finite() {
            *d = DepthMap::INVALID;
        }
    }
    Ok(Raster {
        depth: DepthMap { width, height, depth },
        triangle: tri_id,
    })
}

pub fn rasterize(
    mesh: &TriangleMesh,
    k: &CameraIntrinsics,
    pose: &Pose,
    width: usize,
    height: usize,
) -> Result<Raster> {
    rasterize_clipped(mesh, k, pose, width, height, Rect::full(width, height))
}

/// Z-buffered depth render of `mesh` under `pose`.
pub fn rasterize_depth(
    mesh: &TriangleMesh,
    k: &CameraIntrinsics,
    pose: &Pose,
    width: usize,
    height: usize,
) -> Result<DepthMap> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidMesh("render target has zero size".into()));
    }
    Ok(rasterize(mesh, k, pose, width, height)?.depth)
}

pub fn mask_from_depth(d: &DepthMap) -> Mask {
    Mask {
        width: d.width,
        height: d.height,
        data: d.depth.iter().map(|&z| z > 0.0).collect(),
    }
}

/// Solid rectangle drawn over the rendered frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occluder {
    pub rect: Rect,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    /// Standard deviation of additive per-channel Gaussian noise (8-bit units).
    pub noise_sigma: f64,
    /// Global intensity multiplier applied to the whole frame.
    pub light_gain: f64,
    pub occluder: Option<Occluder>,
    /// Relative per-triangle albedo variation in `[0, 1)`; gives the object
    /// surface texture that moves with it.
    pub texture: f64,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            light_gain: 1.0,
            occluder: None,
            texture: 0.0,
            seed: 0,
        }
    }
}

/// Deterministic value in `[-1, 1]` per triangle index.
fn triangle_jitter(i: u32) -> f64 {
    let mut x = i.wrapping_mul(0x9E37_79B9) ^ 0x85EB_CA6B;
    x ^= x >> 16;
    x = x.wrapping_mul(0x7FEB_352D);
    x ^= x >> 15;
    x = x.wrapping_mul(0x846C_A68B);
    x ^= x >> 16;
    (x as f64 / u32::MAX as f64) * 2.0 - 1.0
}

/// Flat-shaded render of `mesh` composited over `background`.
pub fn render_synthetic_frame(
    mesh: &TriangleMesh,
    k: &CameraIntrinsics,
    pose: &Pose,
    background: &RgbImage,
    albedo: [u8; 3],
    options: &SynthOptions,
) -> RgbImage {
    let (w, h) = background.dimensions();
    let (w, h) = (w as usize, h as usize);
    let raster = rasterize(mesh, k, pose, w, h).ok();
    let light = Vector3::new(0.3, -0.4, -1.0).normalize();

    let mut shade = vec![0.0f64; mesh.triangles().len()];
    for (i, s) in shade.iter_mut().enumerate() {
        let [a, b, c] = mesh.triangle(i).map(|v| pose.transform_point(&v));
        let n = (b - a).cross(&(c - a));
        let lambert = if n.norm() > 0.0 { n.normalize().dot(&light).abs() } else { 0.0 };
        *s = (0.35 + 0.65 * lambert) * (1.0 + options.texture * triangle_jitter(i as u32));
    }

    let mut out = background.clone();
    if let Some(r) = &raster {
        for y in 0..h {
            for x in 0..w {
                let t = r.triangle[y * w + x];
                if t != Raster::NO_TRIANGLE {
                    let s = shade[t as usize];
                    let px = albedo.map(|c| (c as f64 * s).round().clamp(0.0, 255.0) as u8);
                    out.put_pixel(x as u32, y as u32, Rgb(px));
                }
            }
        }
    }
    if let Some(occ) = options.occluder {
        for y in occ.rect.y..occ.rect.bottom().min(h) {
            for x in occ.rect.x..occ.rect.right().min(w) {
                out.put_pixel(x as u32, y as u32, Rgb(occ.color));
            }
        }
    }
    let needs_noise = options.noise_sigma > 0.0;
    if options.light_gain != 1.0 || needs_noise {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let normal = Normal::new(0.0, options.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
        for p in out.pixels_mut() {
            for c in p.0.iter_mut() {
                let mut v = *c as f64 * options.light_gain;
                if needs_noise {
                    v += normal.sample(&mut rng);
                }
                *c = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}
