//! Dense inverse search optical flow restricted to a region of interest,
//! plus the interior correspondences and confidences built on top of it.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::imaging::{Plane, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    /// Pyramid level the flow is finished at; 1 means half resolution.
    pub finest_level: usize,
    pub patch_size: usize,
    pub patch_stride: usize,
    pub inverse_search_iters: usize,
    pub densification: bool,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            finest_level: 1,
            patch_size: 8,
            patch_stride: 4,
            inverse_search_iters: 12,
            densification: true,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels == 0 || self.patch_size < 2 || self.patch_stride == 0 {
            return Err(Error::Config("flow needs at least one level and a patch of 2 px".into()));
        }
        if self.patch_stride > self.patch_size {
            return Err(Error::Config(format!(
                "patch stride {} exceeds patch size {}",
                self.patch_stride, self.patch_size
            )));
        }
        Ok(())
    }

    fn coarsest_level(&self) -> usize {
        self.finest_level + self.pyramid_levels - 1
    }

    /// Drops coarse levels until the coarsest one still holds a patch.
    /// `None` if even the finest level is too small.
    pub fn fitted_to(&self, width: usize, height: usize) -> Option<Self> {
        let mut p = *self;
        while p.pyramid_levels > 0 {
            let s = 1usize << p.coarsest_level();
            if width / s >= p.patch_size && height / s >= p.patch_size {
                return Some(p);
            }
            p.pyramid_levels -= 1;
        }
        None
    }
}

/// Displacement from the previous to the current frame for every pixel of
/// `roi`; planes are indexed relative to the ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub roi: Rect,
    pub u: Plane,
    pub v: Plane,
}

impl FlowField {
    pub fn zeros(roi: Rect) -> Self {
        Self { roi, u: Plane::new(roi.width, roi.height), v: Plane::new(roi.width, roi.height) }
    }

    pub fn get(&self, x: usize, y: usize) -> Vector2<f64> {
        Vector2::new(self.u.get(x, y) as f64, self.v.get(x, y) as f64)
    }

    /// Bilinear lookup at an image point; `None` outside the ROI.
    pub fn at(&self, p: &Vector2<f64>) -> Option<Vector2<f64>> {
        if !self.roi.contains_point(p.x, p.y) {
            return None;
        }
        let lx = (p.x - self.roi.x as f64) as f32;
        let ly = (p.y - self.roi.y as f64) as f32;
        Some(Vector2::new(self.u.sample(lx, ly) as f64, self.v.sample(lx, ly) as f64))
    }
}

fn pyramid(base: &Plane, levels: usize) -> Vec<Plane> {
    let mut out = vec![base.clone()];
    for _ in 1..levels {
        let next = out.last().unwrap().downsample();
        out.push(next);
    }
    out
}

/// Patch origins along one axis: every `stride`, plus a last patch flush
/// with the far border so every pixel is covered.
fn grid(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = len - patch;
    let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

/// Flow of a finer level from one twice as coarse: pixel centres map as
/// x_fine = 2 x_coarse + 0.5.
fn upsample(u: &Plane, v: &Plane, width: usize, height: usize) -> (Plane, Plane) {
    let map = |p: &Plane| {
        Plane::from_fn(width, height, |x, y| {
            2.0 * p.sample((x as f32 - 0.5) * 0.5, (y as f32 - 0.5) * 0.5)
        })
    };
    (map(u), map(v))
}

struct PatchSearch<'a> {
    i0: &'a Plane,
    i1: &'a Plane,
    gx: &'a Plane,
    gy: &'a Plane,
    size: usize,
}

impl PatchSearch<'_> {
    /// Fills `out` with `i1` sampled over the patch at `(px, py)` shifted by
    /// `d`. All pixels share one set of bilinear weights unless the patch
    /// touches the border.
    fn warp(&self, px: usize, py: usize, d: Vector2<f32>, out: &mut Vec<f32>) {
        out.clear();
        let (x0f, y0f) = ((px as f32 + d.x).floor(), (py as f32 + d.y).floor());
        let w = self.i1.width;
        let inside = x0f >= 0.0
            && y0f >= 0.0
            && (x0f as usize + self.size) < w
            && (y0f as usize + self.size) < self.i1.height;
        if !inside {
            for y in py..py + self.size {
                for x in px..px + self.size {
                    out.push(self.i1.sample(x as f32 + d.x, y as f32 + d.y));
                }
            }
            return;
        }
        let (fx, fy) = (px as f32 + d.x - x0f, py as f32 + d.y - y0f);
        let (w00, w10, w01, w11) = ((1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy);
        let (x0, y0) = (x0f as usize, y0f as usize);
        let data = &self.i1.data;
        for j in 0..self.size {
            let r0 = (y0 + j) * w + x0;
            let r1 = r0 + w;
            for i in 0..self.size {
                out.push(w00 * data[r0 + i] + w10 * data[r0 + i + 1] + w01 * data[r1 + i] + w11 * data[r1 + i + 1]);
            }
        }
    }

    /// Mean-normalized SSD of the patch at `(px, py)` displaced by `d`.
    fn cost(&self, px: usize, py: usize, d: Vector2<f32>, buf: &mut Vec<f32>) -> f32 {
        self.warp(px, py, d, buf);
        let mut k = 0;
        let (mut m0, mut m1) = (0.0f32, 0.0f32);
        for y in py..py + self.size {
            for x in px..px + self.size {
                let a = self.i0.get(x, y);
                m0 += a;
                m1 += buf[k];
                buf[k] -= a;
                k += 1;
            }
        }
        let shift = (m1 - m0) / buf.len() as f32;
        buf.iter().map(|r| (r - shift) * (r - shift)).sum()
    }

    /// Inverse-compositional Gauss-Newton on a translation-only warp.
    fn refine(&self, px: usize, py: usize, init: Vector2<f32>, iters: usize, buf: &mut Vec<f32>) -> Vector2<f32> {
        let n = (self.size * self.size) as f32;
        let (mut sx, mut sy) = (0.0f32, 0.0f32);
        for y in py..py + self.size {
            for x in px..px + self.size {
                sx += self.gx.get(x, y);
                sy += self.gy.get(x, y);
            }
        }
        let (mx, my) = (sx / n, sy / n);
        let (mut hxx, mut hxy, mut hyy) = (0.0f32, 0.0f32, 0.0f32);
        for y in py..py + self.size {
            for x in px..px + self.size {
                let (a, b) = (self.gx.get(x, y) - mx, self.gy.get(x, y) - my);
                hxx += a * a;
                hxy += a * b;
                hyy += b * b;
            }
        }
        let det = hxx * hyy - hxy * hxy;
        if det <= 1e-6 * (hxx + hyy).powi(2).max(1e-12) {
            return init;
        }

        let mut d = init;
        for _ in 0..iters {
            // Centred gradients make the mean intensity offset drop out.
            let (mut bx, mut by) = (0.0f32, 0.0f32);
            self.warp(px, py, d, buf);
            let mut k = 0;
            for y in py..py + self.size {
                for x in px..px + self.size {
                    let r = buf[k] - self.i0.get(x, y);
                    bx += (self.gx.get(x, y) - mx) * r;
                    by += (self.gy.get(x, y) - my) * r;
                    k += 1;
                }
            }
            let step = Vector2::new((hyy * bx - hxy * by) / det, (hxx * by - hxy * bx) / det);
            d -= step;
            if step.norm_squared() < 1e-4 {
                break;
            }
        }
        if !d.iter().all(|c| c.is_finite()) || self.cost(px, py, d, buf) > self.cost(px, py, init, buf) {
            return init;
        }
        d
    }
}

/// One pyramid level: patch search from the initial dense flow, then
/// weighted densification.
fn flow_level(i0: &Plane, i1: &Plane, init: (&Plane, &Plane), params: &FlowParams) -> (Plane, Plane) {
    let (w, h) = (i0.width, i0.height);
    let ps = params.patch_size;
    let (gx, gy) = i0.central_gradient();
    let search = PatchSearch { i0, i1, gx: &gx, gy: &gy, size: ps };
    let mut buf = Vec::with_capacity(ps * ps);

    let mut num_u = Plane::new(w, h);
    let mut num_v = Plane::new(w, h);
    let mut den = Plane::new(w, h);
    let centre = (ps as f32 - 1.0) * 0.5;
    for py in grid(h, ps, params.patch_stride) {
        for px in grid(w, ps, params.patch_stride) {
            let (cx, cy) = (px as f32 + centre, py as f32 + centre);
            let start = Vector2::new(init.0.sample(cx, cy), init.1.sample(cx, cy));
            let d = search.refine(px, py, start, params.inverse_search_iters, &mut buf);
            search.warp(px, py, d, &mut buf);
            let mut k = 0;
            for y in py..py + ps {
                for x in px..px + ps {
                    let wgt = if params.densification {
                        let diff = buf[k] - i0.get(x, y);
                        1.0 / diff.abs().max(1.0)
                    } else {
                        1.0
                    };
                    let i = y * w + x;
                    num_u.data[i] += wgt * d.x;
                    num_v.data[i] += wgt * d.y;
                    den.data[i] += wgt;
                    k += 1;
                }
            }
        }
    }
    for i in 0..w * h {
        num_u.data[i] /= den.data[i];
        num_v.data[i] /= den.data[i];
    }
    (num_u, num_v)
}

/// Flow between two grayscale crops of the same ROI.
pub fn compute_flow_crops(prev: &Plane, cur: &Plane, roi: Rect, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    assert_eq!((prev.width, prev.height), (roi.width, roi.height));
    assert_eq!((cur.width, cur.height), (roi.width, roi.height));
    let coarsest = params.coarsest_level();
    let s = 1usize << coarsest;
    if roi.width / s < params.patch_size || roi.height / s < params.patch_size {
        return Err(Error::RoiTooSmall { width: roi.width, height: roi.height });
    }

    let p0 = pyramid(prev, coarsest + 1);
    let p1 = pyramid(cur, coarsest + 1);
    let top = &p0[coarsest];
    let mut u = Plane::new(top.width, top.height);
    let mut v = Plane::new(top.width, top.height);
    for level in (params.finest_level..=coarsest).rev() {
        if level != coarsest {
            (u, v) = upsample(&u, &v, p0[level].width, p0[level].height);
        }
        (u, v) = flow_level(&p0[level], &p1[level], (&u, &v), params);
    }
    for level in (0..params.finest_level).rev() {
        (u, v) = upsample(&u, &v, p0[level].width, p0[level].height);
    }
    Ok(FlowField { roi, u, v })
}

/// Flow between two full grayscale frames over `roi`.
pub fn compute_flow(prev: &Plane, cur: &Plane, roi: &Rect, params: &FlowParams) -> Result<FlowField> {
    assert_eq!((prev.width, prev.height), (cur.width, cur.height));
    compute_flow_crops(&prev.crop(roi), &cur.crop(roi), *roi, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfidenceParams {
    pub patch: usize,
    pub eta_i: f64,
    pub eta_g: f64,
    pub eta_s: f64,
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        Self { patch: 3, eta_i: 40.0, eta_g: 40.0, eta_s: 80.0 }
    }
}

/// Normalized error terms behind a confidence value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowErrors {
    pub e_i: f64,
    pub e_g: f64,
    pub e_s: f64,
}

impl FlowErrors {
    pub fn confidence(&self) -> f64 {
        confidence_from_error(self.e_i + self.e_g + self.e_s)
    }
}

#[inline]
pub fn confidence_from_error(e: f64) -> f64 {
    (1.0 - e * e).max(0.0)
}

fn grad_mag(p: &Plane, x: f32, y: f32) -> f32 {
    let gx = 0.5 * (p.sample(x + 1.0, y) - p.sample(x - 1.0, y));
    let gy = 0.5 * (p.sample(x, y + 1.0) - p.sample(x, y - 1.0));
    (gx * gx + gy * gy).sqrt()
}

/// Error terms of the flow in the patch around image point `x_in`.
/// `prev` and `cur` are crops of the flow's ROI.
pub fn flow_errors(
    prev: &Plane,
    cur: &Plane,
    flow: &FlowField,
    x_in: &Vector2<f64>,
    params: &ConfidenceParams,
) -> Result<FlowErrors> {
    let half = (params.patch / 2) as isize;
    let cx = (x_in.x - flow.roi.x as f64).round() as isize;
    let cy = (x_in.y - flow.roi.y as f64).round() as isize;
    // One extra pixel each side for the central differences of the flow.
    let reach = half + 1;
    let (w, h) = (flow.roi.width as isize, flow.roi.height as isize);
    if !x_in.iter().all(|c| c.is_finite()) || cx - reach < 0 || cy - reach < 0 || cx + reach >= w || cy + reach >= h {
        return Err(Error::PatchOutOfBounds { x: x_in.x, y: x_in.y });
    }

    let (mut sum_prev, mut sum_cur) = (0.0f64, 0.0f64);
    let (mut sum_gprev, mut sum_gcur) = (0.0f64, 0.0f64);
    let mut smooth = 0.0f64;
    for y in cy - half..=cy + half {
        for x in cx - half..=cx + half {
            let (xu, yu) = (x as usize, y as usize);
            let (u, v) = (flow.u.get(xu, yu), flow.v.get(xu, yu));
            let (tx, ty) = (x as f32 + u, y as f32 + v);
            sum_prev += prev.get(xu, yu) as f64;
            sum_cur += cur.sample(tx, ty) as f64;
            sum_gprev += grad_mag(prev, x as f32, y as f32) as f64;
            sum_gcur += grad_mag(cur, tx, ty) as f64;
            for p in [&flow.u, &flow.v] {
                let dx = 0.5 * (p.get(xu + 1, yu) - p.get(xu - 1, yu)) as f64;
                let dy = 0.5 * (p.get(xu, yu + 1) - p.get(xu, yu - 1)) as f64;
                smooth += dx * dx + dy * dy;
            }
        }
    }
    let n = (params.patch * params.patch) as f64;
    Ok(FlowErrors {
        e_i: (sum_cur - sum_prev).abs() / n / params.eta_i,
        e_g: (sum_gcur - sum_gprev).abs() / n / params.eta_g,
        e_s: smooth / n / params.eta_s,
    })
}

pub fn flow_confidence(
    prev: &Plane,
    cur: &Plane,
    flow: &FlowField,
    x_in: &Vector2<f64>,
    params: &ConfidenceParams,
) -> Result<f64> {
    Ok(flow_errors(prev, cur, flow, x_in, params)?.confidence())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorCorrespondence {
    pub x_in: Vector2<f64>,
    pub x_in_prime: Vector2<f64>,
    pub c_in: f64,
    pub x_model: Vector3<f64>,
}

/// Projects interior model points with the previous pose and follows the
/// flow to their current positions. Points outside the ROI, or too close
/// to its border for a confidence patch, are dropped.
pub fn interior_correspondences(
    points: &[Vector3<f64>],
    pose: &Pose,
    k: &CameraIntrinsics,
    flow: &FlowField,
    prev: &Plane,
    cur: &Plane,
    params: &ConfidenceParams,
) -> Vec<InteriorCorrespondence> {
    points
        .iter()
        .filter_map(|xm| {
            let x = k.project(pose, xm).ok()?;
            let u = flow.at(&x)?;
            let c = flow_confidence(prev, cur, flow, &x, params).ok()?;
            Some(InteriorCorrespondence { x_in: x, x_in_prime: x + u, c_in: c, x_model: *xm })
        })
        .collect()
}

#[inline]
pub fn interior_weight(r: f64, c: f64, gamma: f64) -> f64 {
    c * (-gamma * r * r).exp()
}
