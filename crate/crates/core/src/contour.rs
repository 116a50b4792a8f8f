//! Fan-shaped point-to-distribution contour correspondences and their
//! robust weights.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::segmentation::ProbMap;
use crate::viewpoint::ViewpointTemplate;

pub const N_DIRECTIONS: usize = 36;
const STEP_DEG: f64 = 360.0 / N_DIRECTIONS as f64;

/// Unit directions at 10 degree spacing with their components cached.
#[derive(Debug, Clone)]
pub struct DirectionTable {
    dirs: [Vector2<f64>; N_DIRECTIONS],
}

impl Default for DirectionTable {
    fn default() -> Self {
        Self::new()
    }
}

impl DirectionTable {
    pub fn new() -> Self {
        let mut dirs = [Vector2::zeros(); N_DIRECTIONS];
        for (k, d) in dirs.iter_mut().enumerate() {
            let a = (k as f64 * STEP_DEG).to_radians();
            *d = Vector2::new(a.cos(), a.sin());
        }
        Self { dirs }
    }

    /// Index of the table direction closest to `v`.
    pub fn nearest(&self, v: &Vector2<f64>) -> usize {
        let a = v.y.atan2(v.x).to_degrees();
        ((a / STEP_DEG).round() as i64).rem_euclid(N_DIRECTIONS as i64) as usize
    }

    /// Direction `index` rotated by `steps` table entries.
    pub fn get(&self, index: usize, steps: i64) -> Vector2<f64> {
        self.dirs[(index as i64 + steps).rem_euclid(N_DIRECTIONS as i64) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FanSearchParams {
    /// Angle between neighbouring fan lines, degrees.
    pub a_int: f64,
    /// Total opening of the fan, degrees.
    pub a_reg: f64,
    /// Samples per search line (odd).
    pub l_src: usize,
    pub candidate_threshold: f64,
    /// Correspondences with a larger combined variance are discarded.
    pub variance_cutoff: f64,
}

impl Default for FanSearchParams {
    fn default() -> Self {
        Self {
            a_int: 10.0,
            a_reg: 60.0,
            l_src: 73,
            candidate_threshold: 0.0,
            variance_cutoff: 600.0,
        }
    }
}

impl FanSearchParams {
    pub fn n_sam(&self) -> usize {
        if self.a_int <= 0.0 {
            return 1;
        }
        (self.a_reg / self.a_int).round() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        let ratio = self.a_reg / self.a_int;
        if !(self.a_int > 0.0 && self.a_reg >= 0.0 && (ratio - ratio.round()).abs() < 1e-9) {
            return Err(Error::Config(format!(
                "fan range {} must be a nonnegative multiple of the interval {}",
                self.a_reg, self.a_int
            )));
        }
        if self.l_src.is_multiple_of(2) {
            return Err(Error::Config(format!("search line length {} must be odd", self.l_src)));
        }
        if !(self.candidate_threshold >= 0.0 && self.candidate_threshold.is_finite() && self.variance_cutoff > 0.0) {
            return Err(Error::Config("candidate threshold must be finite and nonnegative, variance cutoff positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearch {
    /// Strongest candidate: its sub-pixel position and gradient.
    pub best: Option<(Vector2<f64>, f64)>,
    pub gradients: Vec<f64>,
}

/// Searches `l_src` integer steps centred on `center` along `dir` for
/// rising edges of the background probability.
///
/// A candidate is a local maximum of the directional gradient above
/// `threshold`, so one edge yields one candidate even though the Sobel
/// response spreads over neighbouring pixels. The best candidate is moved
/// to the vertex of a parabola through it and its neighbours.
pub fn line_candidates_with_threshold(
    pm: &ProbMap,
    center: &Vector2<f64>,
    dir: &Vector2<f64>,
    l_src: usize,
    threshold: f64,
) -> LineSearch {
    let mut samples = Vec::with_capacity(l_src);
    let mut gradients = Vec::new();
    let best = search_line(pm, center, dir, l_src, threshold, &mut samples, &mut gradients);
    LineSearch { best, gradients }
}

/// Allocation-free core of the line search: fills `gradients` with the
/// candidate responses and returns the refined best candidate. Samples
/// outside the map are `-inf`.
fn search_line(
    pm: &ProbMap,
    center: &Vector2<f64>,
    dir: &Vector2<f64>,
    l_src: usize,
    threshold: f64,
    samples: &mut Vec<f64>,
    gradients: &mut Vec<f64>,
) -> Option<(Vector2<f64>, f64)> {
    let half = (l_src / 2) as i64;
    samples.clear();
    gradients.clear();
    samples.extend((-half..=half).map(|t| {
        let p = center + dir * t as f64;
        if pm.contains(&p) {
            pm.direction_gradient_unchecked(&p, dir)
        } else {
            f64::NEG_INFINITY
        }
    }));

    let at = |i: i64| -> f64 {
        if i < 0 || i as usize >= samples.len() {
            f64::NEG_INFINITY
        } else {
            samples[i as usize]
        }
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, &g) in samples.iter().enumerate() {
        let k = i as i64;
        if g.is_finite() && g > threshold && g > at(k - 1) && g >= at(k + 1) {
            gradients.push(g);
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((i, g));
            }
        }
    }
    best.map(|(i, g)| {
        let (l, r) = (at(i as i64 - 1), at(i as i64 + 1));
        let mut offset = 0.0;
        if l.is_finite() && r.is_finite() {
            let denom = l - 2.0 * g + r;
            if denom < 0.0 {
                offset = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
            }
        }
        let t = i as f64 - half as f64 + offset;
        (center + dir * t, g)
    })
}

pub fn line_candidates(
    pm: &ProbMap,
    center: &Vector2<f64>,
    dir: &Vector2<f64>,
    l_src: usize,
) -> LineSearch {
    line_candidates_with_threshold(pm, center, dir, l_src, 0.0)
}

/// Sum over max of the candidate gradients on one line; at least 1.
pub fn noise_spread(gradients: &[f64]) -> Option<f64> {
    let max = gradients.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (max > 0.0).then(|| gradients.iter().sum::<f64>() / max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourCorrespondence {
    pub x_cnt: Vector2<f64>,
    pub n: Vector2<f64>,
    /// Edge location along `n`, on the same axis as `n . x_cnt`.
    pub mu: f64,
    pub sigma_shp: f64,
    pub sigma_noi: f64,
    pub x_model: Vector3<f64>,
    pub valid: bool,
}

impl ContourCorrespondence {
    pub fn variance(&self) -> f64 {
        let s = self.sigma_shp * self.sigma_noi;
        s * s
    }
}

pub fn fan_correspondence(
    pm: &ProbMap,
    x_cnt: &Vector2<f64>,
    n: &Vector2<f64>,
    params: &FanSearchParams,
    table: &DirectionTable,
) -> ContourCorrespondence {
    let n_sam = params.n_sam() as i64;
    let half = n_sam / 2;
    let steps_per_line = (params.a_int / STEP_DEG).round() as i64;
    let base = table.nearest(n);

    let mut s_values = Vec::with_capacity(n_sam as usize);
    let mut samples = Vec::with_capacity(params.l_src);
    let mut scratch = Vec::new();
    let mut central_gradients = Vec::new();
    let mut central_best = None;
    for j in -half..=half {
        let dir = table.get(base, j * steps_per_line);
        let grads = if j == 0 { &mut central_gradients } else { &mut scratch };
        let best = search_line(pm, x_cnt, &dir, params.l_src, params.candidate_threshold, &mut samples, grads);
        if let Some((c, _)) = best {
            s_values.push(n.dot(&c));
        }
        if j == 0 {
            central_best = best;
        }
    }

    let mut corr = ContourCorrespondence {
        x_cnt: *x_cnt,
        n: *n,
        mu: n.dot(x_cnt),
        sigma_shp: 1.0,
        sigma_noi: 1.0,
        x_model: Vector3::zeros(),
        valid: false,
    };
    if central_best.is_none() || s_values.is_empty() {
        return corr;
    }
    let m = s_values.len() as f64;
    corr.mu = s_values.iter().sum::<f64>() / m;
    let var = s_values.iter().map(|s| (s - corr.mu).powi(2)).sum::<f64>() / m;
    corr.sigma_shp = var.sqrt().max(1.0);
    corr.sigma_noi = noise_spread(&central_gradients).unwrap_or(1.0);
    corr.valid = corr.variance() <= params.variance_cutoff;
    corr
}

pub fn contour_residual(corr: &ContourCorrespondence) -> Result<f64> {
    if !corr.valid {
        return Err(Error::InvalidCorrespondence);
    }
    Ok(corr.n.dot(&corr.x_cnt) - corr.mu)
}

/// Coefficients of `b1 exp(-(b2/s^2) r^2) + b3` matching
/// `ln(a1 exp(-r^2/(2 s^2)) + a2)` at r = 0, r = s and r -> infinity.
pub fn fit_mixture_params(a1: f64, a2: f64) -> Result<(f64, f64, f64)> {
    if !(a1 > 0.0 && a2 > 0.0) {
        return Err(Error::NonPositiveWeight { a1, a2 });
    }
    let q = a1 / a2;
    let b1 = q.ln_1p();
    let b2 = -((q * (-0.5f64).exp()).ln_1p() / b1).ln();
    Ok((b1, b2, a2.ln()))
}

#[inline]
pub fn contour_weight(r: f64, sigma_i: f64, beta: f64) -> f64 {
    (-beta * r * r).exp() / (sigma_i * sigma_i)
}

/// Projects the contour points of a template under `pose` and builds one
/// correspondence per point inside the probability map. Invalid ones are
/// kept so callers can count them.
pub fn contour_correspondences(
    pm: &ProbMap,
    template: &ViewpointTemplate,
    pose: &Pose,
    k: &CameraIntrinsics,
    params: &FanSearchParams,
    table: &DirectionTable,
) -> Vec<ContourCorrespondence> {
    let mut out = Vec::with_capacity(template.contour_points.len());
    for cp in &template.contour_points {
        let xc = pose.transform_point(&cp.position);
        let Ok(x) = k.project_camera(&xc) else { continue };
        if !pm.contains(&x) {
            continue;
        }
        let nc = pose.transform_vector(&cp.normal);
        let n2 = k.projection_jacobian(&xc) * nc;
        let norm = n2.norm();
        if norm < 1e-12 {
            continue;
        }
        let mut c = fan_correspondence(pm, &x, &(n2 / norm), params, table);
        c.x_model = cp.position;
        out.push(c);
    }
    out
}
