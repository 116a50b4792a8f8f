//! Global foreground/background colour histograms and the per-pixel
//! background probability map they induce.

use image::RgbImage;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Mask, Plane, Rect};

const PROB_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistogramParams {
    /// Bins per RGB channel.
    pub bins: usize,
    pub learn_rate_f: f64,
    pub learn_rate_b: f64,
}

impl Default for HistogramParams {
    fn default() -> Self {
        Self {
            bins: 32,
            learn_rate_f: 0.1,
            learn_rate_b: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorModel {
    bins: usize,
    pub hist_f: Vec<f64>,
    pub hist_b: Vec<f64>,
    pub learn_rate_f: f64,
    pub learn_rate_b: f64,
}

impl ColorModel {
    /// Uniform histograms.
    pub fn new(params: &HistogramParams) -> Self {
        let bins = params.bins.clamp(1, 256);
        let cells = bins * bins * bins;
        Self {
            bins,
            hist_f: vec![1.0 / cells as f64; cells],
            hist_b: vec![1.0 / cells as f64; cells],
            learn_rate_f: params.learn_rate_f,
            learn_rate_b: params.learn_rate_b,
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    #[inline]
    pub fn cell(&self, rgb: [u8; 3]) -> usize {
        let b = self.bins;
        let q = |c: u8| c as usize * b / 256;
        (q(rgb[0]) * b + q(rgb[1])) * b + q(rgb[2])
    }

    pub fn p_f(&self, rgb: [u8; 3]) -> f64 {
        self.hist_f[self.cell(rgb)]
    }

    pub fn p_b(&self, rgb: [u8; 3]) -> f64 {
        self.hist_b[self.cell(rgb)]
    }

    /// Background probability of a colour.
    pub fn background_probability(&self, rgb: [u8; 3]) -> f64 {
        let i = self.cell(rgb);
        background_probability(self.hist_f[i], self.hist_b[i])
    }

    /// Same model with the foreground and background roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            hist_f: self.hist_b.clone(),
            hist_b: self.hist_f.clone(),
            ..self.clone()
        }
    }

    /// Blends in histograms observed in `image`: foreground from pixels of
    /// `silhouette` inside `roi`, background from the rest of `roi`. The
    /// given rates override the model's own.
    pub fn updated_with_rates(
        &self,
        image: &RgbImage,
        silhouette: &Mask,
        roi: &Rect,
        alpha_f: f64,
        alpha_b: f64,
    ) -> Result<Self> {
        let cells = self.hist_f.len();
        let mut inst_f = vec![0.0f64; cells];
        let mut inst_b = vec![0.0f64; cells];
        let (mut nf, mut nb) = (0usize, 0usize);
        for y in roi.y..roi.bottom() {
            for x in roi.x..roi.right() {
                let c = self.cell(image.get_pixel(x as u32, y as u32).0);
                if silhouette.get(x, y) {
                    inst_f[c] += 1.0;
                    nf += 1;
                } else {
                    inst_b[c] += 1.0;
                    nb += 1;
                }
            }
        }
        if nf == 0 {
            return Err(Error::EmptyRegion("foreground"));
        }
        if nb == 0 {
            return Err(Error::EmptyRegion("background"));
        }
        let blend = |hist: &[f64], inst: &[f64], n: usize, alpha: f64| -> Vec<f64> {
            let mut out: Vec<f64> = hist
                .iter()
                .zip(inst)
                .map(|(&h, &c)| (1.0 - alpha) * h + alpha * c / n as f64)
                .collect();
            let sum: f64 = out.iter().sum();
            out.iter_mut().for_each(|v| *v /= sum);
            out
        };
        Ok(Self {
            hist_f: blend(&self.hist_f, &inst_f, nf, alpha_f),
            hist_b: blend(&self.hist_b, &inst_b, nb, alpha_b),
            ..self.clone()
        })
    }
}

/// Blend with the model's learning rates.
pub fn update_color_model(
    model: &ColorModel,
    image: &RgbImage,
    silhouette: &Mask,
    roi: &Rect,
) -> Result<ColorModel> {
    model.updated_with_rates(image, silhouette, roi, model.learn_rate_f, model.learn_rate_b)
}

/// Replace both histograms with the ones observed now.
pub fn bootstrap_color_model(
    params: &HistogramParams,
    image: &RgbImage,
    silhouette: &Mask,
    roi: &Rect,
) -> Result<ColorModel> {
    ColorModel::new(params).updated_with_rates(image, silhouette, roi, 1.0, 1.0)
}

#[inline]
pub fn background_probability(p_f: f64, p_b: f64) -> f64 {
    let (f, b) = (p_f.max(PROB_FLOOR), p_b.max(PROB_FLOOR));
    b / (f + b)
}

/// Background probability over a region of interest with its Sobel
/// gradients. Planes are indexed relative to `roi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    pub roi: Rect,
    pub values: Plane,
    pub grad_x: Plane,
    pub grad_y: Plane,
}

impl ProbMap {
    pub fn from_values(roi: Rect, values: Plane) -> Self {
        assert_eq!((values.width, values.height), (roi.width, roi.height));
        let (grad_x, grad_y) = values.sobel();
        Self { roi, values, grad_x, grad_y }
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        self.roi.contains_point(p.x, p.y)
    }

    /// Gradient of the map along `dir` at image point `p`, bilinearly
    /// interpolated.
    pub fn direction_gradient(&self, p: &Vector2<f64>, dir: &Vector2<f64>) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutOfRoi { x: p.x, y: p.y });
        }
        Ok(self.direction_gradient_unchecked(p, dir))
    }

    #[inline]
    pub(crate) fn direction_gradient_unchecked(&self, p: &Vector2<f64>, dir: &Vector2<f64>) -> f64 {
        let lx = (p.x - self.roi.x as f64) as f32;
        let ly = (p.y - self.roi.y as f64) as f32;
        let (gx, gy) = self.grad_x.sample_pair(&self.grad_y, lx, ly);
        dir.x * gx as f64 + dir.y * gy as f64
    }
}

pub fn probability_map(image: &RgbImage, roi: &Rect, model: &ColorModel) -> ProbMap {
    // One lookup table per call keeps the per-pixel work to an index.
    let table: Vec<f32> = model
        .hist_f
        .iter()
        .zip(&model.hist_b)
        .map(|(&f, &b)| background_probability(f, b) as f32)
        .collect();
    let values = Plane::from_fn(roi.width, roi.height, |x, y| {
        let px = image.get_pixel((roi.x + x) as u32, (roi.y + y) as u32).0;
        table[model.cell(px)]
    });
    ProbMap::from_values(*roi, values)
}

pub fn direction_gradient(pm: &ProbMap, p: &Vector2<f64>, dir: &Vector2<f64>) -> Result<f64> {
    pm.direction_gradient(p, dir)
}
