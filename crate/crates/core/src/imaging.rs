//! Small raster helpers shared by segmentation, flow and rendering.

use image::RgbImage;
use serde::{Deserialize, Serialize};

/// Axis-aligned pixel rectangle `[x, x + width) x [y, y + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self { x, y, width, height }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    /// Bounding box of `[min, max]` (inclusive, real-valued) grown by
    /// `margin` and clipped to an image of `width x height`.
    pub fn from_bounds(
        min: (f64, f64),
        max: (f64, f64),
        margin: f64,
        width: usize,
        height: usize,
    ) -> Option<Self> {
        let x0 = (min.0 - margin).floor().max(0.0);
        let y0 = (min.1 - margin).floor().max(0.0);
        let x1 = (max.0 + margin).ceil().min(width as f64 - 1.0);
        let y1 = (max.1 + margin).ceil().min(height as f64 - 1.0);
        if !(x1 >= x0 && y1 >= y0) || !x0.is_finite() || !y0.is_finite() {
            return None;
        }
        Some(Self::new(
            x0 as usize,
            y0 as usize,
            (x1 - x0) as usize + 1,
            (y1 - y0) as usize + 1,
        ))
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn right(&self) -> usize {
        self.x + self.width
    }

    pub fn bottom(&self) -> usize {
        self.y + self.height
    }

    pub fn contains_pixel(&self, x: usize, y: usize) -> bool {
        x >= self.x && y >= self.y && x < self.right() && y < self.bottom()
    }

    /// Whether a real-valued point can be bilinearly sampled inside the rect.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x as f64
            && y >= self.y as f64
            && x <= (self.right() - 1) as f64
            && y <= (self.bottom() - 1) as f64
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }
}

/// Dense single-channel float raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel access with replicated borders.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// Bilinear sample with replicated borders. Pixel centres sit on
    /// integer coordinates.
    #[inline]
    pub fn sample(&self, x: f32, y: f32) -> f32 {
        let maxx = (self.width - 1) as f32;
        let maxy = (self.height - 1) as f32;
        let x = x.clamp(0.0, maxx);
        let y = y.clamp(0.0, maxy);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let row0 = y0 * self.width;
        let row1 = y1 * self.width;
        let a = self.data[row0 + x0] + (self.data[row0 + x1] - self.data[row0 + x0]) * fx;
        let b = self.data[row1 + x0] + (self.data[row1 + x1] - self.data[row1 + x0]) * fx;
        a + (b - a) * fy
    }

    /// Samples `self` and an equally sized `other` at the same point,
    /// sharing the interpolation weights.
    #[inline]
    pub fn sample_pair(&self, other: &Plane, x: f32, y: f32) -> (f32, f32) {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        let x = x.clamp(0.0, (self.width - 1) as f32);
        let y = y.clamp(0.0, (self.height - 1) as f32);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as usize, y0 as usize);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (i00, i10) = (y0 * self.width + x0, y0 * self.width + x1);
        let (i01, i11) = (y1 * self.width + x0, y1 * self.width + x1);
        let blend = |d: &[f32]| {
            let a = d[i00] + (d[i10] - d[i00]) * fx;
            let b = d[i01] + (d[i11] - d[i01]) * fx;
            a + (b - a) * fy
        };
        (blend(&self.data), blend(&other.data))
    }

    pub fn crop(&self, roi: &Rect) -> Plane {
        let mut out = Plane::new(roi.width, roi.height);
        for y in 0..roi.height {
            let src = (roi.y + y) * self.width + roi.x;
            out.data[y * roi.width..(y + 1) * roi.width]
                .copy_from_slice(&self.data[src..src + roi.width]);
        }
        out
    }

    /// Half-resolution plane by 2x2 box averaging (odd trailing rows and
    /// columns are dropped).
    pub fn downsample(&self) -> Plane {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        Plane::from_fn(w, h, |x, y| {
            let xs = (2 * x).min(self.width - 1);
            let ys = (2 * y).min(self.height - 1);
            let x1 = (xs + 1).min(self.width - 1);
            let y1 = (ys + 1).min(self.height - 1);
            0.25 * (self.get(xs, ys) + self.get(x1, ys) + self.get(xs, y1) + self.get(x1, y1))
        })
    }

    /// 3x3 Sobel responses scaled by 1/8, borders replicated.
    pub fn sobel(&self) -> (Plane, Plane) {
        let mut gx = Plane::new(self.width, self.height);
        let mut gy = Plane::new(self.width, self.height);
        let w = self.width as isize;
        let h = self.height as isize;
        for y in 0..h {
            for x in 0..w {
                let p = |dx: isize, dy: isize| self.get_clamped(x + dx, y + dy);
                let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
                let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
                let i = (y * w + x) as usize;
                gx.data[i] = sx / 8.0;
                gy.data[i] = sy / 8.0;
            }
        }
        (gx, gy)
    }

    /// Central-difference gradients (one-sided at the border).
    pub fn central_gradient(&self) -> (Plane, Plane) {
        let w = self.width as isize;
        let h = self.height as isize;
        let gx = Plane::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as isize, y as isize);
            let (a, b) = ((x - 1).max(0), (x + 1).min(w - 1));
            let d = (b - a).max(1) as f32;
            (self.get_clamped(b, y) - self.get_clamped(a, y)) / d
        });
        let gy = Plane::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as isize, y as isize);
            let (a, b) = ((y - 1).max(0), (y + 1).min(h - 1));
            let d = (b - a).max(1) as f32;
            (self.get_clamped(x, b) - self.get_clamped(x, a)) / d
        });
        (gx, gy)
    }
}

/// 8-bit luma from RGB (ITU-R BT.601 weights).
pub fn to_gray(img: &RgbImage) -> Plane {
    let (w, h) = img.dimensions();
    let data = img
        .pixels()
        .map(|p| (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32).round())
        .collect();
    Plane {
        width: w as usize,
        height: h as usize,
        data,
    }
}

/// Luma of only the pixels inside `roi`.
pub fn to_gray_roi(img: &RgbImage, roi: &Rect) -> Plane {
    Plane::from_fn(roi.width, roi.height, |x, y| {
        let p = img.get_pixel((roi.x + x) as u32, (roi.y + y) as u32);
        (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32).round()
    })
}

/// Per-pixel boolean raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Out-of-bounds reads as background.
    #[inline]
    pub fn get_or_false(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Tight bounding box of the set pixels.
    pub fn bounding_rect(&self) -> Option<Rect> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != usize::MAX).then(|| Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sobel_on_unit_step() {
        // Columns 0..4 are 0, columns 4.. are 1.
        let p = Plane::from_fn(8, 5, |x, _| if x >= 4 { 1.0 } else { 0.0 });
        let (gx, gy) = p.sobel();
        // Hand evaluation of the 1/8 stencil: (1 + 2 + 1) / 8 on both
        // columns flanking the step, zero elsewhere.
        for y in 0..5 {
            assert_eq!(gx.get(3, y), 0.5);
            assert_eq!(gx.get(4, y), 0.5);
            assert_eq!(gx.get(2, y), 0.0);
            assert_eq!(gx.get(5, y), 0.0);
            for x in 0..8 {
                assert_eq!(gy.get(x, y), 0.0);
            }
        }
    }

    #[test]
    fn sobel_on_unit_ramp_is_one() {
        let p = Plane::from_fn(8, 5, |x, _| x as f32);
        let (gx, _) = p.sobel();
        assert_eq!(gx.get(3, 2), 1.0);
    }

    #[test]
    fn bilinear_sample_interpolates() {
        let p = Plane::from_fn(4, 4, |x, y| (x + 10 * y) as f32);
        assert!((p.sample(1.5, 2.25) - (1.5 + 22.5)).abs() < 1e-5);
        assert_eq!(p.sample(-3.0, 0.0), 0.0);
    }

    #[test]
    fn rect_from_bounds_clips() {
        let r = Rect::from_bounds((5.2, 3.0), (20.7, 10.0), 10.0, 25, 100).unwrap();
        assert_eq!(r, Rect::new(0, 0, 25, 21));
        assert!(Rect::from_bounds((50.0, 3.0), (60.0, 10.0), 0.0, 25, 100).is_none());
    }

    #[test]
    fn downsample_averages() {
        let p = Plane::from_fn(4, 2, |x, _| x as f32);
        let d = p.downsample();
        assert_eq!((d.width, d.height), (2, 1));
        assert_eq!(d.data, vec![0.5, 2.5]);
    }
}
