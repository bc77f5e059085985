//! Binary PPM (P6) renders: heatmaps for TSMs and line traces for
//! probability series with peak markers.

use crate::counting::count_repetitions;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub type Rgb = [u8; 3];

/// Colormap anchors from dark blue (0) through teal and green to yellow (1).
const STOPS: [(f64, Rgb); 4] = [
    (0.0, [20, 24, 82]),
    (0.4, [33, 120, 142]),
    (0.75, [94, 201, 98]),
    (1.0, [253, 231, 37]),
];

/// Maps `[0, 1]` to a blue-to-yellow ramp; values outside are clamped.
pub fn colormap(v: f64) -> Rgb {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    for w in STOPS.windows(2) {
        let ((a, ca), (b, cb)) = (w[0], w[1]);
        if v <= b {
            let u = (v - a) / (b - a);
            return std::array::from_fn(|k| (ca[k] as f64 + (cb[k] as f64 - ca[k] as f64) * u).round() as u8);
        }
    }
    STOPS[STOPS.len() - 1].1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn put(&mut self, x: usize, y: usize, c: Rgb) {
        if x < self.width && y < self.height {
            self.pixels[y * self.width + x] = c;
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

/// One `scale x scale` block per matrix entry; row 0 at the top.
pub fn render_heatmap<T: Scalar>(values: &Matrix<T>, scale: usize) -> Image {
    let scale = scale.max(1);
    let mut img = Image::new(values.cols() * scale, values.rows() * scale, [0, 0, 0]);
    for r in 0..values.rows() {
        for c in 0..values.cols() {
            let color = colormap(values.get(r, c).to_f64_lossy());
            for dy in 0..scale {
                for dx in 0..scale {
                    img.put(c * scale + dx, r * scale + dy, color);
                }
            }
        }
    }
    img
}

pub const TRACE_BACKGROUND: Rgb = [20, 24, 82];
pub const TRACE_LINE: Rgb = [253, 231, 37];
pub const TRACE_THRESHOLD: Rgb = [90, 90, 120];
pub const PEAK_MARKER: Rgb = [230, 40, 40];

/// Line plot of a `[0, 1]` series, `column_width` pixels per frame. Kept
/// peaks (prominence above `threshold`) get a full-height marker column.
/// Returns the image and the marked frame indices.
pub fn render_trace<T: Scalar>(
    series: &[T],
    threshold: f64,
    column_width: usize,
    height: usize,
) -> (Image, Vec<usize>) {
    let cw = column_width.max(1);
    let height = height.max(2);
    let mut img = Image::new(series.len().max(1) * cw, height, TRACE_BACKGROUND);
    let y_of = |v: f64| -> usize {
        let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        ((1.0 - v) * (height - 1) as f64).round() as usize
    };
    let (_, kept) = count_repetitions(series, T::lit(threshold));
    let marks: Vec<usize> = kept.iter().map(|p| p.index).collect();
    for &m in &marks {
        for y in 0..height {
            for dx in 0..cw {
                img.put(m * cw + dx, y, PEAK_MARKER);
            }
        }
    }
    let ty = y_of(threshold);
    for x in 0..img.width {
        if img.get(x, ty) == TRACE_BACKGROUND {
            img.put(x, ty, TRACE_THRESHOLD);
        }
    }
    for (t, v) in series.iter().enumerate() {
        let y = y_of(v.to_f64_lossy());
        let prev = if t > 0 { y_of(series[t - 1].to_f64_lossy()) } else { y };
        let (lo, hi) = (y.min(prev), y.max(prev));
        for dx in 0..cw {
            img.put(t * cw + dx, y, TRACE_LINE);
        }
        for yy in lo..=hi {
            img.put(t * cw, yy, TRACE_LINE);
        }
    }
    (img, marks)
}
