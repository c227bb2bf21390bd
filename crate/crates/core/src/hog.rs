//! Histogram of oriented gradients.
//!
//! Gradients use the centered `[-1, 0, 1]` kernel with replicated borders.
//! Orientations are unsigned, in `[0°, 180°)`. Each pixel votes its full
//! magnitude into a single bin of its cell (no interpolation, no block
//! normalization). Partial cells at the right and bottom edges are kept.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::scalar::Scalar;

/// How the concatenated cell histograms are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HogNorm {
    /// Divide by the vector's L2 norm; all-zero vectors stay zero.
    #[default]
    GlobalL2,
    /// Divide by the square root of the image's pixel count. Keeps absolute
    /// gradient energy, so an empty (all-black) goal is not equidistant from
    /// every frame.
    SqrtArea,
    /// Raw magnitude sums.
    Raw,
}

impl FromStr for HogNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global-l2" | "l2" => Ok(Self::GlobalL2),
            "sqrt-area" => Ok(Self::SqrtArea),
            "raw" => Ok(Self::Raw),
            other => Err(Error::param(
                "hog_norm",
                format!("unknown normalization {other:?} (global-l2, sqrt-area, raw)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HogParams {
    pub cell_size: usize,
    pub num_bins: usize,
    pub norm: HogNorm,
}

impl Default for HogParams {
    fn default() -> Self {
        Self {
            cell_size: 8,
            num_bins: 9,
            norm: HogNorm::GlobalL2,
        }
    }
}

impl HogParams {
    pub fn new(cell_size: usize, num_bins: usize) -> Result<Self> {
        let p = Self {
            cell_size,
            num_bins,
            norm: HogNorm::GlobalL2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_norm(mut self, norm: HogNorm) -> Self {
        self.norm = norm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_size == 0 {
            return Err(Error::param("cell_size", "must be at least 1"));
        }
        if self.num_bins < 2 {
            return Err(Error::param("num_bins", "must be at least 2"));
        }
        Ok(())
    }

    /// Feature length for an image of the given size.
    pub fn feature_len(&self, width: usize, height: usize) -> usize {
        width.div_ceil(self.cell_size) * height.div_ceil(self.cell_size) * self.num_bins
    }
}

/// Concatenated cell histograms: cells row-major, bins contiguous per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T = f64> {
    pub values: Vec<T>,
    pub cells_x: usize,
    pub cells_y: usize,
    pub num_bins: usize,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn cell(&self, cx: usize, cy: usize) -> &[T] {
        let start = (cy * self.cells_x + cx) * self.num_bins;
        &self.values[start..start + self.num_bins]
    }

    /// Euclidean distance. Panics if the lengths differ.
    pub fn distance(&self, other: &Self) -> T {
        assert_eq!(self.len(), other.len(), "feature vectors differ in length");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum::<T>()
            .sqrt()
    }
}

/// Per-pixel gradient magnitude and unsigned orientation in degrees.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<T>,
    pub orientation: Vec<T>,
}

pub fn gradients<T: Scalar>(img: &GrayImage<T>) -> Result<Gradients<T>> {
    let (w, h) = img.dims();
    if w < 2 || h < 2 {
        return Err(Error::InvalidImage(format!(
            "gradients need at least 2x2 pixels, got {w}x{h}"
        )));
    }
    let px = img.pixels();
    let mut magnitude = Vec::with_capacity(w * h);
    let mut orientation = Vec::with_capacity(w * h);
    for y in 0..h {
        let up = y.saturating_sub(1) * w;
        let down = (y + 1).min(h - 1) * w;
        let row = y * w;
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            let gx = px[row + right] - px[row + left];
            let gy = px[down + x] - px[up + x];
            magnitude.push((gx * gx + gy * gy).sqrt());
            orientation.push(fold_orientation(gy.atan2(gx).to_degrees()));
        }
    }
    Ok(Gradients {
        width: w,
        height: h,
        magnitude,
        orientation,
    })
}

#[inline]
fn fold_orientation<T: Scalar>(deg: T) -> T {
    let half = T::of(180.0);
    let mut d = deg;
    if d < T::zero() {
        d += half;
    }
    if d >= half {
        d -= half;
    }
    // -tiny + 180 can round up to exactly 180.
    if d >= half {
        T::zero()
    } else {
        d
    }
}

#[inline]
fn bin_of<T: Scalar>(orientation: T, num_bins: usize) -> usize {
    let width = T::of(180.0) / T::of_usize(num_bins);
    (orientation / width)
        .floor()
        .to_usize()
        .unwrap_or(0)
        .min(num_bins - 1)
}

/// Unnormalized per-cell orientation histograms.
pub fn cell_histograms<T: Scalar>(img: &GrayImage<T>, params: &HogParams) -> Result<FeatureVector<T>> {
    params.validate()?;
    let g = gradients(img)?;
    let cells_x = g.width.div_ceil(params.cell_size);
    let cells_y = g.height.div_ceil(params.cell_size);
    let nb = params.num_bins;
    let mut values = vec![T::zero(); cells_x * cells_y * nb];
    for y in 0..g.height {
        let cell_row = (y / params.cell_size) * cells_x;
        for x in 0..g.width {
            let i = y * g.width + x;
            let m = g.magnitude[i];
            if m > T::zero() {
                let cell = cell_row + x / params.cell_size;
                values[cell * nb + bin_of(g.orientation[i], nb)] += m;
            }
        }
    }
    Ok(FeatureVector {
        values,
        cells_x,
        cells_y,
        num_bins: nb,
    })
}

/// HOG descriptor of an image.
pub fn hog_features<T: Scalar>(img: &GrayImage<T>, params: &HogParams) -> Result<FeatureVector<T>> {
    let mut f = cell_histograms(img, params)?;
    let scale = match params.norm {
        HogNorm::GlobalL2 => {
            let n = f.norm();
            if n > T::zero() {
                n.recip()
            } else {
                T::one()
            }
        }
        HogNorm::SqrtArea => T::of_usize(img.width() * img.height()).sqrt().recip(),
        HogNorm::Raw => T::one(),
    };
    if scale != T::one() {
        for v in &mut f.values {
            *v *= scale;
        }
    }
    Ok(f)
}

/// Draws each cell as a star of line segments, one per bin, brightness
/// proportional to the bin's share of the strongest bin in the image.
///
/// Segments are drawn perpendicular to the gradient direction so they trace
/// edges. A zero descriptor renders as an all-black image.
pub fn render_glyphs<T: Scalar>(features: &FeatureVector<T>, glyph_px: usize) -> GrayImage<T> {
    let glyph_px = glyph_px.max(3);
    let width = features.cells_x * glyph_px;
    let height = features.cells_y * glyph_px;
    let mut out = GrayImage::zeros(width.max(1), height.max(1));
    let peak = features
        .values
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b));
    if peak <= T::zero() {
        return out;
    }
    let nb = features.num_bins;
    let radius = (glyph_px as f64 - 1.0) / 2.0;
    for cy in 0..features.cells_y {
        for cx in 0..features.cells_x {
            let centre_x = cx as f64 * glyph_px as f64 + radius;
            let centre_y = cy as f64 * glyph_px as f64 + radius;
            for (b, v) in features.cell(cx, cy).iter().enumerate() {
                if *v <= T::zero() {
                    continue;
                }
                let level = *v / peak;
                let theta = ((b as f64 + 0.5) * 180.0 / nb as f64 + 90.0).to_radians();
                let (dx, dy) = (theta.cos() * radius, theta.sin() * radius);
                let steps = (2.0 * radius).ceil() as usize * 2 + 1;
                for s in 0..=steps {
                    let t = s as f64 / steps as f64 * 2.0 - 1.0;
                    let x = (centre_x + t * dx).round();
                    let y = (centre_y + t * dy).round();
                    if x < 0.0 || y < 0.0 {
                        continue;
                    }
                    let (x, y) = (x as usize, y as usize);
                    if x < width && y < height && out.get(x, y) < level {
                        out.set(x, y, level);
                    }
                }
            }
        }
    }
    out
}
