//! Grayscale image primitives.
//!
//! Intensities are reals in `[0, 1]`, stored row-major. Every operation here is a
//! pure function of its inputs.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T = f64> {
    width: usize,
    height: usize,
    pixels: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    /// Builds an image from raw pixels, validating shape and range.
    pub fn new(width: usize, height: usize, pixels: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero-sized image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some((i, v)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::InvalidImage(format!(
                "pixel {i} has intensity {v} outside [0,1]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    /// Constant image. `value` is clamped into `[0, 1]`.
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            pixels: vec![clamp01(value); width * height],
        }
    }

    /// Builds an image by evaluating `f(x, y)`; results are clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(clamp01(f(x, y)));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.pixels[y * self.width + x]
    }

    /// Sets a pixel, clamping the value into `[0, 1]`.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.pixels[y * self.width + x] = clamp01(v);
    }

    /// Paints the axis-aligned box `[x0, x1) × [y0, y1)`, clipped to the image.
    pub fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, v: T) {
        let v = clamp01(v);
        for y in y0.min(self.height)..y1.min(self.height) {
            let row = y * self.width;
            for x in x0.min(self.width)..x1.min(self.width) {
                self.pixels[row + x] = v;
            }
        }
    }

    pub fn is_all_zero(&self) -> bool {
        self.pixels.iter().all(|v| *v == T::zero())
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> GrayImage<U> {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn clamp01<T: Scalar>(v: T) -> T {
    if v.is_nan() {
        T::zero()
    } else {
        v.max(T::zero()).min(T::one())
    }
}

/// Binary image; every pixel is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
}

impl BinaryImage {
    pub fn from_bools(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} binary image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Pixel value as 0 or 1.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        u8::from(self.pixels[y * self.width + x])
    }

    #[inline]
    pub fn is_set(&self, index: usize) -> bool {
        self.pixels[index]
    }

    pub fn bits(&self) -> &[bool] {
        &self.pixels
    }

    pub fn count_ones(&self) -> usize {
        self.pixels.iter().filter(|b| **b).count()
    }
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.x.checked_add(self.w).is_some_and(|r| r <= width)
            && self.y.checked_add(self.h).is_some_and(|b| b <= height)
    }
}

/// Per-pixel `|a - b|`.
pub fn absdiff<T: Scalar>(a: &GrayImage<T>, b: &GrayImage<T>) -> Result<GrayImage<T>> {
    a.check_same_dims(b)?;
    let pixels = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(p, q)| (*p - *q).abs())
        .collect();
    Ok(GrayImage {
        width: a.width,
        height: a.height,
        pixels,
    })
}

/// Sets pixels strictly above `thresh` to 1 and everything else to 0.
pub fn binary_threshold<T: Scalar>(img: &GrayImage<T>, thresh: T) -> Result<BinaryImage> {
    if !(thresh > T::zero() && thresh < T::one()) {
        return Err(Error::param("thresh", format!("{thresh} not in (0,1)")));
    }
    Ok(BinaryImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|v| *v > thresh).collect(),
    })
}

/// Binary motion mask between two frames.
pub fn silhouette<T: Scalar>(
    prev: &GrayImage<T>,
    next: &GrayImage<T>,
    thresh: T,
) -> Result<BinaryImage> {
    binary_threshold(&absdiff(prev, next)?, thresh)
}

/// Tight bounding box of all pixels with intensity > 0, or `None` for an all-black image.
pub fn nonzero_bounding_box<T: Scalar>(img: &GrayImage<T>) -> Option<Rect> {
    let (mut x0, mut y0) = (usize::MAX, usize::MAX);
    let (mut x1, mut y1) = (0, 0);
    for y in 0..img.height {
        let row = &img.pixels[y * img.width..(y + 1) * img.width];
        for (x, v) in row.iter().enumerate() {
            if *v > T::zero() {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
        }
    }
    (x0 != usize::MAX).then(|| Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

pub fn crop<T: Scalar>(img: &GrayImage<T>, r: Rect) -> Result<GrayImage<T>> {
    if !r.fits_in(img.width, img.height) {
        return Err(Error::RectOutOfBounds {
            x: r.x,
            y: r.y,
            w: r.w,
            h: r.h,
            width: img.width,
            height: img.height,
        });
    }
    let mut pixels = Vec::with_capacity(r.w * r.h);
    for y in r.y..r.y + r.h {
        let start = y * img.width + r.x;
        pixels.extend_from_slice(&img.pixels[start..start + r.w]);
    }
    Ok(GrayImage {
        width: r.w,
        height: r.h,
        pixels,
    })
}

/// Bilinear resize with half-pixel-center alignment and edge clamping.
pub fn resize<T: Scalar>(img: &GrayImage<T>, w: usize, h: usize) -> Result<GrayImage<T>> {
    if w == 0 || h == 0 {
        return Err(Error::param("size", format!("target {w}x{h} has a zero dimension")));
    }
    if (w, h) == img.dims() {
        return Ok(img.clone());
    }
    let xs = sample_positions::<T>(img.width, w);
    let ys = sample_positions::<T>(img.height, h);
    let mut pixels = Vec::with_capacity(w * h);
    for &(y0, y1, fy) in &ys {
        let r0 = &img.pixels[y0 * img.width..(y0 + 1) * img.width];
        let r1 = &img.pixels[y1 * img.width..(y1 + 1) * img.width];
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            pixels.push(clamp01(top + (bottom - top) * fy));
        }
    }
    Ok(GrayImage {
        width: w,
        height: h,
        pixels,
    })
}

// (lower index, upper index, fraction toward upper) for each output coordinate.
fn sample_positions<T: Scalar>(src: usize, dst: usize) -> Vec<(usize, usize, T)> {
    let scale = src as f64 / dst as f64;
    let max = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, T::of(s - lo as f64))
        })
        .collect()
}

/// Area-average downsampling; falls back to bilinear when the factor is not integral.
pub fn downsample<T: Scalar>(img: &GrayImage<T>, w: usize, h: usize) -> Result<GrayImage<T>> {
    if w == 0 || h == 0 {
        return Err(Error::param("size", format!("target {w}x{h} has a zero dimension")));
    }
    if !img.width.is_multiple_of(w) || !img.height.is_multiple_of(h) {
        return resize(img, w, h);
    }
    let (fx, fy) = (img.width / w, img.height / h);
    let norm = T::of_usize(fx * fy).recip();
    let mut pixels = vec![T::zero(); w * h];
    for y in 0..img.height {
        let out_row = (y / fy) * w;
        for x in 0..img.width {
            pixels[out_row + x / fx] += img.pixels[y * img.width + x];
        }
    }
    for p in &mut pixels {
        *p = clamp01(*p * norm);
    }
    Ok(GrayImage {
        width: w,
        height: h,
        pixels,
    })
}

/// Result of [`match_template`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateMatch<T> {
    pub rect: Rect,
    pub score: T,
}

/// Finds the offset maximizing zero-mean normalized cross-correlation.
///
/// Windows (or needles) with zero variance score 0. Ties go to the smallest
/// `(y, x)`.
pub fn match_template<T: Scalar>(
    haystack: &GrayImage<T>,
    needle: &GrayImage<T>,
) -> Result<TemplateMatch<T>> {
    let (hw, hh) = haystack.dims();
    let (nw, nh) = needle.dims();
    if nw > hw || nh > hh {
        return Err(Error::TemplateTooLarge(nw, nh, hw, hh));
    }
    let n = T::of_usize(nw * nh);
    let flat_tol = n * T::epsilon();

    let needle_mean = needle.pixels.iter().copied().sum::<T>() / n;
    let centered: Vec<T> = needle.pixels.iter().map(|v| *v - needle_mean).collect();
    let needle_ss: T = centered.iter().map(|d| *d * *d).sum();
    let needle_flat = needle_ss <= flat_tol;

    let mut best = TemplateMatch {
        rect: Rect::new(0, 0, nw, nh),
        score: T::neg_infinity(),
    };
    for oy in 0..=hh - nh {
        for ox in 0..=hw - nw {
            let score = if needle_flat {
                T::zero()
            } else {
                let mut sum = T::zero();
                for y in 0..nh {
                    let row = (oy + y) * hw + ox;
                    sum += haystack.pixels[row..row + nw].iter().copied().sum::<T>();
                }
                let mean = sum / n;
                let (mut cross, mut ss) = (T::zero(), T::zero());
                for y in 0..nh {
                    let row = (oy + y) * hw + ox;
                    let win = &haystack.pixels[row..row + nw];
                    let tpl = &centered[y * nw..(y + 1) * nw];
                    for (w, t) in win.iter().zip(tpl) {
                        let d = *w - mean;
                        cross += d * *t;
                        ss += d * d;
                    }
                }
                if ss <= flat_tol {
                    T::zero()
                } else {
                    cross / (ss * needle_ss).sqrt()
                }
            };
            if score > best.score {
                best = TemplateMatch {
                    rect: Rect::new(ox, oy, nw, nh),
                    score,
                };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> GrayImage<f64> {
        GrayImage::from_fn(w, h, |_, _| rng.gen::<f64>())
    }

    fn img(w: usize, h: usize, px: &[f64]) -> GrayImage<f64> {
        GrayImage::new(w, h, px.to_vec()).unwrap()
    }

    #[test]
    fn new_rejects_bad_inputs() {
        assert!(GrayImage::<f64>::new(0, 1, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(1, 1, vec![1.5]).is_err());
        assert!(GrayImage::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn absdiff_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_image(&mut rng, 5, 4);
        assert!(absdiff(&x, &x).unwrap().is_all_zero());

        let a = img(2, 1, &[0.2, 0.0]);
        let b = img(2, 1, &[0.7, 0.0]);
        assert!((absdiff(&a, &b).unwrap().get(0, 0) - 0.5).abs() < 1e-15);

        let a = random_image(&mut rng, 4, 4);
        let b = random_image(&mut rng, 4, 4);
        let d = absdiff(&a, &b).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let expected = if a.get(x, y) > b.get(x, y) {
                    a.get(x, y) - b.get(x, y)
                } else {
                    b.get(x, y) - a.get(x, y)
                };
                assert_eq!(d.get(x, y), expected);
            }
        }
    }

    #[test]
    fn absdiff_dimension_mismatch_names_both_shapes() {
        let e = absdiff(&GrayImage::<f64>::zeros(3, 2), &GrayImage::zeros(2, 3)).unwrap_err();
        assert_eq!(e.to_string(), "dimension mismatch: 3x2 vs 2x3");
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(binary_threshold(&GrayImage::<f64>::zeros(3, 3), 0.5).unwrap().count_ones(), 0);
        let t = binary_threshold(&img(2, 1, &[0.6, 0.5]), 0.5).unwrap();
        assert_eq!((t.get(0, 0), t.get(1, 0)), (1, 0));
        assert!(binary_threshold(&img(1, 1, &[0.1]), 0.0).is_err());
        assert!(binary_threshold(&img(1, 1, &[0.1]), 1.0).is_err());
    }

    #[test]
    fn silhouette_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_image(&mut rng, 6, 6);
        assert_eq!(silhouette(&a, &a, 0.1).unwrap().count_ones(), 0);

        let prev = GrayImage::<f64>::zeros(4, 4);
        let mut next = prev.clone();
        next.set(2, 1, 1.0);
        let s = silhouette(&prev, &next, 0.3).unwrap();
        assert_eq!(s.count_ones(), 1);
        assert_eq!(s.get(2, 1), 1);

        let b = random_image(&mut rng, 6, 6);
        let s = silhouette(&a, &b, 0.25).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                let diff = (a.get(x, y) - b.get(x, y)).abs();
                assert_eq!(s.get(x, y), u8::from(diff > 0.25));
            }
        }
    }

    #[test]
    fn bounding_box_examples() {
        assert_eq!(nonzero_bounding_box(&GrayImage::<f64>::zeros(5, 5)), None);
        let mut a = GrayImage::<f64>::zeros(6, 5);
        a.set(3, 2, 0.4);
        assert_eq!(nonzero_bounding_box(&a), Some(Rect::new(3, 2, 1, 1)));
    }

    #[test]
    fn crop_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_image(&mut rng, 7, 5);
        assert_eq!(crop(&a, Rect::new(0, 0, 7, 5)).unwrap(), a);
        let one = crop(&a, Rect::new(4, 3, 1, 1)).unwrap();
        assert_eq!(one.dims(), (1, 1));
        assert_eq!(one.get(0, 0), a.get(4, 3));
        assert!(crop(&a, Rect::new(5, 0, 3, 1)).is_err());
        assert!(crop(&a, Rect::new(0, 0, 0, 1)).is_err());
    }

    #[test]
    fn resize_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_image(&mut rng, 5, 3);
        assert_eq!(resize(&a, 5, 3).unwrap(), a);

        let c = GrayImage::<f64>::filled(2, 2, 0.3);
        let r = resize(&c, 4, 4).unwrap();
        assert!(r.pixels().iter().all(|v| (*v - 0.3).abs() < 1e-15));

        // Half-pixel centers: source coords -0.25, 0.25, 0.75, 1.25 clamp to [0, 1].
        let r = resize(&img(2, 1, &[0.0, 1.0]), 4, 1).unwrap();
        assert_eq!(r.pixels(), &[0.0, 0.25, 0.75, 1.0]);

        assert!(resize(&a, 0, 3).is_err());
    }

    #[test]
    fn downsample_averages_blocks() {
        let a = img(4, 2, &[0.0, 1.0, 0.5, 0.5, 1.0, 0.0, 0.25, 0.75]);
        let d = downsample(&a, 2, 1).unwrap();
        assert_eq!(d.pixels(), &[0.5, 0.5]);
    }

    #[test]
    fn match_template_exact_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hay = random_image(&mut rng, 16, 12);
        let needle = crop(&hay, Rect::new(5, 3, 4, 4)).unwrap();
        let m = match_template(&hay, &needle).unwrap();
        assert_eq!(m.rect, Rect::new(5, 3, 4, 4));
        assert!((m.score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn match_template_flat_scores_zero() {
        let hay = GrayImage::<f64>::filled(6, 6, 0.4);
        let needle = GrayImage::<f64>::filled(2, 2, 0.7);
        let m = match_template(&hay, &needle).unwrap();
        assert_eq!(m.rect, Rect::new(0, 0, 2, 2));
        assert_eq!(m.score, 0.0);
        assert!(match_template(&needle, &hay).is_err());
    }

    #[test]
    fn works_in_f32() {
        let a = GrayImage::<f32>::from_fn(8, 8, |x, y| ((x * 7 + y * 3) % 5) as f32 / 4.0);
        let n = crop(&a, Rect::new(2, 3, 3, 3)).unwrap();
        let m = match_template(&a, &n).unwrap();
        assert!((m.score - 1.0).abs() < 1e-5);
    }

    fn arb_image(max: usize) -> impl Strategy<Value = GrayImage<f64>> {
        (1..=max, 1..=max).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0.0..=1.0f64, w * h)
                .prop_map(move |px| GrayImage::new(w, h, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn absdiff_symmetric(seed in any::<u64>(), w in 1usize..12, h in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_image(&mut rng, w, h);
            let b = random_image(&mut rng, w, h);
            prop_assert_eq!(absdiff(&a, &b).unwrap(), absdiff(&b, &a).unwrap());
        }

        #[test]
        fn bounding_box_is_tight(a in arb_image(12), cut in 0.0..1.0f64) {
            let sparse = GrayImage::from_fn(a.width(), a.height(), |x, y| {
                if a.get(x, y) > cut { a.get(x, y) } else { 0.0 }
            });
            if let Some(r) = nonzero_bounding_box(&sparse) {
                let c = crop(&sparse, r).unwrap();
                let col_has = |x: usize| (0..c.height()).any(|y| c.get(x, y) > 0.0);
                let row_has = |y: usize| (0..c.width()).any(|x| c.get(x, y) > 0.0);
                prop_assert!(col_has(0) && col_has(c.width() - 1));
                prop_assert!(row_has(0) && row_has(c.height() - 1));
            } else {
                prop_assert!(sparse.is_all_zero());
            }
        }

        #[test]
        fn resize_stays_in_range(a in arb_image(10), w in 1usize..20, h in 1usize..20, c in 0.0..=1.0f64) {
            let r = resize(&a, w, h).unwrap();
            prop_assert!(r.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
            let k = resize(&GrayImage::filled(a.width(), a.height(), c), w, h).unwrap();
            prop_assert!(k.pixels().iter().all(|v| (*v - c).abs() < 1e-12));
        }
    }
}
