//! Motion templates: a single image recording where and when motion happened
//! across a frame sequence. Recent motion is brighter than old motion.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imaging::{silhouette, BinaryImage, GrayImage};
use crate::scalar::Scalar;

/// Decay duration δ as a function of the iteration counter `t` (1-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaSchedule {
    /// Motion never decays.
    Infinite,
    Constant(f64),
    /// `δ_t = (t + offset) / divisor`.
    Linear { offset: f64, divisor: f64 },
}

impl DeltaSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            DeltaSchedule::Infinite => f64::INFINITY,
            DeltaSchedule::Constant(d) => d,
            DeltaSchedule::Linear { offset, divisor } => (t as f64 + offset) / divisor,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DeltaSchedule::Infinite => true,
            DeltaSchedule::Constant(d) => d >= 0.0,
            DeltaSchedule::Linear { offset, divisor } => {
                offset >= -1.0 && divisor > 0.0 && divisor.is_finite() && offset.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("delta", format!("{self} can go negative")))
        }
    }
}

impl fmt::Display for DeltaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaSchedule::Infinite => write!(f, "inf"),
            DeltaSchedule::Constant(d) => write!(f, "{d}"),
            DeltaSchedule::Linear { offset, divisor } => write!(f, "(t+{offset})/{divisor}"),
        }
    }
}

/// Parses `inf`, a plain number, or `(t+K)/D`.
impl FromStr for DeltaSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::param("delta", format!("cannot parse {s:?}; use inf, a number, or (t+K)/D"));
        let parsed = if compact.eq_ignore_ascii_case("inf") {
            DeltaSchedule::Infinite
        } else if let Some(rest) = compact.strip_prefix("(t") {
            let (num, den) = rest.split_once(")/").ok_or_else(bad)?;
            let offset = if num.is_empty() {
                0.0
            } else {
                num.strip_prefix('+')
                    .map(str::parse)
                    .or_else(|| num.strip_prefix('-').map(|n| n.parse::<f64>().map(|v| -v)))
                    .ok_or_else(bad)?
                    .map_err(|_| bad())?
            };
            let divisor = den.parse().map_err(|_| bad())?;
            DeltaSchedule::Linear { offset, divisor }
        } else {
            DeltaSchedule::Constant(compact.parse().map_err(|_| bad())?)
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionTemplateParams {
    pub tau0: f64,
    pub tau_increment: f64,
    pub delta: DeltaSchedule,
    pub silhouette_threshold: f64,
}

impl Default for MotionTemplateParams {
    /// τ starts at 0.1 and grows by 0.3 per iteration with δ_t = (t+1)/4.
    fn default() -> Self {
        Self {
            tau0: 0.1,
            tau_increment: 0.3,
            delta: DeltaSchedule::Linear {
                offset: 1.0,
                divisor: 4.0,
            },
            silhouette_threshold: 0.1,
        }
    }
}

impl MotionTemplateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(Error::param("tau0", "must be positive"));
        }
        if !(self.tau_increment > 0.0 && self.tau_increment.is_finite()) {
            return Err(Error::param("tau_increment", "must be positive"));
        }
        if !(self.silhouette_threshold > 0.0 && self.silhouette_threshold < 1.0) {
            return Err(Error::param("silhouette_threshold", "must lie in (0,1)"));
        }
        self.delta.validate()
    }

    /// τ at iteration `t` (1-based).
    pub fn tau(&self, t: usize) -> f64 {
        self.tau0 + (t as f64 - 1.0) * self.tau_increment
    }
}

/// Grid of τ stamps. Values are not clamped; use [`MotionTemplate::export`]
/// for a `[0, 1]` image.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTemplate<T = f64> {
    width: usize,
    height: usize,
    values: Vec<T>,
    final_tau: T,
}

impl<T: Scalar> MotionTemplate<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![T::zero(); width * height],
            final_tau: T::zero(),
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<T>, final_tau: T) -> Result<Self> {
        if values.len() != width * height || values.iter().any(|v| v.is_nan() || *v < T::zero()) {
            return Err(Error::InvalidImage(
                "motion template values must be non-negative and match the shape".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
            final_tau,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn final_tau(&self) -> T {
        self.final_tau
    }

    /// Divides by the final τ so the newest motion has intensity 1.
    pub fn export(&self) -> GrayImage<T> {
        let scale = if self.final_tau > T::zero() {
            self.final_tau.recip()
        } else {
            T::zero()
        };
        GrayImage::from_fn(self.width, self.height, |x, y| self.get(x, y) * scale)
    }
}

/// One step of the template recurrence, per pixel:
/// moving pixels take `tau`; stale pixels below `tau - delta` reset to 0;
/// everything else keeps its previous stamp.
pub fn mt_update<T: Scalar>(
    mu_prev: &MotionTemplate<T>,
    sigma: &BinaryImage,
    tau: T,
    delta: T,
) -> Result<MotionTemplate<T>> {
    if mu_prev.dims() != sigma.dims() {
        let (w, h) = mu_prev.dims();
        return Err(Error::DimensionMismatch(w, h, sigma.width(), sigma.height()));
    }
    let floor = tau - delta;
    let values = mu_prev
        .values
        .iter()
        .enumerate()
        .map(|(i, prev)| {
            if sigma.is_set(i) {
                tau
            } else if *prev < floor {
                T::zero()
            } else {
                *prev
            }
        })
        .collect();
    Ok(MotionTemplate {
        width: mu_prev.width,
        height: mu_prev.height,
        values,
        final_tau: tau,
    })
}

/// Motion template of a whole frame sequence.
pub fn compute_mt<T: Scalar>(
    images: &[GrayImage<T>],
    params: &MotionTemplateParams,
) -> Result<MotionTemplate<T>> {
    if images.len() < 2 {
        return Err(Error::TooFewFrames {
            needed: 2,
            got: images.len(),
        });
    }
    let mut builder = MotionTemplateBuilder::new(*params)?;
    for img in images {
        builder.push(img)?;
    }
    Ok(builder.template().expect("two or more frames pushed").clone())
}

/// Incremental form of [`compute_mt`] for frame streams.
///
/// Holds only the last frame and the running template.
#[derive(Debug, Clone)]
pub struct MotionTemplateBuilder<T = f64> {
    params: MotionTemplateParams,
    last: Option<GrayImage<T>>,
    mu: Option<MotionTemplate<T>>,
    iterations: usize,
}

impl<T: Scalar> MotionTemplateBuilder<T> {
    pub fn new(params: MotionTemplateParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            last: None,
            mu: None,
            iterations: 0,
        })
    }

    pub fn push(&mut self, frame: &GrayImage<T>) -> Result<()> {
        if let Some(prev) = &self.last {
            let sigma = silhouette(prev, frame, T::of(self.params.silhouette_threshold))?;
            self.iterations += 1;
            let t = self.iterations;
            let mu = self
                .mu
                .take()
                .unwrap_or_else(|| MotionTemplate::zeros(frame.width(), frame.height()));
            self.mu = Some(mt_update(
                &mu,
                &sigma,
                T::of(self.params.tau(t)),
                T::of(self.params.delta.at(t)),
            )?);
        }
        self.last = Some(frame.clone());
        Ok(())
    }

    /// Number of frames seen so far.
    pub fn frames(&self) -> usize {
        if self.last.is_some() {
            self.iterations + 1
        } else {
            0
        }
    }

    /// Current template; `None` until two frames have been pushed.
    pub fn template(&self) -> Option<&MotionTemplate<T>> {
        self.mu.as_ref()
    }

    pub fn reset(&mut self) {
        self.last = None;
        self.mu = None;
        self.iterations = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dot_frames(positions: &[(usize, usize)], w: usize, h: usize) -> Vec<GrayImage<f64>> {
        positions
            .iter()
            .map(|&(px, py)| GrayImage::from_fn(w, h, |x, y| if (x, y) == (px, py) { 1.0 } else { 0.0 }))
            .collect()
    }

    fn no_decay() -> MotionTemplateParams {
        MotionTemplateParams {
            delta: DeltaSchedule::Infinite,
            ..Default::default()
        }
    }

    #[test]
    fn update_cases() {
        let prev = MotionTemplate::from_values(3, 1, vec![0.4, 0.2, 0.7], 0.7).unwrap();
        let sigma = BinaryImage::from_bools(3, 1, vec![true, false, false]).unwrap();
        let mu = mt_update(&prev, &sigma, 1.0, 0.5).unwrap();
        assert_eq!(mu.values(), &[1.0, 0.0, 0.7]);
        assert_eq!(mu.final_tau(), 1.0);

        let wrong = BinaryImage::from_bools(1, 3, vec![false; 3]).unwrap();
        assert!(mt_update(&prev, &wrong, 1.0, 0.5).is_err());
    }

    #[test]
    fn update_matches_three_case_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let (w, h) = (rng.gen_range(1..=16), rng.gen_range(1..=16));
            let prev: Vec<f64> = (0..w * h).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen() }).collect();
            let bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(0.3)).collect();
            let (tau, delta) = (rng.gen_range(0.5..2.0), rng.gen_range(0.0..1.5));
            let mu = mt_update(
                &MotionTemplate::from_values(w, h, prev.clone(), 0.5).unwrap(),
                &BinaryImage::from_bools(w, h, bits.clone()).unwrap(),
                tau,
                delta,
            )
            .unwrap();
            for i in 0..w * h {
                let expected = if bits[i] {
                    tau
                } else if prev[i] < tau - delta {
                    0.0
                } else {
                    prev[i]
                };
                assert_eq!(mu.values()[i], expected);
            }
        }
    }

    #[test]
    fn identical_frames_give_empty_template() {
        let f = GrayImage::<f64>::filled(5, 5, 0.6);
        let mt = compute_mt(&[f.clone(), f.clone(), f], &MotionTemplateParams::default()).unwrap();
        assert!(mt.values().iter().all(|v| *v == 0.0));
        assert!(mt.export().is_all_zero());
    }

    #[test]
    fn too_few_frames() {
        let f = GrayImage::<f64>::zeros(2, 2);
        assert!(matches!(
            compute_mt(&[f], &MotionTemplateParams::default()),
            Err(Error::TooFewFrames { needed: 2, got: 1 })
        ));
        let g = GrayImage::<f64>::zeros(3, 2);
        assert!(compute_mt(&[GrayImage::zeros(2, 2), g], &MotionTemplateParams::default()).is_err());
    }

    #[test]
    fn single_early_motion_hand_iterated() {
        // Frame 1 lights pixel (1,0); frame 2 repeats frame 1.
        // t=1: tau=0.1, pixel stamped 0.1. t=2: tau=0.4, no motion, delta=inf keeps 0.1.
        let mut frames = vec![GrayImage::<f64>::zeros(3, 2)];
        let mut lit = GrayImage::zeros(3, 2);
        lit.set(1, 0, 1.0);
        frames.push(lit.clone());
        frames.push(lit);
        let params = MotionTemplateParams {
            tau0: 0.1,
            tau_increment: 0.3,
            ..no_decay()
        };
        let mt = compute_mt(&frames, &params).unwrap();
        assert_eq!(mt.values(), &[0.0, 0.1, 0.0, 0.0, 0.0, 0.0]);
        assert!((mt.final_tau() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn moving_dot_recency_and_last_motion_map() {
        let path: Vec<(usize, usize)> = (0..6).map(|i| (i, 2)).collect();
        let frames = dot_frames(&path, 8, 5);
        let params = no_decay();
        let mt = compute_mt(&frames, &params).unwrap();
        // Pixel i last changed at step i+1 (when the dot left it, or arrived for the last one).
        for x in 0..6 {
            let last_step = (x + 1).min(5);
            assert!((mt.get(x, 2) - params.tau(last_step)).abs() < 1e-12, "x={x}");
        }
        for x in 1..6 {
            assert!(mt.get(x, 2) > mt.get(x - 1, 2) || x == 5);
        }
        let out = mt.export();
        assert_eq!(out.get(5, 2), 1.0);
        assert!(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn zero_delta_keeps_only_current_motion() {
        let path: Vec<(usize, usize)> = [(0, 0), (1, 0), (2, 0), (3, 0)].to_vec();
        let params = MotionTemplateParams {
            delta: DeltaSchedule::Constant(0.0),
            ..Default::default()
        };
        let mt = compute_mt(&dot_frames(&path, 4, 1), &params).unwrap();
        let tau = params.tau(3);
        assert_eq!(mt.values(), &[0.0, 0.0, tau, tau]);
    }

    #[test]
    fn builder_reports_frames() {
        let mut b = MotionTemplateBuilder::<f64>::new(MotionTemplateParams::default()).unwrap();
        assert_eq!(b.frames(), 0);
        b.push(&GrayImage::zeros(2, 2)).unwrap();
        assert!(b.template().is_none());
        b.push(&GrayImage::filled(2, 2, 1.0)).unwrap();
        assert_eq!(b.frames(), 2);
        assert_eq!(b.template().unwrap().values(), &[0.1; 4]);
        b.reset();
        assert_eq!(b.frames(), 0);
    }

    #[test]
    fn delta_parsing() {
        assert_eq!("inf".parse::<DeltaSchedule>().unwrap(), DeltaSchedule::Infinite);
        assert_eq!("0.5".parse::<DeltaSchedule>().unwrap(), DeltaSchedule::Constant(0.5));
        let d: DeltaSchedule = "(t + 1) / 4".parse().unwrap();
        assert_eq!(d, DeltaSchedule::Linear { offset: 1.0, divisor: 4.0 });
        assert_eq!(d.at(3), 1.0);
        assert_eq!("(t)/3".parse::<DeltaSchedule>().unwrap().at(3), 1.0);
        assert!("-1".parse::<DeltaSchedule>().is_err());
        assert!("t/4".parse::<DeltaSchedule>().is_err());
        assert_eq!(d.to_string().parse::<DeltaSchedule>().unwrap(), d);
    }

    proptest! {
        #[test]
        fn values_are_zero_or_some_tau(seed in any::<u64>(), n in 2usize..8, delta in prop_oneof![Just(f64::INFINITY), 0.0..1.0f64]) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frames: Vec<GrayImage<f64>> = (0..n)
                .map(|_| GrayImage::from_fn(6, 6, |_, _| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }))
                .collect();
            let delta = if delta.is_infinite() { DeltaSchedule::Infinite } else { DeltaSchedule::Constant(delta) };
            let params = MotionTemplateParams { delta, ..Default::default() };
            let mt = compute_mt(&frames, &params).unwrap();
            let taus: Vec<f64> = (1..n).map(|t| params.tau(t)).collect();
            for v in mt.values() {
                prop_assert!(*v == 0.0 || taus.contains(v));
            }
            let out = mt.export();
            if mt.values().iter().any(|v| *v > 0.0) {
                let peak = out.pixels().iter().cloned().fold(0.0, f64::max);
                // Max is 1 only when the last step had motion.
                prop_assert!(peak <= 1.0 && peak > 0.0);
            }
        }
    }
}
