//! Exponential-moving-average states: `a_t = (1 - λ) s_t + λ a_{t-1}`, `a_0 = s_0`.
//!
//! Holds exactly one image no matter how long the episode runs.

use crate::error::{Error, Result};
use crate::imaging::{clamp01, GrayImage};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EmaState<T = f64> {
    image: GrayImage<T>,
    lambda: T,
}

pub fn ema_init<T: Scalar>(s0: &GrayImage<T>, lambda: T) -> Result<EmaState<T>> {
    EmaState::new(s0, lambda)
}

pub fn ema_update<T: Scalar>(prev: &EmaState<T>, s_t: &GrayImage<T>) -> Result<EmaState<T>> {
    let mut next = prev.clone();
    next.update(s_t)?;
    Ok(next)
}

impl<T: Scalar> EmaState<T> {
    pub fn new(s0: &GrayImage<T>, lambda: T) -> Result<Self> {
        if !(lambda >= T::zero() && lambda < T::one()) {
            return Err(Error::param("lambda", format!("{lambda} not in [0,1)")));
        }
        Ok(Self {
            image: s0.clone(),
            lambda,
        })
    }

    pub fn update(&mut self, s_t: &GrayImage<T>) -> Result<()> {
        if s_t.dims() != self.image.dims() {
            let (w, h) = self.image.dims();
            return Err(Error::DimensionMismatch(w, h, s_t.width(), s_t.height()));
        }
        let lambda = self.lambda;
        let keep = T::one() - lambda;
        let (w, h) = s_t.dims();
        let prev = self.image.pixels();
        let next = s_t.pixels();
        self.image = GrayImage::from_fn(w, h, |x, y| {
            let i = y * w + x;
            clamp01(keep * next[i] + lambda * prev[i])
        });
        Ok(())
    }

    pub fn image(&self) -> &GrayImage<T> {
        &self.image
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }
}
