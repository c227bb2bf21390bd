//! Perceptual reward functions.
//!
//! Rewards computed purely from pixels: an agent's rendered state is compared
//! against a visual goal (a goal image, a goal patch, or the motion template of
//! a goal video) through cropped, rescaled HOG descriptors, and the reward is
//! `exp(-distance)`. The crate also carries small pixel-rendered environments
//! and a compact Q-learning harness for training against those rewards.
//!
//! Image and learning code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the `f64` instantiation used by the environments and the
//! experiment runner.

pub mod agent;
pub mod config;
pub mod ema;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod hog;
pub mod imaging;
pub mod motion;
pub mod pgm;
pub mod prf;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Image = imaging::GrayImage<f64>;
pub type ImageF32 = imaging::GrayImage<f32>;
pub type Features = hog::FeatureVector<f64>;
pub type Template = prf::PerceptualTemplate<f64>;
pub type Descriptor = prf::TaskDescriptor<f64>;
pub type Reward = prf::PerceptualReward<f64>;
pub type QNetwork = agent::mlp::Mlp<f64>;
