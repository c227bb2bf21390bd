//! One episode of interaction: observe, act, reward, learn.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::learner::Learner;
use crate::agent::replay::{StateVec, Transition};
use crate::ema::EmaState;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::imaging::downsample;
use crate::scalar::Scalar;
use crate::{Image, Reward};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// The environment's own reward.
    #[default]
    Vrf,
    /// The perceptual reward.
    Prf,
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardMode::Vrf => "vrf",
            RewardMode::Prf => "prf",
        })
    }
}

impl FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vrf" => Ok(RewardMode::Vrf),
            "prf" => Ok(RewardMode::Prf),
            _ => Err(Error::config("reward.mode", format!("{s:?} is not vrf or prf"))),
        }
    }
}

/// What the network sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    /// Exponential moving average of mirror states (λ = 0 gives the raw frame).
    Ema,
    /// The agent's motion template so far.
    AgentTemplate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpisodeMode {
    /// ε-greedy, transitions stored, network updated.
    Train { epsilon: f64 },
    /// ε-greedy (ε = 0 is greedy) without storing or learning anything.
    Eval { epsilon: f64 },
}

#[derive(Debug, Clone)]
pub struct EpisodeSpec<'a> {
    pub reward_mode: RewardMode,
    /// Required for PRF rewards and agent-template inputs; when present in VRF
    /// mode it is still used to report the final distance.
    pub prf: Option<&'a Reward>,
    pub input: InputKind,
    pub ema_lambda: f64,
    pub mode: EpisodeMode,
    pub seed: u64,
    pub record_frames: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeSummary {
    /// Sum of the rewards the learner was trained on (PRF or VRF).
    pub total_reward: f64,
    /// Sum of environment rewards, whatever the training signal.
    pub vrf_total: f64,
    pub score: f64,
    pub steps: usize,
    pub goal_reached: bool,
    /// Distance between the final agent template and the goal.
    pub final_distance: Option<f64>,
    pub loss_mean: Option<f64>,
    /// Mirror states from reset on, if requested.
    pub frames: Vec<Image>,
}

/// Downsamples to `side × side` and flattens.
pub fn encode_input<T: Scalar>(img: &Image, side: usize) -> Result<StateVec<T>> {
    let small = downsample(img, side, side)?;
    Ok(small.pixels().iter().map(|v| T::of(*v)).collect::<Vec<_>>().into())
}

pub fn run_episode<T: Scalar>(
    env: &mut dyn Environment,
    learner: &mut Learner<T>,
    spec: &EpisodeSpec<'_>,
) -> Result<EpisodeSummary> {
    if spec.reward_mode == RewardMode::Prf && spec.prf.is_none() {
        return Err(Error::config("reward.descriptor", "PRF mode needs a task descriptor"));
    }
    let motion = spec.prf.is_some_and(|p| p.descriptor().is_motion());
    if spec.input == InputKind::AgentTemplate && !motion {
        return Err(Error::config(
            "learner.input",
            "agent-template input needs a motion descriptor",
        ));
    }
    // Agent templates are needed every step when they drive the reward or the
    // input, and for motion descriptors (they accumulate); otherwise only the
    // final frame matters for the reported distance.
    let track_every_step = spec.reward_mode == RewardMode::Prf || motion;
    let side = learner.config().input_side;

    let mut outcome = env.reset(spec.seed);
    let mut templates = spec.prf.map(|p| p.episode()).transpose()?;
    let mut template_image = None;
    if let (Some(p), Some(tpl)) = (spec.prf, templates.as_mut()) {
        if track_every_step {
            template_image = Some(tpl.observe(p.descriptor(), &outcome.mirror_state)?.image.clone());
        }
    }
    let mut ema = EmaState::new(&outcome.mirror_state, spec.ema_lambda)?;
    let encode = |ema: &EmaState<f64>, tpl: &Option<Image>| -> Result<StateVec<T>> {
        match spec.input {
            InputKind::Ema => encode_input(ema.image(), side),
            InputKind::AgentTemplate => encode_input(tpl.as_ref().expect("tracked for motion"), side),
        }
    };
    let mut state = encode(&ema, &template_image)?;

    let mut summary = EpisodeSummary::default();
    if spec.record_frames {
        summary.frames.push(outcome.mirror_state.clone());
    }
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);
    let mut last_distance = None;

    while !outcome.terminal {
        let action = match spec.mode {
            EpisodeMode::Train { epsilon } => learner.act(&state, epsilon),
            EpisodeMode::Eval { epsilon } if epsilon <= 0.0 => learner.greedy(&state),
            EpisodeMode::Eval { epsilon } => learner.act(&state, epsilon),
        };
        outcome = env.step(action)?;
        if spec.record_frames {
            summary.frames.push(outcome.mirror_state.clone());
        }

        if let (Some(p), Some(tpl), true) = (spec.prf, templates.as_mut(), track_every_step) {
            let ta = tpl.observe(p.descriptor(), &outcome.mirror_state)?;
            if spec.reward_mode == RewardMode::Prf {
                last_distance = Some(p.distance(ta)?);
            }
            template_image = Some(ta.image.clone());
        }
        let reward = match spec.reward_mode {
            RewardMode::Vrf => outcome.vrf_reward,
            RewardMode::Prf => (-last_distance.expect("computed above")).exp(),
        };
        ema.update(&outcome.mirror_state)?;
        let next_state = encode(&ema, &template_image)?;

        if let EpisodeMode::Train { .. } = spec.mode {
            let bootstrap = outcome.truncated && learner.config().bootstrap_truncated;
            let loss = learner.observe(Transition {
                state: Arc::clone(&state),
                action,
                reward: T::of(reward),
                next_state: Arc::clone(&next_state),
                terminal: outcome.terminal && !bootstrap,
            })?;
            if let Some(l) = loss {
                loss_sum += l.as_f64();
                loss_n += 1;
            }
        }
        summary.total_reward += reward;
        summary.vrf_total += outcome.vrf_reward;
        state = next_state;
    }

    summary.score = outcome.info.score;
    summary.steps = outcome.info.steps;
    summary.goal_reached = outcome.info.goal_reached;
    summary.loss_mean = (loss_n > 0).then(|| loss_sum / loss_n as f64);
    summary.final_distance = match (spec.prf, templates.as_mut()) {
        (Some(p), Some(tpl)) => Some(match (last_distance, track_every_step) {
            (Some(d), _) => d,
            (None, true) => p.distance(tpl.current().expect("observed at reset"))?,
            (None, false) => p.distance(tpl.observe(p.descriptor(), &outcome.mirror_state)?)?,
        }),
        _ => None,
    };
    Ok(summary)
}
