//! Small deterministic pixel-rendered environments.
//!
//! Every environment exposes both its conventional reward computed from
//! internal variables (the "VRF") and a rendered mirror state, so the same task
//! can be trained from either signal. Dynamics run on a coarse integer grid and
//! are rendered into 84×84 frames; identical seeds and action sequences
//! reproduce identical frames bit for bit.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::Image;

pub mod breakout;
pub mod flappy;
pub mod gridnav;
pub mod tracedraw;

pub use breakout::{MiniBreakout, MiniBreakoutConfig};
pub use flappy::{MiniFlappy, MiniFlappyConfig};
pub use gridnav::{GridNav, GridNavConfig};
pub use tracedraw::{TraceDraw, TraceDrawConfig};

/// Default frame side in pixels.
pub const FRAME_SIZE: usize = 84;

/// Score counters reported alongside every frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    /// Task score: bricks broken, pipes passed, goal visits, on-schedule vertices.
    pub score: f64,
    pub steps: usize,
    /// GridNav: the agent has stood on the goal cell at least once this episode.
    pub goal_reached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub mirror_state: Image,
    pub vrf_reward: f64,
    /// The episode is over, either by the task's own rules or the step cap.
    pub terminal: bool,
    /// The episode ended only because the step cap was hit.
    pub truncated: bool,
    pub info: StepInfo,
}

pub trait Environment: Send {
    fn kind(&self) -> EnvKind;

    fn action_count(&self) -> usize;

    fn frame_dims(&self) -> (usize, usize) {
        (FRAME_SIZE, FRAME_SIZE)
    }

    fn step_cap(&self) -> usize;

    fn reset(&mut self, seed: u64) -> StepOutcome;

    /// Advances one tick. Fails on an out-of-range action or a finished episode.
    fn step(&mut self, action: usize) -> Result<StepOutcome>;

    /// Current frame; equal to the mirror state of the last reset/step.
    fn render(&self) -> Image;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    GridNav,
    MiniBreakout,
    MiniFlappy,
    TraceDraw,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [
        EnvKind::GridNav,
        EnvKind::MiniBreakout,
        EnvKind::MiniFlappy,
        EnvKind::TraceDraw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::GridNav => "gridnav",
            EnvKind::MiniBreakout => "breakout",
            EnvKind::MiniFlappy => "flappy",
            EnvKind::TraceDraw => "tracedraw",
        }
    }

    /// Builds the environment with its default configuration.
    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvKind::GridNav => Box::new(GridNav::new(GridNavConfig::default())),
            EnvKind::MiniBreakout => Box::new(MiniBreakout::new(MiniBreakoutConfig::default())),
            EnvKind::MiniFlappy => Box::new(MiniFlappy::new(MiniFlappyConfig::default())),
            EnvKind::TraceDraw => Box::new(TraceDraw::new(TraceDrawConfig::default())),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "env.name",
                    format!("unknown environment {s:?} (gridnav, breakout, flappy, tracedraw)"),
                )
            })
    }
}

pub(crate) fn check_action(action: usize, count: usize) -> Result<()> {
    if action >= count {
        Err(Error::InvalidAction { action, count })
    } else {
        Ok(())
    }
}

/// Paints grid unit `(col, row)` of side `unit` pixels, inset by `inset` on each side.
pub(crate) fn paint_unit(img: &mut Image, unit: usize, col: usize, row: usize, inset: usize, v: f64) {
    let (x0, y0) = (col * unit + inset, row * unit + inset);
    img.fill_rect(x0, y0, (col + 1) * unit - inset, (row + 1) * unit - inset, v);
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Runs an action sequence from a seed and collects every outcome.
    pub fn rollout(env: &mut dyn Environment, seed: u64, actions: &[usize]) -> Vec<StepOutcome> {
        let mut out = vec![env.reset(seed)];
        for &a in actions {
            if out.last().unwrap().terminal {
                break;
            }
            out.push(env.step(a).unwrap());
        }
        out
    }

    pub fn check_common_contract(kind: EnvKind) {
        let mut env = kind.make();
        let first = env.reset(7);
        assert!(!first.terminal);
        assert_eq!(first.vrf_reward, 0.0);
        assert_eq!(first.mirror_state.dims(), env.frame_dims());
        assert_eq!(env.render(), first.mirror_state);
        assert_eq!(env.render(), env.render());
        assert_eq!(env.reset(7).mirror_state, first.mirror_state);
        assert!(matches!(
            env.step(env.action_count()),
            Err(Error::InvalidAction { .. })
        ));

        // Same seed and actions -> identical trajectories.
        let actions: Vec<usize> = (0..400).map(|i| (i * 7 + i / 3) % env.action_count()).collect();
        let a = rollout(env.as_mut(), 99, &actions);
        let b = rollout(kind.make().as_mut(), 99, &actions);
        assert_eq!(a, b);
        let last = a.last().unwrap();
        assert_eq!(env.render(), last.mirror_state);
        if last.terminal {
            assert!(matches!(env.step(0), Err(Error::EpisodeOver)));
        }
        for o in &a {
            assert_eq!(o.mirror_state.dims(), env.frame_dims());
        }
    }

    #[test]
    fn names_round_trip() {
        for k in EnvKind::ALL {
            assert_eq!(k.name().parse::<EnvKind>().unwrap(), k);
        }
        assert!("atari".parse::<EnvKind>().is_err());
    }
}
