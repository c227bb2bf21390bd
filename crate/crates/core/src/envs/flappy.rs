//! A small Flappy Bird.
//!
//! 14×14 grid of 6-pixel units. The bird sits in column 3 and moves one row up
//! (flap) or down (descend) per tick. Pipes are one unit wide, scroll left one
//! column per tick, and have a four-row gap at a seeded height; a new pipe
//! enters at the right edge every six ticks.
//!
//! VRF: −1 on a crash (which ends the episode), +1 while inside a pipe's gap,
//! +0.1 for any other surviving tick. The score counts pipes passed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::{check_action, paint_unit, EnvKind, Environment, StepInfo, StepOutcome, FRAME_SIZE};
use crate::error::{Error, Result};
use crate::imaging::{crop, Rect};
use crate::Image;

pub const FLAP: usize = 0;
pub const DESCEND: usize = 1;

const GRID: i32 = 14;
const UNIT: usize = FRAME_SIZE / GRID as usize;
const BIRD_COL: i32 = 3;
const GAP: i32 = 4;
const PIPE_SPACING: usize = 6;
const PIPE_SHADE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct MiniFlappyConfig {
    pub step_cap: usize,
}

impl Default for MiniFlappyConfig {
    fn default() -> Self {
        Self { step_cap: 5000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pipe {
    col: i32,
    gap_top: i32,
}

#[derive(Debug, Clone)]
pub struct MiniFlappy {
    config: MiniFlappyConfig,
    rng: ChaCha8Rng,
    bird_row: i32,
    pipes: Vec<Pipe>,
    steps: usize,
    score: f64,
    done: bool,
    frame: Image,
}

impl MiniFlappy {
    pub fn new(config: MiniFlappyConfig) -> Self {
        let mut env = Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(0),
            bird_row: 6,
            pipes: Vec::new(),
            steps: 0,
            score: 0.0,
            done: false,
            frame: Image::zeros(FRAME_SIZE, FRAME_SIZE),
        };
        env.reset(0);
        env
    }

    pub fn bird_row(&self) -> i32 {
        self.bird_row
    }

    /// Gap top row of the pipe currently in the bird's column, if any.
    pub fn pipe_at_bird(&self) -> Option<i32> {
        self.pipes.iter().find(|p| p.col == BIRD_COL).map(|p| p.gap_top)
    }

    /// Gap top row of the nearest pipe at or ahead of the bird.
    pub fn next_gap(&self) -> Option<i32> {
        self.pipes
            .iter()
            .filter(|p| p.col >= BIRD_COL)
            .min_by_key(|p| p.col)
            .map(|p| p.gap_top)
    }

    /// Goal window for a window descriptor: the bird centred in a pipe gap,
    /// cropped to the pipe and one unit around the gap.
    pub fn goal_window() -> Image {
        let scene = Self::draw_scene(
            4,
            &[Pipe {
                col: BIRD_COL,
                gap_top: 3,
            }],
        );
        let rect = Rect::new(
            (BIRD_COL as usize - 1) * UNIT,
            2 * UNIT,
            3 * UNIT,
            (GAP as usize + 2) * UNIT,
        );
        crop(&scene, rect).expect("window inside frame")
    }

    fn draw_scene(bird_row: i32, pipes: &[Pipe]) -> Image {
        let mut img = Image::zeros(FRAME_SIZE, FRAME_SIZE);
        for p in pipes {
            if !(0..GRID).contains(&p.col) {
                continue;
            }
            for row in 0..GRID {
                if row < p.gap_top || row >= p.gap_top + GAP {
                    paint_unit(&mut img, UNIT, p.col as usize, row as usize, 0, PIPE_SHADE);
                }
            }
        }
        if (0..GRID).contains(&bird_row) {
            paint_unit(&mut img, UNIT, BIRD_COL as usize, bird_row as usize, 1, 1.0);
        }
        img
    }

    fn spawn(&mut self, col: i32) {
        let gap_top = self.rng.gen_range(2..=GRID - GAP - 2);
        self.pipes.push(Pipe { col, gap_top });
    }

    fn outcome(&self, vrf_reward: f64, truncated: bool) -> StepOutcome {
        StepOutcome {
            mirror_state: self.frame.clone(),
            vrf_reward,
            terminal: self.done,
            truncated,
            info: StepInfo {
                score: self.score,
                steps: self.steps,
                goal_reached: false,
            },
        }
    }
}

impl Environment for MiniFlappy {
    fn kind(&self) -> EnvKind {
        EnvKind::MiniFlappy
    }

    fn action_count(&self) -> usize {
        2
    }

    fn step_cap(&self) -> usize {
        self.config.step_cap
    }

    fn reset(&mut self, seed: u64) -> StepOutcome {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.bird_row = 6;
        self.pipes.clear();
        self.spawn(9);
        self.spawn(9 + PIPE_SPACING as i32);
        self.steps = 0;
        self.score = 0.0;
        self.done = false;
        self.frame = Self::draw_scene(self.bird_row, &self.pipes);
        self.outcome(0.0, false)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        check_action(action, 2)?;
        if self.done {
            return Err(Error::EpisodeOver);
        }
        self.bird_row += if action == FLAP { -1 } else { 1 };
        for p in &mut self.pipes {
            if p.col == BIRD_COL {
                // Leaving the bird's column with the bird still alive.
                self.score += 1.0;
            }
            p.col -= 1;
        }
        self.pipes.retain(|p| p.col >= 0);
        self.steps += 1;
        if self.steps.is_multiple_of(PIPE_SPACING) {
            self.spawn(GRID + 1);
        }

        let out_of_bounds = !(0..GRID).contains(&self.bird_row);
        let pipe = self.pipe_at_bird();
        let in_gap = pipe.map(|top| (top..top + GAP).contains(&self.bird_row));
        let crashed = out_of_bounds || in_gap == Some(false);
        let reward = if crashed {
            -1.0
        } else if in_gap == Some(true) {
            1.0
        } else {
            0.1
        };
        let capped = self.steps >= self.config.step_cap;
        self.done = crashed || capped;
        self.frame = Self::draw_scene(self.bird_row, &self.pipes);
        Ok(self.outcome(reward, capped && !crashed))
    }

    fn render(&self) -> Image {
        self.frame.clone()
    }
}
