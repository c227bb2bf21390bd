//! Grid navigation in a walled room.
//!
//! The room is a 7×7 grid of 12-pixel cells. The agent carries a lamp: its
//! cell is the peak of a cone of light whose intensity falls off linearly
//! with distance, so every frame shows where the agent is relative to
//! everything else. Walls are dim gray.

use crate::envs::{check_action, EnvKind, Environment, StepInfo, StepOutcome, FRAME_SIZE};
use crate::error::{Error, Result};
use crate::Image;

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

const LAYOUT: [&str; 7] = [
    "#######",
    "#.....#",
    "#.....#",
    "#..##.#",
    "#.....#",
    "#.....#",
    "#######",
];
const WALL_INTENSITY: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct GridNavConfig {
    /// (row, col)
    pub start: (usize, usize),
    /// (row, col)
    pub goal: (usize, usize),
    pub step_cap: usize,
    /// End the episode on reaching the goal. When false the goal is absorbing
    /// only in the sense that the agent may stay there (by walking into a wall)
    /// and keeps collecting reward until the step cap.
    pub terminate_at_goal: bool,
    pub lamp_radius: f64,
}

impl Default for GridNavConfig {
    fn default() -> Self {
        Self {
            start: (5, 1),
            goal: (1, 5),
            step_cap: 30,
            terminate_at_goal: true,
            lamp_radius: 60.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridNav {
    config: GridNavConfig,
    pos: (usize, usize),
    steps: usize,
    score: f64,
    reached: bool,
    done: bool,
    frame: Image,
}

impl GridNav {
    pub fn new(config: GridNavConfig) -> Self {
        assert!(!is_wall(config.start) && !is_wall(config.goal), "start and goal must be open cells");
        let frame = render_at(config.start, config.lamp_radius);
        Self {
            pos: config.start,
            config,
            steps: 0,
            score: 0.0,
            reached: false,
            done: false,
            frame,
        }
    }

    pub fn config(&self) -> &GridNavConfig {
        &self.config
    }

    /// (row, col)
    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    pub fn grid_size() -> usize {
        LAYOUT.len()
    }

    pub fn is_wall(cell: (usize, usize)) -> bool {
        is_wall(cell)
    }

    /// Frame with the agent standing on `cell`; used to author direct goals.
    pub fn render_with_agent_at(&self, cell: (usize, usize)) -> Image {
        render_at(cell, self.config.lamp_radius)
    }

    /// Frame of the agent standing on the goal cell.
    pub fn goal_frame(&self) -> Image {
        self.render_with_agent_at(self.config.goal)
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
                goal_reached: self.reached,
            },
        }
    }
}

fn is_wall((row, col): (usize, usize)) -> bool {
    LAYOUT
        .get(row)
        .and_then(|r| r.as_bytes().get(col))
        .is_none_or(|c| *c == b'#')
}

fn render_at((row, col): (usize, usize), radius: f64) -> Image {
    let unit = FRAME_SIZE / LAYOUT.len();
    let cx = (col as f64 + 0.5) * unit as f64;
    let cy = (row as f64 + 0.5) * unit as f64;
    Image::from_fn(FRAME_SIZE, FRAME_SIZE, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let light = 1.0 - (px - cx).hypot(py - cy) / radius;
        let wall = if is_wall((y / unit, x / unit)) {
            WALL_INTENSITY
        } else {
            0.0
        };
        light.max(wall)
    })
}

impl Environment for GridNav {
    fn kind(&self) -> EnvKind {
        EnvKind::GridNav
    }

    fn action_count(&self) -> usize {
        4
    }

    fn step_cap(&self) -> usize {
        self.config.step_cap
    }

    fn reset(&mut self, _seed: u64) -> StepOutcome {
        self.pos = self.config.start;
        self.steps = 0;
        self.score = 0.0;
        self.reached = false;
        self.done = false;
        self.frame = render_at(self.pos, self.config.lamp_radius);
        self.outcome(0.0, false)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        check_action(action, 4)?;
        if self.done {
            return Err(Error::EpisodeOver);
        }
        let (r, c) = self.pos;
        let next = match action {
            UP => (r.wrapping_sub(1), c),
            DOWN => (r + 1, c),
            LEFT => (r, c.wrapping_sub(1)),
            _ => (r, c + 1),
        };
        if !is_wall(next) {
            self.pos = next;
        }
        self.steps += 1;
        let at_goal = self.pos == self.config.goal;
        let reward = if at_goal { 1.0 } else { 0.0 };
        self.score += reward;
        self.reached |= at_goal;
        let finished = at_goal && self.config.terminate_at_goal;
        let capped = self.steps >= self.config.step_cap;
        self.done = finished || capped;
        self.frame = render_at(self.pos, self.config.lamp_radius);
        Ok(self.outcome(reward, capped && !finished))
    }

    fn render(&self) -> Image {
        self.frame.clone()
    }
}
