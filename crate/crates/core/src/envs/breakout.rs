//! A small Breakout.
//!
//! Physics run on a 14×14 grid of 6-pixel units. Columns 0 and 13 and row 0 are
//! walls; bricks fill rows 2–4 of the 12 playable columns; the paddle is three
//! units wide on row 13. The ball moves one unit diagonally per tick.
//!
//! Each episode serves the ball from row 6, at a seeded column and horizontal
//! direction, heading down toward the paddle.
//!
//! Per tick: the paddle moves, then the ball. A ball about to leave the side
//! walls or ceiling reflects. A ball about to enter a brick destroys it (VRF
//! +1) and reverses vertically without moving. A ball about to enter row 13
//! bounces if the paddle covers its landing column (the paddle's outer units
//! also set the horizontal direction), otherwise it is lost and the episode
//! ends. Clearing every brick also ends the episode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::{check_action, paint_unit, EnvKind, Environment, StepInfo, StepOutcome, FRAME_SIZE};
use crate::error::{Error, Result};
use crate::Image;

pub const STAY: usize = 0;
pub const LEFT: usize = 1;
pub const RIGHT: usize = 2;

const GRID: usize = 14;
const UNIT: usize = FRAME_SIZE / GRID;
const FIRST_COL: i32 = 1;
const LAST_COL: i32 = 12;
const PADDLE_ROW: i32 = 13;
const PADDLE_WIDTH: i32 = 3;
const BRICK_ROWS: [usize; 3] = [2, 3, 4];
const BRICK_SHADES: [f64; 3] = [0.9, 0.75, 0.6];
const WALL_SHADE: f64 = 0.4;
const SERVE_ROW: i32 = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct MiniBreakoutConfig {
    pub step_cap: usize,
}

impl Default for MiniBreakoutConfig {
    fn default() -> Self {
        Self { step_cap: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct MiniBreakout {
    config: MiniBreakoutConfig,
    /// `bricks[row_index][col - 1]`
    bricks: [[bool; 12]; 3],
    ball: (i32, i32),
    velocity: (i32, i32),
    paddle: i32,
    steps: usize,
    score: f64,
    done: bool,
    frame: Image,
}

impl MiniBreakout {
    pub fn new(config: MiniBreakoutConfig) -> Self {
        let mut env = Self {
            config,
            bricks: [[true; 12]; 3],
            ball: (6, SERVE_ROW),
            velocity: (1, 1),
            paddle: 5,
            steps: 0,
            score: 0.0,
            done: false,
            frame: Image::zeros(FRAME_SIZE, FRAME_SIZE),
        };
        env.frame = env.draw();
        env
    }

    pub const BRICK_COUNT: usize = 36;

    pub fn bricks_left(&self) -> usize {
        self.bricks.iter().flatten().filter(|b| **b).count()
    }

    /// Removes bricks in a fixed order until `remaining` are left and returns
    /// the rendered frame. Used to build frames at chosen brick levels.
    pub fn with_bricks_left(&mut self, remaining: usize) -> Image {
        let order = Self::removal_order();
        let mut left = self.bricks_left();
        for (r, c) in order {
            if left <= remaining {
                break;
            }
            if self.bricks[r][c] {
                self.bricks[r][c] = false;
                left -= 1;
            }
        }
        self.frame = self.draw();
        self.frame.clone()
    }

    // Bottom row first, left to right, which is roughly how play clears them.
    fn removal_order() -> Vec<(usize, usize)> {
        (0..3).rev().flat_map(|r| (0..12).map(move |c| (r, c))).collect()
    }

    /// Column of the paddle's left unit.
    pub fn paddle(&self) -> i32 {
        self.paddle
    }

    /// (col, row) of the ball.
    pub fn ball(&self) -> (i32, i32) {
        self.ball
    }

    fn brick_at(&self, col: i32, row: i32) -> Option<(usize, usize)> {
        let r = BRICK_ROWS.iter().position(|br| *br as i32 == row)?;
        let c = (col - FIRST_COL) as usize;
        (c < 12 && self.bricks[r][c]).then_some((r, c))
    }

    fn draw(&self) -> Image {
        let mut img = Image::zeros(FRAME_SIZE, FRAME_SIZE);
        for row in 0..GRID {
            paint_unit(&mut img, UNIT, 0, row, 0, WALL_SHADE);
            paint_unit(&mut img, UNIT, GRID - 1, row, 0, WALL_SHADE);
        }
        for col in 0..GRID {
            paint_unit(&mut img, UNIT, col, 0, 0, WALL_SHADE);
        }
        for (r, row) in self.bricks.iter().enumerate() {
            for (c, alive) in row.iter().enumerate() {
                if *alive {
                    paint_unit(&mut img, UNIT, c + 1, BRICK_ROWS[r], 1, BRICK_SHADES[r]);
                }
            }
        }
        let y0 = PADDLE_ROW as usize * UNIT + 1;
        let x0 = self.paddle as usize * UNIT;
        img.fill_rect(x0, y0, x0 + PADDLE_WIDTH as usize * UNIT, y0 + 3, 1.0);
        let (bx, by) = self.ball;
        paint_unit(&mut img, UNIT, bx as usize, by as usize, 1, 1.0);
        img
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

    fn advance_ball(&mut self) -> (f64, bool) {
        let (bx, by) = self.ball;
        let (mut dx, mut dy) = self.velocity;
        if !(FIRST_COL..=LAST_COL).contains(&(bx + dx)) {
            dx = -dx;
        }
        if by + dy < 1 {
            dy = -dy;
        }
        let (nx, ny) = (bx + dx, by + dy);

        if let Some((r, c)) = self.brick_at(nx, ny) {
            self.bricks[r][c] = false;
            self.velocity = (dx, -dy);
            return (1.0, false);
        }
        if ny == PADDLE_ROW {
            let offset = nx - self.paddle;
            if (0..PADDLE_WIDTH).contains(&offset) {
                let dx = match offset {
                    0 => -1,
                    o if o == PADDLE_WIDTH - 1 => 1,
                    _ => dx,
                };
                self.velocity = (dx, -1);
                return (0.0, false);
            }
            self.ball = (nx, ny);
            return (0.0, true);
        }
        self.ball = (nx, ny);
        self.velocity = (dx, dy);
        (0.0, false)
    }
}

impl Environment for MiniBreakout {
    fn kind(&self) -> EnvKind {
        EnvKind::MiniBreakout
    }

    fn action_count(&self) -> usize {
        3
    }

    fn step_cap(&self) -> usize {
        self.config.step_cap
    }

    fn reset(&mut self, seed: u64) -> StepOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.bricks = [[true; 12]; 3];
        self.paddle = 5;
        self.ball = (rng.gen_range(2..=11), SERVE_ROW);
        self.velocity = (if rng.gen_bool(0.5) { 1 } else { -1 }, 1);
        self.steps = 0;
        self.score = 0.0;
        self.done = false;
        self.frame = self.draw();
        self.outcome(0.0, false)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        check_action(action, 3)?;
        if self.done {
            return Err(Error::EpisodeOver);
        }
        match action {
            LEFT => self.paddle = (self.paddle - 1).max(FIRST_COL),
            RIGHT => self.paddle = (self.paddle + 1).min(LAST_COL - PADDLE_WIDTH + 1),
            _ => {}
        }
        let (reward, lost) = self.advance_ball();
        self.score += reward;
        self.steps += 1;
        let cleared = self.bricks_left() == 0;
        let capped = self.steps >= self.config.step_cap;
        self.done = lost || cleared || capped;
        self.frame = self.draw();
        Ok(self.outcome(reward, capped && !lost && !cleared))
    }

    fn render(&self) -> Image {
        self.frame.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::testing::{check_common_contract, rollout};

    fn brick_region_lit(img: &Image) -> usize {
        let mut n = 0;
        for y in 2 * UNIT..5 * UNIT {
            for x in UNIT..13 * UNIT {
                if img.get(x, y) > 0.0 {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn contract() {
        check_common_contract(EnvKind::MiniBreakout);
    }

    #[test]
    fn reset_renders_full_wall() {
        let mut env = MiniBreakout::new(Default::default());
        let o = env.reset(3);
        // 36 bricks, each 4x4 lit pixels.
        assert_eq!(brick_region_lit(&o.mirror_state), 36 * 16);
        assert_eq!(env.bricks_left(), MiniBreakout::BRICK_COUNT);
    }

    #[test]
    fn cleared_bricks_leave_region_black() {
        let mut env = MiniBreakout::new(Default::default());
        env.reset(0);
        let img = env.with_bricks_left(0);
        assert_eq!(brick_region_lit(&img), 0);
        let img = {
            env.reset(0);
            env.with_bricks_left(20)
        };
        assert_eq!(brick_region_lit(&img), 20 * 16);
    }

    fn track(env: &MiniBreakout) -> usize {
        // Keep the paddle centred under the ball's column.
        let target = env.ball().0 - 1;
        match env.paddle().cmp(&target) {
            std::cmp::Ordering::Less => RIGHT,
            std::cmp::Ordering::Greater => LEFT,
            _ => STAY,
        }
    }

    #[test]
    fn serve_heads_for_the_paddle() {
        let mut env = MiniBreakout::new(Default::default());
        for seed in 0..20 {
            env.reset(seed);
            assert_eq!(env.ball().1, SERVE_ROW);
            for _ in 0..(PADDLE_ROW - 1 - SERVE_ROW) {
                let o = env.step(STAY).unwrap();
                assert_eq!(o.vrf_reward, 0.0);
                assert!(!o.terminal);
            }
            assert_eq!(env.ball().1, PADDLE_ROW - 1);
        }
    }

    #[test]
    fn brick_hit_pays_one() {
        let mut env = MiniBreakout::new(Default::default());
        env.reset(5);
        let mut rewards = Vec::new();
        while env.bricks_left() == MiniBreakout::BRICK_COUNT {
            let o = env.step(track(&env)).unwrap();
            assert!(!o.terminal);
            rewards.push(o.vrf_reward);
        }
        let (last, before) = rewards.split_last().unwrap();
        assert_eq!(*last, 1.0);
        assert!(before.iter().all(|r| *r == 0.0));
        assert_eq!(env.bricks_left(), 35);
        // The ball reverses in place instead of entering the brick row.
        assert_eq!(env.ball().1, BRICK_ROWS[2] as i32 + 1);
    }

    #[test]
    fn tracking_paddle_keeps_ball_alive() {
        let mut env = MiniBreakout::new(Default::default());
        env.reset(11);
        let mut total = 0.0;
        let mut bricks = env.bricks_left();
        loop {
            let o = env.step(track(&env)).unwrap();
            total += o.vrf_reward;
            assert!(env.bricks_left() <= bricks);
            bricks = env.bricks_left();
            if o.terminal {
                assert!(o.truncated, "tracking policy lost the ball");
                break;
            }
        }
        assert!(total >= 5.0, "score {total}");
        assert!(total <= MiniBreakout::BRICK_COUNT as f64);
    }

    #[test]
    fn missing_the_ball_ends_episode() {
        let mut env = MiniBreakout::new(Default::default());
        let out = rollout(&mut env, 1, &[LEFT; 100]);
        let last = out.last().unwrap();
        assert!(last.terminal);
        assert!(out.len() < 101);
        assert!(!last.truncated);
    }
}
