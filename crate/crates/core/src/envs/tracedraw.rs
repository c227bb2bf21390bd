//! Trajectory drawing: the agent moves a pen dot over a black canvas.
//!
//! The canvas is a 14×14 grid of 6-pixel units; the pen is one unit, drawn at
//! full intensity, and nothing else is ever rendered, so the only way to
//! express a task is through the motion of the dot. Actions are a no-op plus
//! the four moves; moves into the border are clamped.
//!
//! The VRF is the negative distance (in grid units, divided by the grid size)
//! between the pen and the vertex of the target trace scheduled for the
//! current step. The score counts steps spent exactly on schedule.

use crate::envs::{check_action, paint_unit, EnvKind, Environment, StepInfo, StepOutcome, FRAME_SIZE};
use crate::error::{Error, Result};
use crate::Image;

pub const NOOP: usize = 0;
pub const UP: usize = 1;
pub const DOWN: usize = 2;
pub const LEFT: usize = 3;
pub const RIGHT: usize = 4;

const GRID: i32 = 14;
const UNIT: usize = FRAME_SIZE / GRID as usize;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceDrawConfig {
    /// (col, row)
    pub start: (i32, i32),
    /// Moves that draw the target trace from `start`.
    pub target_moves: Vec<usize>,
    pub step_cap: usize,
}

impl Default for TraceDrawConfig {
    /// An "L": three units right, then three up.
    fn default() -> Self {
        Self {
            start: (5, 8),
            target_moves: vec![RIGHT, RIGHT, RIGHT, UP, UP, UP],
            step_cap: 10,
        }
    }
}

impl TraceDrawConfig {
    /// Pen positions visited by the target moves, starting with `start`.
    pub fn target_vertices(&self) -> Vec<(i32, i32)> {
        let mut pos = self.start;
        let mut out = vec![pos];
        for &m in &self.target_moves {
            pos = apply(pos, m);
            out.push(pos);
        }
        out
    }
}

fn apply((c, r): (i32, i32), action: usize) -> (i32, i32) {
    let (c, r) = match action {
        UP => (c, r - 1),
        DOWN => (c, r + 1),
        LEFT => (c - 1, r),
        RIGHT => (c + 1, r),
        _ => (c, r),
    };
    (c.clamp(0, GRID - 1), r.clamp(0, GRID - 1))
}

fn draw((c, r): (i32, i32)) -> Image {
    let mut img = Image::zeros(FRAME_SIZE, FRAME_SIZE);
    paint_unit(&mut img, UNIT, c as usize, r as usize, 0, 1.0);
    img
}

#[derive(Debug, Clone)]
pub struct TraceDraw {
    config: TraceDrawConfig,
    vertices: Vec<(i32, i32)>,
    pen: (i32, i32),
    steps: usize,
    score: f64,
    done: bool,
    frame: Image,
}

impl TraceDraw {
    pub fn new(config: TraceDrawConfig) -> Self {
        let vertices = config.target_vertices();
        Self {
            pen: config.start,
            frame: draw(config.start),
            vertices,
            config,
            steps: 0,
            score: 0.0,
            done: false,
        }
    }

    pub fn pen(&self) -> (i32, i32) {
        self.pen
    }

    pub fn config(&self) -> &TraceDrawConfig {
        &self.config
    }

    /// Frames produced by performing the target moves from a fresh canvas,
    /// starting with the reset frame. This is the same-renderer goal video.
    pub fn target_frames(&self) -> Vec<Image> {
        self.vertices.iter().map(|v| draw(*v)).collect()
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

impl Environment for TraceDraw {
    fn kind(&self) -> EnvKind {
        EnvKind::TraceDraw
    }

    fn action_count(&self) -> usize {
        5
    }

    fn step_cap(&self) -> usize {
        self.config.step_cap
    }

    fn reset(&mut self, _seed: u64) -> StepOutcome {
        self.pen = self.config.start;
        self.steps = 0;
        self.score = 0.0;
        self.done = false;
        self.frame = draw(self.pen);
        self.outcome(0.0, false)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        check_action(action, 5)?;
        if self.done {
            return Err(Error::EpisodeOver);
        }
        self.pen = apply(self.pen, action);
        self.steps += 1;
        let target = self.vertices[self.steps.min(self.vertices.len() - 1)];
        let dist = f64::from(self.pen.0 - target.0).hypot(f64::from(self.pen.1 - target.1));
        if dist == 0.0 {
            self.score += 1.0;
        }
        self.done = self.steps >= self.config.step_cap;
        if action != NOOP {
            self.frame = draw(self.pen);
        }
        Ok(self.outcome(-dist / f64::from(GRID), self.done))
    }

    fn render(&self) -> Image {
        self.frame.clone()
    }
}

/// A hand-drawn rendition of a stroke, independent of the environment's renderer.
///
/// Draws the polyline through `points` (pixel coordinates on a
/// `width × height` canvas) with a round, anti-aliased brush, revealing it
/// progressively over `frames` images. The first frame is blank.
pub fn sketch_frames(
    points: &[(f64, f64)],
    width: usize,
    height: usize,
    brush_radius: f64,
    ink: f64,
    frames: usize,
) -> Vec<Image> {
    assert!(points.len() >= 2 && frames >= 2, "need a stroke and at least two frames");
    let lengths: Vec<f64> = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .collect();
    let total: f64 = lengths.iter().sum();
    (0..frames)
        .map(|k| {
            let reveal = total * k as f64 / (frames - 1) as f64;
            Image::from_fn(width, height, |x, y| {
                let p = (x as f64 + 0.5, y as f64 + 0.5);
                let mut walked = 0.0;
                let mut nearest = f64::INFINITY;
                for (seg, len) in points.windows(2).zip(&lengths) {
                    if walked >= reveal {
                        break;
                    }
                    let visible = ((reveal - walked) / len).min(1.0);
                    let a = seg[0];
                    let b = (
                        a.0 + (seg[1].0 - a.0) * visible,
                        a.1 + (seg[1].1 - a.1) * visible,
                    );
                    nearest = nearest.min(point_segment_distance(p, a, b));
                    walked += len;
                }
                if k == 0 {
                    0.0
                } else {
                    ink * (brush_radius + 0.5 - nearest).clamp(0.0, 1.0)
                }
            })
        })
        .collect()
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

/// Hand-drawn "L" matching the default target: a stroke to the right, then up,
/// on a 100×90 canvas with a thin gray brush.
pub fn sketched_l() -> Vec<Image> {
    sketch_frames(&[(18.0, 70.0), (68.0, 70.0), (68.0, 20.0)], 100, 90, 3.0, 0.7, 8)
}
