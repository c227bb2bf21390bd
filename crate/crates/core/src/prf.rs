//! Perceptual reward: how much the agent's template looks like the goal's.
//!
//! Both templates are cropped to the bounding box of their non-black pixels,
//! the agent crop is resized to the goal crop, and HOG descriptors of the two
//! are compared. The reward is `exp(-distance)`, in `(0, 1]`.

use crate::error::{Error, Result};
use crate::hog::{hog_features, FeatureVector, HogNorm, HogParams};
use crate::imaging::{crop, match_template, nonzero_bounding_box, resize, GrayImage, Rect};
use crate::motion::{compute_mt, MotionTemplateBuilder, MotionTemplateParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Agent,
    Goal,
}

/// An image standing for either the agent's state or its goal.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptualTemplate<T = f64> {
    pub image: GrayImage<T>,
    pub role: Role,
}

impl<T: Scalar> PerceptualTemplate<T> {
    pub fn agent(image: GrayImage<T>) -> Self {
        Self {
            image,
            role: Role::Agent,
        }
    }

    pub fn goal(image: GrayImage<T>) -> Self {
        Self {
            image,
            role: Role::Goal,
        }
    }
}

/// How a task's goal is described.
#[derive(Debug, Clone)]
pub enum TaskDescriptor<T = f64> {
    /// The goal is a full mirror state; the agent template is the mirror state itself.
    Direct { goal: GrayImage<T> },
    /// The goal is a patch; the agent template is the best-matching window of the mirror state.
    Window { goal_window: GrayImage<T> },
    /// The goal is a motion; both templates are motion templates.
    Motion {
        goal_frames: Vec<GrayImage<T>>,
        params: MotionTemplateParams,
    },
}

impl<T: Scalar> TaskDescriptor<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            TaskDescriptor::Motion {
                goal_frames,
                params,
            } => {
                if goal_frames.len() < 2 {
                    return Err(Error::TooFewFrames {
                        needed: 2,
                        got: goal_frames.len(),
                    });
                }
                params.validate()
            }
            TaskDescriptor::Direct { .. } | TaskDescriptor::Window { .. } => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskDescriptor::Direct { .. } => "direct",
            TaskDescriptor::Window { .. } => "window",
            TaskDescriptor::Motion { .. } => "motion",
        }
    }

    pub fn is_motion(&self) -> bool {
        matches!(self, TaskDescriptor::Motion { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfParams {
    /// Cell side as a fraction of the goal crop height.
    pub cell_fraction: f64,
    pub num_bins: usize,
    pub norm: HogNorm,
}

impl Default for PrfParams {
    fn default() -> Self {
        Self {
            cell_fraction: 0.1,
            num_bins: 9,
            norm: HogNorm::GlobalL2,
        }
    }
}

impl PrfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_fraction > 0.0 && self.cell_fraction <= 1.0) {
            return Err(Error::param("cell_fraction", format!("{} not in (0,1]", self.cell_fraction)));
        }
        if self.num_bins < 2 {
            return Err(Error::param("num_bins", "must be at least 2"));
        }
        Ok(())
    }

    /// HOG settings for a goal crop of height `h`.
    pub fn hog_for_height(&self, h: usize) -> HogParams {
        let cell_size = ((self.cell_fraction * h as f64).round() as usize).max(1);
        HogParams {
            cell_size,
            num_bins: self.num_bins,
            norm: self.norm,
        }
    }
}

/// Agent template for the current step.
///
/// `episode_frames` is the mirror-state sequence recorded so far this episode;
/// only motion descriptors look at it. With fewer than two frames the motion
/// template is all black.
pub fn agent_template<T: Scalar>(
    descriptor: &TaskDescriptor<T>,
    mirror_state: &GrayImage<T>,
    episode_frames: &[GrayImage<T>],
) -> Result<PerceptualTemplate<T>> {
    let image = match descriptor {
        TaskDescriptor::Direct { .. } => mirror_state.clone(),
        TaskDescriptor::Window { goal_window } => window_of(mirror_state, goal_window)?,
        TaskDescriptor::Motion { params, .. } => {
            if episode_frames.len() < 2 {
                GrayImage::zeros(mirror_state.width(), mirror_state.height())
            } else {
                compute_mt(episode_frames, params)?.export()
            }
        }
    };
    Ok(PerceptualTemplate::agent(image))
}

fn window_of<T: Scalar>(mirror: &GrayImage<T>, goal_window: &GrayImage<T>) -> Result<GrayImage<T>> {
    let m = match_template(mirror, goal_window)?;
    crop(mirror, m.rect)
}

pub fn goal_template<T: Scalar>(descriptor: &TaskDescriptor<T>) -> Result<PerceptualTemplate<T>> {
    descriptor.validate()?;
    let image = match descriptor {
        TaskDescriptor::Direct { goal } => goal.clone(),
        TaskDescriptor::Window { goal_window } => goal_window.clone(),
        TaskDescriptor::Motion {
            goal_frames,
            params,
        } => compute_mt(goal_frames, params)?.export(),
    };
    Ok(PerceptualTemplate::goal(image))
}

/// Crop to the non-black bounding box. Images with no non-black pixels are
/// returned whole. Crops thinner than 2 pixels are widened (inside the image)
/// so gradients stay defined.
pub fn crop_to_content<T: Scalar>(img: &GrayImage<T>) -> Result<GrayImage<T>> {
    match nonzero_bounding_box(img) {
        None => Ok(img.clone()),
        Some(r) => crop(img, widen(r, img.width(), img.height())),
    }
}

fn widen(r: Rect, width: usize, height: usize) -> Rect {
    let grow = |start: usize, len: usize, limit: usize| {
        if len >= 2 || limit < 2 {
            (start, len)
        } else if start + 1 < limit {
            (start, 2)
        } else {
            (start - 1, 2)
        }
    };
    let (x, w) = grow(r.x, r.w, width);
    let (y, h) = grow(r.y, r.h, height);
    Rect::new(x, y, w, h)
}

/// The goal side of the comparison, computed once per task.
#[derive(Debug, Clone)]
pub struct PreparedGoal<T = f64> {
    pub crop_dims: (usize, usize),
    pub hog: HogParams,
    pub features: FeatureVector<T>,
}

impl<T: Scalar> PreparedGoal<T> {
    pub fn new(goal: &PerceptualTemplate<T>, params: &PrfParams) -> Result<Self> {
        params.validate()?;
        let cropped = crop_to_content(&goal.image)?;
        let hog = params.hog_for_height(cropped.height());
        let features = hog_features(&cropped, &hog)?;
        Ok(Self {
            crop_dims: cropped.dims(),
            hog,
            features,
        })
    }

    /// Crops and rescales an agent template onto the goal crop, then extracts HOG.
    pub fn agent_features(&self, ta: &PerceptualTemplate<T>) -> Result<FeatureVector<T>> {
        let cropped = crop_to_content(&ta.image)?;
        let (w, h) = self.crop_dims;
        hog_features(&resize(&cropped, w, h)?, &self.hog)
    }

    pub fn distance(&self, ta: &PerceptualTemplate<T>) -> Result<T> {
        Ok(self.agent_features(ta)?.distance(&self.features))
    }
}

/// HOG descriptors of both templates after cropping and rescaling.
pub fn prepare_pair<T: Scalar>(
    ta: &PerceptualTemplate<T>,
    tg: &PerceptualTemplate<T>,
    params: &PrfParams,
) -> Result<(FeatureVector<T>, FeatureVector<T>)> {
    let goal = PreparedGoal::new(tg, params)?;
    let fa = goal.agent_features(ta)?;
    Ok((fa, goal.features))
}

pub fn distance<T: Scalar>(
    ta: &PerceptualTemplate<T>,
    tg: &PerceptualTemplate<T>,
    params: &PrfParams,
) -> Result<T> {
    let (fa, fg) = prepare_pair(ta, tg, params)?;
    Ok(fa.distance(&fg))
}

/// `exp(-d)`, floored at the smallest positive value so huge distances
/// (raw HOG on large frames) never produce a zero reward.
#[inline]
pub fn reward_from_distance<T: Scalar>(d: T) -> T {
    (-d).exp().max(T::min_positive_value())
}

pub fn reward<T: Scalar>(
    ta: &PerceptualTemplate<T>,
    tg: &PerceptualTemplate<T>,
    params: &PrfParams,
) -> Result<T> {
    Ok(reward_from_distance(distance(ta, tg, params)?))
}

/// A task's reward function with the goal side cached.
#[derive(Debug, Clone)]
pub struct PerceptualReward<T = f64> {
    descriptor: TaskDescriptor<T>,
    params: PrfParams,
    goal: PerceptualTemplate<T>,
    prepared: PreparedGoal<T>,
}

impl<T: Scalar> PerceptualReward<T> {
    pub fn new(descriptor: TaskDescriptor<T>, params: PrfParams) -> Result<Self> {
        let goal = goal_template(&descriptor)?;
        let prepared = PreparedGoal::new(&goal, &params)?;
        Ok(Self {
            descriptor,
            params,
            goal,
            prepared,
        })
    }

    pub fn descriptor(&self) -> &TaskDescriptor<T> {
        &self.descriptor
    }

    pub fn params(&self) -> &PrfParams {
        &self.params
    }

    pub fn goal_template(&self) -> &PerceptualTemplate<T> {
        &self.goal
    }

    pub fn distance(&self, ta: &PerceptualTemplate<T>) -> Result<T> {
        self.prepared.distance(ta)
    }

    pub fn reward(&self, ta: &PerceptualTemplate<T>) -> Result<T> {
        Ok(reward_from_distance(self.distance(ta)?))
    }

    /// Distance of a single mirror state taken as the whole episode so far.
    pub fn frame_distance(&self, mirror: &GrayImage<T>) -> Result<T> {
        let ta = agent_template(&self.descriptor, mirror, std::slice::from_ref(mirror))?;
        self.distance(&ta)
    }

    /// Reward of a single mirror state taken as the whole episode so far.
    pub fn score_frame(&self, mirror: &GrayImage<T>) -> Result<T> {
        Ok(reward_from_distance(self.frame_distance(mirror)?))
    }

    pub fn episode(&self) -> Result<EpisodeTemplates<T>> {
        EpisodeTemplates::new(&self.descriptor)
    }
}

/// Per-episode agent-template state.
///
/// For motion descriptors this keeps the motion template up to date one frame
/// at a time rather than storing every frame; the result equals
/// [`compute_mt`] over the recorded sequence.
#[derive(Debug, Clone)]
pub struct EpisodeTemplates<T = f64> {
    motion: Option<MotionTemplateBuilder<T>>,
    current: Option<PerceptualTemplate<T>>,
}

impl<T: Scalar> EpisodeTemplates<T> {
    pub fn new(descriptor: &TaskDescriptor<T>) -> Result<Self> {
        let motion = match descriptor {
            TaskDescriptor::Motion { params, .. } => Some(MotionTemplateBuilder::new(*params)?),
            _ => None,
        };
        Ok(Self {
            motion,
            current: None,
        })
    }

    /// Records a mirror state and returns the agent template it produces.
    pub fn observe(
        &mut self,
        descriptor: &TaskDescriptor<T>,
        mirror: &GrayImage<T>,
    ) -> Result<&PerceptualTemplate<T>> {
        let image = match (descriptor, self.motion.as_mut()) {
            (TaskDescriptor::Motion { .. }, Some(builder)) => {
                builder.push(mirror)?;
                match builder.template() {
                    Some(mt) => mt.export(),
                    None => GrayImage::zeros(mirror.width(), mirror.height()),
                }
            }
            (TaskDescriptor::Window { goal_window }, _) => window_of(mirror, goal_window)?,
            _ => mirror.clone(),
        };
        Ok(self.current.insert(PerceptualTemplate::agent(image)))
    }

    pub fn current(&self) -> Option<&PerceptualTemplate<T>> {
        self.current.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::DeltaSchedule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob(w: usize, h: usize, x0: usize, y0: usize) -> GrayImage<f64> {
        // Asymmetric shape so orientation content is non-trivial.
        GrayImage::from_fn(w, h, |x, y| {
            let (dx, dy) = (x as i64 - x0 as i64, y as i64 - y0 as i64);
            if (0..8).contains(&dx) && (0..5).contains(&dy) && !(dx >= 5 && dy >= 3) {
                0.8
            } else {
                0.0
            }
        })
    }

    fn params() -> PrfParams {
        PrfParams {
            cell_fraction: 0.25,
            ..Default::default()
        }
    }

    #[test]
    fn direct_agent_template_is_mirror_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mirror = GrayImage::<f64>::from_fn(10, 10, |_, _| rng.gen());
        let d = TaskDescriptor::Direct {
            goal: GrayImage::zeros(10, 10),
        };
        assert_eq!(agent_template(&d, &mirror, &[]).unwrap().image, mirror);
    }

    #[test]
    fn window_agent_template_finds_patch() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let mirror = GrayImage::<f64>::from_fn(20, 16, |_, _| rng.gen());
        let patch = crop(&mirror, Rect::new(9, 4, 6, 5)).unwrap();
        let d = TaskDescriptor::Window {
            goal_window: patch.clone(),
        };
        let ta = agent_template(&d, &mirror, &[]).unwrap();
        assert_eq!(ta.image, patch);
        assert_eq!(goal_template(&d).unwrap().image, patch);

        let too_big = TaskDescriptor::Window {
            goal_window: GrayImage::zeros(30, 2),
        };
        assert!(agent_template(&too_big, &mirror, &[]).is_err());
    }

    #[test]
    fn motion_templates_follow_compute_mt() {
        let frames: Vec<GrayImage<f64>> = (0..3).map(|i| blob(20, 12, 2 + 3 * i, 3)).collect();
        let mt = MotionTemplateParams {
            delta: DeltaSchedule::Infinite,
            ..Default::default()
        };
        let d = TaskDescriptor::Motion {
            goal_frames: frames.clone(),
            params: mt,
        };
        let expected = compute_mt(&frames, &mt).unwrap().export();
        assert_eq!(goal_template(&d).unwrap().image, expected);
        assert_eq!(agent_template(&d, &frames[2], &frames).unwrap().image, expected);

        let early = agent_template(&d, &frames[0], &frames[..1]).unwrap();
        assert!(early.image.is_all_zero());
        assert_eq!(early.image.dims(), (20, 12));

        let mut ep = EpisodeTemplates::new(&d).unwrap();
        assert!(ep.observe(&d, &frames[0]).unwrap().image.is_all_zero());
        ep.observe(&d, &frames[1]).unwrap();
        assert_eq!(ep.observe(&d, &frames[2]).unwrap().image, expected);
    }

    #[test]
    fn motion_descriptor_needs_two_frames() {
        let d = TaskDescriptor::Motion {
            goal_frames: vec![GrayImage::<f64>::zeros(4, 4)],
            params: MotionTemplateParams::default(),
        };
        assert!(goal_template(&d).is_err());
        assert!(PerceptualReward::new(d, params()).is_err());
    }

    #[test]
    fn black_goal_template() {
        let d = TaskDescriptor::Direct {
            goal: GrayImage::<f64>::zeros(84, 84),
        };
        assert!(goal_template(&d).unwrap().image.is_all_zero());
    }

    #[test]
    fn identical_templates() {
        let t = PerceptualTemplate::agent(blob(30, 20, 5, 5));
        let g = PerceptualTemplate::goal(blob(30, 20, 5, 5));
        let (fa, fg) = prepare_pair(&t, &g, &params()).unwrap();
        assert_eq!(fa, fg);
        assert_eq!(distance(&t, &g, &params()).unwrap(), 0.0);
        assert_eq!(reward(&t, &g, &params()).unwrap(), 1.0);
    }

    #[test]
    fn translation_is_cropped_away() {
        let g = PerceptualTemplate::goal(blob(40, 30, 3, 4));
        for (x, y) in [(10, 10), (30, 20), (20, 2)] {
            let t = PerceptualTemplate::agent(blob(40, 30, x, y));
            assert!(distance(&t, &g, &params()).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn scale_change_is_mostly_absorbed() {
        // A 2x blob against a 1x goal: compare cropped pipeline with a naive
        // full-frame HOG comparison.
        let small = blob(48, 48, 4, 4);
        let big = GrayImage::from_fn(48, 48, |x, y| {
            if x >= 20 && y >= 20 {
                small.get((x - 20) / 2 + 4, (y - 20) / 2 + 4)
            } else {
                0.0
            }
        });
        let p = params();
        let cropped = distance(
            &PerceptualTemplate::agent(big.clone()),
            &PerceptualTemplate::goal(small.clone()),
            &p,
        )
        .unwrap();
        let hp = p.hog_for_height(48);
        let naive = hog_features(&big, &hp)
            .unwrap()
            .distance(&hog_features(&small, &hp).unwrap());
        assert!(cropped < 0.5, "cropped distance {cropped}");
        assert!(cropped < naive, "cropped {cropped} vs uncropped {naive}");
    }

    #[test]
    fn distance_is_euclidean_over_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let a = GrayImage::<f64>::from_fn(16, 12, |_, _| rng.gen());
        let b = GrayImage::<f64>::from_fn(16, 12, |_, _| rng.gen());
        let (ta, tg) = (PerceptualTemplate::agent(a), PerceptualTemplate::goal(b));
        let (fa, fg) = prepare_pair(&ta, &tg, &params()).unwrap();
        let mut ss = 0.0;
        for i in 0..fa.len() {
            ss += (fa.values[i] - fg.values[i]) * (fa.values[i] - fg.values[i]);
        }
        assert!((distance(&ta, &tg, &params()).unwrap() - ss.sqrt()).abs() < 1e-12);

        let e1 = FeatureVector {
            values: vec![1.0, 0.0],
            cells_x: 1,
            cells_y: 1,
            num_bins: 2,
        };
        let e2 = FeatureVector {
            values: vec![0.0, 1.0],
            ..e1.clone()
        };
        assert!((e1.distance(&e2) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reward_closed_form_and_monotone() {
        assert_eq!(reward_from_distance(0.0f64), 1.0);
        assert!((reward_from_distance(1.0f64) - 0.367_879_441_171_442_3).abs() < 1e-9);
        let ds = [0.1, 0.5, 1.3];
        let rs: Vec<f64> = ds.iter().map(|d| reward_from_distance(*d)).collect();
        assert!(rs[0] > rs[1] && rs[1] > rs[2]);
    }

    #[test]
    fn cell_size_from_goal_height() {
        let p = PrfParams {
            cell_fraction: 0.03,
            ..Default::default()
        };
        assert_eq!(p.hog_for_height(84).cell_size, 3);
        assert_eq!(p.hog_for_height(10).cell_size, 1);
        assert!(PrfParams {
            cell_fraction: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn thin_crops_are_widened() {
        let mut line = GrayImage::<f64>::zeros(10, 10);
        for x in 2..8 {
            line.set(x, 9, 1.0);
        }
        let c = crop_to_content(&line).unwrap();
        assert_eq!(c.dims(), (6, 2));
        let mut dot = GrayImage::<f64>::zeros(5, 5);
        dot.set(4, 4, 1.0);
        assert_eq!(crop_to_content(&dot).unwrap().dims(), (2, 2));
        let g = PerceptualTemplate::goal(line);
        assert!(distance(&PerceptualTemplate::agent(dot), &g, &params()).is_ok());
    }
}
