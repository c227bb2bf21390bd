//! Experiment configuration: a sectioned TOML file plus environment overrides.
//!
//! ```toml
//! [env]
//! name = "gridnav"            # gridnav | breakout | flappy | tracedraw
//! step_cap = 30               # optional
//! terminate_at_goal = false   # gridnav only
//!
//! [reward]
//! mode = "prf"                # vrf | prf
//!
//! [reward.descriptor]
//! kind = "direct"             # direct | window | motion
//! builtin = "gridnav-goal"    # or goal = "goal.pgm" / goal_frames = "frames/"
//! cell_fraction = 0.5
//! hog_norm = "global-l2"      # global-l2 | sqrt-area | raw
//!
//! [state]
//! ema_lambda = 0.0
//!
//! [learner]
//! learning_rate = 0.0005
//!
//! [run]
//! episodes = 1000
//! seed = 1
//! out_dir = "runs/gridnav"
//! ```
//!
//! Any key can be overridden from the environment as `PRF_<SECTION>__<KEY>`,
//! e.g. `PRF_RUN__SEED=4` or `PRF_REWARD__DESCRIPTOR__CELL_FRACTION=0.25`.
//! Relative paths are resolved against the config file's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{InputKind, LearnerConfig, RewardMode};
use crate::envs::{
    tracedraw, EnvKind, Environment, GridNav, GridNavConfig, MiniBreakout, MiniBreakoutConfig, MiniFlappy,
    MiniFlappyConfig, TraceDraw, TraceDrawConfig, FRAME_SIZE,
};
use crate::error::{Error, Result};
use crate::hog::HogNorm;
use crate::motion::{DeltaSchedule, MotionTemplateParams};
use crate::pgm;
use crate::prf::{PrfParams, TaskDescriptor};
use crate::{Descriptor, Image};

pub const ENV_PREFIX: &str = "PRF_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSection,
    #[serde(default)]
    pub reward: RewardSection,
    #[serde(default)]
    pub state: StateSection,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub run: RunSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub name: String,
    pub step_cap: Option<usize>,
    pub terminate_at_goal: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub mode: RewardMode,
    pub descriptor: Option<DescriptorSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Direct,
    Window,
    Motion,
}

/// Goals generated from the environments themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinGoal {
    /// An all-black frame.
    Black,
    /// GridNav with the agent standing on its goal cell.
    GridnavGoal,
    /// MiniFlappy's bird-in-gap window.
    FlappyWindow,
    /// TraceDraw's target moves, rendered by TraceDraw.
    TraceTarget,
    /// A hand-drawn "L" on a differently sized canvas.
    SketchedL,
}

impl fmt::Display for BuiltinGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BuiltinGoal::Black => "black",
            BuiltinGoal::GridnavGoal => "gridnav-goal",
            BuiltinGoal::FlappyWindow => "flappy-window",
            BuiltinGoal::TraceTarget => "trace-target",
            BuiltinGoal::SketchedL => "sketched-l",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorSection {
    pub kind: DescriptorKind,
    /// PGM goal image (direct) or goal patch (window).
    pub goal: Option<PathBuf>,
    /// Directory of PGM goal frames, in file-name order (motion).
    pub goal_frames: Option<PathBuf>,
    pub builtin: Option<BuiltinGoal>,
    #[serde(default = "default_cell_fraction")]
    pub cell_fraction: f64,
    #[serde(default = "default_bins")]
    pub num_bins: usize,
    #[serde(default)]
    pub hog_norm: HogNorm,
    #[serde(default)]
    pub motion: MotionSection,
}

fn default_cell_fraction() -> f64 {
    PrfParams::default().cell_fraction
}

fn default_bins() -> usize {
    PrfParams::default().num_bins
}

impl DescriptorSection {
    pub fn prf_params(&self) -> PrfParams {
        PrfParams {
            cell_fraction: self.cell_fraction,
            num_bins: self.num_bins,
            norm: self.hog_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSection {
    pub tau0: f64,
    pub tau_increment: f64,
    /// `inf`, a number, or `(t+K)/D`.
    #[serde(deserialize_with = "string_or_number")]
    pub delta: String,
    pub silhouette_threshold: f64,
}

impl Default for MotionSection {
    fn default() -> Self {
        let p = MotionTemplateParams::default();
        Self {
            tau0: p.tau0,
            tau_increment: p.tau_increment,
            delta: p.delta.to_string(),
            silhouette_threshold: p.silhouette_threshold,
        }
    }
}

fn string_or_number<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Number(f64),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::Text(s) => s,
        Raw::Number(n) if n.is_infinite() && n > 0.0 => "inf".to_string(),
        Raw::Number(n) => n.to_string(),
    })
}

impl MotionSection {
    pub fn params(&self) -> Result<MotionTemplateParams> {
        let delta: DeltaSchedule = self
            .delta
            .parse()
            .map_err(|e: Error| Error::config("reward.descriptor.motion.delta", e.to_string()))?;
        let p = MotionTemplateParams {
            tau0: self.tau0,
            tau_increment: self.tau_increment,
            delta,
            silhouette_threshold: self.silhouette_threshold,
        };
        p.validate()
            .map_err(|e| Error::config("reward.descriptor.motion", e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateSection {
    /// EMA weight on the previous state; 0 feeds the raw frame.
    pub ema_lambda: f64,
    /// Defaults to the agent template for motion descriptors, the EMA state otherwise.
    pub input: Option<InputKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub episodes: usize,
    /// Greedy evaluation after every this many training episodes.
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Dump the frames of every Nth training episode; 0 disables.
    pub frames_every: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            episodes: 100,
            eval_every: 100,
            eval_episodes: 10,
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            frames_every: 0,
        }
    }
}

impl ExperimentConfig {
    /// Reads `path`, applies `PRF_*` overrides from the process environment, validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base, std::env::vars())
    }

    /// Parses config text with explicit overrides (`PRF_SECTION__KEY`, value).
    pub fn parse(
        text: &str,
        base_dir: impl Into<PathBuf>,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        let applied = apply_overrides(&mut table, vars)?;
        let parsed: std::result::Result<Self, _> = if applied {
            toml::to_string(&table)
                .map_err(|e| Error::config("<overrides>", e.to_string()))
                .and_then(|s| toml::from_str(&s).map_err(|e| Error::config("<overrides>", e.to_string())))
        } else {
            toml::from_str(text).map_err(|e| Error::config("<file>", e.to_string()))
        };
        let mut cfg = parsed?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn env_kind(&self) -> Result<EnvKind> {
        self.env.name.parse()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.run.out_dir)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Input the learner sees, after applying the default.
    pub fn input_kind(&self) -> InputKind {
        self.state.input.unwrap_or(match &self.reward.descriptor {
            Some(d) if d.kind == DescriptorKind::Motion => InputKind::AgentTemplate,
            _ => InputKind::Ema,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.env_kind()?;
        if self.env.step_cap == Some(0) {
            return Err(Error::config("env.step_cap", "must be positive"));
        }
        if self.env.terminate_at_goal.is_some() && kind != EnvKind::GridNav {
            return Err(Error::config("env.terminate_at_goal", "only applies to gridnav"));
        }
        if !(0.0..1.0).contains(&self.state.ema_lambda) {
            return Err(Error::config("state.ema_lambda", "must be in [0, 1)"));
        }
        self.learner.validate()?;
        if self.run.episodes == 0 {
            return Err(Error::config("run.episodes", "must be positive"));
        }
        if self.run.eval_every == 0 {
            return Err(Error::config("run.eval_every", "must be at least 1"));
        }
        if self.reward.mode == RewardMode::Prf && self.reward.descriptor.is_none() {
            return Err(Error::config("reward.descriptor", "required when reward.mode = \"prf\""));
        }
        if let Some(d) = &self.reward.descriptor {
            d.prf_params()
                .validate()
                .map_err(|e| Error::config("reward.descriptor", e.to_string()))?;
            // Loads goal files, so missing or unreadable paths surface here.
            self.descriptor()?;
        }
        if self.input_kind() == InputKind::AgentTemplate
            && self.reward.descriptor.as_ref().map(|d| d.kind) != Some(DescriptorKind::Motion)
        {
            return Err(Error::config("state.input", "agent-template input needs a motion descriptor"));
        }
        Ok(())
    }

    pub fn build_env(&self) -> Result<Box<dyn Environment>> {
        let cap = self.env.step_cap;
        Ok(match self.env_kind()? {
            EnvKind::GridNav => Box::new(GridNav::new(self.gridnav_config())),
            EnvKind::MiniBreakout => {
                let d = MiniBreakoutConfig::default();
                Box::new(MiniBreakout::new(MiniBreakoutConfig {
                    step_cap: cap.unwrap_or(d.step_cap),
                }))
            }
            EnvKind::MiniFlappy => {
                let d = MiniFlappyConfig::default();
                Box::new(MiniFlappy::new(MiniFlappyConfig {
                    step_cap: cap.unwrap_or(d.step_cap),
                }))
            }
            EnvKind::TraceDraw => Box::new(TraceDraw::new(self.tracedraw_config())),
        })
    }

    fn gridnav_config(&self) -> GridNavConfig {
        let d = GridNavConfig::default();
        GridNavConfig {
            step_cap: self.env.step_cap.unwrap_or(d.step_cap),
            terminate_at_goal: self.env.terminate_at_goal.unwrap_or(d.terminate_at_goal),
            ..d
        }
    }

    fn tracedraw_config(&self) -> TraceDrawConfig {
        let d = TraceDrawConfig::default();
        TraceDrawConfig {
            step_cap: self.env.step_cap.unwrap_or(d.step_cap),
            ..d
        }
    }

    /// The task descriptor, with goal files loaded. `None` without a descriptor section.
    pub fn descriptor(&self) -> Result<Option<Descriptor>> {
        let Some(d) = &self.reward.descriptor else {
            return Ok(None);
        };
        let field = "reward.descriptor";
        let sources = [d.goal.is_some(), d.goal_frames.is_some(), d.builtin.is_some()];
        if sources.iter().filter(|s| **s).count() != 1 {
            return Err(Error::config(field, "set exactly one of goal, goal_frames, builtin"));
        }
        let load_image = |p: &PathBuf| -> Result<Image> {
            let full = self.resolve(p);
            pgm::read(&full).map_err(|e| Error::config(format!("{field}.goal"), format!("{}: {e}", full.display())))
        };
        let desc = match d.kind {
            DescriptorKind::Direct | DescriptorKind::Window => {
                let image = match (&d.goal, d.builtin) {
                    (Some(p), _) => load_image(p)?,
                    (None, Some(b)) => self.builtin_image(b, d.kind)?,
                    _ => {
                        return Err(Error::config(
                            format!("{field}.goal"),
                            "direct and window descriptors take goal or builtin",
                        ))
                    }
                };
                if d.kind == DescriptorKind::Direct {
                    TaskDescriptor::Direct { goal: image }
                } else {
                    TaskDescriptor::Window { goal_window: image }
                }
            }
            DescriptorKind::Motion => {
                let params = d.motion.params()?;
                let goal_frames = match (&d.goal_frames, d.builtin) {
                    (Some(dir), _) => {
                        let full = self.resolve(dir);
                        pgm::read_frames(&full).map_err(|e| {
                            Error::config(format!("{field}.goal_frames"), format!("{}: {e}", full.display()))
                        })?
                    }
                    (None, Some(BuiltinGoal::TraceTarget)) => TraceDraw::new(self.tracedraw_config()).target_frames(),
                    (None, Some(BuiltinGoal::SketchedL)) => tracedraw::sketched_l(),
                    (None, Some(b)) => {
                        return Err(Error::config(
                            format!("{field}.builtin"),
                            format!("{b} is not a motion goal (trace-target, sketched-l)"),
                        ))
                    }
                    _ => {
                        return Err(Error::config(
                            format!("{field}.goal_frames"),
                            "motion descriptors take goal_frames or builtin",
                        ))
                    }
                };
                TaskDescriptor::Motion { goal_frames, params }
            }
        };
        desc.validate().map_err(|e| Error::config(field, e.to_string()))?;
        Ok(Some(desc))
    }

    fn builtin_image(&self, b: BuiltinGoal, kind: DescriptorKind) -> Result<Image> {
        let wrong = || {
            Error::config(
                "reward.descriptor.builtin",
                format!("{b} cannot be used with a {kind:?} descriptor").to_lowercase(),
            )
        };
        match (b, kind) {
            (BuiltinGoal::Black, DescriptorKind::Direct) => Ok(Image::zeros(FRAME_SIZE, FRAME_SIZE)),
            (BuiltinGoal::GridnavGoal, DescriptorKind::Direct) => Ok(GridNav::new(self.gridnav_config()).goal_frame()),
            (BuiltinGoal::FlappyWindow, DescriptorKind::Window) => Ok(MiniFlappy::goal_window()),
            _ => Err(wrong()),
        }
    }
}

/// Applies `PRF_A__B=value` overrides to `table`. Returns whether any applied.
pub fn apply_overrides(
    table: &mut toml::Table,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<bool> {
    let mut applied = false;
    for (key, raw) in vars {
        let Some(rest) = key.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        if !rest.contains("__") {
            continue;
        }
        let path: Vec<String> = rest.split("__").map(str::to_lowercase).collect();
        let dotted = path.join(".");
        if path.iter().any(String::is_empty) {
            return Err(Error::config(dotted, format!("malformed override variable {key}")));
        }
        let value = parse_value(&raw);
        let (last, parents) = path.split_last().expect("at least two parts");
        let mut t = &mut *table;
        for p in parents {
            let entry = t
                .entry(p.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            t = entry
                .as_table_mut()
                .ok_or_else(|| Error::config(dotted.clone(), format!("{p} is not a section")))?;
        }
        t.insert(last.clone(), value);
        applied = true;
    }
    Ok(applied)
}

/// TOML literal if it parses as one (numbers, booleans, arrays, quoted strings),
/// otherwise the raw text as a string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
