//! A compact DQN-style learner and the loop that runs it against an environment.

pub mod episode;
pub mod learner;
pub mod mlp;
pub mod replay;

pub use episode::{encode_input, run_episode, EpisodeMode, EpisodeSummary, InputKind, RewardMode};
pub use learner::{argmax, select_action, td_target, train_step, Learner, LearnerConfig};
pub use mlp::{Adam, Mlp};
pub use replay::{ReplayBuffer, StateVec, Transition};
