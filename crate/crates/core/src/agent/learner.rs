//! Q-learning with a target network, experience replay and ε-greedy exploration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::mlp::{Adam, Mlp};
use crate::agent::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_floor: f64,
    /// Episodes over which ε decays linearly from start to floor.
    pub epsilon_decay_episodes: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Environment steps between hard copies into the target network.
    pub target_sync: usize,
    /// Environment steps collected before the first update.
    pub learning_starts: usize,
    /// Environment steps per gradient update.
    pub train_every: usize,
    pub hidden: Vec<usize>,
    /// Network input is the state downsampled to `input_side × input_side`.
    pub input_side: usize,
    /// Treat step-cap truncation as non-terminal when forming TD targets.
    pub bootstrap_truncated: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 5e-4,
            epsilon_start: 1.0,
            epsilon_floor: 0.05,
            epsilon_decay_episodes: 500,
            replay_capacity: 20_000,
            batch_size: 32,
            target_sync: 500,
            learning_starts: 500,
            train_every: 1,
            hidden: vec![64, 64],
            input_side: 28,
            bootstrap_truncated: true,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, ok: bool, why: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("learner.{name}"), why.to_string()))
            }
        };
        field("gamma", (0.0..1.0).contains(&self.gamma), "must be in [0, 1)")?;
        field("learning_rate", self.learning_rate >= 0.0 && self.learning_rate.is_finite(), "must be finite and >= 0")?;
        field("epsilon_start", (0.0..=1.0).contains(&self.epsilon_start), "must be in [0, 1]")?;
        field(
            "epsilon_floor",
            (0.0..=self.epsilon_start).contains(&self.epsilon_floor),
            "must be in [0, epsilon_start]",
        )?;
        field("replay_capacity", self.replay_capacity > 0, "must be positive")?;
        field("batch_size", self.batch_size > 0, "must be positive")?;
        field("target_sync", self.target_sync > 0, "must be positive")?;
        field("train_every", self.train_every > 0, "must be positive")?;
        field("hidden", !self.hidden.contains(&0), "layer widths must be positive")?;
        field("input_side", self.input_side > 0, "must be positive")
    }

    /// Linear decay from `epsilon_start` to `epsilon_floor`, indexed by episode from 0.
    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.epsilon_decay_episodes == 0 {
            return self.epsilon_floor;
        }
        let frac = (episode as f64 / self.epsilon_decay_episodes as f64).min(1.0);
        self.epsilon_start + (self.epsilon_floor - self.epsilon_start) * frac
    }

    pub fn layer_sizes(&self, actions: usize) -> Vec<usize> {
        let mut s = vec![self.input_side * self.input_side];
        s.extend(&self.hidden);
        s.push(actions);
        s
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy action. A uniform draw is consumed on every call so the random
/// stream does not depend on ε.
pub fn select_action<T: Scalar>(q: &Mlp<T>, state: &[T], epsilon: f64, rng: &mut impl Rng) -> usize {
    let explore = rng.gen::<f64>() < epsilon;
    let random = rng.gen_range(0..q.output_len());
    if explore {
        random
    } else {
        argmax(&q.forward(state))
    }
}

/// `r + γ max_a' Q_target(s', a')`, or `r` for terminal transitions.
pub fn td_target<T: Scalar>(target: &Mlp<T>, t: &Transition<T>, gamma: T) -> T {
    if t.terminal {
        t.reward
    } else {
        let q = target.forward(&t.next_state);
        let best = q.iter().copied().fold(T::neg_infinity(), T::max);
        t.reward + gamma * best
    }
}

/// One gradient step on a batch. Returns the loss before the update.
pub fn train_step<T: Scalar>(
    q: &mut Mlp<T>,
    target: &Mlp<T>,
    adam: &mut Adam<T>,
    batch: &[&Transition<T>],
    gamma: T,
) -> Result<T> {
    let targets: Vec<T> = batch.iter().map(|t| td_target(target, t, gamma)).collect();
    let samples: Vec<(&[T], usize, T)> = batch
        .iter()
        .zip(&targets)
        .map(|(t, y)| (&t.state[..], t.action, *y))
        .collect();
    let (loss, grads) = q.td_loss_and_grad(&samples);
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::Divergence(format!("non-finite TD loss {loss}")));
    }
    adam.step(q, &grads);
    if !q.all_finite() {
        return Err(Error::Divergence("non-finite network parameters".into()));
    }
    Ok(loss)
}

#[derive(Debug, Clone)]
pub struct Learner<T = f64> {
    config: LearnerConfig,
    q: Mlp<T>,
    target: Mlp<T>,
    adam: Adam<T>,
    replay: ReplayBuffer<T>,
    rng: ChaCha8Rng,
    steps: usize,
    updates: usize,
}

impl<T: Scalar> Learner<T> {
    pub fn new(config: LearnerConfig, actions: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = Mlp::new(&config.layer_sizes(actions), &mut rng)?;
        let adam = Adam::new(T::of(config.learning_rate), &q);
        Ok(Self {
            target: q.clone(),
            replay: ReplayBuffer::new(config.replay_capacity),
            q,
            adam,
            rng,
            steps: 0,
            updates: 0,
            config,
        })
    }

    /// Wraps an existing network, e.g. a loaded checkpoint, for evaluation.
    pub fn from_network(config: LearnerConfig, q: Mlp<T>, seed: u64) -> Result<Self> {
        config.validate()?;
        if q.input_len() != config.input_side * config.input_side {
            return Err(Error::Checkpoint(format!(
                "network expects {} inputs, config gives {}",
                q.input_len(),
                config.input_side * config.input_side
            )));
        }
        Ok(Self {
            target: q.clone(),
            adam: Adam::new(T::of(config.learning_rate), &q),
            replay: ReplayBuffer::new(config.replay_capacity),
            q,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
            updates: 0,
            config,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn network(&self) -> &Mlp<T> {
        &self.q
    }

    pub fn replay(&self) -> &ReplayBuffer<T> {
        &self.replay
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn act(&mut self, state: &[T], epsilon: f64) -> usize {
        select_action(&self.q, state, epsilon, &mut self.rng)
    }

    pub fn greedy(&self, state: &[T]) -> usize {
        argmax(&self.q.forward(state))
    }

    /// Stores a transition and trains when due. Returns the loss if an update ran.
    pub fn observe(&mut self, t: Transition<T>) -> Result<Option<T>> {
        self.replay.push(t);
        self.steps += 1;
        let mut loss = None;
        if self.steps >= self.config.learning_starts.max(1) && self.steps.is_multiple_of(self.config.train_every) {
            let batch = self.replay.sample(self.config.batch_size, &mut self.rng);
            let l = train_step(
                &mut self.q,
                &self.target,
                &mut self.adam,
                &batch,
                T::of(self.config.gamma),
            )?;
            self.updates += 1;
            loss = Some(l);
        }
        if self.steps.is_multiple_of(self.config.target_sync) {
            self.target = self.q.clone();
        }
        Ok(loss)
    }
}
