//! Deep Q-learning for the two discrete agents: the macro-action baseline and
//! the skill-selecting high-level agent.

mod drivers;
mod train;

pub use drivers::{FixedMacroDriver, GreedyHighLevel, GreedyLowLevel, SkillDriver};
pub use train::{run_skill_interval, train_high_level, train_low_level, DqnEpisodeStats, DqnRun, DrivingTask, SkillInterval};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::AdamConfig;
use crate::observation::N_FEATURES;
use crate::skills::argmax;
use crate::{Adam, Gradients, Mlp, Tape};

/// How the bootstrap value at `s'` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRule {
    /// Target network evaluated at the online network's argmax.
    #[default]
    Double,
    /// Maximum of the target network outputs.
    #[serde(alias = "alg1")]
    Alg1Max,
}

impl TargetRule {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetRule::Double => "double",
            TargetRule::Alg1Max => "alg1_max",
        }
    }
}

impl fmt::Display for TargetRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(TargetRule::Double),
            "alg1" | "alg1_max" => Ok(TargetRule::Alg1Max),
            _ => Err(Error::config("target_rule", format!("unknown rule {s:?} (double, alg1)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub gamma: f64,
    pub batch_size: usize,
    /// Online updates between hard target syncs.
    pub n_update: usize,
    /// Frames each high-level skill choice runs for.
    pub n_step: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub epsilon_min: f64,
    pub buffer_capacity: usize,
    /// Training starts once the buffer holds this many transitions; defaults to
    /// the capacity.
    pub buffer_gate: Option<usize>,
    pub episodes: usize,
    pub target_rule: TargetRule,
    /// Skills act from their mean action during high-level training.
    pub deterministic_skills: bool,
    pub optimizer: AdamConfig,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            batch_size: 64,
            n_update: 100,
            n_step: 8,
            epsilon: 1.0,
            beta: 0.99,
            epsilon_min: 0.01,
            buffer_capacity: 10_000,
            buffer_gate: None,
            episodes: 9000,
            target_rule: TargetRule::Double,
            deterministic_skills: false,
            optimizer: AdamConfig::default(),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("dqn.gamma", "must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("dqn.batch_size", "must be >= 1"));
        }
        if self.n_update == 0 {
            return Err(Error::config("dqn.n_update", "must be >= 1"));
        }
        if self.n_step == 0 {
            return Err(Error::config("dqn.n_step", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) {
            return Err(Error::config("dqn.epsilon_min", "must lie in [0, 1]"));
        }
        if !(self.epsilon_min..=1.0).contains(&self.epsilon) {
            return Err(Error::config("dqn.epsilon", "must lie in [epsilon_min, 1]"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config("dqn.beta", "must lie in [0, 1]"));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::config("dqn.buffer_capacity", "must be >= 1"));
        }
        if let Some(g) = self.buffer_gate {
            if g == 0 || g > self.buffer_capacity {
                return Err(Error::config("dqn.buffer_gate", "must lie in [1, buffer_capacity]"));
            }
        }
        Ok(())
    }

    pub fn buffer_gate(&self) -> usize {
        self.buffer_gate.unwrap_or(self.buffer_capacity)
    }

    /// Exploration rate in force during episode `k` (zero-based).
    pub fn epsilon_at(&self, k: usize) -> f64 {
        let k = i32::try_from(k).unwrap_or(i32::MAX);
        (self.epsilon * self.beta.powi(k)).max(self.epsilon_min)
    }
}

/// One stored experience. For the high-level agent `a` is the skill index and
/// `r` the mean reward over the frames the skill ran.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: [f64; N_FEATURES],
    pub a: usize,
    pub r: f64,
    pub s_next: [f64; N_FEATURES],
    pub done: bool,
}

pub type ExperienceLow = Transition;
pub type ExperienceHigh = Transition;

/// Uniform random index with probability `epsilon`, otherwise the greedy one
/// (lowest index on ties).
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// Bootstrapped target from precomputed network outputs at `s'`.
pub fn dqn_target_from(r: f64, done: bool, q_online_next: &[f64], q_target_next: &[f64], gamma: f64, rule: TargetRule) -> f64 {
    if done {
        return r;
    }
    let bootstrap = match rule {
        TargetRule::Alg1Max => q_target_next.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        TargetRule::Double => q_target_next[argmax(q_online_next)],
    };
    r + gamma * bootstrap
}

pub fn dqn_target(r: f64, done: bool, s_next: &[f64], online: &Mlp, target: &Mlp, gamma: f64, rule: TargetRule) -> f64 {
    let qo = online.forward(s_next).expect("dqn input width");
    let qt = target.forward(s_next).expect("dqn input width");
    dqn_target_from(r, done, &qo, &qt, gamma, rule)
}

#[derive(Debug, Clone)]
pub struct TdLoss {
    pub loss: f64,
    pub grads: Gradients,
}

/// Online and target Q networks with the optimizer and update counter.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub config: DqnConfig,
    pub online: Mlp,
    pub target: Mlp,
    opt: Adam,
    updates: usize,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(n_actions: usize, config: DqnConfig, rng: &mut R) -> Self {
        Self::from_net(Mlp::standard(N_FEATURES, n_actions, rng), config)
    }

    pub fn from_net(online: Mlp, config: DqnConfig) -> Self {
        Self {
            opt: Adam::new(&online, config.optimizer),
            target: online.clone(),
            online,
            config,
            updates: 0,
        }
    }

    pub fn n_actions(&self) -> usize {
        self.online.output_dim()
    }

    /// Online updates performed so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn q_values(&self, s: &[f64; N_FEATURES]) -> Vec<f64> {
        self.online.forward(s).expect("dqn input width")
    }

    pub fn greedy(&self, s: &[f64; N_FEATURES]) -> usize {
        argmax(&self.q_values(s))
    }

    /// Regression targets for a batch under the current networks.
    pub fn targets(&self, batch: &[&Transition]) -> Vec<f64> {
        let n = batch.len();
        let k = self.n_actions();
        let mut next = Vec::with_capacity(n * N_FEATURES);
        for t in batch {
            next.extend_from_slice(&t.s_next);
        }
        let mut tape = Tape::new();
        let qt = self.target.forward_batch(&next, n, &mut tape).expect("width").to_vec();
        let qo = match self.config.target_rule {
            TargetRule::Double => self.online.forward_batch(&next, n, &mut tape).expect("width").to_vec(),
            TargetRule::Alg1Max => Vec::new(),
        };
        batch
            .iter()
            .enumerate()
            .map(|(b, t)| {
                let online = if qo.is_empty() { &[][..] } else { &qo[b * k..(b + 1) * k] };
                dqn_target_from(t.r, t.done, online, &qt[b * k..(b + 1) * k], self.config.gamma, self.config.target_rule)
            })
            .collect()
    }

    /// `mean (Q(s, a) - y)^2` with the targets held fixed.
    pub fn td_loss(&self, batch: &[&Transition], targets: &[f64]) -> TdLoss {
        let n = batch.len();
        assert!(n > 0 && targets.len() == n, "td batch shape");
        let k = self.n_actions();
        let mut states = Vec::with_capacity(n * N_FEATURES);
        for t in batch {
            states.extend_from_slice(&t.s);
        }
        let mut tape = Tape::new();
        let q = self.online.forward_batch(&states, n, &mut tape).expect("width").to_vec();
        let inv = 1.0 / n as f64;
        let mut loss = 0.0;
        let mut d_out = vec![0.0; n * k];
        for (b, t) in batch.iter().enumerate() {
            let e = q[b * k + t.a] - targets[b];
            loss += e * e * inv;
            d_out[b * k + t.a] = 2.0 * e * inv;
        }
        let mut grads = Gradients::zeros_like(&self.online);
        self.online.backward_batch(&tape, &d_out, &mut grads, None).expect("shapes");
        TdLoss { loss, grads }
    }

    /// One gradient step on the batch; the target network is synced every
    /// `n_update` updates. Returns the pre-step loss.
    pub fn td_update(&mut self, batch: &[&Transition]) -> f64 {
        let y = self.targets(batch);
        let l = self.td_loss(batch, &y);
        self.opt.step(&mut self.online, &l.grads);
        self.updates += 1;
        if self.updates % self.config.n_update == 0 {
            self.target = self.online.clone();
        }
        l.loss
    }
}
