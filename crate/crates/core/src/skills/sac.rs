//! Soft actor-critic with a state-value network, twin Q networks and a
//! tanh-squashed Gaussian policy, conditioned on a one-hot skill vector.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SkillSample;
use crate::neural::{backprop_sample, sample_with_noise, ActionBox, AdamConfig, SquashedSample};
use crate::observation::N_FEATURES;
use crate::{Adam, Gradients, Mlp, Tape};

/// Continuous action dimensions: scaled acceleration and lane-change probability.
pub const ACTION_DIMS: usize = 2;

/// `a_act` lies in `[-1, 2/3]`, `l_p` in `[0, 1]`.
pub fn skill_action_box() -> ActionBox<f64> {
    ActionBox::new(vec![-1.0, 0.0], vec![2.0 / 3.0, 1.0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub optimizer: AdamConfig,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.99,
            tau: 0.005,
            optimizer: AdamConfig::default(),
        }
    }
}

/// Bootstrapped soft Q target.
#[inline]
pub fn sac_q_target(r_z: f64, done: bool, v_target_next: f64, gamma: f64) -> f64 {
    if done {
        r_z
    } else {
        r_z + gamma * v_target_next
    }
}

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grads: Gradients,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SacLosses {
    pub q1: f64,
    pub q2: f64,
    pub value: f64,
    pub policy: f64,
}

/// Flattened minibatch in network-input layout.
#[derive(Debug, Clone)]
pub struct SacBatch {
    pub len: usize,
    pub n_skills: usize,
    /// `len x (14 + n_skills)`
    pub state_skill: Vec<f64>,
    /// `len x (14 + n_skills + 2)`
    pub state_skill_action: Vec<f64>,
    /// `len x (14 + n_skills)`
    pub next_state_skill: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl SacBatch {
    pub fn from_samples(samples: &[&SkillSample], n_skills: usize) -> Self {
        let len = samples.len();
        let w = N_FEATURES + n_skills;
        let mut batch = SacBatch {
            len,
            n_skills,
            state_skill: Vec::with_capacity(len * w),
            state_skill_action: Vec::with_capacity(len * (w + ACTION_DIMS)),
            next_state_skill: Vec::with_capacity(len * w),
            rewards: Vec::with_capacity(len),
            dones: Vec::with_capacity(len),
        };
        for s in samples {
            push_state_skill(&mut batch.state_skill, &s.s, s.z, n_skills);
            push_state_skill(&mut batch.state_skill_action, &s.s, s.z, n_skills);
            batch.state_skill_action.extend_from_slice(&s.action);
            push_state_skill(&mut batch.next_state_skill, &s.s_next, s.z, n_skills);
            batch.rewards.push(s.r_z);
            batch.dones.push(s.done);
        }
        batch
    }

    fn width(&self) -> usize {
        N_FEATURES + self.n_skills
    }

    /// Standard-normal reparameterization noise, one draw per sample and dimension.
    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<[f64; ACTION_DIMS]> {
        (0..self.len)
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect()
    }
}

pub(crate) fn push_state_skill(out: &mut Vec<f64>, s: &[f64; N_FEATURES], z: usize, n_skills: usize) {
    out.extend_from_slice(s);
    out.extend((0..n_skills).map(|k| if k == z { 1.0 } else { 0.0 }));
}

/// Policy, value, target value and twin Q networks with their optimizers.
#[derive(Debug, Clone)]
pub struct SacEnsemble {
    pub config: SacConfig,
    pub n_skills: usize,
    pub bounds: ActionBox<f64>,
    pub policy: Mlp,
    pub value: Mlp,
    pub value_target: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    opt_policy: Adam,
    opt_value: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
}

struct PolicyPass {
    samples: Vec<SquashedSample<f64>>,
    policy_tape: Tape,
    q_tapes: [Tape; 2],
    q_values: [Vec<f64>; 2],
}

impl SacEnsemble {
    pub fn new<R: Rng + ?Sized>(n_skills: usize, config: SacConfig, rng: &mut R) -> Self {
        let w = N_FEATURES + n_skills;
        let policy = Mlp::standard(w, 2 * ACTION_DIMS, rng);
        let value = Mlp::standard(w, 1, rng);
        let q1 = Mlp::standard(w + ACTION_DIMS, 1, rng);
        let q2 = Mlp::standard(w + ACTION_DIMS, 1, rng);
        let value_target = value.clone();
        Self {
            opt_policy: Adam::new(&policy, config.optimizer),
            opt_value: Adam::new(&value, config.optimizer),
            opt_q1: Adam::new(&q1, config.optimizer),
            opt_q2: Adam::new(&q2, config.optimizer),
            config,
            n_skills,
            bounds: skill_action_box(),
            policy,
            value,
            value_target,
            q1,
            q2,
        }
    }

    /// Head outputs `(mean, raw_log_std)` for one state-skill input.
    pub fn policy_head(&self, state_skill: &[f64]) -> ([f64; ACTION_DIMS], [f64; ACTION_DIMS]) {
        let out = self.policy.forward(state_skill).expect("policy input width");
        ([out[0], out[1]], [out[2], out[3]])
    }

    pub fn q_targets(&self, batch: &SacBatch) -> Vec<f64> {
        let mut tape = Tape::new();
        let v_next = self
            .value_target
            .forward_batch(&batch.next_state_skill, batch.len, &mut tape)
            .expect("value input width");
        (0..batch.len)
            .map(|b| sac_q_target(batch.rewards[b], batch.dones[b], v_next[b], self.config.gamma))
            .collect()
    }

    /// `mean 1/2 (Q_k(s, a) - y)^2` for Q network `k` in `{0, 1}`.
    pub fn q_loss(&self, k: usize, batch: &SacBatch, targets: &[f64]) -> LossGrad {
        let net = if k == 0 { &self.q1 } else { &self.q2 };
        let mut tape = Tape::new();
        let q = net
            .forward_batch(&batch.state_skill_action, batch.len, &mut tape)
            .expect("q input width")
            .to_vec();
        let inv = 1.0 / batch.len as f64;
        let mut loss = 0.0;
        let mut d_out = Vec::with_capacity(batch.len);
        for (qv, y) in q.iter().zip(targets) {
            let e = qv - y;
            loss += 0.5 * e * e * inv;
            d_out.push(e * inv);
        }
        let mut grads = Gradients::zeros_like(net);
        net.backward_batch(&tape, &d_out, &mut grads, None).expect("shapes");
        LossGrad { loss, grads }
    }

    fn policy_pass(&self, batch: &SacBatch, noise: &[[f64; ACTION_DIMS]]) -> PolicyPass {
        let n = batch.len;
        let w = batch.width();
        let mut policy_tape = Tape::new();
        let head = self
            .policy
            .forward_batch(&batch.state_skill, n, &mut policy_tape)
            .expect("policy input width")
            .to_vec();
        let mut samples = Vec::with_capacity(n);
        let mut q_in = Vec::with_capacity(n * (w + ACTION_DIMS));
        for b in 0..n {
            let h = &head[b * 4..b * 4 + 4];
            let s = sample_with_noise(&h[0..2], &h[2..4], &self.bounds, &noise[b]);
            q_in.extend_from_slice(&batch.state_skill[b * w..(b + 1) * w]);
            q_in.extend_from_slice(&s.action);
            samples.push(s);
        }
        let mut q_tapes = [Tape::new(), Tape::new()];
        let q1 = self.q1.forward_batch(&q_in, n, &mut q_tapes[0]).expect("q width").to_vec();
        let q2 = self.q2.forward_batch(&q_in, n, &mut q_tapes[1]).expect("q width").to_vec();
        PolicyPass {
            samples,
            policy_tape,
            q_tapes,
            q_values: [q1, q2],
        }
    }

    fn value_loss_from(&self, batch: &SacBatch, pass: &PolicyPass) -> LossGrad {
        let n = batch.len;
        let mut tape = Tape::new();
        let v = self
            .value
            .forward_batch(&batch.state_skill, n, &mut tape)
            .expect("value width")
            .to_vec();
        let inv = 1.0 / n as f64;
        let mut loss = 0.0;
        let mut d_out = Vec::with_capacity(n);
        for b in 0..n {
            let q_min = pass.q_values[0][b].min(pass.q_values[1][b]);
            let target = q_min - self.config.alpha * pass.samples[b].log_prob;
            let e = v[b] - target;
            loss += 0.5 * e * e * inv;
            d_out.push(e * inv);
        }
        let mut grads = Gradients::zeros_like(&self.value);
        self.value.backward_batch(&tape, &d_out, &mut grads, None).expect("shapes");
        LossGrad { loss, grads }
    }

    fn policy_loss_from(&self, batch: &SacBatch, pass: &PolicyPass) -> LossGrad {
        let n = batch.len;
        let w = batch.width();
        let inv = 1.0 / n as f64;
        let alpha = self.config.alpha;

        // d(-min Q)/d(action) through whichever critic is smaller per sample
        let mut d_action = vec![[0.0; ACTION_DIMS]; n];
        let mut loss = 0.0;
        for (k, net) in [&self.q1, &self.q2].into_iter().enumerate() {
            let mut d_out = vec![0.0; n];
            let mut any = false;
            for b in 0..n {
                let first = pass.q_values[0][b] <= pass.q_values[1][b];
                if (k == 0) == first {
                    d_out[b] = -inv;
                    any = true;
                }
            }
            if !any {
                continue;
            }
            let mut scratch = Gradients::zeros_like(net);
            let mut d_in = Vec::new();
            net.backward_batch(&pass.q_tapes[k], &d_out, &mut scratch, Some(&mut d_in))
                .expect("shapes");
            let stride = w + ACTION_DIMS;
            for b in 0..n {
                if d_out[b] != 0.0 {
                    d_action[b][0] = d_in[b * stride + w];
                    d_action[b][1] = d_in[b * stride + w + 1];
                }
            }
        }

        let mut d_head = Vec::with_capacity(n * 4);
        for b in 0..n {
            let s = &pass.samples[b];
            let q_min = pass.q_values[0][b].min(pass.q_values[1][b]);
            loss += (alpha * s.log_prob - q_min) * inv;
            let (dm, dl) = backprop_sample(s, &self.bounds, alpha * inv, &d_action[b]);
            d_head.extend_from_slice(&dm);
            d_head.extend_from_slice(&dl);
        }
        let mut grads = Gradients::zeros_like(&self.policy);
        self.policy
            .backward_batch(&pass.policy_tape, &d_head, &mut grads, None)
            .expect("shapes");
        LossGrad { loss, grads }
    }

    /// `mean 1/2 (V(s) - (min Q(s, a~) - alpha log pi(a~|s)))^2`.
    pub fn value_loss(&self, batch: &SacBatch, noise: &[[f64; ACTION_DIMS]]) -> LossGrad {
        let pass = self.policy_pass(batch, noise);
        self.value_loss_from(batch, &pass)
    }

    /// Value-network regression targets for the given noise.
    pub fn value_targets(&self, batch: &SacBatch, noise: &[[f64; ACTION_DIMS]]) -> Vec<f64> {
        let pass = self.policy_pass(batch, noise);
        (0..batch.len)
            .map(|b| {
                pass.q_values[0][b].min(pass.q_values[1][b]) - self.config.alpha * pass.samples[b].log_prob
            })
            .collect()
    }

    /// `mean (alpha log pi(a~|s) - min Q(s, a~))` with reparameterized `a~`.
    pub fn policy_loss(&self, batch: &SacBatch, noise: &[[f64; ACTION_DIMS]]) -> LossGrad {
        let pass = self.policy_pass(batch, noise);
        self.policy_loss_from(batch, &pass)
    }

    pub fn evaluate_losses(&self, batch: &SacBatch, noise: &[[f64; ACTION_DIMS]]) -> SacLosses {
        let y = self.q_targets(batch);
        let pass = self.policy_pass(batch, noise);
        SacLosses {
            q1: self.q_loss(0, batch, &y).loss,
            q2: self.q_loss(1, batch, &y).loss,
            value: self.value_loss_from(batch, &pass).loss,
            policy: self.policy_loss_from(batch, &pass).loss,
        }
    }

    /// One gradient step on every loss, all computed at the pre-update
    /// parameters, followed by the target-value smoothing step.
    pub fn update_with_noise(&mut self, batch: &SacBatch, noise: &[[f64; ACTION_DIMS]]) -> SacLosses {
        let y = self.q_targets(batch);
        let lq1 = self.q_loss(0, batch, &y);
        let lq2 = self.q_loss(1, batch, &y);
        let pass = self.policy_pass(batch, noise);
        let lv = self.value_loss_from(batch, &pass);
        let lp = self.policy_loss_from(batch, &pass);

        self.opt_q1.step(&mut self.q1, &lq1.grads);
        self.opt_q2.step(&mut self.q2, &lq2.grads);
        self.opt_value.step(&mut self.value, &lv.grads);
        self.opt_policy.step(&mut self.policy, &lp.grads);
        self.value_target.soft_update(&self.value, self.config.tau);

        SacLosses {
            q1: lq1.loss,
            q2: lq2.loss,
            value: lv.loss,
            policy: lp.loss,
        }
    }

    pub fn update<R: Rng + ?Sized>(&mut self, batch: &SacBatch, rng: &mut R) -> SacLosses {
        let noise = batch.draw_noise(rng);
        self.update_with_noise(batch, &noise)
    }
}
