//! Unsupervised skill discovery.
//!
//! A skill-conditioned SAC agent is trained purely on the discriminator
//! reward `ln q(z | s') - ln p(z)`, with the skill drawn uniformly once per
//! episode. The discriminator is trained alongside on the same replay samples.

mod discriminator;
mod library;
pub mod sac;

pub use discriminator::{argmax, softmax, Discriminator, DiscriminatorLoss};
pub use library::{fingerprint, SkillLibrary};
pub use sac::{sac_q_target, skill_action_box, SacBatch, SacConfig, SacEnsemble, SacLosses, ACTION_DIMS};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ControlInput, Outcome, Simulator};
use crate::error::{Error, Result};
use crate::neural::sample_squashed_gaussian;
use crate::observation::{ObservationConfig, Observer, N_BINS, N_FEATURES};
use crate::replay::ReplayBuffer;
use crate::SimRng;

/// Lower bound applied to `q(z | s)` before taking its log.
pub const Q_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SkillVector {
    pub index: usize,
    pub n_skills: usize,
}

impl SkillVector {
    pub fn new(index: usize, n_skills: usize) -> Self {
        assert!(index < n_skills, "skill index out of range");
        Self { index, n_skills }
    }

    pub fn one_hot(&self) -> Vec<f64> {
        (0..self.n_skills).map(|k| if k == self.index { 1.0 } else { 0.0 }).collect()
    }
}

/// Uniform skill prior.
pub fn sample_skill_prior<R: Rng + ?Sized>(n_skills: usize, rng: &mut R) -> SkillVector {
    SkillVector::new(rng.gen_range(0..n_skills), n_skills)
}

/// `ln q - ln p` with `q` floored at [`Q_FLOOR`].
#[inline]
pub fn skill_reward(q_z_given_s: f64, p_z: f64) -> f64 {
    q_z_given_s.max(Q_FLOOR).ln() - p_z.ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkillSample {
    pub s: [f64; N_FEATURES],
    pub z: usize,
    pub action: [f64; ACTION_DIMS],
    pub r_z: f64,
    pub s_next: [f64; N_FEATURES],
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkillConfig {
    pub n_skills: usize,
    pub episodes: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Updates start once the buffer holds this many samples; defaults to the batch size.
    pub update_start: Option<usize>,
    /// Per-episode frame cap on top of the environment time limit.
    pub max_episode_steps: Option<u32>,
    pub sac: SacConfig,
}

impl Default for SkillConfig {
    fn default() -> Self {
        Self {
            n_skills: 16,
            episodes: 5000,
            batch_size: 128,
            buffer_capacity: 10_000,
            update_start: None,
            max_episode_steps: None,
            sac: SacConfig::default(),
        }
    }
}

impl SkillConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_skills == 0 {
            return Err(Error::config("skills.n_skills", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("skills.batch_size", "must be >= 1"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::config("skills.buffer_capacity", "must be >= batch_size"));
        }
        if !(0.0..1.0).contains(&self.sac.gamma) {
            return Err(Error::config("skills.sac.gamma", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.sac.tau) {
            return Err(Error::config("skills.sac.tau", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn update_start(&self) -> usize {
        self.update_start.unwrap_or(self.batch_size).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkillEpisodeStats {
    pub episode: usize,
    pub skill: usize,
    pub steps: usize,
    pub mean_r_z: f64,
    pub disc_loss: f64,
    pub disc_accuracy: f64,
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub value_loss: f64,
    pub policy_loss: f64,
    pub outcome: Outcome,
}

/// Skill-discovery training state.
#[derive(Debug, Clone)]
pub struct SkillTrainer {
    config: SkillConfig,
    sim: Simulator,
    observer: Observer,
    obs_config: ObservationConfig,
    sac: SacEnsemble,
    disc: Discriminator,
    buffer: ReplayBuffer<SkillSample>,
    episodes_done: usize,
}

impl SkillTrainer {
    pub fn new(config: SkillConfig, sim: Simulator, obs_config: ObservationConfig, rng: &mut SimRng) -> Result<Self> {
        config.validate()?;
        obs_config.validate()?;
        let sac = SacEnsemble::new(config.n_skills, config.sac, rng);
        let disc = Discriminator::new(config.n_skills, config.sac.optimizer, rng);
        Ok(Self {
            observer: Observer::new(*sim.geometry(), obs_config),
            obs_config,
            sim,
            sac,
            disc,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            episodes_done: 0,
            config,
        })
    }

    pub fn config(&self) -> &SkillConfig {
        &self.config
    }

    pub fn buffer(&self) -> &ReplayBuffer<SkillSample> {
        &self.buffer
    }

    pub fn sac(&self) -> &SacEnsemble {
        &self.sac
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.disc
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    fn horizon(&self) -> u32 {
        let env_cap = self.sim.config().max_frames();
        self.config.max_episode_steps.map_or(env_cap, |c| c.min(env_cap))
    }

    fn sample_action(&self, s: &[f64; N_FEATURES], z: usize, rng: &mut SimRng) -> [f64; ACTION_DIMS] {
        let mut input = Vec::with_capacity(N_FEATURES + self.config.n_skills);
        sac::push_state_skill(&mut input, s, z, self.config.n_skills);
        let (mean, log_std) = self.sac.policy_head(&input);
        let a = sample_squashed_gaussian(&mean, &log_std, &self.sac.bounds, rng).action;
        [a[0], a[1]]
    }

    fn control(&self, action: &[f64; ACTION_DIMS]) -> ControlInput {
        ControlInput::new(action[0] * self.sim.config().a_max, action[1])
    }

    /// One training episode with a freshly drawn skill.
    pub fn run_episode(&mut self, rng: &mut SimRng) -> Result<SkillEpisodeStats> {
        let n = self.config.n_skills;
        let p_z = 1.0 / n as f64;
        let z = sample_skill_prior(n, rng).index;
        let horizon = self.horizon();
        let mut state = self.sim.init_episode(rng);
        let mut s = self.observer.encode(&state);

        let mut steps = 0usize;
        let mut sum_r = 0.0;
        let mut hits = 0usize;
        let mut updates = 0usize;
        let mut disc_loss = 0.0;
        let mut losses = SacLosses::default();

        while !state.outcome.is_terminal() && (steps as u32) < horizon {
            let action = self.sample_action(&s, z, rng);
            state = self.sim.step(&state, self.control(&action), rng)?;
            let s_next = self.observer.encode(&state);
            let probs = self.disc.probabilities(&s_next);
            if argmax(&probs) == z {
                hits += 1;
            }
            let r_z = skill_reward(probs[z], p_z);
            let done = matches!(state.outcome, Outcome::Collided | Outcome::RampOverrun | Outcome::Finished);
            self.buffer.push(SkillSample { s, z, action, r_z, s_next, done });
            sum_r += r_z;
            steps += 1;
            s = s_next;

            if self.buffer.len() >= self.config.update_start() {
                let samples = self.buffer.sample(self.config.batch_size, rng);
                let mut states = Vec::with_capacity(samples.len() * N_FEATURES);
                let mut labels = Vec::with_capacity(samples.len());
                for smp in &samples {
                    states.extend_from_slice(&smp.s_next);
                    labels.push(smp.z);
                }
                disc_loss += self.disc.update(&states, &labels).loss;
                let batch = SacBatch::from_samples(&samples, n);
                let l = self.sac.update(&batch, rng);
                losses.q1 += l.q1;
                losses.q2 += l.q2;
                losses.value += l.value;
                losses.policy += l.policy;
                updates += 1;
            }
        }

        let per_update = |v: f64| if updates > 0 { v / updates as f64 } else { 0.0 };
        let per_step = |v: f64| if steps > 0 { v / steps as f64 } else { 0.0 };
        let stats = SkillEpisodeStats {
            episode: self.episodes_done,
            skill: z,
            steps,
            mean_r_z: per_step(sum_r),
            disc_loss: per_update(disc_loss),
            disc_accuracy: per_step(hits as f64),
            q1_loss: per_update(losses.q1),
            q2_loss: per_update(losses.q2),
            value_loss: per_update(losses.value),
            policy_loss: per_update(losses.policy),
            outcome: state.outcome,
        };
        self.episodes_done += 1;
        Ok(stats)
    }

    pub fn train(
        &mut self,
        episodes: usize,
        rng: &mut SimRng,
        mut on_episode: impl FnMut(&SkillEpisodeStats),
    ) -> Result<()> {
        for _ in 0..episodes {
            let stats = self.run_episode(rng)?;
            on_episode(&stats);
        }
        Ok(())
    }

    /// Freezes the current policy.
    pub fn library(&self) -> SkillLibrary {
        SkillLibrary::new(
            self.sac.policy.clone(),
            self.config.n_skills,
            self.sim.config().a_max,
            fingerprint(&self.obs_config, self.sim.config(), self.config.n_skills),
        )
        .expect("policy shape fixed at construction")
    }

    /// Encoded successor states visited by skill `z` over `episodes` rollouts
    /// of the stochastic policy. Does not touch the replay buffer.
    pub fn rollout_states(&self, z: usize, episodes: usize, rng: &mut SimRng) -> Result<Vec<[f64; N_FEATURES]>> {
        let horizon = self.horizon();
        let mut out = Vec::new();
        for _ in 0..episodes {
            let mut state = self.sim.init_episode(rng);
            let mut s = self.observer.encode(&state);
            let mut steps = 0u32;
            while !state.outcome.is_terminal() && steps < horizon {
                let action = self.sample_action(&s, z, rng);
                state = self.sim.step(&state, self.control(&action), rng)?;
                s = self.observer.encode(&state);
                out.push(s);
                steps += 1;
            }
        }
        Ok(out)
    }

    /// Discriminator top-1 accuracy on fresh rollouts of every skill.
    pub fn held_out_accuracy(&self, episodes_per_skill: usize, rng: &mut SimRng) -> Result<f64> {
        let mut hits = 0usize;
        let mut total = 0usize;
        for z in 0..self.config.n_skills {
            for s in self.rollout_states(z, episodes_per_skill, rng)? {
                if argmax(&self.disc.probabilities(&s)) == z {
                    hits += 1;
                }
                total += 1;
            }
        }
        Ok(if total > 0 { hits as f64 / total as f64 } else { 0.0 })
    }

    /// Mean pairwise L1 distance between the skills' normalized histograms
    /// over `(x_agent bin, v_agent bin)` cells.
    pub fn visitation_divergence(&self, episodes_per_skill: usize, rng: &mut SimRng) -> Result<f64> {
        let n = self.config.n_skills;
        let mut hists = Vec::with_capacity(n);
        for z in 0..n {
            let mut h = vec![0.0; N_BINS * N_BINS];
            let states = self.rollout_states(z, episodes_per_skill, rng)?;
            for s in &states {
                let vb = crate::observation::bin_of(s[0]) as usize;
                let xb = crate::observation::bin_of(s[1]) as usize;
                h[xb * N_BINS + vb] += 1.0;
            }
            let total = states.len().max(1) as f64;
            h.iter_mut().for_each(|c| *c /= total);
            hists.push(h);
        }
        Ok(mean_pairwise_l1(&hists))
    }
}

pub fn mean_pairwise_l1(hists: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..hists.len() {
        for j in i + 1..hists.len() {
            sum += hists[i].iter().zip(&hists[j]).map(|(a, b)| (a - b).abs()).sum::<f64>();
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / pairs as f64
    }
}

/// Trains a fresh skill set for `config.episodes` episodes.
pub fn train_skills(
    config: SkillConfig,
    sim: Simulator,
    obs_config: ObservationConfig,
    rng: &mut SimRng,
    on_episode: impl FnMut(&SkillEpisodeStats),
) -> Result<(SkillLibrary, SkillTrainer)> {
    let mut trainer = SkillTrainer::new(config, sim, obs_config, rng)?;
    trainer.train(config.episodes, rng, on_episode)?;
    Ok((trainer.library(), trainer))
}
