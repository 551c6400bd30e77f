use serde::Serialize;

use super::{epsilon_greedy, DqnAgent, DqnConfig, Transition};
use crate::env::{EnvState, Outcome, Simulator};
use crate::error::Result;
use crate::macro_action::MacroAction;
use crate::observation::{ObservationConfig, Observer};
use crate::replay::ReplayBuffer;
use crate::reward::{driver_reward, RewardConfig, RewardInput};
use crate::skills::{fingerprint, SkillLibrary};
use crate::SimRng;

/// Simulator, observation pipeline and driver reward bundled together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivingTask {
    pub sim: Simulator,
    pub observer: Observer,
    pub reward: RewardConfig,
}

impl DrivingTask {
    pub fn new(sim: Simulator, obs: ObservationConfig, reward: RewardConfig) -> Self {
        Self {
            observer: Observer::new(*sim.geometry(), obs),
            sim,
            reward,
        }
    }

    /// Driver reward for arriving in `state` under `act`.
    pub fn reward_at(&self, state: &EnvState, act: Option<MacroAction>) -> f64 {
        let input = RewardInput {
            outcome: state.outcome,
            d_front: self.observer.raw(state).d_front(),
            v_agent: state.ego.v,
            act,
            lane: state.ego.lane,
        };
        driver_reward(&input, &self.reward)
    }

    /// Fingerprint a skill library must carry to run in this task.
    pub fn skill_fingerprint(&self, n_skills: usize) -> String {
        fingerprint(&self.observer.config, self.sim.config(), n_skills)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DqnEpisodeStats {
    pub episode: usize,
    /// Training environment steps completed at the end of the episode.
    pub env_steps: u64,
    pub steps: usize,
    /// Stored transitions (one per frame for the low level, one per skill run
    /// for the high level).
    pub decisions: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub epsilon: f64,
    pub outcome: Outcome,
    pub loss_mean: f64,
}

#[derive(Debug, Clone)]
pub struct DqnRun {
    pub agent: DqnAgent,
    pub env_steps: u64,
    pub episodes: usize,
}

struct Clock<F> {
    steps: u64,
    every: Option<u64>,
    on_eval: F,
}

impl<F: FnMut(u64, &DqnAgent) -> Result<()>> Clock<F> {
    fn tick(&mut self, agent: &DqnAgent) -> Result<()> {
        self.steps += 1;
        match self.every {
            Some(e) if e > 0 && self.steps % e == 0 => (self.on_eval)(self.steps, agent),
            _ => Ok(()),
        }
    }
}

fn train_step(agent: &mut DqnAgent, buffer: &ReplayBuffer<Transition>, rng: &mut SimRng, loss: &mut (f64, usize)) {
    let cfg = agent.config;
    if buffer.len() >= cfg.buffer_gate() {
        let batch = buffer.sample(cfg.batch_size, rng);
        loss.0 += agent.td_update(&batch);
        loss.1 += 1;
    }
}

/// Trains the macro-action baseline. `on_eval` runs every `eval_every`
/// training environment steps.
pub fn train_low_level(
    config: &DqnConfig,
    task: &DrivingTask,
    rng: &mut SimRng,
    eval_every: Option<u64>,
    on_eval: impl FnMut(u64, &DqnAgent) -> Result<()>,
    mut on_episode: impl FnMut(&DqnEpisodeStats),
) -> Result<DqnRun> {
    config.validate()?;
    let mut agent = DqnAgent::new(MacroAction::COUNT, *config, rng);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut clock = Clock { steps: 0, every: eval_every, on_eval };

    for episode in 0..config.episodes {
        let epsilon = config.epsilon_at(episode);
        let mut state = task.sim.init_episode(rng);
        let mut s = task.observer.encode(&state);
        let (mut steps, mut ret, mut loss) = (0usize, 0.0, (0.0, 0usize));
        while !state.outcome.is_terminal() {
            let a = epsilon_greedy(&agent.q_values(&s), epsilon, rng);
            let label = MacroAction::ALL[a];
            let input = label.realize(rng);
            state = task.sim.step(&state, input, rng)?;
            let r = task.reward_at(&state, Some(label));
            let s_next = task.observer.encode(&state);
            buffer.push(Transition { s, a, r, s_next, done: state.outcome.is_terminal() });
            s = s_next;
            ret += r;
            steps += 1;
            train_step(&mut agent, &buffer, rng, &mut loss);
            clock.tick(&agent)?;
        }
        on_episode(&DqnEpisodeStats {
            episode,
            env_steps: clock.steps,
            steps,
            decisions: steps,
            episode_return: ret,
            epsilon,
            outcome: state.outcome,
            loss_mean: if loss.1 > 0 { loss.0 / loss.1 as f64 } else { 0.0 },
        });
    }
    Ok(DqnRun { agent, env_steps: clock.steps, episodes: config.episodes })
}

/// Frames executed by one high-level choice.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillInterval {
    pub state: EnvState,
    pub rewards: Vec<f64>,
}

impl SkillInterval {
    pub fn frames(&self) -> usize {
        self.rewards.len()
    }

    /// `r_sum / i`.
    pub fn mean_reward(&self) -> f64 {
        self.rewards.iter().sum::<f64>() / self.rewards.len().max(1) as f64
    }
}

/// Runs skill `z` from `start` for up to `n_step` frames or until the episode
/// ends, calling `on_frame` after every frame.
#[allow(clippy::too_many_arguments)]
pub fn run_skill_interval(
    task: &DrivingTask,
    skills: &SkillLibrary,
    start: EnvState,
    z: usize,
    n_step: usize,
    deterministic: bool,
    rng: &mut SimRng,
    mut on_frame: impl FnMut(&EnvState) -> Result<()>,
) -> Result<SkillInterval> {
    let mut state = start;
    let mut rewards = Vec::with_capacity(n_step);
    while rewards.len() < n_step && !state.outcome.is_terminal() {
        let obs = task.observer.encode(&state);
        let input = skills.act(&obs, z, rng, deterministic);
        state = task.sim.step(&state, input, rng)?;
        rewards.push(task.reward_at(&state, None));
        on_frame(&state)?;
    }
    Ok(SkillInterval { state, rewards })
}

/// Trains the skill selector: each choice runs one skill for up to `n_step`
/// frames and is stored with the mean reward over the frames it ran.
pub fn train_high_level(
    config: &DqnConfig,
    task: &DrivingTask,
    skills: &SkillLibrary,
    rng: &mut SimRng,
    eval_every: Option<u64>,
    on_eval: impl FnMut(u64, &DqnAgent) -> Result<()>,
    mut on_episode: impl FnMut(&DqnEpisodeStats),
) -> Result<DqnRun> {
    config.validate()?;
    skills.verify(&task.skill_fingerprint(skills.n_skills()))?;
    let mut agent = DqnAgent::new(skills.n_skills(), *config, rng);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut clock = Clock { steps: 0, every: eval_every, on_eval };

    for episode in 0..config.episodes {
        let epsilon = config.epsilon_at(episode);
        let mut state = task.sim.init_episode(rng);
        let (mut steps, mut decisions, mut ret, mut loss) = (0usize, 0usize, 0.0, (0.0, 0usize));
        while !state.outcome.is_terminal() {
            let s = task.observer.encode(&state);
            let z = epsilon_greedy(&agent.q_values(&s), epsilon, rng);
            let run = run_skill_interval(task, skills, state, z, config.n_step, config.deterministic_skills, rng, |_| {
                clock.tick(&agent)
            })?;
            state = run.state;
            steps += run.frames();
            ret += run.rewards.iter().sum::<f64>();
            let s_next = task.observer.encode(&state);
            buffer.push(Transition {
                s,
                a: z,
                r: run.mean_reward(),
                s_next,
                done: state.outcome.is_terminal(),
            });
            decisions += 1;
            train_step(&mut agent, &buffer, rng, &mut loss);
        }
        on_episode(&DqnEpisodeStats {
            episode,
            env_steps: clock.steps,
            steps,
            decisions,
            episode_return: ret,
            epsilon,
            outcome: state.outcome,
            loss_mean: if loss.1 > 0 { loss.0 / loss.1 as f64 } else { 0.0 },
        });
    }
    Ok(DqnRun { agent, env_steps: clock.steps, episodes: config.episodes })
}
