//! Run configuration, evaluation, metrics and the entry point behind the CLI.

mod eval;
pub mod output;

pub use eval::{
    episode_rng, evaluate, play_episode, running_average, EvalSummary, ScriptedMerge, ScriptedMergeDriver,
};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dqn::{
    train_high_level, train_low_level, DqnAgent, DqnConfig, DqnEpisodeStats, DrivingTask, GreedyHighLevel,
    GreedyLowLevel, SkillDriver,
};
use crate::env::{Driver, EnvConfig, RoadGeometry, Simulator};
use crate::error::{Error, Result};
use crate::macro_action::MacroAction;
use crate::neural::{load_mlp, save_mlp, NetRole};
use crate::observation::{ObservationConfig, N_FEATURES};
use crate::reward::RewardConfig;
use crate::skills::{SkillConfig, SkillEpisodeStats, SkillLibrary, SkillTrainer};
use crate::SimRng;

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "MERGE_HRL_OUT";

pub mod files {
    pub const MANIFEST: &str = "manifest.txt";
    pub const SKILLS: &str = "skills.json";
    pub const SKILL_METRICS: &str = "skill_metrics.csv";
    pub const EPISODES: &str = "episodes.csv";
    pub const EVAL: &str = "eval.csv";
    pub const LOW_DQN: &str = "low_dqn.json";
    pub const HIGH_DQN: &str = "high_dqn.json";
    pub const TRAJECTORY: &str = "trajectory.csv";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    TrainSkills,
    TrainLow,
    TrainHrl,
    Eval,
    ExportTraj,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::TrainSkills => "train-skills",
            Mode::TrainLow => "train-low",
            Mode::TrainHrl => "train-hrl",
            Mode::Eval => "eval",
            Mode::ExportTraj => "export-traj",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Agent evaluated or exported by `eval` and `export-traj`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// The hand-written merge controller.
    #[default]
    Scripted,
    /// Macro-action DQN; untrained from the seed when no checkpoint is given.
    Low,
    /// Skill-selecting DQN over a skill library.
    Hrl,
    /// A single skill run for the whole episode.
    Skill,
    /// One macro-action repeated every frame.
    Fixed,
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scripted" => Ok(PolicyKind::Scripted),
            "low" => Ok(PolicyKind::Low),
            "hrl" => Ok(PolicyKind::Hrl),
            "skill" => Ok(PolicyKind::Skill),
            "fixed" => Ok(PolicyKind::Fixed),
            _ => Err(Error::config("policy", format!("unknown policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Not part of the manifest: it does not affect results.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    /// Training environment steps between evaluations.
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Window of the running average over the evaluation series.
    pub eval_window: usize,
    /// Window of the running average over episode returns.
    pub return_window: usize,
    pub skills_path: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub policy: PolicyKind,
    pub skill_index: usize,
    pub fixed_action: usize,
    pub export_episodes: usize,
    pub env: EnvConfig,
    pub geometry: RoadGeometry,
    pub observation: ObservationConfig,
    pub reward: RewardConfig,
    pub skills: SkillConfig,
    pub dqn: DqnConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::default(),
            seed: 0,
            out_dir: None,
            eval_every: 20_000,
            eval_episodes: 500,
            eval_window: 10,
            return_window: 1000,
            skills_path: None,
            checkpoint: None,
            policy: PolicyKind::default(),
            skill_index: 0,
            fixed_action: 0,
            export_episodes: 1,
            env: EnvConfig::default(),
            geometry: RoadGeometry::default(),
            observation: ObservationConfig::default(),
            reward: RewardConfig::default(),
            skills: SkillConfig::default(),
            dqn: DqnConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.geometry.validate()?;
        self.observation.validate()?;
        match self.mode {
            Mode::TrainSkills => self.skills.validate()?,
            Mode::TrainLow | Mode::TrainHrl => self.dqn.validate()?,
            Mode::Eval | Mode::ExportTraj => {}
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes", "must be >= 1"));
        }
        if self.eval_window == 0 {
            return Err(Error::config("eval_window", "must be >= 1"));
        }
        if self.return_window == 0 {
            return Err(Error::config("return_window", "must be >= 1"));
        }
        let needs_skills = self.mode == Mode::TrainHrl
            || (matches!(self.mode, Mode::Eval | Mode::ExportTraj) && matches!(self.policy, PolicyKind::Hrl | PolicyKind::Skill));
        if needs_skills && self.skills_path.is_none() {
            return Err(Error::config("skills_path", format!("required for {} with this policy", self.mode)));
        }
        if self.policy == PolicyKind::Hrl && matches!(self.mode, Mode::Eval | Mode::ExportTraj) && self.checkpoint.is_none() {
            return Err(Error::config("checkpoint", "required for the hrl policy"));
        }
        if self.policy == PolicyKind::Fixed && self.fixed_action >= MacroAction::COUNT {
            return Err(Error::config("fixed_action", "must be a macro-action index in 0..6"));
        }
        Ok(())
    }

    /// Output directory: the configured one, else `<root>/<mode>-seed<seed>`
    /// under `$MERGE_HRL_OUT` (default `runs`).
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| {
            let root = std::env::var_os(OUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            root.join(format!("{}-seed{}", self.mode, self.seed))
        })
    }

    pub fn simulator(&self) -> Result<Simulator> {
        Simulator::new(self.env, self.geometry)
    }

    pub fn task(&self) -> Result<DrivingTask> {
        Ok(DrivingTask::new(self.simulator()?, self.observation, self.reward))
    }
}

/// Seed of the evaluation streams, kept apart from the training stream.
pub fn eval_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x0E7A_1000_0000_0001
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub env_steps: u64,
    pub success_rate: f64,
    pub success_running_avg: f64,
    pub episodes: usize,
    pub finished: usize,
    pub collided: usize,
    pub ramp_overrun: usize,
    pub timed_out: usize,
}

impl EvalRow {
    fn new(env_steps: u64, s: &EvalSummary) -> Self {
        Self {
            env_steps,
            success_rate: s.success_rate(),
            success_running_avg: 0.0,
            episodes: s.episodes,
            finished: s.finished,
            collided: s.collided,
            ramp_overrun: s.ramp_overrun,
            timed_out: s.timed_out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub env_steps: u64,
    pub steps: usize,
    pub decisions: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub return_running_avg: f64,
    pub epsilon: f64,
    pub outcome: &'static str,
    pub loss_mean: f64,
}

fn episode_rows(stats: &[DqnEpisodeStats], window: usize) -> Vec<EpisodeRow> {
    let returns: Vec<f64> = stats.iter().map(|s| s.episode_return).collect();
    let avg = running_average(&returns, window);
    stats
        .iter()
        .zip(avg)
        .map(|(s, a)| EpisodeRow {
            episode: s.episode,
            env_steps: s.env_steps,
            steps: s.steps,
            decisions: s.decisions,
            episode_return: s.episode_return,
            return_running_avg: a,
            epsilon: s.epsilon,
            outcome: s.outcome.as_str(),
            loss_mean: s.loss_mean,
        })
        .collect()
}

fn finish_eval_rows(rows: &mut [EvalRow], window: usize) {
    let rates: Vec<f64> = rows.iter().map(|r| r.success_rate).collect();
    for (r, a) in rows.iter_mut().zip(running_average(&rates, window)) {
        r.success_running_avg = a;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub mode: Mode,
    pub out_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    /// Final evaluation success rate, when the mode evaluates.
    pub success_rate: Option<f64>,
}

/// Result of [`train_skills_run`]: the library plus the trainer for diagnostics.
pub struct SkillRun {
    pub library: SkillLibrary,
    pub trainer: SkillTrainer,
    pub stats: Vec<SkillEpisodeStats>,
}

pub fn train_skills_run(cfg: &RunConfig, rng: &mut SimRng) -> Result<SkillRun> {
    let mut trainer = SkillTrainer::new(cfg.skills, cfg.simulator()?, cfg.observation, rng)?;
    let mut stats = Vec::with_capacity(cfg.skills.episodes);
    trainer.train(cfg.skills.episodes, rng, |s| stats.push(s.clone()))?;
    Ok(SkillRun { library: trainer.library(), trainer, stats })
}

/// Training curves of a DQN run.
pub struct DqnTrainingRun {
    pub agent: DqnAgent,
    pub episodes: Vec<DqnEpisodeStats>,
    pub evals: Vec<EvalRow>,
}

impl DqnTrainingRun {
    pub fn success_series(&self) -> Vec<f64> {
        self.evals.iter().map(|r| r.success_rate).collect()
    }
}

fn eval_every(cfg: &RunConfig) -> Option<u64> {
    (cfg.eval_every > 0).then_some(cfg.eval_every)
}

pub fn train_low_run(cfg: &RunConfig, rng: &mut SimRng) -> Result<DqnTrainingRun> {
    let task = cfg.task()?;
    let seed = eval_seed(cfg.seed);
    let mut evals = Vec::new();
    let mut episodes = Vec::new();
    let run = train_low_level(
        &cfg.dqn,
        &task,
        rng,
        eval_every(cfg),
        |steps, agent| {
            let mut d = GreedyLowLevel::new(agent, task.observer);
            evals.push(EvalRow::new(steps, &evaluate(&mut d, &task.sim, cfg.eval_episodes, seed)?));
            Ok(())
        },
        |s| episodes.push(s.clone()),
    )?;
    finish_eval_rows(&mut evals, cfg.eval_window);
    Ok(DqnTrainingRun { agent: run.agent, episodes, evals })
}

pub fn train_hrl_run(cfg: &RunConfig, skills: &SkillLibrary, rng: &mut SimRng) -> Result<DqnTrainingRun> {
    let task = cfg.task()?;
    let seed = eval_seed(cfg.seed);
    let mut evals = Vec::new();
    let mut episodes = Vec::new();
    let run = train_high_level(
        &cfg.dqn,
        &task,
        skills,
        rng,
        eval_every(cfg),
        |steps, agent| {
            let mut d = GreedyHighLevel::new(agent, skills, task.observer, cfg.dqn.n_step, true);
            evals.push(EvalRow::new(steps, &evaluate(&mut d, &task.sim, cfg.eval_episodes, seed)?));
            Ok(())
        },
        |s| episodes.push(s.clone()),
    )?;
    finish_eval_rows(&mut evals, cfg.eval_window);
    Ok(DqnTrainingRun { agent: run.agent, episodes, evals })
}

fn load_skills(cfg: &RunConfig, task: &DrivingTask) -> Result<SkillLibrary> {
    let path = cfg.skills_path.as_ref().ok_or_else(|| Error::config("skills_path", "not set"))?;
    let lib = SkillLibrary::load(path)?;
    lib.verify(&task.skill_fingerprint(lib.n_skills()))?;
    Ok(lib)
}

struct Policies {
    low: Option<DqnAgent>,
    high: Option<DqnAgent>,
    skills: Option<SkillLibrary>,
}

impl Policies {
    fn load(cfg: &RunConfig, task: &DrivingTask) -> Result<Self> {
        let mut p = Policies { low: None, high: None, skills: None };
        match cfg.policy {
            PolicyKind::Scripted | PolicyKind::Fixed => {}
            PolicyKind::Low => {
                let net = match &cfg.checkpoint {
                    Some(path) => load_mlp(path, Some(NetRole::LowDqn))?,
                    None => {
                        let mut rng = SimRng::seed_from_u64(cfg.seed);
                        crate::Mlp::standard(N_FEATURES, MacroAction::COUNT, &mut rng)
                    }
                };
                if net.input_dim() != N_FEATURES || net.output_dim() != MacroAction::COUNT {
                    return Err(Error::Shape { expected: MacroAction::COUNT, got: net.output_dim() });
                }
                p.low = Some(DqnAgent::from_net(net, cfg.dqn));
            }
            PolicyKind::Hrl | PolicyKind::Skill => {
                let lib = load_skills(cfg, task)?;
                if cfg.policy == PolicyKind::Hrl {
                    let path = cfg.checkpoint.as_ref().ok_or_else(|| Error::config("checkpoint", "not set"))?;
                    let net = load_mlp(path, Some(NetRole::HighDqn))?;
                    if net.output_dim() != lib.n_skills() {
                        return Err(Error::Shape { expected: lib.n_skills(), got: net.output_dim() });
                    }
                    p.high = Some(DqnAgent::from_net(net, cfg.dqn));
                } else if cfg.skill_index >= lib.n_skills() {
                    return Err(Error::config("skill_index", format!("library has {} skills", lib.n_skills())));
                }
                p.skills = Some(lib);
            }
        }
        Ok(p)
    }

    fn driver<'a>(&'a self, cfg: &RunConfig, task: &DrivingTask) -> Box<dyn Driver + 'a> {
        match cfg.policy {
            PolicyKind::Scripted => Box::new(ScriptedMergeDriver::new(task.sim)),
            PolicyKind::Fixed => Box::new(crate::dqn::FixedMacroDriver(MacroAction::ALL[cfg.fixed_action])),
            PolicyKind::Low => Box::new(GreedyLowLevel::new(self.low.as_ref().expect("loaded"), task.observer)),
            PolicyKind::Hrl => Box::new(GreedyHighLevel::new(
                self.high.as_ref().expect("loaded"),
                self.skills.as_ref().expect("loaded"),
                task.observer,
                cfg.dqn.n_step,
                true,
            )),
            PolicyKind::Skill => Box::new(SkillDriver {
                skills: self.skills.as_ref().expect("loaded"),
                z: cfg.skill_index,
                observer: task.observer,
                deterministic: true,
            }),
        }
    }
}

/// Executes the configured mode and writes its artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let out = cfg.resolved_out_dir();
    std::fs::create_dir_all(&out)?;
    let mut rng = SimRng::seed_from_u64(cfg.seed);
    let mut artifacts = Vec::new();
    let mut success_rate = None;
    let path = |name: &str| out.join(name);

    match cfg.mode {
        Mode::TrainSkills => {
            let r = train_skills_run(cfg, &mut rng)?;
            r.library.save(path(files::SKILLS))?;
            output::write_csv(&path(files::SKILL_METRICS), &r.stats)?;
            artifacts.extend([path(files::SKILLS), path(files::SKILL_METRICS)]);
        }
        Mode::TrainLow | Mode::TrainHrl => {
            let (r, name, role) = if cfg.mode == Mode::TrainLow {
                (train_low_run(cfg, &mut rng)?, files::LOW_DQN, NetRole::LowDqn)
            } else {
                let lib = load_skills(cfg, &cfg.task()?)?;
                (train_hrl_run(cfg, &lib, &mut rng)?, files::HIGH_DQN, NetRole::HighDqn)
            };
            save_mlp(path(name), &r.agent.online, role)?;
            output::write_csv(&path(files::EPISODES), &episode_rows(&r.episodes, cfg.return_window))?;
            output::write_csv(&path(files::EVAL), &r.evals)?;
            success_rate = r.evals.last().map(|e| e.success_rate);
            artifacts.extend([path(name), path(files::EPISODES), path(files::EVAL)]);
        }
        Mode::Eval => {
            let task = cfg.task()?;
            let policies = Policies::load(cfg, &task)?;
            let mut driver = policies.driver(cfg, &task);
            let s = evaluate(driver.as_mut(), &task.sim, cfg.eval_episodes, eval_seed(cfg.seed))?;
            let mut rows = vec![EvalRow::new(0, &s)];
            finish_eval_rows(&mut rows, cfg.eval_window);
            output::write_csv(&path(files::EVAL), &rows)?;
            success_rate = Some(s.success_rate());
            artifacts.push(path(files::EVAL));
        }
        Mode::ExportTraj => {
            let task = cfg.task()?;
            let policies = Policies::load(cfg, &task)?;
            let mut driver = policies.driver(cfg, &task);
            let mut w = output::TrajectoryWriter::create(&path(files::TRAJECTORY))?;
            let seed = eval_seed(cfg.seed);
            for ep in 0..cfg.export_episodes {
                let mut ep_rng = episode_rng(seed, ep as u64);
                let mut err = None;
                let end = play_episode(driver.as_mut(), &task.sim, &mut ep_rng, |s, input, choice| {
                    if err.is_none() {
                        err = w.frame(ep, s, Some(input), choice).err();
                    }
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
                w.frame(ep, &end, None, None)?;
            }
            w.finish()?;
            artifacts.push(path(files::TRAJECTORY));
        }
    }

    output::write_manifest(
        &path(files::MANIFEST),
        cfg,
        &[("crate.version", env!("CARGO_PKG_VERSION").to_owned())],
    )?;
    artifacts.push(path(files::MANIFEST));
    Ok(RunReport { mode: cfg.mode, out_dir: out, artifacts, success_rate })
}
