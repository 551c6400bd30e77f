use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use merge_hrl::dqn::TargetRule;
use merge_hrl::harness::{self, Mode, PolicyKind, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "merge-hrl", version, about = "Skill-based hierarchical RL for on-ramp merging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Discover skills with the discriminator reward and save the library.
    TrainSkills(Common),
    /// Train the macro-action DQN baseline.
    TrainLow(Common),
    /// Train the skill-selecting high-level DQN over a skill library.
    TrainHrl(Common),
    /// Evaluate a policy and write its success rate.
    Eval(Common),
    /// Write per-frame trajectories of a policy for rendering.
    ExportTraj(Common),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    Double,
    Alg1,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Scripted,
    Low,
    Hrl,
    Skill,
    Fixed,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $MERGE_HRL_OUT/<mode>-seed<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training episodes for the selected trainer.
    #[arg(long)]
    episodes: Option<usize>,
    /// Frames per high-level skill choice.
    #[arg(long)]
    n_step: Option<usize>,
    /// Skill library checkpoint.
    #[arg(long)]
    skills: Option<PathBuf>,
    #[arg(long, value_enum)]
    target_rule: Option<RuleArg>,
    /// Training environment steps between evaluations (0 disables).
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Policy for eval and export-traj.
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Network checkpoint for eval and export-traj.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn build_config(mode: Mode, c: Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunConfig::default(),
    };
    cfg.mode = mode;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = c.out {
        cfg.out_dir = Some(o);
    }
    if let Some(e) = c.episodes {
        match mode {
            Mode::TrainSkills => cfg.skills.episodes = e,
            Mode::TrainLow | Mode::TrainHrl => cfg.dqn.episodes = e,
            Mode::Eval => cfg.eval_episodes = e,
            Mode::ExportTraj => cfg.export_episodes = e,
        }
    }
    if let Some(n) = c.n_step {
        cfg.dqn.n_step = n;
    }
    if let Some(s) = c.skills {
        cfg.skills_path = Some(s);
    }
    if let Some(r) = c.target_rule {
        cfg.dqn.target_rule = match r {
            RuleArg::Double => TargetRule::Double,
            RuleArg::Alg1 => TargetRule::Alg1Max,
        };
    }
    if let Some(e) = c.eval_every {
        cfg.eval_every = e;
    }
    if let Some(e) = c.eval_episodes {
        cfg.eval_episodes = e;
    }
    if let Some(p) = c.policy {
        cfg.policy = match p {
            PolicyArg::Scripted => PolicyKind::Scripted,
            PolicyArg::Low => PolicyKind::Low,
            PolicyArg::Hrl => PolicyKind::Hrl,
            PolicyArg::Skill => PolicyKind::Skill,
            PolicyArg::Fixed => PolicyKind::Fixed,
        };
    }
    if let Some(p) = c.checkpoint {
        cfg.checkpoint = Some(p);
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::TrainSkills(c) => (Mode::TrainSkills, c),
        Command::TrainLow(c) => (Mode::TrainLow, c),
        Command::TrainHrl(c) => (Mode::TrainHrl, c),
        Command::Eval(c) => (Mode::Eval, c),
        Command::ExportTraj(c) => (Mode::ExportTraj, c),
    };
    let result = build_config(mode, common).and_then(|cfg| Ok(harness::run(&cfg)?));
    match result {
        Ok(report) => {
            if let Some(rate) = report.success_rate {
                println!("success_rate = {rate}");
            }
            for a in &report.artifacts {
                println!("wrote {}", a.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
