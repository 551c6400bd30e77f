use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sac::{push_state_skill, skill_action_box};
use crate::env::{ControlInput, EnvConfig};
use crate::error::{Error, Result};
use crate::neural::{deterministic_action, sample_squashed_gaussian, MlpCheckpoint, NetRole};
use crate::observation::{ObservationConfig, N_BINS, N_FEATURES};
use crate::Mlp;

pub const FORMAT: &str = "merge-hrl/skills";
pub const VERSION: u32 = 1;

/// Identifies the observation and action interface a skill policy was trained on.
pub fn fingerprint(obs: &ObservationConfig, env: &EnvConfig, n_skills: usize) -> String {
    let b = skill_action_box();
    format!(
        "obs{N_FEATURES}x{N_BINS}:v_max={}:x_env={}:d_max={};act=[{},{}]x[{},{}]:a_max={};skills={n_skills}",
        obs.v_max, obs.x_env, obs.d_max, b.low[0], b.high[0], b.low[1], b.high[1], env.a_max
    )
}

/// Frozen skill-conditioned policy; fixing the skill index yields one skill.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillLibrary {
    policy: Mlp,
    n_skills: usize,
    a_max: f64,
    fingerprint: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryFile {
    format: String,
    version: u32,
    n_skills: usize,
    a_max: f64,
    fingerprint: String,
    policy: MlpCheckpoint<f64>,
}

impl SkillLibrary {
    pub fn new(policy: Mlp, n_skills: usize, a_max: f64, fingerprint: String) -> Result<Self> {
        if policy.input_dim() != N_FEATURES + n_skills || policy.output_dim() != 4 {
            return Err(Error::Shape {
                expected: N_FEATURES + n_skills,
                got: policy.input_dim(),
            });
        }
        Ok(Self { policy, n_skills, a_max, fingerprint })
    }

    pub fn n_skills(&self) -> usize {
        self.n_skills
    }

    pub fn policy(&self) -> &Mlp {
        &self.policy
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn verify(&self, expected: &str) -> Result<()> {
        if self.fingerprint == expected {
            Ok(())
        } else {
            Err(Error::FingerprintMismatch {
                library: self.fingerprint.clone(),
                environment: expected.to_owned(),
            })
        }
    }

    /// Control from skill `z` at encoded state `s`; the mean action when
    /// `deterministic`.
    pub fn act<R: Rng + ?Sized>(&self, s: &[f64; N_FEATURES], z: usize, rng: &mut R, deterministic: bool) -> ControlInput {
        assert!(z < self.n_skills, "skill index out of range");
        let mut input = Vec::with_capacity(N_FEATURES + self.n_skills);
        push_state_skill(&mut input, s, z, self.n_skills);
        let out = self.policy.forward(&input).expect("policy width");
        let bounds = skill_action_box();
        let action = if deterministic {
            deterministic_action(&out[0..2], &bounds)
        } else {
            sample_squashed_gaussian(&out[0..2], &out[2..4], &bounds, rng).action
        };
        ControlInput::new(action[0] * self.a_max, action[1])
    }

    /// [`act`](Self::act) after checking the caller's environment fingerprint.
    pub fn act_checked<R: Rng + ?Sized>(
        &self,
        expected: &str,
        s: &[f64; N_FEATURES],
        z: usize,
        rng: &mut R,
        deterministic: bool,
    ) -> Result<ControlInput> {
        self.verify(expected)?;
        Ok(self.act(s, z, rng, deterministic))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = LibraryFile {
            format: FORMAT.into(),
            version: VERSION,
            n_skills: self.n_skills,
            a_max: self.a_max,
            fingerprint: self.fingerprint.clone(),
            policy: MlpCheckpoint::new(&self.policy, NetRole::Policy),
        };
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: LibraryFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "not a skill library: {} v{}",
                file.format, file.version
            )));
        }
        let policy = file.policy.into_mlp(Some(NetRole::Policy))?;
        Self::new(policy, file.n_skills, file.a_max, file.fingerprint)
    }
}
