//! Versioned JSON checkpoint for a single network.
//!
//! Field order: `format`, `version`, `role`, `scalar`, `shape`,
//! `hidden_activation`, `negative_slope`, `layers`. Each layer holds
//! `in_dim`, `out_dim`, `weights` (input-major, `in_dim * out_dim` values) and
//! `biases` (`out_dim` values). Floats are written in shortest round-trip form,
//! so a save/load cycle is bitwise exact.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::mlp::{Dense, Mlp, LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT: &str = "merge-hrl/mlp";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetRole {
    Policy,
    Value,
    ValueTarget,
    Q1,
    Q2,
    Discriminator,
    LowDqn,
    HighDqn,
}

impl NetRole {
    pub fn as_str(self) -> &'static str {
        match self {
            NetRole::Policy => "policy",
            NetRole::Value => "value",
            NetRole::ValueTarget => "value_target",
            NetRole::Q1 => "q1",
            NetRole::Q2 => "q2",
            NetRole::Discriminator => "discriminator",
            NetRole::LowDqn => "low_dqn",
            NetRole::HighDqn => "high_dqn",
        }
    }
}

impl fmt::Display for NetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NetRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::Checkpoint(format!("unknown role `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct MlpCheckpoint<T> {
    pub format: String,
    pub version: u32,
    pub role: NetRole,
    pub scalar: String,
    pub shape: Vec<usize>,
    pub hidden_activation: String,
    pub negative_slope: f64,
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> MlpCheckpoint<T> {
    pub fn new(net: &Mlp<T>, role: NetRole) -> Self {
        Self {
            format: FORMAT.to_owned(),
            version: VERSION,
            role,
            scalar: T::NAME.to_owned(),
            shape: net.sizes(),
            hidden_activation: "leaky_relu".to_owned(),
            negative_slope: LEAKY_SLOPE,
            layers: net.layers().to_vec(),
        }
    }

    /// Validates the header and rebuilds the network.
    pub fn into_mlp(self, expected_role: Option<NetRole>) -> Result<Mlp<T>> {
        if self.format != FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format `{}`", self.format)));
        }
        if self.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        if self.scalar != T::NAME {
            return Err(Error::Checkpoint(format!("scalar `{}`, expected `{}`", self.scalar, T::NAME)));
        }
        if let Some(role) = expected_role {
            if role != self.role {
                return Err(Error::Checkpoint(format!("role `{}`, expected `{role}`", self.role)));
            }
        }
        let net = Mlp::from_layers(self.layers)?;
        if net.sizes() != self.shape {
            return Err(Error::Checkpoint(format!(
                "shape header {:?} disagrees with layers {:?}",
                self.shape,
                net.sizes()
            )));
        }
        Ok(net)
    }
}

pub fn save_mlp<T: Scalar>(path: impl AsRef<Path>, net: &Mlp<T>, role: NetRole) -> Result<()> {
    let text = serde_json::to_string(&MlpCheckpoint::new(net, role))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_mlp<T: Scalar>(path: impl AsRef<Path>, role: Option<NetRole>) -> Result<Mlp<T>> {
    let text = std::fs::read_to_string(path)?;
    let ckpt: MlpCheckpoint<T> = serde_json::from_str(&text)?;
    ckpt.into_mlp(role)
}
