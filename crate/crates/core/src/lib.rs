//! Hierarchical reinforcement learning on a highway on-ramp merging task.
//!
//! * [`env`]: two-lane merging simulator.
//! * [`observation`] and [`reward`]: the ego-centric quantized view and the
//!   driver reward.
//! * [`neural`]: small MLP engine with reverse-mode gradients and Adam,
//!   generic over the [`Scalar`] type.
//! * [`skills`]: skill discovery with a discriminator reward and soft
//!   actor-critic.
//! * [`dqn`]: double DQN for the macro-action baseline and the
//!   skill-selecting high-level agent.
//! * [`harness`]: configuration, evaluation, metrics and the run entry point.

pub mod dqn;
pub mod env;
pub mod error;
pub mod harness;
pub mod macro_action;
pub mod neural;
pub mod observation;
pub mod replay;
pub mod reward;
pub mod scalar;
pub mod skills;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Random stream used for every simulation and training run.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Double-precision network, the precision every agent trains in.
pub type Mlp = neural::Mlp<f64>;
pub type Gradients = neural::Gradients<f64>;
pub type Adam = neural::Adam<f64>;
pub type Tape = neural::Tape<f64>;

/// Single-precision variants, mainly for inference experiments.
pub type Mlp32 = neural::Mlp<f32>;
pub type Adam32 = neural::Adam<f32>;
