//! Fixed-topology feed-forward networks with reverse-mode gradients.

mod adam;
pub mod checkpoint;
pub mod gaussian;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_mlp, save_mlp, MlpCheckpoint, NetRole};
pub use gaussian::{
    backprop_sample, deterministic_action, log_density, sample_squashed_gaussian, sample_with_noise, ActionBox,
    SquashedSample, LOG_STD_MAX, LOG_STD_MIN,
};
pub use mlp::{xavier_init, Dense, Gradients, Mlp, Tape, HIDDEN, LEAKY_SLOPE};
