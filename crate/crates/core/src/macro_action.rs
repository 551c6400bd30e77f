//! Stochastic macro-actions of the low-level agent.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::env::ControlInput;

/// Rate of the exponential draw added on top of the base acceleration.
pub const EXP_RATE: f64 = 0.75;
/// Scale of the Laplace draw used by `Maintain`.
pub const LAPLACE_SCALE: f64 = 0.1;
/// Truncation bound of the `Maintain` acceleration.
pub const MAINTAIN_BOUND: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MacroAction {
    Maintain,
    Accelerate,
    Decelerate,
    HardAccelerate,
    HardDecelerate,
    Merge,
}

impl MacroAction {
    pub const ALL: [MacroAction; 6] = [
        MacroAction::Maintain,
        MacroAction::Accelerate,
        MacroAction::Decelerate,
        MacroAction::HardAccelerate,
        MacroAction::HardDecelerate,
        MacroAction::Merge,
    ];
    pub const COUNT: usize = 6;

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MacroAction::Maintain => "Maintain",
            MacroAction::Accelerate => "Accelerate",
            MacroAction::Decelerate => "Decelerate",
            MacroAction::HardAccelerate => "Hard-Accelerate",
            MacroAction::HardDecelerate => "Hard-Decelerate",
            MacroAction::Merge => "Merge",
        }
    }

    /// Acceleration interval every realization falls into.
    pub fn accel_bounds(self) -> (f64, f64) {
        match self {
            MacroAction::Maintain => (-MAINTAIN_BOUND, MAINTAIN_BOUND),
            MacroAction::Accelerate => (0.25, 2.0),
            MacroAction::Decelerate => (-2.0, -0.25),
            MacroAction::HardAccelerate => (2.0, 3.0),
            MacroAction::HardDecelerate => (-4.5, -2.0),
            MacroAction::Merge => (0.0, 0.0),
        }
    }

    /// Control produced by this macro-action for a given random draw: the
    /// exponential sample for the four (hard-)accelerate/decelerate actions,
    /// the truncated Laplace sample for `Maintain`, ignored for `Merge`.
    pub fn control_from_draw(self, draw: f64) -> ControlInput {
        let a = match self {
            MacroAction::Maintain => draw,
            MacroAction::Accelerate => (0.25 + draw).min(2.0),
            MacroAction::Decelerate => (-0.25 - draw).max(-2.0),
            MacroAction::HardAccelerate => (2.0 + draw).min(3.0),
            MacroAction::HardDecelerate => (-2.0 - draw).max(-4.5),
            MacroAction::Merge => return ControlInput::new(0.0, 1.0),
        };
        ControlInput::new(a, 0.0)
    }

    pub fn realize<R: Rng + ?Sized>(self, rng: &mut R) -> ControlInput {
        let draw = match self {
            MacroAction::Maintain => sample_truncated_laplace(rng, LAPLACE_SCALE, MAINTAIN_BOUND),
            MacroAction::Merge => 0.0,
            _ => Exp::new(EXP_RATE).expect("positive rate").sample(rng),
        };
        self.control_from_draw(draw)
    }
}

impl fmt::Display for MacroAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Zero-mean Laplace sample restricted to `[-bound, bound]` by rejection.
pub fn sample_truncated_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64, bound: f64) -> f64 {
    loop {
        // inverse CDF on u in (-1/2, 1/2)
        let u: f64 = rng.gen::<f64>() - 0.5;
        let x = -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        if x.is_finite() && x.abs() <= bound {
            return x;
        }
    }
}
