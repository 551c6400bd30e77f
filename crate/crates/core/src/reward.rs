//! Driver reward: a weighted sum of collision, headway, velocity, effort,
//! not-merging and stopping features.

use serde::{Deserialize, Serialize};

use crate::env::{Lane, Outcome};
use crate::macro_action::MacroAction;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_c: f64,
    pub w_h: f64,
    pub w_m: f64,
    pub w_e: f64,
    pub w_nm: f64,
    pub w_s: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_c: -100.0,
            w_h: 1.0,
            w_m: 1.0,
            w_e: 1.0,
            w_nm: 0.5,
            w_s: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            w_c: self.w_c * k,
            w_h: self.w_h * k,
            w_m: self.w_m * k,
            w_e: self.w_e * k,
            w_nm: self.w_nm * k,
            w_s: self.w_s * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadwayConstants {
    pub d_close: f64,
    pub d_nom: f64,
    pub d_far: f64,
    pub v_nom: f64,
    pub v_max: f64,
}

impl Default for HeadwayConstants {
    fn default() -> Self {
        Self {
            d_close: 2.3,
            d_nom: 11.9,
            d_far: 21.5,
            v_nom: 5.9,
            v_max: 29.16,
        }
    }
}

/// Which form of the headway and velocity features to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermShape {
    /// Piecewise forms with their jumps at the close headway and nominal speed.
    #[default]
    Printed,
    /// Continuous variants peaking at the nominal headway and speed.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub constants: HeadwayConstants,
    pub shape: TermShape,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardInput {
    pub outcome: Outcome,
    pub d_front: f64,
    pub v_agent: f64,
    /// Macro-action label; `None` for agents emitting continuous controls.
    pub act: Option<MacroAction>,
    pub lane: Lane,
}

pub fn headway_term<T: Scalar>(d_front: T, c: &HeadwayConstants) -> T {
    let (close, nom, far) = (T::lit(c.d_close), T::lit(c.d_nom), T::lit(c.d_far));
    let spread = nom - close;
    if d_front < close {
        -T::one()
    } else if d_front < nom {
        T::one() - T::lit(2.0) * (d_front - nom) / spread
    } else if d_front < far {
        (d_front - nom) / spread
    } else {
        T::zero()
    }
}

pub fn headway_term_continuous<T: Scalar>(d_front: T, c: &HeadwayConstants) -> T {
    let (close, nom, far) = (T::lit(c.d_close), T::lit(c.d_nom), T::lit(c.d_far));
    if d_front < close {
        -T::one()
    } else if d_front < nom {
        -T::one() + T::lit(2.0) * (d_front - close) / (nom - close)
    } else if d_front < far {
        T::one() - (d_front - nom) / (far - nom)
    } else {
        T::zero()
    }
}

pub fn velocity_term<T: Scalar>(v: T, c: &HeadwayConstants) -> T {
    let (nom, max) = (T::lit(c.v_nom), T::lit(c.v_max));
    if v <= nom {
        (v - nom) / nom
    } else {
        (max - v) / (max - nom)
    }
}

pub fn velocity_term_continuous<T: Scalar>(v: T, c: &HeadwayConstants) -> T {
    let (nom, max) = (T::lit(c.v_nom), T::lit(c.v_max));
    if v <= nom {
        T::lit(2.0) * v / nom - T::one()
    } else {
        (max - v) / (max - nom)
    }
}

pub fn effort_term<T: Scalar>(act: Option<MacroAction>) -> T {
    match act {
        Some(MacroAction::Accelerate | MacroAction::Decelerate) => T::lit(-0.25),
        Some(MacroAction::HardAccelerate | MacroAction::HardDecelerate) => -T::one(),
        _ => T::zero(),
    }
}

pub fn stopping_term<T: Scalar>(act: Option<MacroAction>, d_front: T, v: T, c: &HeadwayConstants) -> T {
    let hard_acc = act == Some(MacroAction::HardAccelerate);
    if !hard_acc && d_front > T::lit(c.d_far) && v < T::lit(c.v_nom) {
        -T::one()
    } else {
        T::zero()
    }
}

pub fn not_merging_term<T: Scalar>(lane: Lane) -> T {
    match lane {
        Lane::Ramp => -T::one(),
        Lane::Highway => T::zero(),
    }
}

pub fn collision_term<T: Scalar>(outcome: Outcome) -> T {
    match outcome {
        Outcome::Collided | Outcome::RampOverrun => T::one(),
        _ => T::zero(),
    }
}

/// The six feature values `[c, h, m, e, nm, s]` for one frame.
pub fn features(input: &RewardInput, cfg: &RewardConfig) -> [f64; 6] {
    let c = &cfg.constants;
    let (h, m) = match cfg.shape {
        TermShape::Printed => (headway_term(input.d_front, c), velocity_term(input.v_agent, c)),
        TermShape::Continuous => (
            headway_term_continuous(input.d_front, c),
            velocity_term_continuous(input.v_agent, c),
        ),
    };
    [
        collision_term(input.outcome),
        h,
        m,
        effort_term(input.act),
        not_merging_term(input.lane),
        stopping_term(input.act, input.d_front, input.v_agent, c),
    ]
}

pub fn driver_reward(input: &RewardInput, cfg: &RewardConfig) -> f64 {
    let f = features(input, cfg);
    let w = &cfg.weights;
    f[0] * w.w_c + f[1] * w.w_h + f[2] * w.w_m + f[3] * w.w_e + f[4] * w.w_nm + f[5] * w.w_s
}
