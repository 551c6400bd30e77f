//! Ego-centric observation: six neighbor slots, normalization to `[0, 1]` and
//! 10-bin quantization.
//!
//! Feature order is `[v_agent, x_agent, (v_rel, d_rel) x 6]` with slots in the
//! order of [`Slot::ALL`]. Relative velocity is `v_ego - v_other`; relative
//! distance is the bumper gap for real vehicles and the raw distance to the
//! ramp end for the phantom stopped vehicle placed there.

use serde::{Deserialize, Serialize};

use crate::env::{EnvState, Lane, RoadGeometry};
use crate::error::{Error, Result};

pub const N_FEATURES: usize = 14;
pub const N_BINS: usize = 10;
pub const N_SLOTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Front,
    Back,
    LeftFront,
    LeftBack,
    RightFront,
    RightBack,
}

impl Slot {
    pub const ALL: [Slot; N_SLOTS] = [
        Slot::Front,
        Slot::Back,
        Slot::LeftFront,
        Slot::LeftBack,
        Slot::RightFront,
        Slot::RightBack,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborSlot {
    pub slot: Slot,
    pub v_rel: f64,
    pub d_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawObservation {
    pub v_agent: f64,
    pub x_agent: f64,
    pub slots: [NeighborSlot; N_SLOTS],
}

impl RawObservation {
    pub fn slot(&self, slot: Slot) -> &NeighborSlot {
        &self.slots[slot as usize]
    }

    /// Gap to whatever is in front of the ego in its own lane.
    pub fn d_front(&self) -> f64 {
        self.slot(Slot::Front).d_rel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    pub v_max: f64,
    pub x_env: f64,
    pub d_max: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            v_max: 29.16,
            x_env: 360.0,
            d_max: 30.0,
        }
    }
}

impl ObservationConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("observation.v_max", self.v_max),
            ("observation.x_env", self.x_env),
            ("observation.d_max", self.d_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedObservation(pub [f64; N_FEATURES]);

/// Bin indices in `0..10` for each of the 14 features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizedObservation(pub [u8; N_FEATURES]);

impl QuantizedObservation {
    /// Bin midpoints `0.05 + 0.1 k`, the encoding every network consumes.
    pub fn encode(&self) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for (o, &k) in out.iter_mut().zip(self.0.iter()) {
            *o = bin_midpoint(k);
        }
        out
    }
}

#[inline]
pub fn bin_midpoint(k: u8) -> f64 {
    0.05 + 0.1 * k as f64
}

#[inline]
pub fn bin_of(value: f64) -> u8 {
    let k = (value * N_BINS as f64).floor();
    k.clamp(0.0, (N_BINS - 1) as f64) as u8
}

/// Closest vehicle in `lane` on the requested side, as `(bumper_gap, v_rel)`.
fn nearest(state: &EnvState, lane: Lane, ahead: bool, length: f64) -> Option<(f64, f64)> {
    let ego = &state.ego;
    state
        .others
        .iter()
        .filter(|o| o.lane == lane && ((o.x >= ego.x) == ahead))
        .map(|o| {
            let dx = (o.x - ego.x).abs();
            ((dx - length).max(0.0), dx, ego.v - o.v)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(gap, _, v_rel)| (gap, v_rel))
}

pub fn extract_neighbors(state: &EnvState, geometry: &RoadGeometry, cfg: &ObservationConfig) -> RawObservation {
    let ego = &state.ego;
    let default = |slot| NeighborSlot {
        slot,
        v_rel: ego.v,
        d_rel: cfg.d_max,
    };
    // anything at or beyond the observable range is reported as absent
    let fill = |slot, found: Option<(f64, f64)>| match found {
        Some((d_rel, v_rel)) if d_rel < cfg.d_max => NeighborSlot { slot, v_rel, d_rel },
        _ => default(slot),
    };
    let len = geometry.vehicle_length;

    let mut front = nearest(state, ego.lane, true, len);
    if ego.lane == Lane::Ramp {
        let phantom = ((geometry.ramp_end - ego.x).max(0.0), ego.v);
        if front.map_or(true, |(d, _)| phantom.0 < d) {
            front = Some(phantom);
        }
    }
    let back = nearest(state, ego.lane, false, len);

    // the ramp lies to the right of the highway
    let (left, right) = match ego.lane {
        Lane::Ramp => (
            (nearest(state, Lane::Highway, true, len), nearest(state, Lane::Highway, false, len)),
            (None, None),
        ),
        Lane::Highway => (
            (None, None),
            (nearest(state, Lane::Ramp, true, len), nearest(state, Lane::Ramp, false, len)),
        ),
    };

    RawObservation {
        v_agent: ego.v,
        x_agent: ego.x,
        slots: [
            fill(Slot::Front, front),
            fill(Slot::Back, back),
            fill(Slot::LeftFront, left.0),
            fill(Slot::LeftBack, left.1),
            fill(Slot::RightFront, right.0),
            fill(Slot::RightBack, right.1),
        ],
    }
}

pub fn normalize(raw: &RawObservation, cfg: &ObservationConfig) -> NormalizedObservation {
    let v_n = |v_rel: f64| ((v_rel + cfg.v_max) / (2.0 * cfg.v_max)).clamp(0.0, 1.0);
    let d_n = |d: f64| if d < cfg.d_max { (d / cfg.d_max).max(0.0) } else { 1.0 };
    let x_n = if raw.x_agent < cfg.x_env { (raw.x_agent / cfg.x_env).max(0.0) } else { 1.0 };

    let mut out = [0.0; N_FEATURES];
    out[0] = (raw.v_agent / cfg.v_max).clamp(0.0, 1.0);
    out[1] = x_n;
    for (k, s) in raw.slots.iter().enumerate() {
        out[2 + 2 * k] = v_n(s.v_rel);
        out[3 + 2 * k] = d_n(s.d_rel);
    }
    NormalizedObservation(out)
}

pub fn quantize(n: &NormalizedObservation) -> QuantizedObservation {
    let mut out = [0u8; N_FEATURES];
    for (o, &v) in out.iter_mut().zip(n.0.iter()) {
        *o = bin_of(v);
    }
    QuantizedObservation(out)
}

/// Full pipeline from simulator state to quantized observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observer {
    pub geometry: RoadGeometry,
    pub config: ObservationConfig,
}

impl Observer {
    pub fn new(geometry: RoadGeometry, config: ObservationConfig) -> Self {
        Self { geometry, config }
    }

    pub fn raw(&self, state: &EnvState) -> RawObservation {
        extract_neighbors(state, &self.geometry, &self.config)
    }

    pub fn observe(&self, state: &EnvState) -> QuantizedObservation {
        quantize(&normalize(&self.raw(state), &self.config))
    }

    pub fn encode(&self, state: &EnvState) -> [f64; N_FEATURES] {
        self.observe(state).encode()
    }
}
