//! Two-lane on-ramp merging simulator.
//!
//! One ego vehicle starts on the ramp (lane 1) and must merge into the highway
//! lane (lane 0) inside the legal merging zone, then reach the end of the road
//! without colliding with any of the six highway vehicles.
//!
//! Positions are front-bumper longitudinal coordinates in meters.

mod kinematics;

pub use kinematics::{advance, step_kinematics};

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SimRng;

/// Number of environment (highway) vehicles.
pub const N_OTHERS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadGeometry {
    pub total_length: f64,
    pub ramp_end: f64,
    pub merge_zone_start: f64,
    pub lane_width: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        Self {
            total_length: 360.0,
            ramp_end: 240.0,
            merge_zone_start: 45.0,
            lane_width: 3.7,
            vehicle_length: 5.0,
            vehicle_width: 2.0,
        }
    }
}

impl RoadGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("geometry.total_length", self.total_length),
            ("geometry.ramp_end", self.ramp_end),
            ("geometry.merge_zone_start", self.merge_zone_start),
            ("geometry.lane_width", self.lane_width),
            ("geometry.vehicle_length", self.vehicle_length),
            ("geometry.vehicle_width", self.vehicle_width),
        ];
        for (key, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(key, "must be finite and > 0"));
            }
        }
        if !(self.merge_zone_start < self.ramp_end && self.ramp_end < self.total_length) {
            return Err(Error::config(
                "geometry.ramp_end",
                "require merge_zone_start < ramp_end < total_length",
            ));
        }
        Ok(())
    }
}

/// Binary lane id: 0 is the highway, 1 the on-ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lane {
    Highway,
    Ramp,
}

impl Lane {
    #[inline]
    pub fn id(self) -> u8 {
        match self {
            Lane::Highway => 0,
            Lane::Ramp => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub v: f64,
    pub lane: Lane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Running,
    Collided,
    RampOverrun,
    Finished,
    TimedOut,
}

impl Outcome {
    #[inline]
    pub fn is_terminal(self) -> bool {
        self != Outcome::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Running => "running",
            Outcome::Collided => "collided",
            Outcome::RampOverrun => "ramp_overrun",
            Outcome::Finished => "finished",
            Outcome::TimedOut => "timed_out",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub ego: VehicleState,
    pub others: [VehicleState; N_OTHERS],
    /// Number of frames simulated so far.
    pub frame: u32,
    /// Simulation clock, `frame * dt`.
    pub t: f64,
    pub outcome: Outcome,
}

/// Acceleration command and lane-change probability for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub a: f64,
    pub l_p: f64,
}

impl ControlInput {
    pub const IDLE: ControlInput = ControlInput { a: 0.0, l_p: 0.0 };

    pub fn new(a: f64, l_p: f64) -> Self {
        Self { a, l_p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvVehicleMode {
    /// Environment vehicles keep their initial speed.
    Constant,
    /// Environment vehicles follow their leader with the intelligent driver model.
    Idm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmParams {
    pub desired_speed: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub min_gap: f64,
    pub time_headway: f64,
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: 5.9,
            max_accel: 1.0,
            comfort_decel: 1.5,
            min_gap: 2.0,
            time_headway: 1.5,
            exponent: 4.0,
        }
    }
}

impl IdmParams {
    /// IDM acceleration for a follower at speed `v`. `leader` is the bumper gap
    /// and leader speed, `None` on a free road.
    pub fn acceleration(&self, v: f64, leader: Option<(f64, f64)>) -> f64 {
        let free = 1.0 - (v / self.desired_speed).powf(self.exponent);
        let interaction = match leader {
            Some((gap, v_lead)) => {
                let dv = v - v_lead;
                let desired = self.min_gap
                    + (v * self.time_headway
                        + v * dv / (2.0 * (self.max_accel * self.comfort_decel).sqrt()))
                    .max(0.0);
                let gap = gap.max(1e-3);
                (desired / gap).powi(2)
            }
            None => 0.0,
        };
        self.max_accel * (free - interaction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub dt: f64,
    pub t_max: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub ego_v0_range: (f64, f64),
    pub other_v0: f64,
    pub spacing: f64,
    pub spacing_jitter: f64,
    pub env_vehicle_mode: EnvVehicleMode,
    pub idm: IdmParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            t_max: 200.0,
            v_max: 29.16,
            a_max: 4.5,
            ego_v0_range: (2.3, 3.3),
            other_v0: 5.9,
            spacing: 50.0,
            spacing_jitter: 10.0,
            env_vehicle_mode: EnvVehicleMode::Constant,
            idm: IdmParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("env.dt", "must be > 0"));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::config("env.t_max", "must be > 0"));
        }
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(Error::config("env.v_max", "must be > 0"));
        }
        if !(self.a_max.is_finite() && self.a_max > 0.0) {
            return Err(Error::config("env.a_max", "must be > 0"));
        }
        let (lo, hi) = self.ego_v0_range;
        if !(0.0 <= lo && lo <= hi && hi <= self.v_max) {
            return Err(Error::config(
                "env.ego_v0_range",
                "must satisfy 0 <= lo <= hi <= v_max",
            ));
        }
        if !(0.0..=self.v_max).contains(&self.other_v0) {
            return Err(Error::config("env.other_v0", "must lie in [0, v_max]"));
        }
        if !(self.spacing_jitter >= 0.0 && self.spacing.is_finite()) {
            return Err(Error::config("env.spacing_jitter", "must be >= 0"));
        }
        Ok(())
    }

    /// Number of frames after which an episode times out.
    pub fn max_frames(&self) -> u32 {
        (self.t_max / self.dt - 1e-9).ceil() as u32
    }
}

/// Lane update rule for one frame. `u` is a fresh uniform draw on `[0, 1)`.
///
/// Highway vehicles never change lanes; ramp vehicles merge deterministically
/// for `l_p >= 0.8`, never for `l_p <= 0.2`, and with probability `l_p` between.
#[inline]
pub fn resolve_lane(lane: Lane, l_p: f64, u: f64) -> Lane {
    match lane {
        Lane::Highway => Lane::Highway,
        Lane::Ramp if l_p >= 0.8 => Lane::Highway,
        Lane::Ramp if l_p <= 0.2 => Lane::Ramp,
        Lane::Ramp if u < l_p => Lane::Highway,
        Lane::Ramp => Lane::Ramp,
    }
}

/// Classifies `state` after a frame. Collision outranks ramp overrun, which
/// outranks finishing, which outranks the time limit.
pub fn detect_terminal(state: &EnvState, geometry: &RoadGeometry, t_max: f64) -> Outcome {
    let ego = &state.ego;
    let collided = state
        .others
        .iter()
        .any(|o| o.lane == ego.lane && (o.x - ego.x).abs() < geometry.vehicle_length);
    if collided {
        Outcome::Collided
    } else if ego.lane == Lane::Ramp && ego.x >= geometry.ramp_end {
        Outcome::RampOverrun
    } else if ego.x >= geometry.total_length {
        Outcome::Finished
    } else if state.t >= t_max - 1e-9 {
        Outcome::TimedOut
    } else {
        Outcome::Running
    }
}

/// Anything that drives the ego vehicle one frame at a time.
pub trait Driver {
    /// Called before the first frame of every episode.
    fn begin_episode(&mut self) {}

    fn control(&mut self, state: &EnvState, rng: &mut SimRng) -> ControlInput;

    /// Discrete choice behind the latest control (macro-action or skill index).
    fn choice(&self) -> Option<usize> {
        None
    }
}

/// Validated simulator: configuration plus road geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulator {
    config: EnvConfig,
    geometry: RoadGeometry,
}

impl Simulator {
    pub fn new(config: EnvConfig, geometry: RoadGeometry) -> Result<Self> {
        config.validate()?;
        geometry.validate()?;
        Ok(Self { config, geometry })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn geometry(&self) -> &RoadGeometry {
        &self.geometry
    }

    /// Maps a unit draw onto the ego initial-speed range.
    pub fn ego_speed_from_unit(&self, u: f64) -> f64 {
        let (lo, hi) = self.config.ego_v0_range;
        lo + u * (hi - lo)
    }

    /// Episode start with explicit random draws: ego speed and the per-vehicle
    /// spacing jitter in meters.
    pub fn initial_state(&self, ego_v: f64, jitter: [f64; N_OTHERS]) -> EnvState {
        let mut others = [VehicleState {
            x: 0.0,
            v: self.config.other_v0,
            lane: Lane::Highway,
        }; N_OTHERS];
        for (i, (o, j)) in others.iter_mut().zip(jitter).enumerate() {
            o.x = self.config.spacing * i as f64 + j;
        }
        EnvState {
            ego: VehicleState {
                x: 0.0,
                v: ego_v,
                lane: Lane::Ramp,
            },
            others,
            frame: 0,
            t: 0.0,
            outcome: Outcome::Running,
        }
    }

    pub fn init_episode(&self, rng: &mut SimRng) -> EnvState {
        let ego_v = self.ego_speed_from_unit(rng.gen::<f64>());
        let j = self.config.spacing_jitter;
        let mut jitter = [0.0; N_OTHERS];
        for slot in jitter.iter_mut() {
            *slot = if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 };
        }
        self.initial_state(ego_v, jitter)
    }

    /// Control of environment vehicle `index` (0-based) for the next frame.
    pub fn env_vehicle_policy(&self, state: &EnvState, index: usize) -> ControlInput {
        match self.config.env_vehicle_mode {
            EnvVehicleMode::Constant => ControlInput::IDLE,
            EnvVehicleMode::Idm => {
                let me = &state.others[index];
                let leader = state
                    .others
                    .iter()
                    .enumerate()
                    .filter(|&(k, o)| k != index && o.lane == me.lane)
                    .map(|(_, o)| o)
                    .chain(std::iter::once(&state.ego).filter(|e| e.lane == me.lane))
                    .filter(|o| o.x > me.x)
                    .min_by(|a, b| a.x.total_cmp(&b.x))
                    .map(|o| ((o.x - me.x - self.geometry.vehicle_length).max(0.0), o.v));
                let a = self
                    .config
                    .idm
                    .acceleration(me.v, leader)
                    .clamp(-self.config.a_max, self.config.a_max);
                ControlInput::new(a, 0.0)
            }
        }
    }

    /// Advances every vehicle one frame. The ego lane-change probability is
    /// forced to zero before the legal merging zone.
    pub fn step(&self, state: &EnvState, ego_input: ControlInput, rng: &mut SimRng) -> Result<EnvState> {
        if state.outcome.is_terminal() {
            return Err(Error::TerminalStep(state.outcome));
        }
        let cfg = &self.config;
        let dt = cfg.dt;
        let mut next = *state;

        for (i, o) in next.others.iter_mut().enumerate() {
            let c = self.env_vehicle_policy(state, i);
            let (x, v) = advance(o.x, o.v, c.a, dt, cfg.v_max);
            o.x = x;
            o.v = v;
        }

        let a = ego_input.a.clamp(-cfg.a_max, cfg.a_max);
        let mut l_p = ego_input.l_p.clamp(0.0, 1.0);
        if state.ego.x < self.geometry.merge_zone_start {
            l_p = 0.0;
        }
        let (x, v) = advance(state.ego.x, state.ego.v, a, dt, cfg.v_max);
        let u: f64 = rng.gen();
        next.ego = VehicleState {
            x,
            v,
            lane: resolve_lane(state.ego.lane, l_p, u),
        };

        next.frame += 1;
        next.t = next.frame as f64 * dt;
        next.outcome = detect_terminal(&next, &self.geometry, cfg.t_max);
        Ok(next)
    }
}
