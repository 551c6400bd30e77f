use rand::SeedableRng;
use serde::Serialize;

use crate::env::{ControlInput, Driver, EnvState, Lane, Outcome, Simulator};
use crate::error::Result;
use crate::SimRng;

/// Random stream for episode `episode` of an evaluation seeded with `seed`.
/// Streams are independent, so episodes can be run in any order.
pub fn episode_rng(seed: u64, episode: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(episode);
    rng
}

/// Plays one episode to its end, reporting every frame as
/// `(state before the frame, control, choice)`.
pub fn play_episode(
    driver: &mut dyn Driver,
    sim: &Simulator,
    rng: &mut SimRng,
    mut on_frame: impl FnMut(&EnvState, ControlInput, Option<usize>),
) -> Result<EnvState> {
    driver.begin_episode();
    let mut state = sim.init_episode(rng);
    while !state.outcome.is_terminal() {
        let input = driver.control(&state, rng);
        on_frame(&state, input, driver.choice());
        state = sim.step(&state, input, rng)?;
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub finished: usize,
    pub collided: usize,
    pub ramp_overrun: usize,
    pub timed_out: usize,
}

impl EvalSummary {
    pub fn record(&mut self, outcome: Outcome) {
        self.episodes += 1;
        match outcome {
            Outcome::Finished => self.finished += 1,
            Outcome::Collided => self.collided += 1,
            Outcome::RampOverrun => self.ramp_overrun += 1,
            Outcome::TimedOut => self.timed_out += 1,
            Outcome::Running => unreachable!("episode recorded before it ended"),
        }
    }

    pub fn success_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.finished as f64 / self.episodes as f64
        }
    }
}

/// Runs `episodes` episodes of a frozen driver, each on its own stream derived
/// from `seed`.
pub fn evaluate(driver: &mut dyn Driver, sim: &Simulator, episodes: usize, seed: u64) -> Result<EvalSummary> {
    let mut summary = EvalSummary::default();
    for ep in 0..episodes {
        let mut rng = episode_rng(seed, ep as u64);
        let end = play_episode(driver, sim, &mut rng, |_, _, _| {})?;
        summary.record(end.outcome);
    }
    Ok(summary)
}

/// Trailing mean over at most `window` points.
pub fn running_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be >= 1");
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Hand-written merge policy used to check that the task is solvable: drive at
/// the highway speed, merge into the first gap of at least `min_gap` on both
/// sides once inside the merging zone, and stop short of the ramp end if no gap
/// appears.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedMerge {
    pub cruise_speed: f64,
    pub min_gap: f64,
    pub gain: f64,
    pub brake: f64,
    pub stop_margin: f64,
    pub accel_limits: (f64, f64),
}

impl Default for ScriptedMerge {
    fn default() -> Self {
        Self {
            cruise_speed: 5.9,
            min_gap: 11.9,
            gain: 2.0,
            brake: 2.0,
            stop_margin: 8.0,
            accel_limits: (-4.5, 3.0),
        }
    }
}

impl ScriptedMerge {
    /// Bumper gaps to the nearest highway vehicles ahead and behind the ego.
    fn highway_gaps(state: &EnvState, len: f64) -> (f64, f64) {
        let (mut front, mut back) = (f64::INFINITY, f64::INFINITY);
        for o in state.others.iter().filter(|o| o.lane == Lane::Highway) {
            if o.x >= state.ego.x {
                front = front.min(o.x - state.ego.x - len);
            } else {
                back = back.min(state.ego.x - o.x - len);
            }
        }
        (front, back)
    }

    fn track(&self, v: f64, target: f64) -> f64 {
        (self.gain * (target - v)).clamp(self.accel_limits.0, self.accel_limits.1)
    }
}

/// [`ScriptedMerge`] bound to a simulator's geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedMergeDriver {
    pub policy: ScriptedMerge,
    pub sim: Simulator,
}

impl ScriptedMergeDriver {
    pub fn new(sim: Simulator) -> Self {
        Self { policy: ScriptedMerge::default(), sim }
    }
}

impl Driver for ScriptedMergeDriver {
    fn control(&mut self, state: &EnvState, _rng: &mut SimRng) -> ControlInput {
        let p = &self.policy;
        let geo = self.sim.geometry();
        let ego = &state.ego;
        let (front, back) = ScriptedMerge::highway_gaps(state, geo.vehicle_length);
        match ego.lane {
            Lane::Ramp => {
                let room = (geo.ramp_end - p.stop_margin - ego.x).max(0.0);
                let target = p.cruise_speed.min((2.0 * p.brake * room).sqrt());
                let a = p.track(ego.v, target);
                let can_merge = ego.x >= geo.merge_zone_start && front >= p.min_gap && back >= p.min_gap;
                ControlInput::new(a, if can_merge { 1.0 } else { 0.0 })
            }
            Lane::Highway => {
                // follow the leader at no closer than the nominal gap
                let target = if front < p.min_gap { 0.0 } else { p.cruise_speed };
                ControlInput::new(p.track(ego.v, target), 0.0)
            }
        }
    }
}
