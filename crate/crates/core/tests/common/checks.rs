//! Table-driven checks shared by the integration tests and the acceptance run.
//! Each returns the failing entries; an empty list means the suite passed.

use merge_hrl::dqn::{
    dqn_target_from, epsilon_greedy, run_skill_interval, DqnAgent, DqnConfig, DrivingTask, FixedMacroDriver,
    TargetRule, Transition,
};
use merge_hrl::env::{
    advance, detect_terminal, resolve_lane, step_kinematics, ControlInput, EnvConfig, EnvState, EnvVehicleMode,
    Lane, Outcome, RoadGeometry, Simulator, VehicleState, N_OTHERS,
};
use merge_hrl::harness::evaluate;
use merge_hrl::macro_action::{sample_truncated_laplace, MacroAction, EXP_RATE};
use merge_hrl::neural::{sample_squashed_gaussian, deterministic_action};
use merge_hrl::observation::{bin_of, normalize, Observer, ObservationConfig, RawObservation, Slot, N_BINS};
use merge_hrl::reward::{
    collision_term, driver_reward, effort_term, headway_term, not_merging_term, stopping_term, velocity_term,
    HeadwayConstants, RewardConfig, RewardInput,
};
use merge_hrl::skills::{sac_q_target, sample_skill_prior, skill_action_box, skill_reward, fingerprint, SkillLibrary};
use merge_hrl::{Mlp, SimRng};
use rand::{Rng, SeedableRng};

pub const EXACT: f64 = 1e-12;

#[derive(Default)]
pub struct Table {
    pub checked: usize,
    pub failures: Vec<String>,
}

impl Table {
    pub fn close(&mut self, label: &str, got: f64, expected: f64) {
        self.checked += 1;
        if !((got - expected).abs() <= EXACT) {
            self.failures.push(format!("{label}: got {got}, expected {expected}"));
        }
    }

    pub fn truth(&mut self, label: &str, ok: bool) {
        self.checked += 1;
        if !ok {
            self.failures.push(label.to_owned());
        }
    }

    pub fn within(&mut self, label: &str, got: f64, expected: f64, bound: f64) {
        self.checked += 1;
        if !((got - expected).abs() <= bound) {
            self.failures.push(format!("{label}: {got} vs {expected} (bound {bound})"));
        }
    }
}

pub fn sim() -> Simulator {
    Simulator::new(EnvConfig::default(), RoadGeometry::default()).unwrap()
}

fn vehicle(x: f64, v: f64, lane: Lane) -> VehicleState {
    VehicleState { x, v, lane }
}

/// A state with the highway vehicles parked far behind the start line.
pub fn lone_state(x: f64, v: f64, lane: Lane) -> EnvState {
    let mut s = sim().initial_state(2.8, [0.0; N_OTHERS]);
    s.ego = vehicle(x, v, lane);
    for (i, o) in s.others.iter_mut().enumerate() {
        *o = vehicle(-1000.0 - 100.0 * i as f64, 0.0, Lane::Highway);
    }
    s
}

/// Every closed-form substitution of the environment, observation, reward and
/// action definitions.
pub fn closed_form_table() -> Table {
    let mut t = Table::default();
    let sim = sim();
    let geo = RoadGeometry::default();

    // initialization
    let s0 = sim.initial_state(sim.ego_speed_from_unit(0.5), [0.0; N_OTHERS]);
    for (i, o) in s0.others.iter().enumerate() {
        t.close(&format!("init other {i} x"), o.x, 50.0 * i as f64);
        t.close(&format!("init other {i} v"), o.v, 5.9);
        t.truth(&format!("init other {i} lane"), o.lane == Lane::Highway);
    }
    t.close("init ego v at u=0.5", s0.ego.v, 2.8);
    t.truth("init ego at x=0 on ramp", s0.ego.x == 0.0 && s0.ego.lane == Lane::Ramp);

    // kinematics
    let (x, v) = step_kinematics(0.0, 3.0, 1.0, 0.1);
    t.close("kinematics x", x, 0.305);
    t.close("kinematics v", v, 3.1);
    let (x, v) = step_kinematics(10.0, 5.0, 0.0, 0.1);
    t.close("kinematics zero-a x", x, 10.5);
    t.close("kinematics zero-a v", v, 5.0);
    let (x, v) = step_kinematics(0.0, 0.1, -4.5, 0.1);
    t.close("kinematics clamp v", v, 0.0);
    t.close("kinematics clamp x", x, 0.01 / 9.0);
    let (_, v) = advance(0.0, 29.1, 3.0, 0.1, 29.16);
    t.close("kinematics cap", v, 29.16);

    // lane resolution
    t.truth("lane l=0 stays", resolve_lane(Lane::Highway, 1.0, 0.99) == Lane::Highway);
    t.truth("lane l_p=0.9 merges", resolve_lane(Lane::Ramp, 0.9, 0.99) == Lane::Highway);
    t.truth("lane l_p=0.8 merges", resolve_lane(Lane::Ramp, 0.8, 0.99) == Lane::Highway);
    t.truth("lane l_p=0.2 stays", resolve_lane(Lane::Ramp, 0.2, 0.0) == Lane::Ramp);
    t.truth("lane l_p=0.5 u=0.4 merges", resolve_lane(Lane::Ramp, 0.5, 0.4) == Lane::Highway);
    t.truth("lane l_p=0.5 u=0.6 stays", resolve_lane(Lane::Ramp, 0.5, 0.6) == Lane::Ramp);

    // env step
    let mut rng = SimRng::seed_from_u64(0);
    let s = sim.step(&lone_state(40.0, 3.0, Lane::Ramp), ControlInput::new(0.0, 1.0), &mut rng).unwrap();
    t.truth("no merge before zone", s.ego.lane == Lane::Ramp);
    let s = sim.step(&lone_state(239.0, 5.0, Lane::Ramp), ControlInput::IDLE, &mut rng).unwrap();
    t.close("ramp end approach x", s.ego.x, 239.5);
    t.truth("ramp end approach running", s.outcome == Outcome::Running);
    let s = sim.step(&s, ControlInput::IDLE, &mut rng).unwrap();
    t.truth("ramp overrun", s.outcome == Outcome::RampOverrun);
    t.truth("no step after a terminal", sim.step(&s, ControlInput::IDLE, &mut rng).is_err());
    let mut still = lone_state(100.0, 0.0, Lane::Highway);
    still.others.iter_mut().for_each(|o| o.v = 0.0);
    let s = sim.step(&still, ControlInput::IDLE, &mut rng).unwrap();
    t.truth("stationary positions unchanged", s.ego == still.ego && s.others == still.others);
    t.close("stationary clock", s.t, 0.1);

    // terminal detection
    let mut c = lone_state(100.0, 5.0, Lane::Highway);
    c.others[0] = vehicle(103.0, 5.0, Lane::Highway);
    t.truth("collided", detect_terminal(&c, &geo, 200.0) == Outcome::Collided);
    t.truth("overrun", detect_terminal(&lone_state(240.1, 5.0, Lane::Ramp), &geo, 200.0) == Outcome::RampOverrun);
    t.truth("finished", detect_terminal(&lone_state(360.0, 5.0, Lane::Highway), &geo, 200.0) == Outcome::Finished);

    // environment vehicles
    let idm = sim_with(EnvVehicleMode::Idm);
    let mut f = lone_state(0.0, 3.0, Lane::Ramp);
    f.others[0] = vehicle(100.0, 5.9, Lane::Highway);
    t.within("idm equilibrium free road", idm.env_vehicle_policy(&f, 0).a, 0.0, 0.05);
    f.others[1] = vehicle(111.0, 0.0, Lane::Highway);
    t.truth("idm brakes behind stopped leader", idm.env_vehicle_policy(&f, 0).a < -1.0);
    t.truth("constant mode", sim.env_vehicle_policy(&f, 0) == ControlInput::IDLE);

    // observation
    let obs = Observer::new(geo, ObservationConfig::default());
    let r = obs.raw(&lone_state(100.0, 6.0, Lane::Highway));
    for slot in Slot::ALL {
        t.close(&format!("alone {slot:?} v_rel"), r.slot(slot).v_rel, 6.0);
        t.close(&format!("alone {slot:?} d_rel"), r.slot(slot).d_rel, 30.0);
    }
    let r = obs.raw(&lone_state(230.0, 4.0, Lane::Ramp));
    t.close("phantom v_rel", r.slot(Slot::Front).v_rel, 4.0);
    t.close("phantom d_rel", r.slot(Slot::Front).d_rel, 10.0);
    let mut g = lone_state(100.0, 5.0, Lane::Highway);
    g.others[0] = vehicle(112.0, 6.0, Lane::Highway);
    let r = obs.raw(&g);
    t.close("front v_rel", r.slot(Slot::Front).v_rel, -1.0);
    t.close("front d_rel", r.slot(Slot::Front).d_rel, 7.0);
    let cfg = ObservationConfig::default();
    let mut raw = obs.raw(&lone_state(180.0, 29.16, Lane::Highway));
    raw.slots[0].v_rel = 0.0;
    raw.slots[0].d_rel = 45.0;
    let n = normalize(&raw, &cfg).0;
    t.close("norm v_agent", n[0], 1.0);
    t.close("norm x_agent", n[1], 0.5);
    t.close("norm v_rel", n[2], 0.5);
    t.close("norm d_rel clamp", n[3], 1.0);
    let zero = RawObservation {
        v_agent: 0.0,
        x_agent: 0.0,
        slots: raw.slots.map(|mut s| {
            s.v_rel = 0.0;
            s.d_rel = 0.0;
            s
        }),
    };
    let n = normalize(&zero, &cfg).0;
    t.truth("norm all-zero", n[0] == 0.0 && n[1] == 0.0 && (0..6).all(|k| n[2 + 2 * k] == 0.5 && n[3 + 2 * k] == 0.0));
    t.truth("bin 0.0", bin_of(0.0) == 0);
    t.truth("bin 1.0", bin_of(1.0) == 9);
    t.truth("bin 0.55", bin_of(0.55) == 5);

    // reward terms
    let k = HeadwayConstants::default();
    t.close("h(1.0)", headway_term(1.0f64, &k), -1.0);
    t.close("h(2.3)", headway_term(2.3f64, &k), 3.0);
    t.close("h(11.9)", headway_term(11.9f64, &k), 0.0);
    t.close("h(21.5)", headway_term(21.5f64, &k), 0.0);
    t.close("m(0)", velocity_term(0.0f64, &k), -1.0);
    t.close("m(5.9)", velocity_term(5.9f64, &k), 0.0);
    t.close("m(29.16)", velocity_term(29.16f64, &k), 0.0);
    t.close("e(Accelerate)", effort_term::<f64>(Some(MacroAction::Accelerate)), -0.25);
    t.close("e(Decelerate)", effort_term::<f64>(Some(MacroAction::Decelerate)), -0.25);
    t.close("e(Hard-Decelerate)", effort_term::<f64>(Some(MacroAction::HardDecelerate)), -1.0);
    t.close("e(Hard-Accelerate)", effort_term::<f64>(Some(MacroAction::HardAccelerate)), -1.0);
    t.close("e(Maintain)", effort_term::<f64>(Some(MacroAction::Maintain)), 0.0);
    t.close("e(none)", effort_term::<f64>(None), 0.0);
    t.close("s(Maintain,25,3)", stopping_term(Some(MacroAction::Maintain), 25.0f64, 3.0, &k), -1.0);
    t.close("s(Hard-Accelerate,25,3)", stopping_term(Some(MacroAction::HardAccelerate), 25.0f64, 3.0, &k), 0.0);
    t.close("s(Maintain,25,7)", stopping_term(Some(MacroAction::Maintain), 25.0f64, 7.0, &k), 0.0);
    t.close("nm(ramp)", not_merging_term::<f64>(Lane::Ramp), -1.0);
    t.close("nm(highway)", not_merging_term::<f64>(Lane::Highway), 0.0);
    t.close("c(collided)", collision_term::<f64>(Outcome::Collided), 1.0);
    t.close("c(overrun)", collision_term::<f64>(Outcome::RampOverrun), 1.0);
    t.close("c(finished)", collision_term::<f64>(Outcome::Finished), 0.0);
    let rc = RewardConfig::default();
    let input = RewardInput {
        outcome: Outcome::Running,
        d_front: 11.9,
        v_agent: 5.9,
        act: Some(MacroAction::Maintain),
        lane: Lane::Ramp,
    };
    t.close("r(ramp, nominal)", driver_reward(&input, &rc), -rc.weights.w_nm);
    let crash = RewardInput { outcome: Outcome::Collided, lane: Lane::Highway, ..input };
    t.close("r(collided)", driver_reward(&crash, &rc), rc.weights.w_c);

    // macro-actions
    t.truth("Merge", MacroAction::Merge.control_from_draw(0.3) == ControlInput::new(0.0, 1.0));
    t.close("Accelerate draw 0.5", MacroAction::Accelerate.control_from_draw(0.5).a, 0.75);
    t.close("Hard-Decelerate draw 5", MacroAction::HardDecelerate.control_from_draw(5.0).a, -4.5);
    t.close("Decelerate draw 0.5", MacroAction::Decelerate.control_from_draw(0.5).a, -0.75);
    t.close("Hard-Accelerate draw 0.5", MacroAction::HardAccelerate.control_from_draw(0.5).a, 2.5);
    t.close("Accelerate clamp", MacroAction::Accelerate.control_from_draw(9.0).a, 2.0);

    // skills
    t.close("r_z uniform", skill_reward(1.0 / 16.0, 1.0 / 16.0), 0.0);
    t.close("r_z certain", skill_reward(1.0, 1.0 / 16.0), 16f64.ln());
    t.close("r_z floored", skill_reward(1e-9, 1.0 / 16.0), 1e-6f64.ln() + 16f64.ln());
    t.close("sac target terminal", sac_q_target(1.0, true, 5.0, 0.99), 1.0);
    t.close("sac target bootstrap", sac_q_target(1.0, false, 2.0, 0.99), 2.98);
    let bounds = skill_action_box();
    let lo = deterministic_action(&[-40.0, 0.0], &bounds);
    let hi = deterministic_action(&[40.0, 0.0], &bounds);
    t.close("a_act=-1 -> a", lo[0] * 4.5, -4.5);
    t.close("a_act=2/3 -> a", hi[0] * 4.5, 3.0);
    let mut lib_net = Mlp::standard(14 + 2, 4, &mut SimRng::seed_from_u64(0));
    let last = lib_net.layers().len() - 1;
    lib_net.layers_mut()[last].weights.iter_mut().for_each(|w| *w = 0.0);
    lib_net.layers_mut()[last].biases = vec![-40.0, 0.0, 0.0, 0.0];
    let fp = fingerprint(&ObservationConfig::default(), &EnvConfig::default(), 2);
    let lib = SkillLibrary::new(lib_net, 2, 4.5, fp).unwrap();
    t.close("library act a_act=-1", lib.act(&[0.5; 14], 1, &mut rng, true).a, -4.5);

    // DQN
    t.close("dqn terminal", dqn_target_from(-3.0, true, &[1.0; 3], &[1.0; 3], 0.99, TargetRule::Double), -3.0);
    t.close("dqn alg1_max", dqn_target_from(0.5, false, &[], &[1.0, 2.0, 0.0], 0.99, TargetRule::Alg1Max), 2.48);
    t.close("dqn double", dqn_target_from(0.5, false, &[3.0, 1.0, 1.0], &[1.0, 2.0, 0.0], 0.99, TargetRule::Double), 1.49);
    t.truth("greedy", epsilon_greedy(&[1.0, 3.0, 2.0], 0.0, &mut rng) == 1);
    t.truth("greedy tie", epsilon_greedy(&[2.0, 2.0, 1.0], 0.0, &mut rng) == 0);
    let sched = DqnConfig::default();
    t.close("epsilon after 100 episodes", sched.epsilon_at(100), 0.99f64.powi(100));
    high_level_interval_examples(&mut t);

    // target sync
    let mut agent = DqnAgent::new(6, DqnConfig { n_update: 5, ..DqnConfig::default() }, &mut rng);
    let tr = Transition { s: [0.45; 14], a: 2, r: 1.0, s_next: [0.55; 14], done: false };
    for _ in 0..5 {
        agent.td_update(&[&tr]);
    }
    t.truth("target equals online at U = n_update", agent.target == agent.online);

    // evaluation denominator
    let s = evaluate(&mut FixedMacroDriver(MacroAction::HardAccelerate), &sim, 500, 3).unwrap();
    t.truth("eval denominator 500", s.episodes == 500);
    t.truth("hard-accelerate never finishes", s.success_rate() == 0.0);
    t
}

fn sim_with(mode: EnvVehicleMode) -> Simulator {
    Simulator::new(EnvConfig { env_vehicle_mode: mode, ..EnvConfig::default() }, RoadGeometry::default()).unwrap()
}

/// The mean-reward bookkeeping of a skill choice and its terminal cut.
fn high_level_interval_examples(t: &mut Table) {
    let task = DrivingTask::new(sim(), ObservationConfig::default(), RewardConfig::default());
    let fp = task.skill_fingerprint(2);
    let net = Mlp::standard(16, 4, &mut SimRng::seed_from_u64(9));
    let lib = SkillLibrary::new(net, 2, 4.5, fp).unwrap();
    let mut rng = SimRng::seed_from_u64(1);

    let run = run_skill_interval(&task, &lib, lone_state(100.0, 5.0, Lane::Highway), 0, 3, true, &mut rng, |_| Ok(())).unwrap();
    let mean = run.rewards.iter().sum::<f64>() / 3.0;
    t.truth("interval of 3 frames", run.frames() == 3);
    t.close("r_sum / i", run.mean_reward(), mean);
    let fake = merge_hrl::dqn::SkillInterval { state: run.state, rewards: vec![1.0, 2.0, 3.0] };
    t.close("rewards [1,2,3] -> 2.0", fake.mean_reward(), 2.0);

    // ego 0.8 m short of the ramp end at 5 m/s; the second frame overruns
    let start = lone_state(239.2, 5.0, Lane::Ramp);
    let mut zero = Mlp::zeros(&[16, 64, 64, 4]);
    let last = zero.layers().len() - 1;
    // mean action a = 0, l_p = 0
    zero.layers_mut()[last].biases = vec![(0.2f64).atanh(), -40.0, -20.0, -20.0];
    let hold = SkillLibrary::new(zero, 2, 4.5, task.skill_fingerprint(2)).unwrap();
    let run = run_skill_interval(&task, &hold, start, 1, 8, true, &mut rng, |_| Ok(())).unwrap();
    t.truth("terminal on inner step 2 of 8 -> i = 2", run.frames() == 2);
    t.truth("terminal interval ends the episode", run.state.outcome.is_terminal());
}

/// Random-policy fuzzing of the environment and observation pipeline.
pub fn environment_fuzz(steps: usize, seed: u64) -> Table {
    let mut t = Table::default();
    let mut rng = SimRng::seed_from_u64(seed);
    let geo = RoadGeometry::default();
    let obs_cfg = ObservationConfig::default();
    let obs = Observer::new(geo, obs_cfg);
    let sims = [sim(), sim_with(EnvVehicleMode::Idm)];
    let mut violations: std::collections::BTreeMap<&str, usize> = Default::default();
    let mut bump = |k: &'static str| *violations.entry(k).or_default() += 1;

    let mut which = 0;
    let mut state = sims[which].init_episode(&mut rng);
    let mut episodes = 1usize;
    for _ in 0..steps {
        let sim = &sims[which];
        // piecewise-random policy: bias toward behaviors that reach every branch
        let input = ControlInput::new(rng.gen_range(-4.5..3.0), rng.gen_range(0.0..1.0));
        let prev = state;
        let next = sim.step(&state, input, &mut rng).unwrap();
        if next.ego.v < 0.0 || next.others.iter().any(|o| o.v < 0.0) {
            bump("negative velocity");
        }
        if next.ego.v > sim.config().v_max {
            bump("velocity above v_max");
        }
        if prev.ego.lane == Lane::Highway && next.ego.lane == Lane::Ramp {
            bump("lane 0 -> 1");
        }
        if prev.ego.lane == Lane::Ramp && next.ego.lane == Lane::Highway && prev.ego.x < geo.merge_zone_start {
            bump("merge before zone");
        }
        if next.others.iter().any(|o| o.lane != Lane::Highway) {
            bump("environment vehicle left highway");
        }
        if next.frame != prev.frame + 1 || (next.t - next.frame as f64 * sim.config().dt).abs() > 1e-9 || next.t <= prev.t {
            bump("clock");
        }
        let n = normalize(&obs.raw(&next), &obs_cfg).0;
        if n.iter().any(|v| !(0.0..=1.0).contains(v)) {
            bump("normalized feature outside [0, 1]");
        }
        let q = obs.observe(&next).0;
        if q.iter().any(|&b| b as usize >= N_BINS) {
            bump("bin outside 0..9");
        }
        if obs.raw(&next).slots.iter().any(|s| s.d_rel < 0.0) {
            bump("negative d_rel");
        }
        state = next;
        if state.outcome.is_terminal() {
            let frozen = state;
            if sim.step(&state, input, &mut rng).is_ok() || state != frozen {
                bump("terminal state accepted a step");
            }
            if detect_terminal(&state, &geo, sim.config().t_max) != state.outcome && state.outcome != Outcome::TimedOut {
                bump("outcome not reproducible");
            }
            which = episodes % 2;
            episodes += 1;
            state = sims[which].init_episode(&mut rng);
        }
    }
    for (k, n) in &violations {
        t.failures.push(format!("{k}: {n} steps"));
    }
    t.checked = steps;
    t.truth("fuzz covered several episodes", episodes > 10);

    // random states straight into the observation pipeline
    for _ in 0..steps {
        let mut s = lone_state(rng.gen_range(-50.0..400.0), rng.gen_range(0.0..29.16), if rng.gen_bool(0.5) { Lane::Ramp } else { Lane::Highway });
        for o in &mut s.others {
            *o = vehicle(rng.gen_range(-50.0..400.0), rng.gen_range(0.0..29.16), if rng.gen_bool(0.8) { Lane::Highway } else { Lane::Ramp });
        }
        let n = normalize(&obs.raw(&s), &obs_cfg).0;
        if n.iter().any(|v| !(0.0..=1.0).contains(v)) {
            t.failures.push(format!("random state normalized outside [0, 1]: {n:?}"));
            break;
        }
    }
    t
}

fn binomial_ok(hits: usize, n: usize, p: f64) -> (bool, f64) {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    let z = (hits as f64 - mean) / sd;
    (z.abs() <= 3.0, z)
}

/// Distribution checks at the stated sample sizes.
pub fn distributions(samples: usize, seed: u64) -> Table {
    let mut t = Table::default();
    let mut rng = SimRng::seed_from_u64(seed);
    let lambda = EXP_RATE;
    let capped = |c: f64| (1.0 - (-lambda * c).exp()) / lambda;
    let expected_mean = [
        (MacroAction::Maintain, 0.0),
        (MacroAction::Accelerate, 0.25 + capped(1.75)),
        (MacroAction::Decelerate, -0.25 - capped(1.75)),
        (MacroAction::HardAccelerate, 2.0 + capped(1.0)),
        (MacroAction::HardDecelerate, -2.0 - capped(2.5)),
    ];
    for (label, mean) in expected_mean {
        let (lo, hi) = label.accel_bounds();
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut out = 0usize;
        for _ in 0..samples {
            let c = label.realize(&mut rng);
            if !(lo..=hi).contains(&c.a) || c.l_p != 0.0 {
                out += 1;
            }
            sum += c.a;
            sq += c.a * c.a;
        }
        let m = sum / samples as f64;
        let sd = (sq / samples as f64 - m * m).max(0.0).sqrt();
        t.truth(&format!("{} within [{lo}, {hi}] ({out} outside)", label.name()), out == 0);
        t.within(&format!("{} mean", label.name()), m, mean, 3.0 * sd / (samples as f64).sqrt());
        if label == MacroAction::Maintain {
            t.within("Maintain mean within 0.005", m, 0.0, 0.005);
        }
    }
    let merges = (0..samples).map(|_| MacroAction::Merge.realize(&mut rng)).filter(|c| *c == ControlInput::new(0.0, 1.0)).count();
    t.truth("Merge always (0, 1)", merges == samples);

    // truncated Laplace shape: P(|a| <= 0.1) = (1 - e^-1) / (1 - e^-2.5)
    let p_inner = (1.0 - (-1.0f64).exp()) / (1.0 - (-2.5f64).exp());
    let inner = (0..samples).filter(|_| sample_truncated_laplace(&mut rng, 0.1, 0.25).abs() <= 0.1).count();
    let (ok, z) = binomial_ok(inner, samples, p_inner);
    t.truth(&format!("truncated Laplace mass z={z:.2}"), ok);

    // lane-change frequencies
    let sim = sim();
    for &lp in &[0.3, 0.5, 0.7] {
        let n = samples / 10;
        let start = lone_state(100.0, 5.0, Lane::Ramp);
        let hits = (0..n)
            .filter(|_| sim.step(&start, ControlInput::new(0.0, lp), &mut rng).unwrap().ego.lane == Lane::Highway)
            .count();
        let (ok, z) = binomial_ok(hits, n, lp);
        t.truth(&format!("merge rate l_p={lp} z={z:.2}"), ok);
    }

    // skill prior and epsilon-greedy uniformity
    for (name, k) in [("skill prior", 16usize), ("epsilon=1", 6usize)] {
        let n = samples / 10;
        let mut counts = vec![0usize; k];
        for _ in 0..n {
            let i = if k == 16 {
                sample_skill_prior(16, &mut rng).index
            } else {
                epsilon_greedy(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 1.0, &mut rng)
            };
            counts[i] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let (ok, z) = binomial_ok(c, n, 1.0 / k as f64);
            t.truth(&format!("{name} index {i} z={z:.2}"), ok);
        }
    }

    // initial conditions
    let n = samples / 10;
    let mut v_sum = 0.0;
    let mut j_sum = 0.0;
    for _ in 0..n {
        let s = sim.init_episode(&mut rng);
        v_sum += s.ego.v;
        j_sum += s.others.iter().enumerate().map(|(i, o)| o.x - 50.0 * i as f64).sum::<f64>() / N_OTHERS as f64;
    }
    let v_sd = 1.0 / 12f64.sqrt();
    t.within("ego v0 mean", v_sum / n as f64, 2.8, 3.0 * v_sd / (n as f64).sqrt());
    let j_sd = 20.0 / 12f64.sqrt() / (N_OTHERS as f64).sqrt();
    t.within("jitter mean", j_sum / n as f64, 0.0, 3.0 * j_sd / (n as f64).sqrt());

    // squashed skill actions stay in the control box
    let bounds = skill_action_box();
    let mut outside = 0usize;
    for _ in 0..samples {
        let mean = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let log_std = [rng.gen_range(-20.0..2.0), rng.gen_range(-20.0..2.0)];
        let a = sample_squashed_gaussian(&mean, &log_std, &bounds, &mut rng).action;
        let accel = a[0] * 4.5;
        if !((-4.5..=3.0).contains(&accel) && (0.0..=1.0).contains(&a[1])) {
            outside += 1;
        }
    }
    t.truth(&format!("skill actions inside [-4.5, 3] x [0, 1] ({outside} outside)"), outside == 0);
    t
}
