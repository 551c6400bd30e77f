#![allow(dead_code)]

use merge_hrl::dqn::{DqnAgent, DqnConfig, Transition};
use merge_hrl::observation::{bin_midpoint, N_BINS, N_FEATURES};
use merge_hrl::skills::{Discriminator, SacBatch, SacConfig, SacEnsemble, SkillSample};
use merge_hrl::{Gradients, Mlp, SimRng, Tape};
use rand::{Rng, SeedableRng};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
/// Parameters checked per network; spread evenly over all layers.
pub const FD_SAMPLES: usize = 300;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-5)
}

fn sample_indices(n: usize) -> Vec<usize> {
    if n <= FD_SAMPLES {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..FD_SAMPLES).map(|i| i * n / FD_SAMPLES).collect();
    idx.push(n - 1);
    idx
}

fn nudge(net: &mut Mlp, k: usize, delta: f64) {
    *net.params_mut().nth(k).expect("param index") += delta;
}

/// Outcome of a finite-difference sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    /// Largest relative error over smooth stencils.
    pub worst: f64,
    pub checked: usize,
    /// Stencils straddling a leaky-ReLU kink, where no derivative exists.
    pub kinks: usize,
}

impl FdReport {
    pub fn passes(&self) -> bool {
        self.worst < FD_TOL && self.kinks * 50 <= self.checked
    }
}

/// Relative error between `analytic` and central differences of `loss` with
/// respect to the network selected by `net`. A mismatch explained by the two
/// one-sided slopes disagreeing at least as much is a kink crossing and is
/// counted separately; a smooth loss with a wrong gradient is not.
pub fn fd_max_error<S>(
    state: &mut S,
    net: fn(&mut S) -> &mut Mlp,
    loss: impl Fn(&S) -> f64,
    analytic: &Gradients,
) -> FdReport {
    let flat: Vec<f64> = analytic.iter().collect();
    let mid = loss(state);
    let mut report = FdReport { worst: 0.0, checked: 0, kinks: 0 };
    for k in sample_indices(flat.len()) {
        nudge(net(state), k, FD_STEP);
        let up = loss(state);
        nudge(net(state), k, -2.0 * FD_STEP);
        let down = loss(state);
        nudge(net(state), k, FD_STEP);
        let fd = (up - down) / (2.0 * FD_STEP);
        let err = rel_err(flat[k], fd);
        report.checked += 1;
        let one_sided_gap = ((up - mid) - (mid - down)).abs() / FD_STEP;
        if err >= FD_TOL && one_sided_gap >= (fd - flat[k]).abs() {
            report.kinks += 1;
        } else {
            report.worst = report.worst.max(err);
        }
    }
    report
}

pub fn random_encoding<R: Rng>(rng: &mut R) -> [f64; N_FEATURES] {
    let mut s = [0.0; N_FEATURES];
    for v in &mut s {
        *v = bin_midpoint(rng.gen_range(0..N_BINS as u8));
    }
    s
}

/// `sum_j c_j * out_j` over a random batch, against the network's own backward pass.
pub fn network_fd_error(net: &Mlp, seed: u64) -> FdReport {
    let mut rng = SimRng::seed_from_u64(seed);
    let batch = 6;
    let inputs: Vec<f64> = (0..batch * net.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let coef: Vec<f64> = (0..batch * net.output_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let loss = |n: &Mlp| {
        let mut tape = Tape::new();
        let out = n.forward_batch(&inputs, batch, &mut tape).unwrap();
        out.iter().zip(&coef).map(|(o, c)| o * c).sum::<f64>()
    };
    let mut tape = Tape::new();
    net.forward_batch(&inputs, batch, &mut tape).unwrap();
    let mut grads = Gradients::zeros_like(net);
    net.backward_batch(&tape, &coef, &mut grads, None).unwrap();
    let mut probe = net.clone();
    fd_max_error(&mut probe, |n| n, loss, &grads)
}

pub fn sac_fixture(n_skills: usize, batch: usize, seed: u64) -> (SacEnsemble, SacBatch, Vec<[f64; 2]>) {
    let mut rng = SimRng::seed_from_u64(seed);
    let sac = SacEnsemble::new(n_skills, SacConfig::default(), &mut rng);
    let samples: Vec<SkillSample> = (0..batch)
        .map(|b| SkillSample {
            s: random_encoding(&mut rng),
            z: rng.gen_range(0..n_skills),
            action: [rng.gen_range(-1.0..2.0 / 3.0), rng.gen_range(0.0..1.0)],
            r_z: rng.gen_range(-3.0..3.0),
            s_next: random_encoding(&mut rng),
            done: b % 4 == 0,
        })
        .collect();
    let refs: Vec<&SkillSample> = samples.iter().collect();
    let batch = SacBatch::from_samples(&refs, n_skills);
    let noise = batch.draw_noise(&mut rng);
    (sac, batch, noise)
}

pub fn discriminator_fixture(n_skills: usize, batch: usize, seed: u64) -> (Discriminator, Vec<f64>, Vec<usize>) {
    let mut rng = SimRng::seed_from_u64(seed);
    let d = Discriminator::new(n_skills, Default::default(), &mut rng);
    let mut states = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..batch {
        states.extend_from_slice(&random_encoding(&mut rng));
        labels.push(rng.gen_range(0..n_skills));
    }
    (d, states, labels)
}

pub fn dqn_fixture(n_actions: usize, batch: usize, seed: u64) -> (DqnAgent, Vec<Transition>) {
    let mut rng = SimRng::seed_from_u64(seed);
    let agent = DqnAgent::new(n_actions, DqnConfig::default(), &mut rng);
    let ts = (0..batch)
        .map(|b| Transition {
            s: random_encoding(&mut rng),
            a: rng.gen_range(0..n_actions),
            r: rng.gen_range(-2.0..2.0),
            s_next: random_encoding(&mut rng),
            done: b % 3 == 0,
        })
        .collect();
    (agent, ts)
}

/// Maximum finite-difference error of every loss family: the two SAC critics,
/// the value and policy losses, the discriminator and both DQN agents.
pub fn loss_fd_errors(seed: u64) -> Vec<(&'static str, FdReport)> {
    let mut out = Vec::new();

    let (mut sac, batch, noise) = sac_fixture(16, 8, seed);
    let y = sac.q_targets(&batch);
    let g = sac.q_loss(0, &batch, &y).grads;
    out.push(("sac_q1", fd_max_error(&mut sac, |s| &mut s.q1, |s| s.q_loss(0, &batch, &y).loss, &g)));
    let g = sac.q_loss(1, &batch, &y).grads;
    out.push(("sac_q2", fd_max_error(&mut sac, |s| &mut s.q2, |s| s.q_loss(1, &batch, &y).loss, &g)));
    let g = sac.value_loss(&batch, &noise).grads;
    out.push(("sac_value", fd_max_error(&mut sac, |s| &mut s.value, |s| s.value_loss(&batch, &noise).loss, &g)));
    let g = sac.policy_loss(&batch, &noise).grads;
    out.push(("sac_policy", fd_max_error(&mut sac, |s| &mut s.policy, |s| s.policy_loss(&batch, &noise).loss, &g)));

    let (mut d, states, labels) = discriminator_fixture(16, 8, seed + 1);
    let g = d.loss(&states, &labels).grads;
    out.push(("discriminator", fd_max_error(&mut d, |d| &mut d.net, |d| d.loss(&states, &labels).loss, &g)));

    for (name, n) in [("low_dqn", 6), ("high_dqn", 16)] {
        let (mut agent, ts) = dqn_fixture(n, 8, seed + 2);
        let refs: Vec<&Transition> = ts.iter().collect();
        let y = agent.targets(&refs);
        let g = agent.td_loss(&refs, &y).grads;
        out.push((name, fd_max_error(&mut agent, |a| &mut a.online, |a| a.td_loss(&refs, &y).loss, &g)));
    }
    out
}

/// Network-level checks for every network role in the system.
pub fn role_fd_errors(seed: u64) -> Vec<(&'static str, FdReport)> {
    let (sac, _, _) = sac_fixture(16, 1, seed);
    let (d, _, _) = discriminator_fixture(16, 1, seed);
    let (low, _) = dqn_fixture(6, 1, seed);
    let (high, _) = dqn_fixture(16, 1, seed);
    vec![
        ("policy", network_fd_error(&sac.policy, seed)),
        ("value", network_fd_error(&sac.value, seed)),
        ("value_target", network_fd_error(&sac.value_target, seed)),
        ("q1", network_fd_error(&sac.q1, seed)),
        ("q2", network_fd_error(&sac.q2, seed)),
        ("discriminator", network_fd_error(&d.net, seed)),
        ("low_dqn", network_fd_error(&low.online, seed)),
        ("high_dqn", network_fd_error(&high.online, seed)),
    ]
}
pub mod checks;
