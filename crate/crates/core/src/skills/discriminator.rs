//! Skill classifier `q(z | s)` over quantized observations.

use rand::Rng;

use crate::observation::N_FEATURES;
use crate::neural::AdamConfig;
use crate::{Adam, Gradients, Mlp, Tape};

#[derive(Debug, Clone)]
pub struct DiscriminatorLoss {
    pub loss: f64,
    pub accuracy: f64,
    pub grads: Gradients,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    pub net: Mlp,
    opt: Adam,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(n_skills: usize, optimizer: AdamConfig, rng: &mut R) -> Self {
        let net = Mlp::standard(N_FEATURES, n_skills, rng);
        Self::from_net(net, optimizer)
    }

    pub fn from_net(net: Mlp, optimizer: AdamConfig) -> Self {
        let opt = Adam::new(&net, optimizer);
        Self { net, opt }
    }

    pub fn n_skills(&self) -> usize {
        self.net.output_dim()
    }

    pub fn probabilities(&self, s: &[f64; N_FEATURES]) -> Vec<f64> {
        softmax(&self.net.forward(s).expect("discriminator width"))
    }

    /// Mean softmax cross-entropy of the true skill labels, with gradients.
    pub fn loss(&self, states: &[f64], labels: &[usize]) -> DiscriminatorLoss {
        let n = labels.len();
        assert!(n > 0, "empty discriminator batch");
        let k = self.n_skills();
        let mut tape = Tape::new();
        let logits = self
            .net
            .forward_batch(states, n, &mut tape)
            .expect("discriminator width")
            .to_vec();
        let inv = 1.0 / n as f64;
        let mut loss = 0.0;
        let mut hits = 0usize;
        let mut d_out = Vec::with_capacity(n * k);
        for (b, &z) in labels.iter().enumerate() {
            let row = &logits[b * k..(b + 1) * k];
            let p = softmax(row);
            loss -= p[z].max(f64::MIN_POSITIVE).ln() * inv;
            if argmax(row) == z {
                hits += 1;
            }
            for (j, pj) in p.iter().enumerate() {
                let target = if j == z { 1.0 } else { 0.0 };
                d_out.push((pj - target) * inv);
            }
        }
        let mut grads = Gradients::zeros_like(&self.net);
        self.net.backward_batch(&tape, &d_out, &mut grads, None).expect("shapes");
        DiscriminatorLoss {
            loss,
            accuracy: hits as f64 * inv,
            grads,
        }
    }

    /// One descent step; returns the pre-step mean loss.
    pub fn update(&mut self, states: &[f64], labels: &[usize]) -> DiscriminatorLoss {
        let l = self.loss(states, labels);
        self.opt.step(&mut self.net, &l.grads);
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        // zero network: all logits 0
        let d = Discriminator::from_net(Mlp::zeros(&[N_FEATURES, 64, 64, 16]), AdamConfig::default());
        let states = vec![0.5; N_FEATURES * 3];
        let l = d.loss(&states, &[0, 5, 15]);
        assert!((l.loss - 16f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logits_approach_zero_loss() {
        let mut net = Mlp::zeros(&[N_FEATURES, 1, 4]);
        // output bias favors class 2 heavily
        net.layers_mut()[1].biases = vec![0.0, 0.0, 50.0, 0.0];
        let d = Discriminator::from_net(net, AdamConfig::default());
        let l = d.loss(&vec![0.5; N_FEATURES], &[2]);
        assert!(l.loss < 1e-12);
        assert_eq!(l.accuracy, 1.0);
    }

    #[test]
    fn softmax_and_argmax() {
        let p = softmax(&[1000.0, 1000.0]);
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
