use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Negative-side slope of the hidden-layer leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.01;
/// Hidden width shared by every network role.
pub const HIDDEN: usize = 64;

/// Fully connected layer. Weights are stored input-major:
/// `weights[i * out_dim + j]` connects input `i` to output `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dense<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![T::zero(); in_dim * out_dim],
            biases: vec![T::zero(); out_dim],
        }
    }
}

/// Xavier (Glorot) normal weights with gain 1: `N(0, 2 / (fan_in + fan_out))`.
pub fn xavier_init<T: Scalar, R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Vec<T> {
    assert!(fan_in > 0 && fan_out > 0, "layer dims must be positive");
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..fan_in * fan_out).map(|_| T::lit(normal.sample(rng))).collect()
}

/// Feed-forward network: affine layers with leaky ReLU between them and an
/// identity output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
}

/// Per-layer activations recorded by [`Mlp::forward_batch`] for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    batch: usize,
    acts: Vec<Vec<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { batch: 0, acts: Vec::new() }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Output of the last recorded forward pass, row-major `batch x out`.
    pub fn output(&self) -> &[T] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Accumulated parameter gradients, shape-matched to an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            layers: net.layers.iter().map(|l| Dense::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }

    pub fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = T::zero());
            l.biases.iter_mut().for_each(|b| *b = T::zero());
        }
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|g| g == T::zero())
    }

    /// Flat view in checkpoint order (per layer: weights, then biases).
    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    pub fn get(&self, k: usize) -> T {
        self.iter().nth(k).expect("gradient index in range")
    }

    pub fn scale(&mut self, k: T) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= k);
            l.biases.iter_mut().for_each(|b| *b *= k);
        }
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let (ra, rb) = (chunks_a.remainder(), chunks_b.remainder());
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl<T: Scalar> Mlp<T> {
    /// Network with the given layer sizes, Xavier-normal weights and zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for l in &mut net.layers {
            l.weights = xavier_init(l.in_dim, l.out_dim, rng);
        }
        net
    }

    /// `input -> 64 -> 64 -> output`, the topology of every agent network.
    pub fn standard<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self::new(&[input, HIDDEN, HIDDEN, output], rng)
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Checkpoint("network has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Shape { expected: pair[0].out_dim, got: pair[1].in_dim });
            }
        }
        for l in &layers {
            if l.weights.len() != l.in_dim * l.out_dim {
                return Err(Error::Shape { expected: l.in_dim * l.out_dim, got: l.weights.len() });
            }
            if l.biases.len() != l.out_dim {
                return Err(Error::Shape { expected: l.out_dim, got: l.biases.len() });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = T> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    /// `self <- tau * src + (1 - tau) * self`.
    pub fn soft_update(&mut self, src: &Mlp<T>, tau: T) {
        let keep = T::one() - tau;
        for (d, s) in self.params_mut().zip(src.params()) {
            *d = tau * s + keep * *d;
        }
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let mut tape = Tape::new();
        self.forward_batch(input, 1, &mut tape)?;
        Ok(tape.output().to_vec())
    }

    /// Forward pass over `batch` row-major inputs, recording activations.
    pub fn forward_batch<'t>(&self, inputs: &[T], batch: usize, tape: &'t mut Tape<T>) -> Result<&'t [T]> {
        let in_dim = self.input_dim();
        if inputs.len() != batch * in_dim {
            return Err(Error::Shape { expected: batch * in_dim, got: inputs.len() });
        }
        let n_layers = self.layers.len();
        tape.batch = batch;
        tape.acts.resize_with(n_layers + 1, Vec::new);
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(inputs);
        let slope = T::lit(LEAKY_SLOPE);

        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = tape.acts.split_at_mut(l + 1);
            let x = &done[l];
            let y = &mut rest[0];
            let (n_in, n_out) = (layer.in_dim, layer.out_dim);
            y.clear();
            y.reserve(batch * n_out);
            for _ in 0..batch {
                y.extend_from_slice(&layer.biases);
            }
            for b in 0..batch {
                let xb = &x[b * n_in..(b + 1) * n_in];
                let yb = &mut y[b * n_out..(b + 1) * n_out];
                for (i, &xi) in xb.iter().enumerate() {
                    if xi == T::zero() {
                        continue;
                    }
                    let row = &layer.weights[i * n_out..(i + 1) * n_out];
                    for (o, &w) in yb.iter_mut().zip(row) {
                        *o += xi * w;
                    }
                }
            }
            if l + 1 < n_layers {
                for v in y.iter_mut() {
                    if *v < T::zero() {
                        *v *= slope;
                    }
                }
            }
        }
        Ok(tape.output())
    }

    /// Reverse pass for the forward recorded in `tape`. `d_out` is the loss
    /// gradient at the output (`batch x out`); parameter gradients are added to
    /// `grads`. When `d_input` is given it receives the gradient with respect to
    /// the network input (`batch x in`).
    pub fn backward_batch(
        &self,
        tape: &Tape<T>,
        d_out: &[T],
        grads: &mut Gradients<T>,
        d_input: Option<&mut Vec<T>>,
    ) -> Result<()> {
        let batch = tape.batch;
        let n_layers = self.layers.len();
        if tape.acts.len() != n_layers + 1 {
            return Err(Error::Shape { expected: n_layers + 1, got: tape.acts.len() });
        }
        if d_out.len() != batch * self.output_dim() {
            return Err(Error::Shape { expected: batch * self.output_dim(), got: d_out.len() });
        }
        if grads.layers.len() != n_layers {
            return Err(Error::Shape { expected: n_layers, got: grads.layers.len() });
        }
        let slope = T::lit(LEAKY_SLOPE);
        let want_input = d_input.is_some();
        let mut delta = d_out.to_vec();
        let mut next = Vec::new();

        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let (n_in, n_out) = (layer.in_dim, layer.out_dim);
            let x = &tape.acts[l];
            if l + 1 < n_layers {
                let y = &tape.acts[l + 1];
                for (d, &yv) in delta.iter_mut().zip(y) {
                    if yv <= T::zero() {
                        *d *= slope;
                    }
                }
            }
            let g = &mut grads.layers[l];
            for b in 0..batch {
                let db = &delta[b * n_out..(b + 1) * n_out];
                for (gb, &d) in g.biases.iter_mut().zip(db) {
                    *gb += d;
                }
                let xb = &x[b * n_in..(b + 1) * n_in];
                for (i, &xi) in xb.iter().enumerate() {
                    if xi == T::zero() {
                        continue;
                    }
                    let row = &mut g.weights[i * n_out..(i + 1) * n_out];
                    for (gw, &d) in row.iter_mut().zip(db) {
                        *gw += xi * d;
                    }
                }
            }
            if l > 0 || want_input {
                next.clear();
                next.resize(batch * n_in, T::zero());
                for b in 0..batch {
                    let db = &delta[b * n_out..(b + 1) * n_out];
                    let nb = &mut next[b * n_in..(b + 1) * n_in];
                    for (i, slot) in nb.iter_mut().enumerate() {
                        *slot = dot(&layer.weights[i * n_out..(i + 1) * n_out], db);
                    }
                }
                std::mem::swap(&mut delta, &mut next);
            }
        }
        if let Some(d_in) = d_input {
            *d_in = delta;
        }
        Ok(())
    }

    /// Single-sample reverse pass returning fresh gradients.
    pub fn backward(&self, input: &[T], upstream: &[T]) -> Result<Gradients<T>> {
        let mut tape = Tape::new();
        self.forward_batch(input, 1, &mut tape)?;
        let mut grads = Gradients::zeros_like(self);
        self.backward_batch(&tape, upstream, &mut grads, None)?;
        Ok(grads)
    }
}
