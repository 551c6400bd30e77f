//! Tanh-squashed diagonal Gaussian mapped affinely onto an action box.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Per-dimension closed interval `[low, high]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBox<T> {
    pub low: Vec<T>,
    pub high: Vec<T>,
}

impl<T: Scalar> ActionBox<T> {
    pub fn new(low: Vec<T>, high: Vec<T>) -> Self {
        assert_eq!(low.len(), high.len());
        assert!(low.iter().zip(&high).all(|(l, h)| l < h), "empty action interval");
        Self { low, high }
    }

    pub fn dims(&self) -> usize {
        self.low.len()
    }

    #[inline]
    fn half_width(&self, k: usize) -> T {
        (self.high[k] - self.low[k]) * T::lit(0.5)
    }

    #[inline]
    fn from_squashed(&self, k: usize, y: T) -> T {
        self.low[k] + (y + T::one()) * self.half_width(k)
    }

    pub fn contains(&self, action: &[T]) -> bool {
        action
            .iter()
            .enumerate()
            .all(|(k, &a)| a >= self.low[k] && a <= self.high[k])
    }
}

/// A reparameterized draw with everything needed to backpropagate through it.
#[derive(Debug, Clone, PartialEq)]
pub struct SquashedSample<T> {
    pub action: Vec<T>,
    pub log_prob: T,
    pub noise: Vec<T>,
    pub squashed: Vec<T>,
    pub std: Vec<T>,
    /// Whether the raw log-std was inside the clamp range (gradient passes).
    pub log_std_active: Vec<bool>,
}

/// `ln(1 - tanh(u)^2)` without cancellation for large `|u|`.
#[inline]
pub fn log_one_minus_tanh_sq<T: Scalar>(u: T) -> T {
    let two = T::lit(2.0);
    let x = -two * u;
    let softplus = x.max(T::zero()) + (-x.abs()).exp().ln_1p();
    two * (T::lit(std::f64::consts::LN_2) - u - softplus)
}

#[inline]
fn clamp_log_std<T: Scalar>(raw: T) -> (T, bool) {
    let lo = T::lit(LOG_STD_MIN);
    let hi = T::lit(LOG_STD_MAX);
    if raw < lo {
        (lo, false)
    } else if raw > hi {
        (hi, false)
    } else {
        (raw, true)
    }
}

/// Pushes given standard-normal `noise` through the head.
pub fn sample_with_noise<T: Scalar>(mean: &[T], raw_log_std: &[T], bounds: &ActionBox<T>, noise: &[T]) -> SquashedSample<T> {
    let d = bounds.dims();
    assert!(mean.len() == d && raw_log_std.len() == d && noise.len() == d);
    let half_ln_2pi = T::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
    let mut out = SquashedSample {
        action: Vec::with_capacity(d),
        log_prob: T::zero(),
        noise: noise.to_vec(),
        squashed: Vec::with_capacity(d),
        std: Vec::with_capacity(d),
        log_std_active: Vec::with_capacity(d),
    };
    for k in 0..d {
        let (log_std, active) = clamp_log_std(raw_log_std[k]);
        let std = log_std.exp();
        let u = mean[k] + std * noise[k];
        let y = u.tanh();
        out.log_prob += -T::lit(0.5) * noise[k] * noise[k] - log_std - half_ln_2pi
            - log_one_minus_tanh_sq(u)
            - bounds.half_width(k).ln();
        out.action.push(bounds.from_squashed(k, y));
        out.squashed.push(y);
        out.std.push(std);
        out.log_std_active.push(active);
    }
    out
}

pub fn sample_squashed_gaussian<T: Scalar, R: Rng + ?Sized>(
    mean: &[T],
    raw_log_std: &[T],
    bounds: &ActionBox<T>,
    rng: &mut R,
) -> SquashedSample<T> {
    let noise: Vec<T> = (0..bounds.dims())
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    sample_with_noise(mean, raw_log_std, bounds, &noise)
}

/// Action at the distribution's pre-squash mean.
pub fn deterministic_action<T: Scalar>(mean: &[T], bounds: &ActionBox<T>) -> Vec<T> {
    mean.iter()
        .enumerate()
        .map(|(k, &m)| bounds.from_squashed(k, m.tanh()))
        .collect()
}

/// Log-density of an arbitrary action strictly inside the box.
pub fn log_density<T: Scalar>(mean: &[T], raw_log_std: &[T], bounds: &ActionBox<T>, action: &[T]) -> T {
    let half_ln_2pi = T::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
    let mut lp = T::zero();
    for k in 0..bounds.dims() {
        let (log_std, _) = clamp_log_std(raw_log_std[k]);
        let hw = bounds.half_width(k);
        let y = (action[k] - bounds.low[k]) / hw - T::one();
        let u = y.atanh();
        let z = (u - mean[k]) / log_std.exp();
        lp += -T::lit(0.5) * z * z - log_std - half_ln_2pi - (T::one() - y * y).ln() - hw.ln();
    }
    lp
}

/// Gradients of `d_log_prob * log_prob + sum_k d_action[k] * action[k]` with
/// respect to the head outputs `(mean, raw_log_std)`, holding the noise fixed.
pub fn backprop_sample<T: Scalar>(
    sample: &SquashedSample<T>,
    bounds: &ActionBox<T>,
    d_log_prob: T,
    d_action: &[T],
) -> (Vec<T>, Vec<T>) {
    let d = bounds.dims();
    let two = T::lit(2.0);
    let mut d_mean = Vec::with_capacity(d);
    let mut d_log_std = Vec::with_capacity(d);
    for k in 0..d {
        let y = sample.squashed[k];
        let sigma_eps = sample.std[k] * sample.noise[k];
        // d log_prob / d u = 2 tanh(u); d a / d u = half_width * (1 - y^2)
        let du = d_log_prob * two * y + d_action[k] * bounds.half_width(k) * (T::one() - y * y);
        d_mean.push(du);
        let dl = if sample.log_std_active[k] { du * sigma_eps - d_log_prob } else { T::zero() };
        d_log_std.push(dl);
    }
    (d_mean, d_log_std)
}
