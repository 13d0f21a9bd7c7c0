//! Independent reference computations used by the integration and
//! acceptance tests. Nothing here calls the code path it is checking.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use vbll_core::rng;
use vbll_core::VBLinearLayer;

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        (1.0 + x.exp()).ln()
    }
}

/// Layer with means in (-1, 1) and rho in (-3, 0).
pub fn random_layer(k: usize, d: usize, prior_scale: f64, seed: u64) -> VBLinearLayer {
    let mut r = rng::stream(seed);
    let mut mu = || r.random_range(-1.0..1.0);
    let wm = Array2::from_shape_simple_fn((k, d), &mut mu);
    let bm = Array1::from_shape_simple_fn(k, &mut mu);
    let mut r2 = rng::stream(seed ^ 0xDEAD_BEEF);
    let mut rho = || r2.random_range(-3.0..0.0);
    let wr = Array2::from_shape_simple_fn((k, d), &mut rho);
    let br = Array1::from_shape_simple_fn(k, &mut rho);
    VBLinearLayer::from_parts(wm, wr, bm, br, prior_scale).unwrap()
}

/// Monte Carlo estimate of E_q[ln q(w) − ln p(w)] with its standard error.
pub fn kl_monte_carlo(layer: &VBLinearLayer, draws: usize, seed: u64) -> (f64, f64) {
    let s = layer.prior_scale();
    let params: Vec<(f64, f64)> = layer
        .weight_mu
        .iter()
        .zip(layer.weight_rho.iter())
        .chain(layer.bias_mu.iter().zip(layer.bias_rho.iter()))
        .map(|(&m, &r)| (m, softplus(r)))
        .collect();
    let ln_norm = |x: f64, mean: f64, sd: f64| {
        let z = (x - mean) / sd;
        -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    };
    let mut r = rng::stream(seed);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..draws {
        let mut v = 0.0;
        for &(m, sd) in &params {
            let eps: f64 = r.sample(StandardNormal);
            let w = m + sd * eps;
            v += ln_norm(w, m, sd) - ln_norm(w, 0.0, s);
        }
        sum += v;
        sum2 += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Running mean/variance with standard errors for both.
#[derive(Clone)]
pub struct Moments {
    samples: Vec<f64>,
}

impl Moments {
    pub fn new() -> Self {
        Self {
            samples: Vec::new(),
        }
    }
    pub fn push(&mut self, x: f64) {
        self.samples.push(x);
    }
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
    pub fn var(&self) -> f64 {
        let m = self.mean();
        let n = self.samples.len() as f64;
        self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    }
    pub fn mean_se(&self) -> f64 {
        (self.var() / self.samples.len() as f64).sqrt()
    }
    /// Standard error of the sample variance: sqrt((m4 − σ⁴) / n).
    pub fn var_se(&self) -> f64 {
        let m = self.mean();
        let n = self.samples.len() as f64;
        let m4 = self.samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        let v = self.var();
        ((m4 - v * v) / n).sqrt()
    }
}

/// Straight linear map with an explicit triple loop.
pub fn linear(weights: &Array2<f64>, biases: &Array1<f64>, x: &[f64]) -> Vec<f64> {
    (0..weights.nrows())
        .map(|k| biases[k] + (0..x.len()).map(|d| weights[(k, d)] * x[d]).sum::<f64>())
        .collect()
}

/// Re-bins by scanning every bin interval for every sample.
pub fn brute_force_ece(conf: &[f64], correct: &[bool], bins: usize) -> f64 {
    let n = conf.len() as f64;
    let mut total = 0.0;
    for b in 0..bins {
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        let members: Vec<usize> = (0..conf.len())
            .filter(|&i| (conf[i] > lo || (b == 0 && conf[i] == 0.0)) && conf[i] <= hi)
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = members.len() as f64;
        let acc = members.iter().filter(|&&i| correct[i]).count() as f64 / m;
        let avg = members.iter().map(|&i| conf[i]).sum::<f64>() / m;
        total += m / n * (acc - avg).abs();
    }
    total
}

/// Random (confidence, correctness) instance; a share of confidences sit
/// exactly on bin edges.
pub fn random_calibration_instance(seed: u64, n: usize) -> (Vec<f64>, Vec<bool>) {
    let mut r = rng::stream(seed);
    let conf = (0..n)
        .map(|_| match r.random_range(0..10) {
            0 => f64::from(r.random_range(0..=20u32)) / 20.0,
            1 => f64::from(r.random_range(0..=15u32)) / 15.0,
            _ => r.random::<f64>(),
        })
        .collect::<Vec<_>>();
    let correct = conf.iter().map(|&c| r.random::<f64>() < c).collect();
    (conf, correct)
}
