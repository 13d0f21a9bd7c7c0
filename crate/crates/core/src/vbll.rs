//! Variational Bayesian linear layer.
//!
//! Mean-field Gaussian posterior over a K×D weight matrix and a K-vector of
//! biases. Each parameter has a mean `mu` and an unconstrained `rho` with
//! standard deviation `sigma = softplus(rho)`. The prior is N(0, s²) on every
//! parameter independently.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Zip};
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// `ln(1 + e^x)`, accurate for large |x|.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`].
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax of a logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Row-wise softmax.
pub fn softmax_rows(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros(logits.raw_dim());
    for (src, mut dst) in logits.rows().into_iter().zip(out.rows_mut()) {
        let p = softmax(&src.to_vec());
        dst.assign(&Array1::from(p));
    }
    out
}

/// Initialisation settings for [`VBLinearLayer::init`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayerInit {
    pub mu_init_scale: f64,
    pub rho_init: f64,
    pub prior_scale: f64,
}

impl Default for LayerInit {
    fn default() -> Self {
        Self {
            mu_init_scale: 0.1,
            rho_init: -5.0,
            prior_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VBLinearLayer {
    pub weight_mu: Array2<f64>,
    pub weight_rho: Array2<f64>,
    pub bias_mu: Array1<f64>,
    pub bias_rho: Array1<f64>,
    prior_scale: f64,
}

/// One concrete draw of the layer's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSample {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl WeightSample {
    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Array2<f64> {
        batch.dot(&self.weights.t()) + &self.biases
    }
}

/// Noise consumed by one Flipout forward pass over a batch of `B` rows:
/// one shared standard-normal perturbation for the weights and biases, and
/// per-row ±1 sign vectors on the output (`K`) and input (`D`) sides.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipoutNoise {
    pub weight_eps: Array2<f64>,
    pub bias_eps: Array1<f64>,
    pub out_signs: Array2<f64>,
    pub in_signs: Array2<f64>,
}

fn sign(rng: &mut Stream) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

impl FlipoutNoise {
    pub fn draw(num_classes: usize, feature_dim: usize, batch: usize, rng: &mut Stream) -> Self {
        let weight_eps =
            Array2::from_shape_simple_fn((num_classes, feature_dim), || rng.sample(StandardNormal));
        let bias_eps = Array1::from_shape_simple_fn(num_classes, || rng.sample(StandardNormal));
        let out_signs = Array2::from_shape_simple_fn((batch, num_classes), || sign(rng));
        let in_signs = Array2::from_shape_simple_fn((batch, feature_dim), || sign(rng));
        Self {
            weight_eps,
            bias_eps,
            out_signs,
            in_signs,
        }
    }
}

impl VBLinearLayer {
    /// Builds a layer from raw parameters, checking shapes and finiteness.
    pub fn from_parts(
        weight_mu: Array2<f64>,
        weight_rho: Array2<f64>,
        bias_mu: Array1<f64>,
        bias_rho: Array1<f64>,
        prior_scale: f64,
    ) -> Result<Self> {
        let layer = Self {
            weight_mu,
            weight_rho,
            bias_mu,
            bias_rho,
            prior_scale,
        };
        layer.validate()?;
        Ok(layer)
    }

    /// Means ~ U(-mu_init_scale, mu_init_scale), every rho = rho_init.
    pub fn init(
        feature_dim: usize,
        num_classes: usize,
        init: &LayerInit,
        seed: u64,
    ) -> Result<Self> {
        if feature_dim == 0 || num_classes == 0 {
            return Err(Error::invalid(
                "layer",
                "feature_dim and num_classes must be >= 1",
            ));
        }
        if !(init.prior_scale > 0.0 && init.prior_scale.is_finite()) {
            return Err(Error::invalid(
                "layer",
                format!("prior_scale must be positive, got {}", init.prior_scale),
            ));
        }
        if !(init.mu_init_scale >= 0.0
            && init.mu_init_scale.is_finite()
            && init.rho_init.is_finite())
        {
            return Err(Error::invalid(
                "layer",
                "init scales must be finite, mu_init_scale >= 0",
            ));
        }
        let mut rng = rng::stream(seed);
        let a = init.mu_init_scale;
        let mut draw = || {
            if a == 0.0 {
                0.0
            } else {
                rng.sample(Uniform::new(-a, a).expect("nonempty range"))
            }
        };
        let weight_mu = Array2::from_shape_simple_fn((num_classes, feature_dim), &mut draw);
        let bias_mu = Array1::from_shape_simple_fn(num_classes, &mut draw);
        Ok(Self {
            weight_mu,
            weight_rho: Array2::from_elem((num_classes, feature_dim), init.rho_init),
            bias_mu,
            bias_rho: Array1::from_elem(num_classes, init.rho_init),
            prior_scale: init.prior_scale,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (k, d) = self.weight_mu.dim();
        if k == 0 || d == 0 {
            return Err(Error::invalid("layer", "empty weight matrix"));
        }
        if self.weight_rho.dim() != (k, d) || self.bias_mu.len() != k || self.bias_rho.len() != k {
            return Err(Error::Dimension(format!(
                "layer parameters disagree with K={k}, D={d}"
            )));
        }
        if !(self.prior_scale > 0.0 && self.prior_scale.is_finite()) {
            return Err(Error::invalid("layer", "prior_scale must be positive"));
        }
        let finite = self.weight_mu.iter().all(|v| v.is_finite())
            && self.weight_rho.iter().all(|v| v.is_finite())
            && self.bias_mu.iter().all(|v| v.is_finite())
            && self.bias_rho.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.weight_mu.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.weight_mu.ncols()
    }

    pub fn prior_scale(&self) -> f64 {
        self.prior_scale
    }

    pub fn num_params(&self) -> usize {
        2 * (self.weight_mu.len() + self.bias_mu.len())
    }

    pub fn weight_sigma(&self) -> Array2<f64> {
        self.weight_rho.mapv(softplus)
    }

    pub fn bias_sigma(&self) -> Array1<f64> {
        self.bias_rho.mapv(softplus)
    }

    /// Mutable views of (weight_mu, weight_rho, bias_mu, bias_rho) as flat slices.
    pub fn param_slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.weight_mu.as_slice_mut().expect("standard layout"),
            self.weight_rho.as_slice_mut().expect("standard layout"),
            self.bias_mu.as_slice_mut().expect("standard layout"),
            self.bias_rho.as_slice_mut().expect("standard layout"),
        ]
    }

    fn check_batch(&self, batch: &ArrayView2<'_, f64>) -> Result<()> {
        if batch.ncols() != self.feature_dim() {
            return Err(Error::Dimension(format!(
                "batch has {} columns, layer expects {}",
                batch.ncols(),
                self.feature_dim()
            )));
        }
        Ok(())
    }

    /// Closed-form KL(q || p) summed over every weight and bias.
    pub fn kl_to_prior(&self) -> f64 {
        let s = self.prior_scale;
        let term = |mu: f64, rho: f64| {
            let sigma = softplus(rho);
            (s / sigma).ln() + (sigma * sigma + mu * mu) / (2.0 * s * s) - 0.5
        };
        let w: f64 = Zip::from(&self.weight_mu)
            .and(&self.weight_rho)
            .fold(0.0, |acc, &m, &r| acc + term(m, r));
        let b: f64 = Zip::from(&self.bias_mu)
            .and(&self.bias_rho)
            .fold(0.0, |acc, &m, &r| acc + term(m, r));
        w + b
    }

    /// Reparameterised draw `mu + softplus(rho) * eps`. Weights are drawn
    /// row-major before biases.
    pub fn sample_weights(&self, rng: &mut Stream) -> WeightSample {
        let weights = Zip::from(&self.weight_mu)
            .and(&self.weight_rho)
            .map_collect(|&m, &r| m + softplus(r) * rng.sample::<f64, _>(StandardNormal));
        let biases = Zip::from(&self.bias_mu)
            .and(&self.bias_rho)
            .map_collect(|&m, &r| m + softplus(r) * rng.sample::<f64, _>(StandardNormal));
        WeightSample { weights, biases }
    }

    pub fn mean_weights(&self) -> WeightSample {
        WeightSample {
            weights: self.weight_mu.clone(),
            biases: self.bias_mu.clone(),
        }
    }

    /// Logits through the posterior means.
    pub fn forward_mean(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_batch(&batch)?;
        Ok(batch.dot(&self.weight_mu.t()) + &self.bias_mu)
    }

    /// Flipout forward pass with freshly drawn noise.
    pub fn forward_flipout(
        &self,
        batch: ArrayView2<'_, f64>,
        rng: &mut Stream,
    ) -> Result<Array2<f64>> {
        self.check_batch(&batch)?;
        let noise = FlipoutNoise::draw(self.num_classes(), self.feature_dim(), batch.nrows(), rng);
        self.forward_flipout_with(batch, &noise)
    }

    /// Flipout forward pass with explicit noise:
    /// `W_mu x + b_mu + r ⊙ (ΔW (s ⊙ x)) + r ⊙ Δb`.
    pub fn forward_flipout_with(
        &self,
        batch: ArrayView2<'_, f64>,
        noise: &FlipoutNoise,
    ) -> Result<Array2<f64>> {
        self.check_batch(&batch)?;
        let (k, d) = self.weight_mu.dim();
        let b = batch.nrows();
        if noise.weight_eps.dim() != (k, d)
            || noise.bias_eps.len() != k
            || noise.out_signs.dim() != (b, k)
            || noise.in_signs.dim() != (b, d)
        {
            return Err(Error::Dimension(
                "flipout noise does not match layer and batch".into(),
            ));
        }
        let delta_w = self.weight_sigma() * &noise.weight_eps;
        let delta_b = self.bias_sigma() * &noise.bias_eps;
        let flipped = &batch * &noise.in_signs;
        let perturb = (flipped.dot(&delta_w.t()) + &delta_b) * &noise.out_signs;
        Ok(self.forward_mean(batch)? + perturb)
    }

    pub fn to_json(&self) -> String {
        let file = LayerFile {
            format_version: 1,
            feature_dim: self.feature_dim(),
            num_classes: self.num_classes(),
            prior_scale: self.prior_scale,
            weight_mu: self.weight_mu.iter().copied().collect(),
            weight_rho: self.weight_rho.iter().copied().collect(),
            bias_mu: self.bias_mu.to_vec(),
            bias_rho: self.bias_rho.to_vec(),
        };
        serde_json::to_string_pretty(&file).expect("layer serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LayerFile = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "layer file".into(),
            source,
        })?;
        if file.format_version != 1 {
            return Err(Error::invalid(
                "layer file",
                format!("unsupported format_version {}", file.format_version),
            ));
        }
        let (k, d) = (file.num_classes, file.feature_dim);
        let shape_err = |e: ndarray::ShapeError| Error::Dimension(format!("layer file: {e}"));
        Self::from_parts(
            Array2::from_shape_vec((k, d), file.weight_mu).map_err(shape_err)?,
            Array2::from_shape_vec((k, d), file.weight_rho).map_err(shape_err)?,
            Array1::from(file.bias_mu),
            Array1::from(file.bias_rho),
            file.prior_scale,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    format_version: u32,
    feature_dim: usize,
    num_classes: usize,
    prior_scale: f64,
    weight_mu: Vec<f64>,
    weight_rho: Vec<f64>,
    bias_mu: Vec<f64>,
    bias_rho: Vec<f64>,
}
