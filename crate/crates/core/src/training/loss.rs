use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::vbll::{logistic, FlipoutNoise, VBLinearLayer};

/// Minibatch negative ELBO split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// Mean cross-entropy over the batch (nats), averaged over Flipout passes.
    pub nll: f64,
    pub kl: f64,
    /// `nll + kl / n_train`.
    pub total: f64,
}

impl LossBreakdown {
    fn new(nll: f64, kl: f64, n_train: usize) -> Self {
        Self {
            nll,
            kl,
            total: nll + kl / n_train as f64,
        }
    }
}

/// Gradients with the same shapes as the layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weight_mu: Array2<f64>,
    pub weight_rho: Array2<f64>,
    pub bias_mu: Array1<f64>,
    pub bias_rho: Array1<f64>,
}

impl LayerGradients {
    pub fn slices(&self) -> [&[f64]; 4] {
        [
            self.weight_mu.as_slice().expect("standard layout"),
            self.weight_rho.as_slice().expect("standard layout"),
            self.bias_mu.as_slice().expect("standard layout"),
            self.bias_rho.as_slice().expect("standard layout"),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}

fn check_inputs(
    layer: &VBLinearLayer,
    batch: &ArrayView2<'_, f64>,
    labels: &[usize],
    n_train: usize,
    noises: &[FlipoutNoise],
) -> Result<()> {
    if batch.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} rows but {} labels",
            batch.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("batch", "empty batch"));
    }
    let k = layer.num_classes();
    if let Some(&l) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(
            "labels",
            format!("label {l} outside [0, {k})"),
        ));
    }
    if n_train < labels.len() {
        return Err(Error::invalid(
            "n_train",
            format!(
                "n_train {n_train} is smaller than the batch ({})",
                labels.len()
            ),
        ));
    }
    if noises.is_empty() {
        return Err(Error::invalid("noise", "need at least one Flipout pass"));
    }
    Ok(())
}

/// Mean cross-entropy of `logits` against `labels` and, per row, the
/// softmax probabilities.
fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let mut probs = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    for ((row, mut p), &y) in logits.rows().into_iter().zip(probs.rows_mut()).zip(labels) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - m).exp()).sum();
        let log_norm = m + sum.ln();
        total += log_norm - row[y];
        Zip::from(&mut p)
            .and(&row)
            .for_each(|p, &z| *p = (z - m).exp() / sum);
    }
    (total / labels.len() as f64, probs)
}

fn draw_noises(
    layer: &VBLinearLayer,
    rows: usize,
    passes: usize,
    rng: &mut Stream,
) -> Vec<FlipoutNoise> {
    (0..passes)
        .map(|_| FlipoutNoise::draw(layer.num_classes(), layer.feature_dim(), rows, rng))
        .collect()
}

/// Negative ELBO on a minibatch under the given Flipout noise, one entry
/// of `noises` per pass.
pub fn elbo_loss_with(
    layer: &VBLinearLayer,
    batch: ArrayView2<'_, f64>,
    labels: &[usize],
    n_train: usize,
    noises: &[FlipoutNoise],
) -> Result<LossBreakdown> {
    check_inputs(layer, &batch, labels, n_train, noises)?;
    let mut nll = 0.0;
    for noise in noises {
        let logits = layer.forward_flipout_with(batch, noise)?;
        nll += cross_entropy(&logits, labels).0;
    }
    nll /= noises.len() as f64;
    Ok(LossBreakdown::new(nll, layer.kl_to_prior(), n_train))
}

/// [`elbo_loss_with`] drawing `passes` Flipout noise sets from `rng`.
/// Cloning `rng` beforehand and handing the clone to [`elbo_gradients`]
/// replays identical noise.
pub fn elbo_loss(
    layer: &VBLinearLayer,
    batch: ArrayView2<'_, f64>,
    labels: &[usize],
    n_train: usize,
    passes: usize,
    rng: &mut Stream,
) -> Result<LossBreakdown> {
    let noises = draw_noises(layer, batch.nrows(), passes, rng);
    elbo_loss_with(layer, batch, labels, n_train, &noises)
}

/// Gradient of `KL / n_train` with respect to every (mu, rho).
pub fn kl_gradients(layer: &VBLinearLayer, n_train: usize) -> LayerGradients {
    let s2 = layer.prior_scale() * layer.prior_scale();
    let scale = 1.0 / n_train as f64;
    let d_mu = |mu: f64| mu / s2 * scale;
    let d_rho = |rho: f64| {
        let sigma = crate::vbll::softplus(rho);
        (sigma / s2 - 1.0 / sigma) * scale * logistic(rho)
    };
    LayerGradients {
        weight_mu: layer.weight_mu.mapv(d_mu),
        weight_rho: layer.weight_rho.mapv(d_rho),
        bias_mu: layer.bias_mu.mapv(d_mu),
        bias_rho: layer.bias_rho.mapv(d_rho),
    }
}

/// Exact gradient of [`LossBreakdown::total`] at fixed Flipout noise.
///
/// With `g = (p - onehot(y)) / (B * passes)` the CE terms are
/// `∂/∂W_mu = gᵀX`, `∂/∂b_mu = Σ_n g_n`,
/// `∂/∂σ_W = E ⊙ ((g ⊙ R)ᵀ (X ⊙ S))`, `∂/∂σ_b = e ⊙ Σ_n (g ⊙ R)_n`,
/// and `∂σ/∂ρ = logistic(ρ)`.
pub fn elbo_gradients_with(
    layer: &VBLinearLayer,
    batch: ArrayView2<'_, f64>,
    labels: &[usize],
    n_train: usize,
    noises: &[FlipoutNoise],
) -> Result<(LossBreakdown, LayerGradients)> {
    check_inputs(layer, &batch, labels, n_train, noises)?;
    let (k, d) = (layer.num_classes(), layer.feature_dim());
    let scale = 1.0 / (labels.len() * noises.len()) as f64;

    let mut g_wmu = Array2::<f64>::zeros((k, d));
    let mut g_bmu = Array1::<f64>::zeros(k);
    let mut g_wsig = Array2::<f64>::zeros((k, d));
    let mut g_bsig = Array1::<f64>::zeros(k);
    let mut nll = 0.0;

    for noise in noises {
        let logits = layer.forward_flipout_with(batch, noise)?;
        let (ce, mut g) = cross_entropy(&logits, labels);
        nll += ce;
        for (mut row, &y) in g.rows_mut().into_iter().zip(labels) {
            row[y] -= 1.0;
        }
        g *= scale;

        g_wmu += &g.t().dot(&batch);
        g_bmu += &g.sum_axis(Axis(0));

        let gr = &g * &noise.out_signs;
        let xs = &batch * &noise.in_signs;
        g_wsig += &(gr.t().dot(&xs) * &noise.weight_eps);
        g_bsig += &(gr.sum_axis(Axis(0)) * &noise.bias_eps);
    }
    nll /= noises.len() as f64;

    let mut grads = kl_gradients(layer, n_train);
    grads.weight_mu += &g_wmu;
    grads.bias_mu += &g_bmu;
    Zip::from(&mut grads.weight_rho)
        .and(&g_wsig)
        .and(&layer.weight_rho)
        .for_each(|g, &gs, &rho| *g += gs * logistic(rho));
    Zip::from(&mut grads.bias_rho)
        .and(&g_bsig)
        .and(&layer.bias_rho)
        .for_each(|g, &gs, &rho| *g += gs * logistic(rho));

    Ok((LossBreakdown::new(nll, layer.kl_to_prior(), n_train), grads))
}

/// [`elbo_gradients_with`] drawing `passes` noise sets from `rng`.
pub fn elbo_gradients(
    layer: &VBLinearLayer,
    batch: ArrayView2<'_, f64>,
    labels: &[usize],
    n_train: usize,
    passes: usize,
    rng: &mut Stream,
) -> Result<(LossBreakdown, LayerGradients)> {
    let noises = draw_noises(layer, batch.nrows(), passes, rng);
    elbo_gradients_with(layer, batch, labels, n_train, &noises)
}
