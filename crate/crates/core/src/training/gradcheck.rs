use ndarray::ArrayView2;

use crate::error::Result;
use crate::rng;
use crate::vbll::{FlipoutNoise, VBLinearLayer};

use super::{elbo_gradients_with, elbo_loss_with};

/// Largest relative disagreement between the analytic ELBO gradient and
/// central differences of step `h`, over every parameter.
///
/// One Flipout noise set is drawn from `seed` and replayed for every
/// evaluation. Relative error is `|a - f| / max(1e-8, |a| + |f|)`.
pub fn gradcheck(
    layer: &VBLinearLayer,
    batch: ArrayView2<'_, f64>,
    labels: &[usize],
    n_train: usize,
    h: f64,
    seed: u64,
) -> Result<f64> {
    let blocks = gradcheck_by_block(layer, batch, labels, n_train, h, seed)?;
    Ok(blocks.into_iter().fold(0.0, f64::max))
}

/// [`gradcheck`] split by parameter block, in the order
/// (weight_mu, weight_rho, bias_mu, bias_rho).
pub fn gradcheck_by_block(
    layer: &VBLinearLayer,
    batch: ArrayView2<'_, f64>,
    labels: &[usize],
    n_train: usize,
    h: f64,
    seed: u64,
) -> Result<[f64; 4]> {
    let noise = [FlipoutNoise::draw(
        layer.num_classes(),
        layer.feature_dim(),
        batch.nrows(),
        &mut rng::stream(seed),
    )];
    let (_, analytic) = elbo_gradients_with(layer, batch, labels, n_train, &noise)?;
    let analytic = analytic.slices().map(|s| s.to_vec());

    let mut probe = layer.clone();
    let mut worst = [0.0f64; 4];
    for (block, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let orig = probe.param_slices_mut()[block][i];
            probe.param_slices_mut()[block][i] = orig + h;
            let up = elbo_loss_with(&probe, batch, labels, n_train, &noise)?.total;
            probe.param_slices_mut()[block][i] = orig - h;
            let down = elbo_loss_with(&probe, batch, labels, n_train, &noise)?.total;
            probe.param_slices_mut()[block][i] = orig;

            let fd = (up - down) / (2.0 * h);
            let rel = (a - fd).abs() / (a.abs() + fd.abs()).max(1e-8);
            worst[block] = worst[block].max(rel);
        }
    }
    Ok(worst)
}
