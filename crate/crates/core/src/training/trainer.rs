use rand::seq::SliceRandom;

use crate::dataset::FeatureDataset;
use crate::error::{Error, Result};
use crate::format::decimal;
use crate::rng;
use crate::vbll::{LayerInit, VBLinearLayer};

use super::{elbo_gradients, Adam, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Batch-size-weighted means of the minibatch losses seen this epoch.
    pub total: f64,
    pub nll: f64,
    pub kl: f64,
    /// Validation NLL and accuracy through the posterior means.
    pub val_nll: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,total,nll,kl,val_nll,val_acc\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch,
                decimal(r.total),
                decimal(r.nll),
                decimal(r.kl),
                decimal(r.val_nll),
                decimal(r.val_acc)
            ));
        }
        out
    }
}

/// Mean NLL and accuracy of the posterior-mean classifier on `ds`.
pub(crate) fn mean_weight_metrics(
    layer: &VBLinearLayer,
    ds: &FeatureDataset,
) -> Result<(f64, f64)> {
    let logits = layer.forward_mean(ds.features())?;
    let mut nll = 0.0;
    let mut correct = 0usize;
    for (row, &y) in logits.rows().into_iter().zip(ds.labels()) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        nll += lse - row[y];
        let pred = row
            .iter()
            .enumerate()
            .fold(0, |best, (i, &z)| if z > row[best] { i } else { best });
        correct += usize::from(pred == y);
    }
    let n = ds.len() as f64;
    Ok((nll / n, correct as f64 / n))
}

/// Initialises a layer from `init` (seeded by the `"init"` role of
/// `cfg.seed`) and trains it.
pub fn train(
    train_ds: &FeatureDataset,
    val_ds: &FeatureDataset,
    init: &LayerInit,
    cfg: &TrainConfig,
) -> Result<(VBLinearLayer, TrainingTrace)> {
    let layer = VBLinearLayer::init(
        train_ds.feature_dim(),
        train_ds.num_classes(),
        init,
        rng::role_seed(cfg.seed, "init"),
    )?;
    train_from(layer, train_ds, val_ds, cfg)
}

/// Shuffled-minibatch Adam on the negative ELBO, starting from `layer`.
///
/// Epoch `e` shuffles with stream `(seed, 0, e)`; batch `b` of that epoch
/// draws its Flipout noise from stream `(seed, 1, e, b)`.
pub fn train_from(
    mut layer: VBLinearLayer,
    train_ds: &FeatureDataset,
    val_ds: &FeatureDataset,
    cfg: &TrainConfig,
) -> Result<(VBLinearLayer, TrainingTrace)> {
    cfg.validate()?;
    train_ds.check_compatible(val_ds)?;
    if layer.feature_dim() != train_ds.feature_dim()
        || layer.num_classes() != train_ds.num_classes()
    {
        return Err(Error::Dimension(format!(
            "layer is K={} D={}, data is K={} D={}",
            layer.num_classes(),
            layer.feature_dim(),
            train_ds.num_classes(),
            train_ds.feature_dim()
        )));
    }

    let n_train = train_ds.len();
    let mut adam = Adam::new(&layer, cfg.adam());
    let mut trace = TrainingTrace::default();
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut best: Option<(f64, VBLinearLayer)> = None;
    let mut stale = 0usize;

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream_at(cfg.seed, &[0, epoch as u64]));

        let (mut total, mut nll, mut kl) = (0.0, 0.0, 0.0);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = train_ds.select(chunk)?;
            let mut noise = rng::stream_at(cfg.seed, &[1, epoch as u64, b as u64]);
            let (loss, grads) = elbo_gradients(
                &layer,
                batch.features(),
                batch.labels(),
                n_train,
                cfg.train_mc_samples,
                &mut noise,
            )?;
            if !grads.is_finite() || !loss.total.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient at epoch {}, batch {b}",
                    epoch + 1
                )));
            }
            adam.update(&mut layer, &grads)?;
            let w = chunk.len() as f64;
            total += loss.total * w;
            nll += loss.nll * w;
            kl += loss.kl * w;
        }
        layer
            .validate()
            .map_err(|_| Error::NonFinite(format!("parameters after epoch {}", epoch + 1)))?;

        let (val_nll, val_acc) = mean_weight_metrics(&layer, val_ds)?;
        let n = n_train as f64;
        trace.epochs.push(EpochRecord {
            epoch: epoch + 1,
            total: total / n,
            nll: nll / n,
            kl: kl / n,
            val_nll,
            val_acc,
        });

        if let Some(patience) = cfg.early_stop_patience {
            match &best {
                Some((best_nll, _)) if val_nll >= *best_nll => {
                    stale += 1;
                    if stale >= patience {
                        break;
                    }
                }
                _ => {
                    best = Some((val_nll, layer.clone()));
                    stale = 0;
                }
            }
        }
    }

    let layer = match best {
        Some((_, best_layer)) => best_layer,
        None => layer,
    };
    Ok((layer, trace))
}
