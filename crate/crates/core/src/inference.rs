//! Monte Carlo predictive posterior and per-sample uncertainty scores.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};

use crate::dataset::FeatureDataset;
use crate::error::{Error, Result};
use crate::format::decimal;
use crate::rng;
use crate::vbll::{softmax_rows, VBLinearLayer};

pub const DEFAULT_MC_SAMPLES: usize = 20;

/// Softmax outputs of `S` posterior weight draws for `N` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    /// N×S×K.
    prob_samples: Array3<f64>,
    /// N×K mean over the S draws.
    mean_probs: Array2<f64>,
    predicted: Vec<usize>,
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

impl PredictionSet {
    /// Wraps an N×S×K array of probability vectors.
    pub fn from_samples(prob_samples: Array3<f64>) -> Result<Self> {
        let (n, draws, k) = prob_samples.dim();
        if n == 0 || draws == 0 || k == 0 {
            return Err(Error::invalid("prediction set", "empty dimension"));
        }
        for i in 0..n {
            for j in 0..draws {
                let lane = prob_samples.slice(s![i, j, ..]);
                let sum: f64 = lane.sum();
                if lane.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(
                        "prediction set",
                        format!("sample {j} of row {i} is not a probability vector"),
                    ));
                }
            }
        }
        let mean_probs = prob_samples.mean_axis(Axis(1)).expect("s > 0");
        let predicted = mean_probs
            .rows()
            .into_iter()
            .map(|r| argmax(r.iter().copied()))
            .collect();
        Ok(Self {
            prob_samples,
            mean_probs,
            predicted,
        })
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }

    pub fn mc_samples(&self) -> usize {
        self.prob_samples.dim().1
    }

    pub fn num_classes(&self) -> usize {
        self.prob_samples.dim().2
    }

    pub fn prob_samples(&self) -> &Array3<f64> {
        &self.prob_samples
    }

    pub fn mean_probs(&self) -> &Array2<f64> {
        &self.mean_probs
    }

    pub fn predicted(&self) -> &[usize] {
        &self.predicted
    }

    /// `index,sample,p0..p{K-1}`: every draw for every row.
    pub fn posterior_csv(&self) -> String {
        let (n, draws, k) = self.prob_samples.dim();
        let mut out = String::from("index,sample");
        for c in 0..k {
            out.push_str(&format!(",p{c}"));
        }
        out.push('\n');
        for i in 0..n {
            for j in 0..draws {
                out.push_str(&format!("{i},{j}"));
                for c in 0..k {
                    out.push(',');
                    out.push_str(&decimal(self.prob_samples[(i, j, c)]));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Predictive posterior of `layer` on `features`: `mc_samples` independent
/// reparameterised weight draws, draw `s` taken from stream `(seed, s)`.
pub fn predictive_posterior_features(
    layer: &VBLinearLayer,
    features: ArrayView2<'_, f64>,
    mc_samples: usize,
    seed: u64,
) -> Result<PredictionSet> {
    if mc_samples == 0 {
        return Err(Error::invalid("mc_samples", "need at least one sample"));
    }
    if features.ncols() != layer.feature_dim() {
        return Err(Error::Dimension(format!(
            "data has D={}, model expects D={}",
            features.ncols(),
            layer.feature_dim()
        )));
    }
    let n = features.nrows();
    let k = layer.num_classes();
    let mut probs = Array3::zeros((n, mc_samples, k));
    for draw_idx in 0..mc_samples {
        let draw = layer.sample_weights(&mut rng::stream_at(seed, &[draw_idx as u64]));
        let p = softmax_rows(draw.forward(features).view());
        probs.slice_mut(s![.., draw_idx, ..]).assign(&p);
    }
    PredictionSet::from_samples(probs)
}

pub fn predictive_posterior(
    layer: &VBLinearLayer,
    ds: &FeatureDataset,
    mc_samples: usize,
    seed: u64,
) -> Result<PredictionSet> {
    if ds.num_classes() != layer.num_classes() {
        return Err(Error::Dimension(format!(
            "data has K={}, model has K={}",
            ds.num_classes(),
            layer.num_classes()
        )));
    }
    predictive_posterior_features(layer, ds.features(), mc_samples, seed)
}

/// Per-row scores derived from a [`PredictionSet`]. Entropies are in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyScores {
    /// Max of the mean probabilities.
    pub confidence: Vec<f64>,
    /// Entropy of the mean probabilities.
    pub entropy: Vec<f64>,
    /// Mean entropy of the individual draws.
    pub expected_entropy: Vec<f64>,
    /// `max(0, entropy - expected_entropy)`.
    pub mutual_info: Vec<f64>,
}

impl UncertaintyScores {
    pub fn len(&self) -> usize {
        self.confidence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.confidence.is_empty()
    }
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn entropy(p: impl IntoIterator<Item = f64>) -> f64 {
    -p.into_iter()
        .filter(|&v| v > 0.0)
        .map(|v| v * v.ln())
        .sum::<f64>()
}

/// Confidence, entropy, expected entropy and mutual information per row.
/// Values are clamped to their mathematical ranges to absorb round-off.
pub fn uncertainty_scores(pred: &PredictionSet) -> UncertaintyScores {
    let k = pred.num_classes();
    let ln_k = (k as f64).ln();
    let floor = 1.0 / k as f64;
    let mut out = UncertaintyScores {
        confidence: Vec::with_capacity(pred.len()),
        entropy: Vec::with_capacity(pred.len()),
        expected_entropy: Vec::with_capacity(pred.len()),
        mutual_info: Vec::with_capacity(pred.len()),
    };
    for (mean, draws) in pred
        .mean_probs
        .rows()
        .into_iter()
        .zip(pred.prob_samples.outer_iter())
    {
        let conf = mean.iter().copied().fold(0.0, f64::max).clamp(floor, 1.0);
        let h = entropy(mean.iter().copied()).clamp(0.0, ln_k);
        let eh = (draws
            .rows()
            .into_iter()
            .map(|r| entropy(r.iter().copied()))
            .sum::<f64>()
            / draws.nrows() as f64)
            .clamp(0.0, ln_k);
        out.confidence.push(conf);
        out.entropy.push(h);
        out.expected_entropy.push(eh);
        out.mutual_info.push((h - eh).max(0.0));
    }
    out
}

/// `index,label,predicted,confidence,entropy,mutual_info`.
pub fn predictions_csv(
    pred: &PredictionSet,
    scores: &UncertaintyScores,
    labels: &[usize],
) -> String {
    let mut out = String::from("index,label,predicted,confidence,entropy,mutual_info\n");
    for (i, (&y, &p)) in labels.iter().zip(pred.predicted()).enumerate() {
        out.push_str(&format!(
            "{i},{y},{p},{},{},{}\n",
            decimal(scores.confidence[i]),
            decimal(scores.entropy[i]),
            decimal(scores.mutual_info[i])
        ));
    }
    out
}
