//! End-of-run evaluation bundle and the summary report.

use serde::{Deserialize, Serialize};

use crate::calibration::{
    confidence_histogram, ece, CalibrationReport, ConfidenceHistogram, DEFAULT_ECE_BINS,
    DEFAULT_HISTOGRAM_BINS,
};
use crate::dataset::FeatureDataset;
use crate::error::Result;
use crate::inference::{
    predictive_posterior, uncertainty_scores, PredictionSet, UncertaintyScores, DEFAULT_MC_SAMPLES,
};
use crate::selection::{apply_rejection, Measure, RejectionReport};
use crate::vbll::VBLinearLayer;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub mc_samples: usize,
    pub threshold: f64,
    pub measure: Measure,
    pub ece_bins: usize,
    pub histogram_bins: usize,
    /// Compute ECE over accepted samples only instead of all samples.
    pub ece_accepted_only: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            mc_samples: DEFAULT_MC_SAMPLES,
            threshold: 0.7,
            measure: Measure::Confidence,
            ece_bins: DEFAULT_ECE_BINS,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            ece_accepted_only: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub predictions: PredictionSet,
    pub scores: UncertaintyScores,
    pub rejection: RejectionReport,
    pub calibration: CalibrationReport,
    pub histogram: ConfidenceHistogram,
}

impl Evaluation {
    pub fn correctness(&self, labels: &[usize]) -> Vec<bool> {
        self.predictions
            .predicted()
            .iter()
            .zip(labels)
            .map(|(p, y)| p == y)
            .collect()
    }
}

/// Predictive posterior, scores, rejection at one threshold, ECE and the
/// confidence histogram for `ds`.
pub fn evaluate(
    layer: &VBLinearLayer,
    ds: &FeatureDataset,
    settings: &EvalSettings,
    seed: u64,
) -> Result<Evaluation> {
    settings.measure.validate_threshold(settings.threshold)?;
    let predictions = predictive_posterior(layer, ds, settings.mc_samples, seed)?;
    let scores = uncertainty_scores(&predictions);
    let rejection = apply_rejection(
        &scores,
        predictions.predicted(),
        ds.labels(),
        settings.threshold,
        settings.measure,
        ds.num_classes(),
    )?;

    let correct: Vec<bool> = predictions
        .predicted()
        .iter()
        .zip(ds.labels())
        .map(|(p, y)| p == y)
        .collect();
    let calibration = if settings.ece_accepted_only {
        let (conf, ok): (Vec<f64>, Vec<bool>) = scores
            .confidence
            .iter()
            .zip(&correct)
            .zip(accepted_mask(&scores, settings))
            .filter(|(_, keep)| *keep)
            .map(|((&c, &k), _)| (c, k))
            .unzip();
        ece(&conf, &ok, settings.ece_bins)?
    } else {
        ece(&scores.confidence, &correct, settings.ece_bins)?
    };
    let histogram = confidence_histogram(
        &scores.confidence,
        settings.histogram_bins,
        settings.threshold,
    )?;

    Ok(Evaluation {
        predictions,
        scores,
        rejection,
        calibration,
        histogram,
    })
}

fn accepted_mask(scores: &UncertaintyScores, settings: &EvalSettings) -> Vec<bool> {
    let t = settings.threshold;
    match settings.measure {
        Measure::Confidence => scores.confidence.iter().map(|&c| c >= t).collect(),
        Measure::Entropy => scores.entropy.iter().map(|&h| h <= t).collect(),
        Measure::MutualInfo => scores.mutual_info.iter().map(|&m| m <= t).collect(),
    }
}

/// Headline metrics of one evaluation run.
///
/// ```json
/// {"accuracy_accepted": 0.8993, "coverage": 0.7450, "rejection_rate": 0.2550, "ece": 0.0217, ...}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub accuracy_accepted: Option<f64>,
    pub coverage: f64,
    pub rejection_rate: f64,
    pub ece: f64,
    pub overall_accuracy: f64,
    pub n_samples: usize,
    pub threshold: f64,
    pub measure: Measure,
    pub mc_samples: usize,
    pub seed: u64,
    pub toolkit_version: String,
}

impl SummaryReport {
    pub fn from_evaluation(eval: &Evaluation, seed: u64) -> Self {
        let r = &eval.rejection;
        Self {
            accuracy_accepted: r.selective_accuracy,
            coverage: r.coverage,
            rejection_rate: r.rejection_rate,
            ece: eval.calibration.ece,
            overall_accuracy: r.overall_accuracy,
            n_samples: r.accepted_count + r.rejected_count,
            threshold: r.threshold,
            measure: r.measure,
            mc_samples: eval.predictions.mc_samples(),
            seed,
            toolkit_version: TOOLKIT_VERSION.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}
