//! Selective prediction with a variational Bayesian linear classifier head.
//!
//! The crate covers the full path from feature vectors to a calibrated,
//! rejection-aware classifier:
//!
//! * [`dataset`]: CSV I/O, synthetic blobs, stratified splits, SMOTE.
//! * [`vbll`]: the mean-field Gaussian linear layer, its KL to the prior and
//!   the Flipout forward pass.
//! * [`training`]: negative-ELBO loss, analytic gradients, Adam, gradient check.
//! * [`inference`]: Monte Carlo predictive posterior and uncertainty scores.
//! * [`selection`]: the rejection gate, threshold sweeps, confusion matrices.
//! * [`calibration`]: expected calibration error and confidence histograms.

pub mod calibration;
pub mod dataset;
mod error;
pub mod format;
pub mod inference;
pub mod report;
pub mod rng;
pub mod selection;
pub mod training;
pub mod vbll;

pub use calibration::{confidence_histogram, ece, CalibrationReport, ConfidenceHistogram};
pub use dataset::{
    generate_synthetic, load_csv, smote_oversample, stratified_split, write_csv, FeatureDataset,
    SplitRatios, SyntheticConfig,
};
pub use error::{Error, ErrorKind, Result};
pub use inference::{predictive_posterior, uncertainty_scores, PredictionSet, UncertaintyScores};
pub use report::{evaluate, EvalSettings, Evaluation, SummaryReport, TOOLKIT_VERSION};
pub use selection::{
    apply_rejection, confusion_matrix, threshold_sweep, Measure, RejectionCurve, RejectionReport,
};
pub use training::{gradcheck, train, train_from, LossBreakdown, TrainConfig, TrainingTrace};
pub use vbll::{softmax, FlipoutNoise, LayerInit, VBLinearLayer, WeightSample};
