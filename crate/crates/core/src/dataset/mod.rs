//! Feature-vector classification datasets: construction, synthetic
//! generation, CSV persistence, stratified splitting and SMOTE balancing.

mod csv;
mod smote;
mod split;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use self::csv::{load_csv, parse_csv, to_csv_string, write_csv};
pub use self::smote::{smote_oversample, DEFAULT_K_NEIGHBORS};
pub use self::split::{stratified_split, SplitRatios};

/// N labelled rows of D finite features over K classes.
///
/// Immutable after construction; all invariants are checked in [`FeatureDataset::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl FeatureDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::invalid("dataset", "no rows"));
        }
        if features.ncols() == 0 {
            return Err(Error::invalid("dataset", "feature dimension is zero"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::invalid(
                "dataset",
                format!("need at least 2 classes, got {num_classes}"),
            ));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::invalid(
                "dataset",
                format!("row {i} has label {l} outside [0, {num_classes})"),
            ));
        }
        if let Some(((i, j), v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(
                "dataset",
                format!("feature ({i}, {j}) is not finite: {v}"),
            ));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row indices grouped by class, in ascending row order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Rows at `indices`, in that order. Panics on out-of-range indices.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let d = self.feature_dim();
        let mut features = Array2::zeros((indices.len(), d));
        for (dst, &src) in indices.iter().enumerate() {
            features.row_mut(dst).assign(&self.features.row(src));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels, self.num_classes)
    }

    /// Fails unless `other` has the same feature dimension and class count.
    pub fn check_compatible(&self, other: &FeatureDataset) -> Result<()> {
        if self.feature_dim() != other.feature_dim() || self.num_classes != other.num_classes {
            return Err(Error::Dimension(format!(
                "datasets disagree: D={} K={} vs D={} K={}",
                self.feature_dim(),
                self.num_classes,
                other.feature_dim(),
                other.num_classes
            )));
        }
        Ok(())
    }
}

/// Parameters of the Gaussian-blob generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub samples_per_class: Vec<usize>,
    pub class_separation: f64,
    pub noise_scale: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_classes: 5,
            feature_dim: 16,
            samples_per_class: vec![1000; 5],
            class_separation: 4.0,
            noise_scale: 1.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid(
                "synthetic config",
                "num_classes must be at least 2",
            ));
        }
        if self.feature_dim < 1 {
            return Err(Error::invalid(
                "synthetic config",
                "feature_dim must be at least 1",
            ));
        }
        if self.samples_per_class.len() != self.num_classes {
            return Err(Error::invalid(
                "synthetic config",
                format!(
                    "samples_per_class has {} entries for {} classes",
                    self.samples_per_class.len(),
                    self.num_classes
                ),
            ));
        }
        if let Some(c) = self.samples_per_class.iter().position(|&n| n == 0) {
            return Err(Error::invalid(
                "synthetic config",
                format!("class {c} has zero samples"),
            ));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(Error::invalid(
                "synthetic config",
                "class_separation must be positive",
            ));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid(
                "synthetic config",
                "noise_scale must be positive",
            ));
        }
        Ok(())
    }
}

/// Isotropic Gaussian blobs whose class means sit uniformly on a sphere of
/// radius `class_separation`. Rows are emitted class by class.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<FeatureDataset> {
    cfg.validate()?;
    let d = cfg.feature_dim;
    let mut rng = rng::stream(seed);

    let means: Vec<Vec<f64>> = (0..cfg.num_classes)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.iter().map(|x| x / norm * cfg.class_separation).collect();
            }
        })
        .collect();

    let n: usize = cfg.samples_per_class.iter().sum();
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (c, &count) in cfg.samples_per_class.iter().enumerate() {
        for _ in 0..count {
            for j in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                features[(row, j)] = means[c][j] + cfg.noise_scale * z;
            }
            labels.push(c);
            row += 1;
        }
    }
    FeatureDataset::new(features, labels, cfg.num_classes)
}
