//! Rejection gate, threshold sweeps and confusion matrices.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{decimal, decimal_opt};
use crate::inference::UncertaintyScores;

/// Score that drives the rejection gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Accept when confidence >= τ.
    #[default]
    Confidence,
    /// Accept when predictive entropy <= τ.
    Entropy,
    /// Accept when mutual information <= τ.
    MutualInfo,
}

impl Measure {
    fn scores<'a>(&self, s: &'a UncertaintyScores) -> &'a [f64] {
        match self {
            Measure::Confidence => &s.confidence,
            Measure::Entropy => &s.entropy,
            Measure::MutualInfo => &s.mutual_info,
        }
    }

    fn accepts(&self, score: f64, threshold: f64) -> bool {
        match self {
            Measure::Confidence => score >= threshold,
            Measure::Entropy | Measure::MutualInfo => score <= threshold,
        }
    }

    pub fn validate_threshold(&self, threshold: f64) -> Result<()> {
        let ok = match self {
            Measure::Confidence => (0.0..=1.0).contains(&threshold),
            Measure::Entropy | Measure::MutualInfo => threshold >= 0.0 && threshold.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "threshold",
                format!("{threshold} is out of range for measure {self}"),
            ))
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Confidence => "confidence",
            Measure::Entropy => "entropy",
            Measure::MutualInfo => "mutual_info",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "confidence" => Ok(Measure::Confidence),
            "entropy" => Ok(Measure::Entropy),
            "mutual_info" => Ok(Measure::MutualInfo),
            other => Err(Error::invalid(
                "measure",
                format!("`{other}` (expected confidence, entropy or mutual_info)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionReport {
    pub threshold: f64,
    pub measure: Measure,
    pub accepted_count: usize,
    pub rejected_count: usize,
    pub coverage: f64,
    pub rejection_rate: f64,
    /// `None` when nothing was accepted.
    pub selective_accuracy: Option<f64>,
    pub overall_accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion_accepted: Array2<usize>,
    pub confusion_all: Array2<usize>,
}

fn check_lengths(predicted: &[usize], labels: &[usize], other: usize) -> Result<()> {
    if predicted.len() != labels.len() || predicted.len() != other {
        return Err(Error::Dimension(format!(
            "lengths disagree: {} predictions, {} labels, {other} scores/mask entries",
            predicted.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// K×K counts of (true, predicted) pairs over rows where `mask` is set.
pub fn confusion_matrix(
    predicted: &[usize],
    labels: &[usize],
    mask: &[bool],
    num_classes: usize,
) -> Result<Array2<usize>> {
    check_lengths(predicted, labels, mask.len())?;
    let mut m = Array2::zeros((num_classes, num_classes));
    for ((&p, &y), &keep) in predicted.iter().zip(labels).zip(mask) {
        if p >= num_classes || y >= num_classes {
            return Err(Error::invalid(
                "confusion matrix",
                format!("class index outside [0, {num_classes})"),
            ));
        }
        if keep {
            m[(y, p)] += 1;
        }
    }
    Ok(m)
}

/// Applies the rejection gate at `threshold` and summarises the outcome.
pub fn apply_rejection(
    scores: &UncertaintyScores,
    predicted: &[usize],
    labels: &[usize],
    threshold: f64,
    measure: Measure,
    num_classes: usize,
) -> Result<RejectionReport> {
    let values = measure.scores(scores);
    check_lengths(predicted, labels, values.len())?;
    if labels.is_empty() {
        return Err(Error::invalid("rejection", "no samples"));
    }
    measure.validate_threshold(threshold)?;

    let accepted: Vec<bool> = values
        .iter()
        .map(|&v| measure.accepts(v, threshold))
        .collect();
    let n = labels.len();
    let accepted_count = accepted.iter().filter(|&&a| a).count();
    let correct = |keep: &dyn Fn(usize) -> bool| {
        (0..n)
            .filter(|&i| keep(i) && predicted[i] == labels[i])
            .count()
    };
    let correct_accepted = correct(&|i| accepted[i]);
    let correct_all = correct(&|_| true);

    Ok(RejectionReport {
        threshold,
        measure,
        accepted_count,
        rejected_count: n - accepted_count,
        coverage: accepted_count as f64 / n as f64,
        rejection_rate: (n - accepted_count) as f64 / n as f64,
        selective_accuracy: (accepted_count > 0)
            .then(|| correct_accepted as f64 / accepted_count as f64),
        overall_accuracy: correct_all as f64 / n as f64,
        confusion_accepted: confusion_matrix(predicted, labels, &accepted, num_classes)?,
        confusion_all: confusion_matrix(predicted, labels, &vec![true; n], num_classes)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub threshold: f64,
    pub coverage: f64,
    pub rejection_rate: f64,
    pub selective_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionCurve {
    pub measure: Measure,
    pub rows: Vec<CurveRow>,
}

impl RejectionCurve {
    /// `threshold,coverage,rejection_rate,selective_accuracy`, with an
    /// empty last cell when nothing was accepted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,coverage,rejection_rate,selective_accuracy\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                decimal(r.threshold),
                decimal(r.coverage),
                decimal(r.rejection_rate),
                decimal_opt(r.selective_accuracy)
            ));
        }
        out
    }
}

/// 0.50, 0.55, ..., 0.90.
pub fn default_grid() -> Vec<f64> {
    (0..9).map(|i| f64::from(50 + 5 * i) / 100.0).collect()
}

/// One [`apply_rejection`] per grid point.
pub fn threshold_sweep(
    scores: &UncertaintyScores,
    predicted: &[usize],
    labels: &[usize],
    grid: &[f64],
    measure: Measure,
    num_classes: usize,
) -> Result<RejectionCurve> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty"));
    }
    if grid
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(Error::invalid(
            "grid",
            "thresholds must be strictly increasing",
        ));
    }
    let rows = grid
        .iter()
        .map(|&t| {
            apply_rejection(scores, predicted, labels, t, measure, num_classes).map(|r| CurveRow {
                threshold: r.threshold,
                coverage: r.coverage,
                rejection_rate: r.rejection_rate,
                selective_accuracy: r.selective_accuracy,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RejectionCurve { measure, rows })
}

/// Grid CSV with a `true\predicted` corner and class-index headers.
pub fn confusion_csv(m: &Array2<usize>) -> String {
    let k = m.ncols();
    let mut out = String::from("true\\predicted");
    for c in 0..k {
        out.push_str(&format!(",{c}"));
    }
    out.push('\n');
    for (i, row) in m.rows().into_iter().enumerate() {
        out.push_str(&i.to_string());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
