//! Expected calibration error and confidence histograms.
//!
//! Bins are equal-width over [0, 1]. Bin `b` of `M` covers `(b/M, (b+1)/M]`,
//! and bin 0 also takes confidence 0, so a confidence of exactly 1 always
//! lands in the top bin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::decimal;

pub const DEFAULT_ECE_BINS: usize = 15;
pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

fn edge(b: usize, bins: usize) -> f64 {
    b as f64 / bins as f64
}

/// Bin of `c` (assumed in [0, 1]) among `bins` equal-width bins.
pub fn bin_index(c: f64, bins: usize) -> usize {
    let mut b = ((c * bins as f64).ceil() as usize)
        .saturating_sub(1)
        .min(bins - 1);
    // the product can land one bin off near an edge
    while b > 0 && c <= edge(b, bins) {
        b -= 1;
    }
    while b + 1 < bins && c > edge(b + 1, bins) {
        b += 1;
    }
    b
}

fn validate(confidences: &[f64], bins: usize) -> Result<()> {
    if bins == 0 {
        return Err(Error::invalid("bins", "need at least one bin"));
    }
    if let Some((i, c)) = confidences
        .iter()
        .enumerate()
        .find(|(_, c)| !(0.0..=1.0).contains(*c))
    {
        return Err(Error::invalid(
            "confidence",
            format!("entry {i} is {c}, outside [0, 1]"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub ece: f64,
    pub num_bins: usize,
    pub total_count: usize,
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Expected calibration error over `num_bins` equal-width bins:
/// `Σ_b (n_b / N) |acc_b − conf_b|` over nonempty bins.
pub fn ece(confidences: &[f64], correct: &[bool], num_bins: usize) -> Result<CalibrationReport> {
    validate(confidences, num_bins)?;
    if confidences.len() != correct.len() {
        return Err(Error::Dimension(format!(
            "{} confidences, {} correctness flags",
            confidences.len(),
            correct.len()
        )));
    }
    let mut count = vec![0usize; num_bins];
    let mut conf_sum = vec![0.0; num_bins];
    let mut hits = vec![0usize; num_bins];
    for (&c, &ok) in confidences.iter().zip(correct) {
        let b = bin_index(c, num_bins);
        count[b] += 1;
        conf_sum[b] += c;
        hits[b] += usize::from(ok);
    }

    let n = confidences.len();
    let mut ece = 0.0;
    let bins = (0..num_bins)
        .map(|b| {
            let (mean_confidence, accuracy) = if count[b] > 0 {
                let conf = conf_sum[b] / count[b] as f64;
                let acc = hits[b] as f64 / count[b] as f64;
                ece += count[b] as f64 / n as f64 * (acc - conf).abs();
                (Some(conf), Some(acc))
            } else {
                (None, None)
            };
            CalibrationBin {
                lower: edge(b, num_bins),
                upper: edge(b + 1, num_bins),
                count: count[b],
                mean_confidence,
                accuracy,
            }
        })
        .collect();

    Ok(CalibrationReport {
        ece,
        num_bins,
        total_count: n,
        bins,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceHistogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Rejection threshold to mark on a plot.
    pub threshold: f64,
}

impl ConfidenceHistogram {
    /// `bin_lower,bin_upper,count` rows followed by `# threshold=<τ>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lower,bin_upper,count\n");
        for (b, &c) in self.counts.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{c}\n",
                decimal(self.edges[b]),
                decimal(self.edges[b + 1])
            ));
        }
        out.push_str(&format!("# threshold={}\n", decimal(self.threshold)));
        out
    }
}

pub fn confidence_histogram(
    confidences: &[f64],
    num_bins: usize,
    threshold: f64,
) -> Result<ConfidenceHistogram> {
    validate(confidences, num_bins)?;
    let mut counts = vec![0; num_bins];
    for &c in confidences {
        counts[bin_index(c, num_bins)] += 1;
    }
    Ok(ConfidenceHistogram {
        edges: (0..=num_bins).map(|b| edge(b, num_bins)).collect(),
        counts,
        threshold,
    })
}
