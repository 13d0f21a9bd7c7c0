use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::FeatureDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Train/validation/test fractions, each in (0, 1) and summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = self.as_array();
        if parts.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::invalid(
                "split ratios",
                format!("each ratio must lie in (0, 1), got {parts:?}"),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "split ratios",
                format!("ratios sum to {sum}, not 1"),
            ));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

/// Per-split counts for a class of `total` samples: largest-remainder
/// rounding, then every empty split borrows one sample from the largest.
pub(crate) fn allocate(total: usize, ratios: &SplitRatios) -> [usize; 3] {
    let shares = ratios.as_array().map(|r| r * total as f64);
    let mut counts = shares.map(|s| s.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    if total >= 3 {
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let donor = (0..3)
                .max_by_key(|&i| (counts[i], std::cmp::Reverse(i)))
                .unwrap();
            counts[donor] -= 1;
            counts[empty] += 1;
        }
    }
    counts
}

/// Stratified three-way split. Within each class, rows are shuffled by a
/// seeded stream and cut according to [`allocate`]. Each output lists
/// classes in ascending order.
pub fn stratified_split(
    ds: &FeatureDataset,
    ratios: &SplitRatios,
    seed: u64,
) -> Result<(FeatureDataset, FeatureDataset, FeatureDataset)> {
    ratios.validate()?;
    let by_class = ds.class_indices();
    if let Some(c) = by_class.iter().position(|idx| idx.len() < 3) {
        return Err(Error::invalid(
            "split",
            format!(
                "class {c} has {} samples; at least 3 are required",
                by_class[c].len()
            ),
        ));
    }

    let mut parts: [Vec<usize>; 3] = Default::default();
    for (c, mut idx) in by_class.into_iter().enumerate() {
        let mut stream = rng::stream_at(seed, &[c as u64]);
        idx.shuffle(&mut stream);
        let counts = allocate(idx.len(), ratios);
        let mut start = 0;
        for (part, n) in parts.iter_mut().zip(counts) {
            part.extend_from_slice(&idx[start..start + n]);
            start += n;
        }
    }
    let [train, val, test] = parts;
    Ok((ds.select(&train)?, ds.select(&val)?, ds.select(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticConfig};

    #[test]
    fn default_ratios_on_hundred_per_class() {
        assert_eq!(allocate(100, &SplitRatios::default()), [70, 15, 15]);
    }

    #[test]
    fn minimal_class_gets_one_each() {
        let r = SplitRatios::new(0.34, 0.33, 0.33).unwrap();
        assert_eq!(allocate(3, &r), [1, 1, 1]);
        assert_eq!(allocate(3, &SplitRatios::default()), [1, 1, 1]);
    }

    #[test]
    fn allocation_sums_to_total() {
        let r = SplitRatios::default();
        for n in 3..500 {
            let c = allocate(n, &r);
            assert_eq!(c.iter().sum::<usize>(), n);
            assert!(c.iter().all(|&x| x >= 1));
        }
    }

    #[test]
    fn bad_ratios_rejected() {
        assert!(SplitRatios::new(0.7, 0.2, 0.2).is_err());
        assert!(SplitRatios::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn small_class_is_named() {
        let cfg = SyntheticConfig {
            num_classes: 3,
            feature_dim: 2,
            samples_per_class: vec![10, 2, 10],
            ..SyntheticConfig::default()
        };
        let ds = generate_synthetic(&cfg, 1).unwrap();
        let e = stratified_split(&ds, &SplitRatios::default(), 0).unwrap_err();
        assert!(e.to_string().contains("class 1"), "{e}");
    }
}
