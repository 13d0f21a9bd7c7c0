use ndarray::{Array2, ArrayView1};
use rand::Rng;

use super::FeatureDataset;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_K_NEIGHBORS: usize = 5;

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices (into `members`) of the `k` nearest other members of
/// `members[i]`, ties broken by position.
fn nearest(ds: &FeatureDataset, members: &[usize], i: usize, k: usize) -> Vec<usize> {
    let x = ds.row(members[i]);
    let mut cand: Vec<(f64, usize)> = members
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, &m)| (sq_dist(x, ds.row(m)), j))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(k);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// SMOTE in feature space.
///
/// Original rows are kept in order; synthetic rows follow, grouped by
/// class. Each synthetic row is `x + u (x_nn - x)` with `x` a random class
/// member, `x_nn` one of its `k_neighbors` nearest same-class neighbours
/// (Euclidean) and `u ~ U(0, 1)`.
pub fn smote_oversample(
    ds: &FeatureDataset,
    target_counts: &[usize],
    k_neighbors: usize,
    seed: u64,
) -> Result<FeatureDataset> {
    let k = ds.num_classes();
    if target_counts.len() != k {
        return Err(Error::invalid(
            "smote",
            format!("{} target counts for {k} classes", target_counts.len()),
        ));
    }
    if k_neighbors == 0 {
        return Err(Error::invalid("smote", "k_neighbors must be at least 1"));
    }
    let current = ds.class_counts();
    for (c, (&have, &want)) in current.iter().zip(target_counts).enumerate() {
        if want < have {
            return Err(Error::invalid(
                "smote",
                format!("class {c}: target {want} is below current count {have}"),
            ));
        }
        if want > have && have < 2 {
            return Err(Error::invalid(
                "smote",
                format!("class {c} has {have} sample(s); synthesis needs at least 2"),
            ));
        }
    }

    let d = ds.feature_dim();
    let total: usize = target_counts.iter().sum();
    let mut features = Array2::zeros((total, d));
    features
        .slice_mut(ndarray::s![..ds.len(), ..])
        .assign(&ds.features());
    let mut labels = ds.labels().to_vec();
    labels.reserve(total - ds.len());

    let mut row = ds.len();
    for (c, members) in ds.class_indices().into_iter().enumerate() {
        let needed = target_counts[c] - current[c];
        if needed == 0 {
            continue;
        }
        let kk = k_neighbors.min(members.len() - 1);
        let mut neighbours: Vec<Option<Vec<usize>>> = vec![None; members.len()];
        let mut stream = rng::stream_at(seed, &[c as u64]);
        for _ in 0..needed {
            let i = stream.random_range(0..members.len());
            let nn = neighbours[i].get_or_insert_with(|| nearest(ds, &members, i, kk));
            let j = nn[stream.random_range(0..nn.len())];
            let u: f64 = stream.random();
            let x = ds.row(members[i]);
            let y = ds.row(members[j]);
            for col in 0..d {
                features[(row, col)] = x[col] + u * (y[col] - x[col]);
            }
            labels.push(c);
            row += 1;
        }
    }
    FeatureDataset::new(features, labels, k)
}
