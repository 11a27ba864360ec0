//! Estimation of the positive set from labeled points, nearest-neighbor
//! spies and a conditional-probability threshold.
//!
//! A spy is an unlabeled row that is the nearest unlabeled neighbor of at
//! least one labeled row. Other unlabeled rows join the estimated positive
//! set when their probability of being positive given that they are
//! unlabeled, `h(x) = y(1 - e) / (1 - y e)`, is strictly above the smallest
//! such value among the spies.

use std::collections::BTreeSet;

use log::warn;
use rayon::prelude::*;

use crate::data::PUDataset;
use crate::error::{Error, Result};
use crate::glm::LinearModel;

/// Smallest denominator allowed in [`h_of_x`].
pub const H_DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpyPartition {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub spies: Vec<usize>,
    pub likely: Vec<usize>,
    /// `labeled ∪ spies ∪ likely`, sorted.
    pub positive_estimate: Vec<usize>,
    /// Set when there were no spies to threshold against.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionSizes {
    pub labeled: usize,
    pub spies: usize,
    pub likely: usize,
    pub positive_estimate: usize,
}

impl SpyPartition {
    pub fn sizes(&self) -> PartitionSizes {
        PartitionSizes {
            labeled: self.labeled.len(),
            spies: self.spies.len(),
            likely: self.likely.len(),
            positive_estimate: self.positive_estimate.len(),
        }
    }
}

fn labeled_unlabeled(data: &PUDataset) -> (Vec<usize>, Vec<usize>) {
    (0..data.n()).partition(|&i| data.s()[i] == 1)
}

fn squared_distance(data: &PUDataset, i: usize, j: usize, cols: usize) -> f64 {
    let x = data.features();
    (0..cols).map(|k| (x[(i, k)] - x[(j, k)]).powi(2)).sum()
}

/// Unlabeled rows that are the 1-nearest unlabeled neighbor of some labeled
/// row, by Euclidean distance over the non-intercept columns. Ties go to the
/// lowest index. Returned sorted.
pub fn find_spies(data: &PUDataset) -> Result<Vec<usize>> {
    let (labeled, unlabeled) = labeled_unlabeled(data);
    if labeled.is_empty() || unlabeled.is_empty() {
        return Err(Error::Degenerate(format!(
            "spy search needs labeled and unlabeled rows (got {} and {})",
            labeled.len(),
            unlabeled.len()
        )));
    }
    let cols = data.raw_feature_count();
    let nominated: Vec<usize> = labeled
        .par_iter()
        .map(|&j| {
            let mut best = unlabeled[0];
            let mut best_d = squared_distance(data, j, best, cols);
            for &i in &unlabeled[1..] {
                let d = squared_distance(data, j, i, cols);
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    let set: BTreeSet<usize> = nominated.into_iter().collect();
    Ok(set.into_iter().collect())
}

/// `P(Y = 1 | X = x, S = 0)` from the posterior `y_prob` and propensity
/// `e_prob`. The second value is `true` when the denominator was floored.
pub fn h_of_x_checked(y_prob: f64, e_prob: f64) -> (f64, bool) {
    let denom = 1.0 - y_prob * e_prob;
    let clamped = denom < H_DENOMINATOR_FLOOR;
    let value = y_prob * (1.0 - e_prob) / denom.max(H_DENOMINATOR_FLOOR);
    (value, clamped)
}

pub fn h_of_x(y_prob: f64, e_prob: f64) -> f64 {
    h_of_x_checked(y_prob, e_prob).0
}

/// Unlabeled non-spy rows whose `h` is strictly above the minimum `h` over
/// the spies. With no spies the result is empty and the flag is set.
pub fn select_likely(
    data: &PUDataset,
    y_probs: &[f64],
    e_probs: &[f64],
    spies: &[usize],
) -> Result<(Vec<usize>, bool)> {
    let n = data.n();
    for probs in [y_probs, e_probs] {
        if probs.len() != n {
            return Err(Error::Dimension { expected: n, got: probs.len() });
        }
    }
    if spies.is_empty() {
        warn!("no spies available; likely-positive set left empty");
        return Ok((Vec::new(), true));
    }
    let h = |i: usize| h_of_x(y_probs[i], e_probs[i]);
    let threshold = spies.iter().map(|&j| h(j)).fold(f64::INFINITY, f64::min);
    let spy_set: BTreeSet<usize> = spies.iter().copied().collect();
    let likely = (0..n)
        .filter(|&i| data.s()[i] == 0 && !spy_set.contains(&i) && h(i) > threshold)
        .collect();
    Ok((likely, false))
}

/// Builds the full partition given precomputed spies and per-row
/// probabilities.
pub fn partition_with_spies(
    data: &PUDataset,
    spies: &[usize],
    y_probs: &[f64],
    e_probs: &[f64],
) -> Result<SpyPartition> {
    let (labeled, unlabeled) = labeled_unlabeled(data);
    let (likely, degenerate) = select_likely(data, y_probs, e_probs, spies)?;
    let positive: BTreeSet<usize> = labeled
        .iter()
        .chain(spies)
        .chain(&likely)
        .copied()
        .collect();
    Ok(SpyPartition {
        labeled,
        unlabeled,
        spies: spies.to_vec(),
        likely,
        positive_estimate: positive.into_iter().collect(),
        degenerate,
    })
}

/// Spies, likely positives and the estimated positive set for fitted
/// posterior and propensity models.
pub fn estimate_positive_set(
    data: &PUDataset,
    y_model: &LinearModel,
    e_model: &LinearModel,
) -> Result<SpyPartition> {
    let spies = find_spies(data)?;
    let y = y_model.predict_proba(data.features())?;
    let e = e_model.predict_proba(data.features())?;
    partition_with_spies(data, &spies, &y, &e)
}
