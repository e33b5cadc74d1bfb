//! Training losses and evaluation fairness metrics: cross-entropy with the
//! uniform-prior masked variant, the pairwise hinge fairness terms, and the
//! weighted total objective.

use crate::error::{Error, Result};
use crate::image::{self, Image};
use crate::sag::{repr_distance, SagRepr};

pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub lambda: f64,
    pub tau_train: f64,
    pub tau_eval: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        // defaults for the proposed training recipe
        LossConfig {
            lambda: 0.001,
            tau_train: 0.00001,
            tau_eval: 0.00005,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || self.tau_train < 0.0 || self.tau_eval < 0.0 {
            return Err(Error::InvalidArg(
                "lambda and tau values must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Mean over samples of −log p_label, log clamped at 1e-12.
pub fn ce_loss(probs: &[[f64; 2]], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::InvalidArg("probs/labels length mismatch".into()));
    }
    let mut acc = 0.0;
    for (p, &y) in probs.iter().zip(labels) {
        if y > 1 {
            return Err(Error::InvalidArg(format!("invalid label {y}")));
        }
        acc += -(p[y as usize].max(LOG_CLAMP)).ln();
    }
    Ok(acc / probs.len() as f64)
}

/// Cross-entropy against the uniform prior: mean of −(½ log p0 + ½ log p1).
pub fn ce_uniform(probs: &[[f64; 2]]) -> f64 {
    let acc: f64 = probs
        .iter()
        .map(|p| -0.5 * (p[0].max(LOG_CLAMP)).ln() - 0.5 * (p[1].max(LOG_CLAMP)).ln())
        .sum();
    acc / probs.len().max(1) as f64
}

/// Batch-level indicator: labels when unmasked, uniform prior when masked.
pub fn ce_star(probs: &[[f64; 2]], labels: &[u8], mask: bool) -> Result<f64> {
    if mask {
        Ok(ce_uniform(probs))
    } else {
        ce_loss(probs, labels)
    }
}

/// Mean over unordered pairs of `[|s_i − s_j| − τ·d_ij]₊` for a
/// precomputed distance lookup.
fn pairwise_hinge<F>(scores: &[f64], tau: f64, dist: F) -> Result<f64>
where
    F: Fn(usize, usize) -> Result<f64>,
{
    let n = scores.len();
    if n < 2 {
        return Err(Error::InvalidArg(format!(
            "pairwise loss needs >= 2 samples, got {n}"
        )));
    }
    let mut acc = 0.0;
    for i in 0..n - 1 {
        for j in i + 1..n {
            let gap = (scores[i] - scores[j]).abs();
            acc += (gap - tau * dist(i, j)?).max(0.0);
        }
    }
    Ok(acc / (n * (n - 1) / 2) as f64)
}

/// Naive fairness term on raw-image distances.
pub fn ind_naive(scores: &[f64], raws: &[Image], tau: f64) -> Result<f64> {
    if scores.len() != raws.len() {
        return Err(Error::InvalidArg("scores/raws length mismatch".into()));
    }
    pairwise_hinge(scores, tau, |i, j| image::euclidean_distance(&raws[i], &raws[j]))
}

/// The proposed fairness term on semantic-agnostic representations.
pub fn ind_star(scores: &[f64], reprs: &[SagRepr], tau: f64) -> Result<f64> {
    if scores.len() != reprs.len() {
        return Err(Error::InvalidArg("scores/reprs length mismatch".into()));
    }
    if reprs.windows(2).any(|w| w[0].is_complex() != w[1].is_complex()) {
        return Err(Error::ShapeMismatch(
            "mixed representation kinds in ind_star".into(),
        ));
    }
    pairwise_hinge(scores, tau, |i, j| repr_distance(&reprs[i], &reprs[j]))
}

/// Fairness hinge over a precomputed symmetric distance matrix.
pub fn ind_with_distances(scores: &[f64], dists: &[Vec<f64>], tau: f64) -> Result<f64> {
    pairwise_hinge(scores, tau, |i, j| Ok(dists[i][j]))
}

/// Weighted total objective: ce + λ·ind.
pub fn total_loss(ce: f64, ind: f64, lambda: f64) -> f64 {
    ce + lambda * ind
}

/// Evaluation metric 𝓛ᵢₙ𝒹ⁿᵃⁱᵛᵉ′: anchored-input scores, raw distances.
pub fn metric_naive_adapted(
    scores_on_anchored: &[f64],
    raws: &[Image],
    tau_eval: f64,
) -> Result<f64> {
    ind_naive(scores_on_anchored, raws, tau_eval)
}

/// Evaluation metric 𝓛ᵢₙ𝒹*′: model-input scores, semantic-agnostic distances.
pub fn metric_star_adapted(scores: &[f64], reprs: &[SagRepr], tau_eval: f64) -> Result<f64> {
    ind_star(scores, reprs, tau_eval)
}
