//! Ranking quality: DCG/NDCG with graded gains and average precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gain applied to a relevance grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Gain {
    /// `2^label − 1`
    #[default]
    Exponential,
    /// `label`
    Linear,
}

impl Gain {
    pub fn apply(self, label: u32) -> f64 {
        match self {
            Gain::Exponential => 2f64.powi(label as i32) - 1.0,
            Gain::Linear => label as f64,
        }
    }
}

fn discount(position: usize) -> f64 {
    // 1-based position i → 1 / log2(i + 1)
    1.0 / ((position + 1) as f64).log2()
}

pub fn dcg_at_k(labels: &[u32], k: usize) -> Result<f64> {
    dcg_at_k_with(labels, k, Gain::Exponential)
}

pub fn dcg_at_k_with(labels: &[u32], k: usize, gain: Gain) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyRanking);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("NDCG cutoff k must be >= 1".into()));
    }
    Ok(labels
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &l)| gain.apply(l) * discount(i + 1))
        .sum())
}

pub fn ndcg_at_k(labels: &[u32], k: usize) -> Result<f64> {
    ndcg_at_k_with(labels, k, Gain::Exponential)
}

/// DCG normalized by the ideal ordering; 0 when every label is 0.
pub fn ndcg_at_k_with(labels: &[u32], k: usize, gain: Gain) -> Result<f64> {
    let dcg = dcg_at_k_with(labels, k, gain)?;
    let mut ideal = labels.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k_with(&ideal, k, gain)?;
    if idcg == 0.0 {
        return Ok(0.0);
    }
    Ok((dcg / idcg).min(1.0))
}

/// Average precision with `label > 0` counted as relevant.
pub fn average_precision(labels: &[u32]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyRanking);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        return Ok(0.0);
    }
    Ok(sum / hits as f64)
}

pub fn mean_over_queries(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
