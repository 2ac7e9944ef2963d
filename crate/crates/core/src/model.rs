//! Local metrics anchored at documents, and the per-query scorer built on them.
//!
//! Each local metric `M_r` comes with an anchor document `p_r`. The distance
//! of a document to an anchor is `n_r(p) = ‖M_r (p − p_r)‖₂`, and a query's
//! score for a document is `−Σ_r φ_r · exp(−n_r) · n_r`, so higher scores
//! mean closer to the query's ideal candidate.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metrics::ndcg_at_k;
use crate::spd::{SpdMatrix, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub qid: u64,
    pub features: Vec<f64>,
    pub label: u32,
}

impl Document {
    pub fn new(qid: u64, features: Vec<f64>, label: u32) -> Self {
        Self {
            qid,
            features,
            label,
        }
    }
}

/// All documents of one query, split into relevant (`label > 0`) and
/// zero-label index pools.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub qid: u64,
    pub documents: Vec<Document>,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

impl CandidateSet {
    pub fn new(qid: u64, documents: Vec<Document>) -> Self {
        let (positives, negatives) = partition_labels(&documents);
        Self {
            qid,
            documents,
            positives,
            negatives,
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.documents.iter().map(|d| d.label).collect()
    }

    pub fn max_label(&self) -> u32 {
        self.documents.iter().map(|d| d.label).max().unwrap_or(0)
    }

    /// Indices of documents with `label >= threshold`.
    pub fn high_relevant(&self, threshold: u32) -> Vec<usize> {
        self.positives
            .iter()
            .copied()
            .filter(|&i| self.documents[i].label >= threshold)
            .collect()
    }
}

fn partition_labels(documents: &[Document]) -> (Vec<usize>, Vec<usize>) {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (i, d) in documents.iter().enumerate() {
        if d.label == 0 {
            negatives.push(i);
        } else {
            positives.push(i);
        }
    }
    (positives, negatives)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMetric {
    pub anchor: Vec<f64>,
    pub metric: SpdMatrix,
}

impl LocalMetric {
    pub fn new(anchor: Vec<f64>, metric: SpdMatrix) -> Result<Self> {
        if anchor.len() != metric.dim() {
            return Err(Error::dim(metric.dim(), anchor.len()));
        }
        if anchor.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("anchor has non-finite entries".into()));
        }
        Ok(Self { anchor, metric })
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }
}

/// Training hyperparameters persisted with a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub zeta: f64,
    pub mu: f64,
    pub iters: u64,
    pub lambda: f64,
    pub phi_init: f64,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            zeta: 0.1,
            mu: 0.1,
            iters: 0,
            lambda: crate::gmml::DEFAULT_LAMBDA,
            phi_init: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingModel {
    pub dim: usize,
    pub locals: Vec<LocalMetric>,
    /// Per-query weights over the local metrics, keyed by qid.
    pub phi: BTreeMap<u64, Vec<f64>>,
    /// Weights used for queries without a trained row.
    pub phi_default: Vec<f64>,
    pub hyper: Hyper,
}

impl RankingModel {
    /// A model with no per-query rows; every query uses `phi_default`.
    pub fn new(locals: Vec<LocalMetric>, phi_default: Vec<f64>, hyper: Hyper) -> Result<Self> {
        let model = Self {
            dim: locals.first().map(LocalMetric::dim).unwrap_or(0),
            locals,
            phi: BTreeMap::new(),
            phi_default,
            hyper,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn num_metrics(&self) -> usize {
        self.locals.len()
    }

    /// The trained row for `qid`, falling back to `phi_default`.
    pub fn phi_for(&self, qid: u64) -> &[f64] {
        self.phi
            .get(&qid)
            .map(Vec::as_slice)
            .unwrap_or(&self.phi_default)
    }

    pub fn validate(&self) -> Result<()> {
        if self.locals.is_empty() {
            return Err(Error::InvalidConfig(
                "model needs at least one local metric".into(),
            ));
        }
        for lm in &self.locals {
            if lm.dim() != self.dim {
                return Err(Error::dim(self.dim, lm.dim()));
            }
        }
        let m = self.locals.len();
        for row in self.phi.values().chain(std::iter::once(&self.phi_default)) {
            if row.len() != m {
                return Err(Error::dim(m, row.len()));
            }
            if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidConfig(
                    "phi entries must be finite and >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    /// `exp(−n_r)·n_r` for every local metric; the magnitude of `∂f/∂φ_r`.
    pub fn kernel_values(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.locals
            .iter()
            .map(|lm| metric_norm(p, lm).map(|n| (-n).exp() * n))
            .collect()
    }
}

/// `‖M (p − anchor)‖₂`, the square root of `tr(M δ δᵀ M)`.
pub fn metric_norm(p: &[f64], lm: &LocalMetric) -> Result<f64> {
    Ok(metric_norm_sq(p, lm)?.sqrt())
}

pub(crate) fn metric_norm_sq(p: &[f64], lm: &LocalMetric) -> Result<f64> {
    if p.len() != lm.dim() {
        return Err(Error::dim(lm.dim(), p.len()));
    }
    let delta: Vec<f64> = p.iter().zip(&lm.anchor).map(|(a, b)| a - b).collect();
    let md = lm.metric.as_sym().mul_vec(&delta)?;
    Ok(md.iter().map(|v| v * v).sum())
}

/// Smooth weight `exp(−(ρ/2)·n)` of a document for one local metric.
pub fn weight(p: &[f64], lm: &LocalMetric, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidConfig(format!("rho must be >= 0, got {rho}")));
    }
    Ok((-(rho / 2.0) * metric_norm(p, lm)?).exp())
}

/// `Σ_r w_r(p) · M_r`.
pub fn combined_metric(p: &[f64], model: &RankingModel, rho: &[f64]) -> Result<SymMatrix> {
    if rho.len() != model.num_metrics() {
        return Err(Error::dim(model.num_metrics(), rho.len()));
    }
    let mut acc = nalgebra::DMatrix::<f64>::zeros(model.dim, model.dim);
    for (lm, &r) in model.locals.iter().zip(rho) {
        acc += lm.metric.as_matrix() * weight(p, lm, r)?;
    }
    SymMatrix::new(acc)
}

/// Query score of a document; 0 is the best attainable value.
pub fn score(p: &[f64], phi_q: &[f64], model: &RankingModel) -> Result<f64> {
    if phi_q.len() != model.num_metrics() {
        return Err(Error::dim(model.num_metrics(), phi_q.len()));
    }
    let kernel = model.kernel_values(p)?;
    Ok(score_from_kernel(&kernel, phi_q))
}

pub(crate) fn score_from_kernel(kernel: &[f64], phi_q: &[f64]) -> f64 {
    -kernel.iter().zip(phi_q).map(|(g, w)| g * w).sum::<f64>()
}

/// Document indices by descending score, ties by ascending index.
pub fn rank_candidates(
    cs: &CandidateSet,
    phi_q: &[f64],
    model: &RankingModel,
) -> Result<Vec<usize>> {
    Ok(rank_with_scores(cs, phi_q, model)?
        .into_iter()
        .map(|(i, _)| i)
        .collect())
}

/// Like [`rank_candidates`], paired with each document's score.
pub fn rank_with_scores(
    cs: &CandidateSet,
    phi_q: &[f64],
    model: &RankingModel,
) -> Result<Vec<(usize, f64)>> {
    if cs.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    if phi_q.iter().all(|&w| w == 0.0) {
        log::warn!(
            "query {}: all phi weights are zero, every score is 0",
            cs.qid
        );
    }
    let mut scored = cs
        .documents
        .iter()
        .enumerate()
        .map(|(i, d)| score(&d.features, phi_q, model).map(|s| (i, s)))
        .collect::<Result<Vec<_>>>()?;
    sort_by_score(&mut scored);
    Ok(scored)
}

pub(crate) fn sort_by_score(scored: &mut [(usize, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Result of anchor selection within one candidate set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorChoice {
    pub index: usize,
    pub ndcg: f64,
}

/// Picks the positive document whose nearest-first ordering of the
/// candidates under `metric` has the highest NDCG@k. `k = None` uses the
/// full candidate set.
pub fn select_anchor(
    metric: &SpdMatrix,
    candidates: &CandidateSet,
    k: Option<usize>,
) -> Result<AnchorChoice> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    select_anchor_among(metric, candidates, &candidates.positives, k)
}

/// [`select_anchor`] restricted to the given positive indices.
pub fn select_anchor_among(
    metric: &SpdMatrix,
    candidates: &CandidateSet,
    pool: &[usize],
    k: Option<usize>,
) -> Result<AnchorChoice> {
    if pool.is_empty() {
        return Err(Error::NoPositives);
    }
    let k = k.unwrap_or(candidates.len()).max(1);
    let mut best: Option<AnchorChoice> = None;
    for &idx in pool {
        if idx >= candidates.len() {
            return Err(Error::InvalidIndex { index: idx });
        }
        let lm = LocalMetric::new(candidates.documents[idx].features.clone(), metric.clone())?;
        let mut dist = candidates
            .documents
            .iter()
            .enumerate()
            .map(|(i, d)| metric_norm_sq(&d.features, &lm).map(|v| (i, v)))
            .collect::<Result<Vec<_>>>()?;
        dist.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let labels: Vec<u32> = dist
            .iter()
            .map(|&(i, _)| candidates.documents[i].label)
            .collect();
        let ndcg = ndcg_at_k(&labels, k)?;
        let better = match best {
            None => true,
            Some(b) => ndcg > b.ndcg || (ndcg == b.ndcg && idx < b.index),
        };
        if better {
            best = Some(AnchorChoice { index: idx, ndcg });
        }
    }
    Ok(best.expect("pool is non-empty"))
}
