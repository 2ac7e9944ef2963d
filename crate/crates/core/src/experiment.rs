//! Evaluation of a trained model on a labeled dataset, and the sweep over
//! the number of local metrics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{average_precision, mean_over_queries, ndcg_at_k_with, Gain};
use crate::model::{rank_candidates, RankingModel};
use crate::warp::{fit_phi, train_with_report, TrainConfig};

pub const DEFAULT_KS: [usize; 3] = [5, 10, 20];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub qid: u64,
    /// NDCG at each requested cutoff, in the order of `EvalReport::ks`.
    pub ndcg: Vec<f64>,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    /// Sorted by qid.
    pub per_query: Vec<QueryEval>,
    pub mean_ndcg: Vec<f64>,
    pub map: f64,
}

impl EvalReport {
    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ks
            .iter()
            .position(|&x| x == k)
            .map(|i| self.mean_ndcg[i])
    }
}

/// Ranks every query of `ds` with its Φ row (or the default row) and
/// scores the rankings.
pub fn evaluate(
    model: &RankingModel,
    ds: &Dataset,
    ks: &[usize],
    gain: Gain,
) -> Result<EvalReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidConfig(
            "cutoffs must be a non-empty list of values >= 1".into(),
        ));
    }
    if ds.queries.is_empty() {
        return Err(Error::EmptyInput);
    }
    if ds.dim != model.dim {
        return Err(Error::dim(model.dim, ds.dim));
    }
    let mut per_query = Vec::with_capacity(ds.queries.len());
    for cs in &ds.queries {
        let order = rank_candidates(cs, model.phi_for(cs.qid), model)?;
        let labels: Vec<u32> = order.iter().map(|&i| cs.documents[i].label).collect();
        let ndcg = ks
            .iter()
            .map(|&k| ndcg_at_k_with(&labels, k, gain))
            .collect::<Result<Vec<_>>>()?;
        per_query.push(QueryEval {
            qid: cs.qid,
            ndcg,
            ap: average_precision(&labels)?,
        });
    }
    per_query.sort_by_key(|q| q.qid);
    let mean_ndcg = (0..ks.len())
        .map(|i| mean_over_queries(&per_query.iter().map(|q| q.ndcg[i]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let map = mean_over_queries(&per_query.iter().map(|q| q.ap).collect::<Vec<_>>())?;
    Ok(EvalReport {
        ks: ks.to_vec(),
        per_query,
        mean_ndcg,
        map,
    })
}

/// Re-fits the Φ rows on the labeled test queries themselves, keeping the
/// trained local metrics, then evaluates.
pub fn evaluate_transductive(
    model: &RankingModel,
    ds: &Dataset,
    config: &TrainConfig,
    ks: &[usize],
    gain: Gain,
) -> Result<EvalReport> {
    let (refit, _) = fit_phi(model.clone(), &ds.queries, config)?;
    evaluate(&refit, ds, ks, gain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub map: f64,
    pub ks: Vec<usize>,
    pub ndcg: Vec<f64>,
    pub train_seconds: f64,
    /// Mean sampled hinge loss over the last 10% of the iterations.
    pub final_loss: f64,
}

/// Trains one model per value of `ms` with otherwise identical settings and
/// evaluates each on `test`.
pub fn sweep(
    train: &Dataset,
    test: &Dataset,
    ms: &[usize],
    base: &TrainConfig,
    ks: &[usize],
    gain: Gain,
) -> Result<Vec<SweepRow>> {
    if ms.is_empty() {
        return Err(Error::InvalidConfig("the m list is empty".into()));
    }
    for (i, m) in ms.iter().enumerate() {
        if ms[..i].contains(m) {
            return Err(Error::InvalidConfig(format!("duplicate m value {m}")));
        }
    }
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        let cfg = TrainConfig { m, ..base.clone() };
        let started = Instant::now();
        let (model, report) = train_with_report(&train.queries, &cfg)?;
        let train_seconds = started.elapsed().as_secs_f64();
        let eval = evaluate(&model, test, ks, gain)?;
        log::info!("m={m} MAP={:.4} ({train_seconds:.2}s)", eval.map);
        rows.push(SweepRow {
            m,
            map: eval.map,
            ks: eval.ks,
            ndcg: eval.mean_ndcg,
            train_seconds,
            final_loss: report.tail_loss(0.1),
        });
    }
    Ok(rows)
}
