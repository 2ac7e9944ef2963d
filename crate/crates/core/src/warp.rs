//! Two-stage training: basis metrics with anchors, then per-query weights
//! fitted by projected SGD on a WARP hinge loss.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmml::{gmml_fit, GmmlConfig, PairSet};
use crate::model::{
    score_from_kernel, select_anchor_among, CandidateSet, Hyper, LocalMetric, RankingModel,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Number of local metrics.
    pub m: usize,
    /// SGD iterations.
    pub iters: u64,
    pub mu: f64,
    /// Hinge margin.
    pub zeta: f64,
    /// Identity regularization of the scatter matrices.
    pub lambda: f64,
    pub phi_init: f64,
    /// Minimum label of the documents used as similar pairs and anchor
    /// candidates. `None` uses each query's highest label.
    pub hi_label_threshold: Option<u32>,
    /// Cap on violator draws per iteration. `None` uses `|D⁻|`.
    pub max_violator_draws: Option<usize>,
    pub seed: u64,
    /// Fraction of the queries pooled for each basis metric.
    pub subset_fraction: f64,
    /// Cap on similar and on dissimilar pairs per basis metric; larger pair
    /// sets are subsampled without replacement.
    pub max_pairs: usize,
    /// NDCG cutoff for anchor selection. `None` uses the whole candidate set.
    pub anchor_k: Option<usize>,
    /// Worker threads for the basis-metric fits.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            m: 10,
            iters: 10_000,
            mu: 0.1,
            zeta: 0.1,
            lambda: crate::gmml::DEFAULT_LAMBDA,
            phi_init: 1.0,
            hi_label_threshold: None,
            max_violator_draws: None,
            seed: 0,
            subset_fraction: 0.2,
            max_pairs: 20_000,
            anchor_k: None,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.m == 0 {
            return bad("m must be >= 1");
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return bad("mu must be > 0");
        }
        if !(self.zeta >= 0.0) || !self.zeta.is_finite() {
            return bad("zeta must be >= 0");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be >= 0");
        }
        if !(self.phi_init > 0.0) || !self.phi_init.is_finite() {
            return bad("phi_init must be > 0");
        }
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return bad("subset_fraction must lie in (0, 1]");
        }
        if self.max_pairs == 0 {
            return bad("max_pairs must be >= 1");
        }
        if self.max_violator_draws == Some(0) {
            return bad("max_violator_draws must be >= 1");
        }
        if self.anchor_k == Some(0) {
            return bad("anchor_k must be >= 1");
        }
        if self.threads == 0 {
            return bad("threads must be >= 1");
        }
        Ok(())
    }

    fn hyper(&self) -> Hyper {
        Hyper {
            zeta: self.zeta,
            mu: self.mu,
            iters: self.iters,
            lambda: self.lambda,
            phi_init: self.phi_init,
            seed: self.seed,
        }
    }
}

/// `L(k) = Σ_{i=1..k} 1 / log₂(i + 1)`.
pub fn rank_weight(k: usize) -> f64 {
    (1..=k).map(|i| 1.0 / ((i + 1) as f64).log2()).sum()
}

/// A sampled `(query, positive, violating negative)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripleSample {
    pub qid: u64,
    pub positive_index: usize,
    pub negative_index: usize,
    /// Draws used to find the violator, at least 1.
    pub draws: usize,
}

impl TripleSample {
    /// WARP rank estimate `⌊|D⁻| / N⌋`.
    pub fn rank_estimate(&self, neg_pool_size: usize) -> usize {
        neg_pool_size / self.draws
    }
}

/// Per-document kernel values `exp(−n_r)·n_r`, fixed once the metrics are.
#[derive(Debug, Clone)]
pub struct KernelCache {
    values: Vec<Vec<f64>>,
}

impl KernelCache {
    pub fn new(cs: &CandidateSet, model: &RankingModel) -> Result<Self> {
        let values = cs
            .documents
            .iter()
            .map(|d| model.kernel_values(&d.features))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values })
    }

    pub fn kernel(&self, doc: usize) -> &[f64] {
        &self.values[doc]
    }

    pub fn score(&self, doc: usize, phi_q: &[f64]) -> f64 {
        score_from_kernel(&self.values[doc], phi_q)
    }
}

fn check_positive(cs: &CandidateSet, positive_index: usize) -> Result<()> {
    if positive_index >= cs.len() || cs.documents[positive_index].label == 0 {
        return Err(Error::InvalidIndex {
            index: positive_index,
        });
    }
    Ok(())
}

fn check_phi(phi_q: &[f64], model: &RankingModel) -> Result<()> {
    if phi_q.len() != model.num_metrics() {
        return Err(Error::dim(model.num_metrics(), phi_q.len()));
    }
    Ok(())
}

/// Exact number of negatives scoring at least as high as the positive.
pub fn violator_count(
    cs: &CandidateSet,
    positive_index: usize,
    phi_q: &[f64],
    model: &RankingModel,
) -> Result<usize> {
    count_where(cs, positive_index, phi_q, model, |neg, pos| neg >= pos)
}

/// Number of negatives violating the margin: `ζ + f(p⁻) > f(p⁺)`.
pub fn margin_violator_count(
    cs: &CandidateSet,
    positive_index: usize,
    phi_q: &[f64],
    model: &RankingModel,
    zeta: f64,
) -> Result<usize> {
    count_where(cs, positive_index, phi_q, model, |neg, pos| {
        zeta + neg > pos
    })
}

fn count_where(
    cs: &CandidateSet,
    positive_index: usize,
    phi_q: &[f64],
    model: &RankingModel,
    violates: impl Fn(f64, f64) -> bool,
) -> Result<usize> {
    check_positive(cs, positive_index)?;
    check_phi(phi_q, model)?;
    let score = |i: usize| crate::model::score(&cs.documents[i].features, phi_q, model);
    let pos = score(positive_index)?;
    let mut count = 0;
    for &n in &cs.negatives {
        if violates(score(n)?, pos) {
            count += 1;
        }
    }
    Ok(count)
}

/// Draws negatives uniformly with replacement until one violates the
/// margin, giving up after `max_draws` draws (`None` uses `|D⁻|`).
pub fn sample_violator<R: Rng + ?Sized>(
    cs: &CandidateSet,
    positive_index: usize,
    phi_q: &[f64],
    model: &RankingModel,
    zeta: f64,
    max_draws: Option<usize>,
    rng: &mut R,
) -> Result<Option<TripleSample>> {
    check_positive(cs, positive_index)?;
    check_phi(phi_q, model)?;
    let score = |i: usize| crate::model::score(&cs.documents[i].features, phi_q, model);
    let pos = score(positive_index)?;
    let mut failure = None;
    let found = draw_violator(&cs.negatives, max_draws, rng, |n| match score(n) {
        Ok(s) => zeta + s > pos,
        Err(e) => {
            failure.get_or_insert(e);
            true
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(found.map(|(negative_index, draws)| TripleSample {
        qid: cs.qid,
        positive_index,
        negative_index,
        draws,
    }))
}

fn draw_violator<R: Rng + ?Sized>(
    negatives: &[usize],
    max_draws: Option<usize>,
    rng: &mut R,
    mut violates: impl FnMut(usize) -> bool,
) -> Result<Option<(usize, usize)>> {
    if negatives.is_empty() {
        return Err(Error::NoNegatives);
    }
    let cap = max_draws.unwrap_or(negatives.len()).max(1);
    for draw in 1..=cap {
        let n = negatives[rng.random_range(0..negatives.len())];
        if violates(n) {
            return Ok(Some((n, draw)));
        }
    }
    Ok(None)
}

/// `|∂f/∂φ_r| = exp(−n_r)·n_r` for every local metric.
pub fn phi_gradient(p: &[f64], model: &RankingModel) -> Result<Vec<f64>> {
    model.kernel_values(p)
}

/// Signed `∂f/∂φ_r = −exp(−n_r)·n_r` of the scorer.
pub fn signed_phi_gradient(p: &[f64], model: &RankingModel) -> Result<Vec<f64>> {
    Ok(model.kernel_values(p)?.into_iter().map(|g| -g).collect())
}

/// `[φ − μ·L·Δ]₊` where `Δ = ∂f(p⁻)/∂φ − ∂f(p⁺)/∂φ`.
pub fn projected_update(phi_q: &[f64], signed_diff: &[f64], mu: f64, rank_weight: f64) -> Vec<f64> {
    phi_q
        .iter()
        .zip(signed_diff)
        .map(|(w, d)| (w - mu * rank_weight * d).max(0.0))
        .collect()
}

/// One projected SGD step on the hinge loss of a certified violator triple.
pub fn sgd_step(
    phi_q: &[f64],
    sample: &TripleSample,
    cs: &CandidateSet,
    model: &RankingModel,
    mu: f64,
    zeta: f64,
) -> Result<Vec<f64>> {
    check_phi(phi_q, model)?;
    check_positive(cs, sample.positive_index)?;
    let neg = sample.negative_index;
    if neg >= cs.len() || cs.documents[neg].label != 0 {
        return Err(Error::InvalidSample(format!(
            "document {neg} is not a negative"
        )));
    }
    if sample.draws == 0 {
        return Err(Error::InvalidSample("draw count must be >= 1".into()));
    }
    let g_pos = model.kernel_values(&cs.documents[sample.positive_index].features)?;
    let g_neg = model.kernel_values(&cs.documents[neg].features)?;
    step_from_kernels(phi_q, &g_pos, &g_neg, sample, cs.negatives.len(), mu, zeta)
}

fn step_from_kernels(
    phi_q: &[f64],
    g_pos: &[f64],
    g_neg: &[f64],
    sample: &TripleSample,
    neg_pool_size: usize,
    mu: f64,
    zeta: f64,
) -> Result<Vec<f64>> {
    let f_pos = score_from_kernel(g_pos, phi_q);
    let f_neg = score_from_kernel(g_neg, phi_q);
    if !(zeta + f_neg > f_pos) {
        return Err(Error::InvalidSample(format!(
            "not a violator: zeta + f(neg) = {} <= f(pos) = {}",
            zeta + f_neg,
            f_pos
        )));
    }
    // Signed derivatives are −g, so Δ = −g⁻ + g⁺.
    let diff: Vec<f64> = g_neg.iter().zip(g_pos).map(|(n, p)| p - n).collect();
    let weight = rank_weight(sample.rank_estimate(neg_pool_size));
    Ok(projected_update(phi_q, &diff, mu, weight))
}

fn round_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn trainable(cs: &CandidateSet) -> bool {
    !cs.positives.is_empty() && !cs.negatives.is_empty()
}

/// Fits `config.m` local metrics, each on a random subset of the queries,
/// and anchors each at its best-ranking high-relevance document.
pub fn fit_basis_metrics(
    queries: &[CandidateSet],
    config: &TrainConfig,
) -> Result<Vec<LocalMetric>> {
    config.validate()?;
    let eligible: Vec<&CandidateSet> = queries.iter().filter(|q| trainable(q)).collect();
    if eligible.is_empty() {
        return Err(Error::NoPositives);
    }
    let dim = eligible[0]
        .documents
        .first()
        .map(|d| d.features.len())
        .unwrap_or(0);
    let pools = query_pools(eligible.len(), config);
    let fit = |round: usize| fit_one_basis(&eligible, &pools[round], dim, config, round);
    if config.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| (0..config.m).into_par_iter().map(fit).collect())
    } else {
        (0..config.m).map(fit).collect()
    }
}

/// Query subsets for the `m` rounds, cut from successive shuffled passes
/// over the eligible queries so that rounds cover different queries before
/// any query is reused.
fn query_pools(eligible: usize, config: &TrainConfig) -> Vec<Vec<usize>> {
    let pool_size =
        ((eligible as f64 * config.subset_fraction).round() as usize).clamp(1, eligible);
    let mut rng = round_rng(config.seed, u64::MAX);
    let mut stream: Vec<usize> = Vec::with_capacity(config.m * pool_size + eligible);
    while stream.len() < config.m * pool_size {
        let mut pass: Vec<usize> = (0..eligible).collect();
        pass.shuffle(&mut rng);
        stream.extend(pass);
    }
    stream
        .chunks(pool_size)
        .take(config.m)
        .map(|chunk| {
            // A chunk straddling two passes may repeat a query.
            let mut pool = chunk.to_vec();
            pool.sort_unstable();
            pool.dedup();
            pool
        })
        .collect()
}

fn fit_one_basis(
    eligible: &[&CandidateSet],
    pool: &[usize],
    dim: usize,
    config: &TrainConfig,
    round: usize,
) -> Result<LocalMetric> {
    let mut rng = round_rng(config.seed, round as u64 + 1);
    let pooled: Vec<&CandidateSet> = pool.iter().map(|&i| eligible[i]).collect();

    // (query in pool, doc a, doc b)
    let mut similar: Vec<(usize, usize, usize)> = Vec::new();
    let mut dissimilar: Vec<(usize, usize, usize)> = Vec::new();
    let mut high: Vec<Vec<usize>> = Vec::with_capacity(pooled.len());
    for (qi, cs) in pooled.iter().enumerate() {
        let threshold = config.hi_label_threshold.unwrap_or_else(|| cs.max_label());
        let hi = cs.high_relevant(threshold);
        for (a, &i) in hi.iter().enumerate() {
            for &j in &hi[a + 1..] {
                similar.push((qi, i, j));
            }
            for &n in &cs.negatives {
                dissimilar.push((qi, i, n));
            }
        }
        high.push(hi);
    }
    if high.iter().all(Vec::is_empty) {
        return Err(Error::NoPositives);
    }
    let mut to_pairs = |triples: &[(usize, usize, usize)]| -> PairSet<'_> {
        let chosen: Vec<usize> = if triples.len() > config.max_pairs {
            let mut picked = index::sample(&mut rng, triples.len(), config.max_pairs).into_vec();
            picked.sort_unstable();
            picked
        } else {
            (0..triples.len()).collect()
        };
        chosen
            .into_iter()
            .map(|t| {
                let (qi, a, b) = triples[t];
                let docs = &pooled[qi].documents;
                (&docs[a].features[..], &docs[b].features[..])
            })
            .collect()
    };
    let sim_pairs = to_pairs(&similar);
    let dis_pairs = to_pairs(&dissimilar);
    let metric = gmml_fit(
        &sim_pairs,
        &dis_pairs,
        dim,
        &GmmlConfig {
            lambda: config.lambda,
        },
    )?;

    let mut best: Option<(usize, usize, f64)> = None;
    for (qi, cs) in pooled.iter().enumerate() {
        if high[qi].is_empty() {
            continue;
        }
        let choice = select_anchor_among(&metric, cs, &high[qi], config.anchor_k)?;
        if best.is_none_or(|(_, _, ndcg)| choice.ndcg > ndcg) {
            best = Some((qi, choice.index, choice.ndcg));
        }
    }
    let (qi, idx, _) = best.expect("at least one pooled query has high-relevance documents");
    LocalMetric::new(pooled[qi].documents[idx].features.clone(), metric)
}

/// Diagnostics gathered during weight fitting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Per-iteration sampled hinge loss `L(⌊|D⁻|/N⌋)·(ζ − f(p⁺) + f(p⁻))`;
    /// 0 when no violator was found.
    pub losses: Vec<f64>,
    /// Iterations where no violator was found within the draw cap.
    pub skipped: u64,
    pub basis_seconds: f64,
    pub phi_seconds: f64,
}

impl TrainReport {
    /// Mean sampled loss over the trailing `fraction` of the iterations.
    pub fn tail_loss(&self, fraction: f64) -> f64 {
        let n = ((self.losses.len() as f64 * fraction).ceil() as usize).max(1);
        mean(&self.losses[self.losses.len().saturating_sub(n)..])
    }

    /// Mean sampled loss over the leading `fraction` of the iterations.
    pub fn head_loss(&self, fraction: f64) -> f64 {
        let n = ((self.losses.len() as f64 * fraction).ceil() as usize).max(1);
        mean(&self.losses[..n.min(self.losses.len())])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn train(queries: &[CandidateSet], config: &TrainConfig) -> Result<RankingModel> {
    train_with_report(queries, config).map(|(m, _)| m)
}

/// Fits the basis metrics, then runs `config.iters` WARP iterations.
pub fn train_with_report(
    queries: &[CandidateSet],
    config: &TrainConfig,
) -> Result<(RankingModel, TrainReport)> {
    config.validate()?;
    let started = Instant::now();
    let locals = fit_basis_metrics(queries, config)?;
    let basis_seconds = started.elapsed().as_secs_f64();
    let m = locals.len();
    let base = RankingModel::new(locals, vec![config.phi_init; m], config.hyper())?;
    let (model, mut report) = fit_phi(base, queries, config)?;
    report.basis_seconds = basis_seconds;
    Ok((model, report))
}

/// Runs the WARP weight fitting for `queries` on the fixed local metrics of
/// `model`, replacing its Φ rows. Every query gets a row initialized to
/// `phi_init`; `phi_default` becomes the mean of the rows.
pub fn fit_phi(
    mut model: RankingModel,
    queries: &[CandidateSet],
    config: &TrainConfig,
) -> Result<(RankingModel, TrainReport)> {
    config.validate()?;
    let started = Instant::now();
    let m = model.num_metrics();
    let mut rows: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for cs in queries {
        rows.insert(cs.qid, vec![config.phi_init; m]);
    }

    let active: Vec<&CandidateSet> = queries.iter().filter(|q| trainable(q)).collect();
    let caches = active
        .iter()
        .map(|cs| KernelCache::new(cs, &model))
        .collect::<Result<Vec<_>>>()?;

    let mut report = TrainReport {
        losses: Vec::with_capacity(config.iters as usize),
        ..TrainReport::default()
    };
    if active.is_empty() {
        if config.iters > 0 {
            log::warn!(
                "no query has both relevant and zero-label documents; weights left at phi_init"
            );
        }
    } else {
        let mut rng = round_rng(config.seed, 0);
        for _ in 0..config.iters {
            let qi = rng.random_range(0..active.len());
            let cs = active[qi];
            let cache = &caches[qi];
            let pos = cs.positives[rng.random_range(0..cs.positives.len())];
            let phi_q = rows.get_mut(&cs.qid).expect("row exists for every query");
            let f_pos = cache.score(pos, phi_q);
            let found = draw_violator(&cs.negatives, config.max_violator_draws, &mut rng, |n| {
                config.zeta + cache.score(n, phi_q) > f_pos
            })?;
            let Some((neg, draws)) = found else {
                report.skipped += 1;
                report.losses.push(0.0);
                continue;
            };
            let sample = TripleSample {
                qid: cs.qid,
                positive_index: pos,
                negative_index: neg,
                draws,
            };
            let f_neg = cache.score(neg, phi_q);
            let weight = rank_weight(sample.rank_estimate(cs.negatives.len()));
            report.losses.push(weight * (config.zeta - f_pos + f_neg));
            *phi_q = step_from_kernels(
                phi_q,
                cache.kernel(pos),
                cache.kernel(neg),
                &sample,
                cs.negatives.len(),
                config.mu,
                config.zeta,
            )?;
        }
    }

    let mut phi_default = vec![0.0; m];
    for row in rows.values() {
        for (d, v) in phi_default.iter_mut().zip(row) {
            *d += v;
        }
    }
    if rows.is_empty() {
        phi_default = vec![config.phi_init; m];
    } else {
        for d in &mut phi_default {
            *d /= rows.len() as f64;
        }
    }
    for (qid, row) in &rows {
        if row.iter().all(|&v| v == 0.0) {
            log::warn!("query {qid}: every weight was projected to zero");
        }
    }
    model.phi = rows;
    model.phi_default = phi_default;
    model.hyper = config.hyper();
    report.phi_seconds = started.elapsed().as_secs_f64();
    Ok((model, report))
}
