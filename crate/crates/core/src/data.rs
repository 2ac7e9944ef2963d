//! Datasets: LETOR/SVMLight text I/O, per-dimension normalization and the
//! synthetic Gaussian generator.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::{CandidateSet, Document};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub queries: Vec<CandidateSet>,
    pub grade_max: u32,
}

impl Dataset {
    pub fn new(dim: usize, queries: Vec<CandidateSet>) -> Result<Self> {
        for cs in &queries {
            for d in &cs.documents {
                if d.features.len() != dim {
                    return Err(Error::dim(dim, d.features.len()));
                }
            }
        }
        let grade_max = queries
            .iter()
            .map(CandidateSet::max_label)
            .max()
            .unwrap_or(0);
        Ok(Self {
            dim,
            queries,
            grade_max,
        })
    }

    pub fn num_documents(&self) -> usize {
        self.queries.iter().map(CandidateSet::len).sum()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.queries.iter().flat_map(|q| q.documents.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Parses `<label> qid:<id> <fid>:<value> ... [# comment]` lines.
///
/// Documents are grouped by qid in order of first appearance; the
/// dimension is the largest feature id in the whole input and absent
/// features are 0.
pub fn parse_letor<R: BufRead>(reader: R) -> Result<Dataset> {
    struct Row {
        qid: u64,
        label: u32,
        sparse: Vec<(usize, f64)>,
    }

    let mut rows = Vec::new();
    let mut dim = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label = parse_label(label_tok).map_err(|m| Error::parse(line_no, m))?;
        let qid_tok = tokens
            .next()
            .ok_or_else(|| Error::parse(line_no, "missing qid"))?;
        let qid = qid_tok
            .strip_prefix("qid:")
            .and_then(|v| v.parse::<u64>().ok())
            .ok_or_else(|| Error::parse(line_no, format!("malformed qid token {qid_tok:?}")))?;
        let mut sparse: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (fid, value) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(line_no, format!("malformed feature token {tok:?}")))?;
            let fid: usize =
                fid.parse().ok().filter(|&f| f >= 1).ok_or_else(|| {
                    Error::parse(line_no, format!("invalid feature id in {tok:?}"))
                })?;
            let value: f64 = value
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    Error::parse(line_no, format!("invalid feature value in {tok:?}"))
                })?;
            if sparse.iter().any(|&(f, _)| f == fid) {
                return Err(Error::parse(line_no, format!("duplicate feature id {fid}")));
            }
            dim = dim.max(fid);
            sparse.push((fid, value));
        }
        rows.push(Row { qid, label, sparse });
    }

    let mut order: Vec<u64> = Vec::new();
    let mut groups: HashMap<u64, Vec<Document>> = HashMap::new();
    for row in rows {
        let mut features = vec![0.0; dim];
        for (fid, v) in row.sparse {
            features[fid - 1] = v;
        }
        groups
            .entry(row.qid)
            .or_insert_with(|| {
                order.push(row.qid);
                Vec::new()
            })
            .push(Document::new(row.qid, features, row.label));
    }
    let queries = order
        .into_iter()
        .map(|q| CandidateSet::new(q, groups.remove(&q).unwrap_or_default()))
        .collect();
    Dataset::new(dim, queries)
}

fn parse_label(tok: &str) -> std::result::Result<u32, String> {
    if let Ok(v) = tok.parse::<u32>() {
        return Ok(v);
    }
    match tok.parse::<f64>() {
        Ok(v) if v < 0.0 => Err(format!("negative label {tok:?}")),
        Ok(v) if v.fract() == 0.0 && v <= u32::MAX as f64 => Ok(v as u32),
        _ => Err(format!("malformed label {tok:?}")),
    }
}

/// Reads a LETOR file, decompressing it when the name ends in `.gz`.
pub fn read_letor_file(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        parse_letor(BufReader::new(flate2::read::MultiGzDecoder::new(file)))
    } else {
        parse_letor(BufReader::new(file))
    }
}

/// Writes every feature densely so the dimension survives a re-parse.
pub fn write_letor<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    let mut line = String::new();
    for cs in &ds.queries {
        for d in &cs.documents {
            use std::fmt::Write as _;
            line.clear();
            let _ = write!(line, "{} qid:{}", d.label, cs.qid);
            for (i, v) in d.features.iter().enumerate() {
                let _ = write!(line, " {}:{}", i + 1, v);
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// 2-norm of every feature dimension over all documents.
pub fn column_norms(ds: &Dataset) -> Vec<f64> {
    let mut sq = vec![0.0; ds.dim];
    for d in ds.documents() {
        for (s, v) in sq.iter_mut().zip(&d.features) {
            *s += v * v;
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}

/// Divides each feature dimension by `norms[k]`, skipping zero norms.
pub fn scale_columns(ds: &Dataset, norms: &[f64]) -> Result<Dataset> {
    if norms.len() != ds.dim {
        return Err(Error::dim(ds.dim, norms.len()));
    }
    let mut out = ds.clone();
    for cs in &mut out.queries {
        for d in &mut cs.documents {
            for (v, &n) in d.features.iter_mut().zip(norms) {
                if n > 0.0 {
                    *v /= n;
                }
            }
        }
    }
    Ok(out)
}

/// Scales every nonzero feature dimension to unit 2-norm over the dataset.
pub fn normalize_l2_per_dimension(ds: &Dataset) -> Dataset {
    let norms = column_norms(ds);
    scale_columns(ds, &norms).expect("norms match the dataset dimension")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    /// Positives with `label >= threshold`.
    pub high: Vec<usize>,
}

pub fn partition_relevance(cs: &CandidateSet, hi_label_threshold: u32) -> Partition {
    let threshold = hi_label_threshold.max(1);
    let mut p = Partition {
        positives: Vec::new(),
        negatives: Vec::new(),
        high: Vec::new(),
    };
    for (i, d) in cs.documents.iter().enumerate() {
        if d.label == 0 {
            p.negatives.push(i);
        } else {
            p.positives.push(i);
            if d.label >= threshold {
                p.high.push(i);
            }
        }
    }
    p
}

/// Grade cap applied to synthetic class labels.
pub const SYNTH_GRADE_MAX: u32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub points_per_class: usize,
    pub dim: usize,
    /// Side of the hypercube the class centers are drawn from.
    pub center_spread: f64,
    pub seed: u64,
    /// Adds one query mixing every class, with the lower half of the
    /// classes relevant.
    pub mixed_query: bool,
    /// Scales every dimension to unit 2-norm over all generated points.
    pub normalize: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            points_per_class: 100,
            dim: 20,
            center_spread: 10.0,
            seed: 0,
            mixed_query: true,
            normalize: true,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.points_per_class == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig(
                "synthetic classes, points and dimension must be positive".into(),
            ));
        }
        if !(self.center_spread > 0.0) || !self.center_spread.is_finite() {
            return Err(Error::InvalidConfig("center_spread must be > 0".into()));
        }
        Ok(())
    }

    /// Relevance grade of a class within its own query.
    fn grade(&self, class: usize) -> u32 {
        if self.num_classes == 1 {
            0
        } else {
            (class as u32 + 1).min(SYNTH_GRADE_MAX)
        }
    }
}

/// Gaussian class clouds; every class query uses all generated points.
pub fn synth_gaussian(config: &SynthConfig) -> Result<Dataset> {
    let (points, mut rng) = synth_points(config)?;
    build_synth_queries(config, &points, &mut rng)
}

/// Same clouds as [`synth_gaussian`], with each class's points split into
/// a training part and a held-out part that form separate datasets with
/// the same qids.
pub fn synth_gaussian_split(
    config: &SynthConfig,
    test_fraction: f64,
) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidConfig(
            "test fraction must lie in [0, 1)".into(),
        ));
    }
    let (points, mut rng) = synth_points(config)?;
    let mut train = Vec::with_capacity(points.len());
    let mut test = Vec::with_capacity(points.len());
    for mut class_points in points {
        class_points.shuffle(&mut rng);
        let n_test = ((class_points.len() as f64) * test_fraction).round() as usize;
        let n_test = n_test.min(class_points.len().saturating_sub(1));
        let held = class_points.split_off(class_points.len() - n_test);
        train.push(class_points);
        test.push(held);
    }
    let train_ds = build_synth_queries(config, &train, &mut rng)?;
    let test_ds = build_synth_queries(config, &test, &mut rng)?;
    Ok((train_ds, test_ds))
}

fn synth_points(config: &SynthConfig) -> Result<(Vec<Vec<Vec<f64>>>, ChaCha8Rng)> {
    config.validate()?;
    if config.num_classes == 1 {
        log::warn!("synthetic data with a single class has no relevant documents");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let chi = ChiSquared::new(config.dim as f64)
        .map_err(|e| Error::InvalidConfig(format!("chi-squared: {e}")))?;
    let radius = chi.inverse_cdf(0.95).sqrt();
    let centers: Vec<Vec<f64>> = (0..config.num_classes)
        .map(|_| {
            (0..config.dim)
                .map(|_| rng.random::<f64>() * config.center_spread)
                .collect()
        })
        .collect();
    let mut points: Vec<Vec<Vec<f64>>> = Vec::with_capacity(config.num_classes);
    for center in &centers {
        let mut class_points = Vec::with_capacity(config.points_per_class);
        while class_points.len() < config.points_per_class {
            let z: Vec<f64> = (0..config.dim)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            if z.iter().map(|v| v * v).sum::<f64>().sqrt() > radius {
                continue;
            }
            class_points.push(center.iter().zip(&z).map(|(c, e)| c + e).collect());
        }
        points.push(class_points);
    }
    if config.normalize {
        let mut sq = vec![0.0; config.dim];
        for p in points.iter().flatten() {
            for (s, v) in sq.iter_mut().zip(p) {
                *s += v * v;
            }
        }
        let norms: Vec<f64> = sq.into_iter().map(f64::sqrt).collect();
        for p in points.iter_mut().flatten() {
            for (v, n) in p.iter_mut().zip(&norms) {
                if *n > 0.0 {
                    *v /= n;
                }
            }
        }
    }
    Ok((points, rng))
}

fn build_synth_queries(
    config: &SynthConfig,
    points: &[Vec<Vec<f64>>],
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    let mut queries = Vec::new();
    for (class, own) in points.iter().enumerate() {
        let qid = class as u64;
        let grade = config.grade(class);
        let mut docs: Vec<Document> = own
            .iter()
            .map(|p| Document::new(qid, p.clone(), grade))
            .collect();
        let others: Vec<&Vec<f64>> = points
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != class)
            .flat_map(|(_, ps)| ps.iter())
            .collect();
        let take = own.len().min(others.len());
        for i in index::sample(rng, others.len(), take) {
            docs.push(Document::new(qid, others[i].clone(), 0));
        }
        docs.shuffle(rng);
        queries.push(CandidateSet::new(qid, docs));
    }
    if config.mixed_query && config.num_classes > 1 {
        let qid = config.num_classes as u64;
        let relevant_classes = config.num_classes.div_ceil(2);
        let mut docs = Vec::new();
        for (class, ps) in points.iter().enumerate() {
            let label = if class < relevant_classes {
                config.grade(class)
            } else {
                0
            };
            let take = ps.len().div_ceil(2);
            for i in index::sample(rng, ps.len(), take) {
                docs.push(Document::new(qid, ps[i].clone(), label));
            }
        }
        docs.shuffle(rng);
        queries.push(CandidateSet::new(qid, docs));
    }
    Dataset::new(config.dim, queries)
}
