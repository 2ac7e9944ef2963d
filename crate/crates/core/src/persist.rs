//! Text model file.
//!
//! Layout (one record per line, `#` lines and blank lines ignored):
//!
//! ```text
//! LGMML-MODEL
//! version 1
//! dim <d>
//! m <m>
//! zeta <f64>
//! mu <f64>
//! iters <u64>
//! lambda <f64>
//! phi_init <f64>
//! seed <u64>
//! anchors
//! <m lines of d values>
//! metrics
//! <m blocks of d lines of d values, row-major>
//! phi <rows>
//! <qid> <m values>        (rows lines, ascending qid)
//! phi_default
//! <m values>
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a load of a saved
//! model reproduces every value bit-for-bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{Hyper, LocalMetric, RankingModel};
use crate::spd::{SpdMatrix, SymMatrix};

pub const MAGIC: &str = "LGMML-MODEL";
pub const FORMAT_VERSION: u32 = 1;

pub fn save_model<W: Write>(model: &RankingModel, mut sink: W) -> Result<()> {
    sink.write_all(model_to_string(model)?.as_bytes())?;
    sink.flush()?;
    Ok(())
}

pub fn model_to_string(model: &RankingModel) -> Result<String> {
    model
        .validate()
        .map_err(|e| Error::ModelFormat(format!("refusing to save invalid model: {e}")))?;
    let h = &model.hyper;
    for (name, v) in [
        ("zeta", h.zeta),
        ("mu", h.mu),
        ("lambda", h.lambda),
        ("phi_init", h.phi_init),
    ] {
        if !v.is_finite() {
            return Err(Error::ModelFormat(format!("{name} is not finite")));
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "# local metric ranking model");
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "version {FORMAT_VERSION}");
    let _ = writeln!(out, "dim {}", model.dim);
    let _ = writeln!(out, "m {}", model.num_metrics());
    let _ = writeln!(out, "zeta {}", h.zeta);
    let _ = writeln!(out, "mu {}", h.mu);
    let _ = writeln!(out, "iters {}", h.iters);
    let _ = writeln!(out, "lambda {}", h.lambda);
    let _ = writeln!(out, "phi_init {}", h.phi_init);
    let _ = writeln!(out, "seed {}", h.seed);
    out.push_str("anchors\n");
    for lm in &model.locals {
        push_row(&mut out, None, &lm.anchor);
    }
    out.push_str("metrics\n");
    for lm in &model.locals {
        let flat = lm.metric.as_sym().to_row_major();
        for row in flat.chunks(model.dim) {
            push_row(&mut out, None, row);
        }
    }
    let _ = writeln!(out, "phi {}", model.phi.len());
    for (qid, row) in &model.phi {
        push_row(&mut out, Some(*qid), row);
    }
    out.push_str("phi_default\n");
    push_row(&mut out, None, &model.phi_default);
    out.push_str("end\n");
    Ok(out)
}

fn push_row(out: &mut String, key: Option<u64>, values: &[f64]) {
    let mut first = true;
    if let Some(k) = key {
        let _ = write!(out, "{k}");
        first = false;
    }
    for v in values {
        if !first {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
        first = false;
    }
    out.push('\n');
}

pub fn load_model<R: BufRead>(source: R) -> Result<RankingModel> {
    let mut lines = Lines::new(source)?;

    let magic = lines.next_line()?;
    if magic != MAGIC {
        return Err(Error::ModelFormat(format!("bad magic string {magic:?}")));
    }
    let version: u32 = lines.keyed("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let dim: usize = lines.keyed("dim")?;
    let m: usize = lines.keyed("m")?;
    if dim == 0 || m == 0 {
        return Err(Error::ModelFormat("dim and m must be positive".into()));
    }
    let hyper = Hyper {
        zeta: lines.keyed_f64("zeta")?,
        mu: lines.keyed_f64("mu")?,
        iters: lines.keyed("iters")?,
        lambda: lines.keyed_f64("lambda")?,
        phi_init: lines.keyed_f64("phi_init")?,
        seed: lines.keyed("seed")?,
    };

    lines.expect("anchors")?;
    let anchors = (0..m)
        .map(|_| lines.floats(dim))
        .collect::<Result<Vec<_>>>()?;
    lines.expect("metrics")?;
    let mut locals = Vec::with_capacity(m);
    for anchor in anchors {
        let mut flat = Vec::with_capacity(dim * dim);
        for _ in 0..dim {
            flat.extend(lines.floats(dim)?);
        }
        let metric = SymMatrix::from_row_slice(dim, &flat)
            .and_then(SpdMatrix::new)
            .map_err(|e| Error::ModelFormat(format!("invalid metric: {e}")))?;
        locals
            .push(LocalMetric::new(anchor, metric).map_err(|e| Error::ModelFormat(e.to_string()))?);
    }

    let rows: usize = lines.keyed("phi")?;
    let mut phi = BTreeMap::new();
    for _ in 0..rows {
        let (line_no, line) = lines.raw()?;
        let mut tokens = line.split_whitespace();
        let qid: u64 = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| format_err(line_no, "expected qid"))?;
        let row = parse_floats(line_no, tokens, m)?;
        if phi.insert(qid, row).is_some() {
            return Err(format_err(
                line_no,
                &format!("duplicate phi row for qid {qid}"),
            ));
        }
    }
    lines.expect("phi_default")?;
    let phi_default = lines.floats(m)?;
    lines.expect("end")?;

    let model = RankingModel {
        dim,
        locals,
        phi,
        phi_default,
        hyper,
    };
    model
        .validate()
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok(model)
}

fn format_err(line: usize, msg: &str) -> Error {
    Error::ModelFormat(format!("line {line}: {msg}"))
}

fn parse_floats<'a>(
    line_no: usize,
    tokens: impl Iterator<Item = &'a str>,
    expected: usize,
) -> Result<Vec<f64>> {
    let values = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format_err(line_no, &format!("invalid number {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(format_err(
            line_no,
            &format!("expected {expected} values, found {}", values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(format_err(line_no, "non-finite value"));
    }
    Ok(values)
}

struct Lines {
    lines: std::vec::IntoIter<(usize, String)>,
}

impl Lines {
    fn new<R: BufRead>(source: R) -> Result<Self> {
        let mut kept = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            kept.push((i + 1, trimmed.to_string()));
        }
        Ok(Self {
            lines: kept.into_iter(),
        })
    }

    fn raw(&mut self) -> Result<(usize, String)> {
        self.lines
            .next()
            .ok_or_else(|| Error::ModelFormat("unexpected end of model file".into()))
    }

    fn next_line(&mut self) -> Result<String> {
        Ok(self.raw()?.1)
    }

    fn expect(&mut self, keyword: &str) -> Result<()> {
        let (no, line) = self.raw()?;
        if line != keyword {
            return Err(format_err(
                no,
                &format!("expected {keyword:?}, found {line:?}"),
            ));
        }
        Ok(())
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (no, line) = self.raw()?;
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(v), None) if k == key => v
                .parse()
                .map_err(|_| format_err(no, &format!("invalid value for {key}: {v:?}"))),
            _ => Err(format_err(
                no,
                &format!("expected `{key} <value>`, found {line:?}"),
            )),
        }
    }

    fn keyed_f64(&mut self, key: &str) -> Result<f64> {
        let v: f64 = self.keyed(key)?;
        if !v.is_finite() {
            return Err(Error::ModelFormat(format!("{key} is not finite")));
        }
        Ok(v)
    }

    fn floats(&mut self, expected: usize) -> Result<Vec<f64>> {
        let (no, line) = self.raw()?;
        parse_floats(no, line.split_whitespace(), expected)
    }
}
