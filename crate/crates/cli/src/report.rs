//! Report writers and the matching readers. Floats are written in their
//! shortest round-trip form, so a report read back reproduces the numbers
//! exactly.

use std::io::{BufRead, Write};

use clap::ValueEnum;
use lgmml::experiment::{EvalReport, QueryEval, SweepRow};
use lgmml::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Tsv,
    JsonLines,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub qid: u64,
    /// 1-based position in the ranking.
    pub rank: usize,
    /// 0-based index of the document within its query, in file order.
    pub doc: usize,
    pub score: f64,
}

/// One eval line; `qid` is `None` on the summary line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EvalLine {
    qid: Option<u64>,
    ks: Vec<usize>,
    ndcg: Vec<f64>,
    ap: f64,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn json_line<T: Serialize>(out: &mut impl Write, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn join<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join("\t")
}

fn ndcg_header(ks: &[usize]) -> String {
    join(&ks.iter().map(|k| format!("ndcg@{k}")).collect::<Vec<_>>())
}

fn header_ks(fields: &[&str], line: usize) -> Result<Vec<usize>> {
    fields
        .iter()
        .map(|f| {
            f.strip_prefix("ndcg@")
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| parse_err(line, format!("bad column `{f}`")))
        })
        .collect()
}

fn float(field: &str, line: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| parse_err(line, format!("bad number `{field}`")))
}

fn int<T: std::str::FromStr>(field: &str, line: usize) -> Result<T> {
    field
        .parse()
        .map_err(|_| parse_err(line, format!("bad integer `{field}`")))
}

/// Non-empty lines with their 1-based line numbers.
fn lines(input: impl BufRead) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn write_eval(rep: &EvalReport, format: ReportFormat, out: &mut impl Write) -> Result<()> {
    match format {
        ReportFormat::Tsv => {
            writeln!(out, "qid\t{}\tap", ndcg_header(&rep.ks))?;
            for q in &rep.per_query {
                writeln!(out, "{}\t{}\t{}", q.qid, join(&q.ndcg), q.ap)?;
            }
            writeln!(out, "mean\t{}\t{}", join(&rep.mean_ndcg), rep.map)?;
        }
        ReportFormat::JsonLines => {
            for q in &rep.per_query {
                json_line(
                    out,
                    &EvalLine {
                        qid: Some(q.qid),
                        ks: rep.ks.clone(),
                        ndcg: q.ndcg.clone(),
                        ap: q.ap,
                    },
                )?;
            }
            json_line(
                out,
                &EvalLine {
                    qid: None,
                    ks: rep.ks.clone(),
                    ndcg: rep.mean_ndcg.clone(),
                    ap: rep.map,
                },
            )?;
        }
    }
    Ok(())
}

pub fn read_eval(input: impl BufRead, format: ReportFormat) -> Result<EvalReport> {
    let rows = lines(input)?;
    let mut eval_lines = Vec::with_capacity(rows.len());
    match format {
        ReportFormat::Tsv => {
            let (hline, header) = rows.first().ok_or(Error::EmptyInput)?;
            let cols: Vec<&str> = header.split('\t').collect();
            if cols.len() < 3 || cols[0] != "qid" || cols[cols.len() - 1] != "ap" {
                return Err(parse_err(*hline, "expected `qid ndcg@k... ap` header"));
            }
            let ks = header_ks(&cols[1..cols.len() - 1], *hline)?;
            for (ln, row) in &rows[1..] {
                let f: Vec<&str> = row.split('\t').collect();
                if f.len() != cols.len() {
                    return Err(parse_err(*ln, format!("expected {} columns", cols.len())));
                }
                eval_lines.push(EvalLine {
                    qid: if f[0] == "mean" {
                        None
                    } else {
                        Some(int(f[0], *ln)?)
                    },
                    ks: ks.clone(),
                    ndcg: f[1..f.len() - 1]
                        .iter()
                        .map(|v| float(v, *ln))
                        .collect::<Result<_>>()?,
                    ap: float(f[f.len() - 1], *ln)?,
                });
            }
        }
        ReportFormat::JsonLines => {
            for (ln, row) in &rows {
                eval_lines
                    .push(serde_json::from_str(row).map_err(|e| parse_err(*ln, e.to_string()))?);
            }
        }
    }
    let summary = eval_lines
        .iter()
        .position(|l| l.qid.is_none())
        .ok_or_else(|| parse_err(0, "missing summary line"))?;
    let mean = eval_lines.remove(summary);
    Ok(EvalReport {
        ks: mean.ks,
        per_query: eval_lines
            .into_iter()
            .map(|l| QueryEval {
                qid: l.qid.expect("summary removed"),
                ndcg: l.ndcg,
                ap: l.ap,
            })
            .collect(),
        mean_ndcg: mean.ndcg,
        map: mean.ap,
    })
}

pub fn write_sweep(rows: &[SweepRow], format: ReportFormat, out: &mut impl Write) -> Result<()> {
    match format {
        ReportFormat::Tsv => {
            let ks = rows.first().map(|r| r.ks.clone()).unwrap_or_default();
            writeln!(
                out,
                "m\tmap\t{}\ttrain_seconds\tfinal_loss",
                ndcg_header(&ks)
            )?;
            for r in rows {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    r.m,
                    r.map,
                    join(&r.ndcg),
                    r.train_seconds,
                    r.final_loss
                )?;
            }
        }
        ReportFormat::JsonLines => {
            for r in rows {
                json_line(out, r)?;
            }
        }
    }
    Ok(())
}

pub fn read_sweep(input: impl BufRead, format: ReportFormat) -> Result<Vec<SweepRow>> {
    let rows = lines(input)?;
    match format {
        ReportFormat::Tsv => {
            let (hline, header) = rows.first().ok_or(Error::EmptyInput)?;
            let cols: Vec<&str> = header.split('\t').collect();
            let n = cols.len();
            if n < 5 || cols[0] != "m" || cols[1] != "map" || cols[n - 2] != "train_seconds" {
                return Err(parse_err(
                    *hline,
                    "expected `m map ndcg@k... train_seconds final_loss` header",
                ));
            }
            let ks = header_ks(&cols[2..n - 2], *hline)?;
            rows[1..]
                .iter()
                .map(|(ln, row)| {
                    let f: Vec<&str> = row.split('\t').collect();
                    if f.len() != n {
                        return Err(parse_err(*ln, format!("expected {n} columns")));
                    }
                    Ok(SweepRow {
                        m: int(f[0], *ln)?,
                        map: float(f[1], *ln)?,
                        ks: ks.clone(),
                        ndcg: f[2..n - 2]
                            .iter()
                            .map(|v| float(v, *ln))
                            .collect::<Result<_>>()?,
                        train_seconds: float(f[n - 2], *ln)?,
                        final_loss: float(f[n - 1], *ln)?,
                    })
                })
                .collect()
        }
        ReportFormat::JsonLines => rows
            .iter()
            .map(|(ln, row)| serde_json::from_str(row).map_err(|e| parse_err(*ln, e.to_string())))
            .collect(),
    }
}

pub fn write_rank(rows: &[RankRow], format: ReportFormat, out: &mut impl Write) -> Result<()> {
    match format {
        ReportFormat::Tsv => {
            writeln!(out, "qid\trank\tdoc\tscore")?;
            for r in rows {
                writeln!(out, "{}\t{}\t{}\t{}", r.qid, r.rank, r.doc, r.score)?;
            }
        }
        ReportFormat::JsonLines => {
            for r in rows {
                json_line(out, r)?;
            }
        }
    }
    Ok(())
}

pub fn read_rank(input: impl BufRead, format: ReportFormat) -> Result<Vec<RankRow>> {
    let rows = lines(input)?;
    match format {
        ReportFormat::Tsv => {
            let (hline, header) = rows.first().ok_or(Error::EmptyInput)?;
            if header != "qid\trank\tdoc\tscore" {
                return Err(parse_err(*hline, "expected `qid rank doc score` header"));
            }
            rows[1..]
                .iter()
                .map(|(ln, row)| {
                    let f: Vec<&str> = row.split('\t').collect();
                    if f.len() != 4 {
                        return Err(parse_err(*ln, "expected 4 columns"));
                    }
                    Ok(RankRow {
                        qid: int(f[0], *ln)?,
                        rank: int(f[1], *ln)?,
                        doc: int(f[2], *ln)?,
                        score: float(f[3], *ln)?,
                    })
                })
                .collect()
        }
        ReportFormat::JsonLines => rows
            .iter()
            .map(|(ln, row)| serde_json::from_str(row).map_err(|e| parse_err(*ln, e.to_string())))
            .collect(),
    }
}
