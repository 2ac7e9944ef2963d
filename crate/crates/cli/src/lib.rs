//! Front end for the `lgmml` binary. Kept as a library so the report
//! readers can be reused by tests and downstream scripts.

pub mod args;
pub mod report;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use lgmml::data::{read_letor_file, synth_gaussian, synth_gaussian_split, write_letor, Dataset};
use lgmml::experiment::{evaluate, evaluate_transductive, sweep};
use lgmml::metrics::Gain;
use lgmml::model::rank_with_scores;
use lgmml::persist::{load_model, save_model};
use lgmml::warp::{train_with_report, TrainConfig};
use lgmml::RankingModel;

use args::{Cli, Command, EvalArgs, RankArgs, SweepArgs, SynthArgs, TrainArgs};
use report::RankRow;

/// Exit status for configuration errors.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status for unreadable, malformed or empty input.
pub const EXIT_INPUT: u8 = 3;
/// Exit status for numeric failures during fitting.
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: io::Error) -> Self {
        Self {
            code: EXIT_INPUT,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl From<lgmml::Error> for CliError {
    fn from(e: lgmml::Error) -> Self {
        use lgmml::Error as E;
        let code = match &e {
            E::Io(io) if io.kind() == io::ErrorKind::BrokenPipe => 0,
            E::InvalidConfig(_) => EXIT_CONFIG,
            E::Parse { .. }
            | E::Io(_)
            | E::ModelFormat(_)
            | E::EmptyInput
            | E::EmptyCandidateSet
            | E::EmptyRanking
            | E::DimMismatch { .. }
            | E::NoPositives
            | E::NoNegatives => EXIT_INPUT,
            _ => EXIT_NUMERIC,
        };
        Self {
            code,
            message: format!("{}: {e}", e.kind()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self {
            code: if e.kind() == io::ErrorKind::BrokenPipe {
                0
            } else {
                EXIT_INPUT
            },
            message: format!("Io: {e}"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Rank(a) => cmd_rank(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

/// Maps a result to the process exit status, reporting errors on stderr.
pub fn finish(result: CliResult<()>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // The reader went away (e.g. `| head`); nothing left to report.
        Err(e) if e.code == 0 => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn read_dataset(path: &Path) -> CliResult<Dataset> {
    if !path.exists() {
        return Err(CliError::io(path, io::Error::from(io::ErrorKind::NotFound)));
    }
    let ds = read_letor_file(path)?;
    if ds.is_empty() {
        return Err(CliError {
            code: EXIT_INPUT,
            message: format!("EmptyInput: {} contains no documents", path.display()),
        });
    }
    Ok(ds)
}

fn read_model(path: &Path) -> CliResult<RankingModel> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(load_model(BufReader::new(file))?)
}

/// Buffered writer on `path`, or stdout when no path is given.
fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::io(p, e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn validated(cfg: TrainConfig) -> CliResult<TrainConfig> {
    cfg.validate()?;
    Ok(cfg)
}

fn validate_ks(ks: &[usize]) -> CliResult<()> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(CliError::config("--k values must be >= 1"));
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let cfg = validated(a.hyper.config(a.m))?;
    let ds = read_dataset(&a.train)?;
    let started = Instant::now();
    let (model, rep) = train_with_report(&ds.queries, &cfg)?;
    let secs = started.elapsed().as_secs_f64();
    let file = File::create(&a.model).map_err(|e| CliError::io(&a.model, e))?;
    let mut w = BufWriter::new(file);
    save_model(&model, &mut w)?;
    w.flush().map_err(|e| CliError::io(&a.model, e))?;
    println!(
        "m={} T={} wall={secs:.3}s final_loss={:.6} skipped={}",
        model.num_metrics(),
        cfg.iters,
        rep.tail_loss(0.1),
        rep.skipped
    );
    Ok(())
}

fn cmd_rank(a: &RankArgs) -> CliResult<()> {
    let model = read_model(&a.model)?;
    let ds = read_dataset(&a.test)?;
    if ds.dim != model.dim {
        return Err(lgmml::Error::DimMismatch {
            expected: model.dim,
            actual: ds.dim,
        }
        .into());
    }
    let mut rows = Vec::with_capacity(ds.num_documents());
    for cs in &ds.queries {
        for (rank, (doc, score)) in rank_with_scores(cs, model.phi_for(cs.qid), &model)?
            .into_iter()
            .enumerate()
        {
            rows.push(RankRow {
                qid: cs.qid,
                rank: rank + 1,
                doc,
                score,
            });
        }
    }
    let mut out = output(a.out.as_deref())?;
    report::write_rank(&rows, a.report, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    validate_ks(&a.k)?;
    let cfg = validated(a.hyper.config(1))?;
    let model = read_model(&a.model)?;
    let ds = read_dataset(&a.test)?;
    let gain = if a.linear_gain {
        Gain::Linear
    } else {
        Gain::Exponential
    };
    let rep = if a.transductive {
        let cfg = TrainConfig {
            m: model.num_metrics(),
            ..cfg
        };
        evaluate_transductive(&model, &ds, &cfg, &a.k, gain)?
    } else {
        evaluate(&model, &ds, &a.k, gain)?
    };
    let mut out = output(a.out.as_deref())?;
    report::write_eval(&rep, a.report, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    validate_ks(&a.k)?;
    for (i, m) in a.m.iter().enumerate() {
        if a.m[..i].contains(m) {
            return Err(CliError::config(format!("duplicate m value {m}")));
        }
    }
    let cfg = validated(a.hyper.config(a.m.first().copied().unwrap_or(1)))?;
    let train = read_dataset(&a.train)?;
    let test = read_dataset(&a.test)?;
    let gain = if a.linear_gain {
        Gain::Linear
    } else {
        Gain::Exponential
    };
    let rows = sweep(&train, &test, &a.m, &cfg, &a.k, gain)?;
    let mut out = output(a.out.as_deref())?;
    report::write_sweep(&rows, a.report, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let cfg = a.config();
    let write = |ds: &Dataset, path: &Path| -> CliResult<()> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = BufWriter::new(file);
        write_letor(ds, &mut w)?;
        w.flush().map_err(|e| CliError::io(path, e))
    };
    match &a.test_out {
        Some(test_path) => {
            if !(a.test_fraction > 0.0 && a.test_fraction < 1.0) {
                return Err(CliError::config("--test-fraction must lie in (0, 1)"));
            }
            let (train, test) = synth_gaussian_split(&cfg, a.test_fraction)?;
            write(&train, &a.out)?;
            write(&test, test_path)?;
        }
        None => write(&synth_gaussian(&cfg)?, &a.out)?,
    }
    Ok(())
}
