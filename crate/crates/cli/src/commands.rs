//! Corpus-level commands: metrics, analysis, correlation, fixtures.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use emlab_core::agents::AgentCheckpoint;
use emlab_core::analysis::{
    ablate, ablation_table_csv, cue_validity, make_oracle_pair, mi_profile, vocab_usage, AblationProtocol,
    AblationResult,
};
use emlab_core::fixtures::reference_languages;
use emlab_core::metrics::{
    bosdis_with, metric_report_with, BosdisSymbols, LanguageCorpus, MetricReport, MetricValue, DEFAULT_PAIR_CAP,
};
use emlab_core::numerics::Rng;
use emlab_core::stats::{spearman, CorrelationResult};
use emlab_core::training::Decoder;
use emlab_core::Error;

use crate::error::{CliError, Result};
use crate::run::csv_err;

pub fn load_corpus(path: &Path) -> Result<LanguageCorpus> {
    let text = fs::read_to_string(path)?;
    LanguageCorpus::from_text(&text).map_err(|e| match e {
        Error::Parse { offset, message } => Error::Parse {
            offset,
            message: format!("{}: {message}", path.display()),
        }
        .into(),
        other => other.into(),
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MetricsOptions {
    pub pair_cap: Option<u64>,
    pub seed: u64,
    /// Count symbol 0 in bosdis.
    pub all_symbols: bool,
}

pub fn corpus_metrics(corpus: &LanguageCorpus, opts: MetricsOptions) -> Result<MetricReport> {
    let mut report = metric_report_with(corpus, opts.pair_cap.unwrap_or(DEFAULT_PAIR_CAP), opts.seed)?;
    if opts.all_symbols {
        report.bosdis = MetricValue::from_result(bosdis_with(corpus, BosdisSymbols::All))?;
    }
    Ok(report)
}

/// Where `analyze` gets its Receiver from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReceiverSource {
    Checkpoint(PathBuf),
    /// Positional oracle; the list maps attribute a to message position.
    Oracle(Vec<usize>),
}

impl FromStr for ReceiverSource {
    type Err = String;

    /// `oracle:0,1` or a checkpoint path.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.strip_prefix("oracle:") {
            Some(list) => list
                .split(',')
                .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad oracle position '{p}': {e}")))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(ReceiverSource::Oracle),
            None => Ok(ReceiverSource::Checkpoint(PathBuf::from(s))),
        }
    }
}

pub struct AnalyzeOptions {
    pub receiver: Option<ReceiverSource>,
    /// Empty means every protocol for every position.
    pub protocols: Vec<AblationProtocol>,
    pub repetitions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOutput {
    pub files: Vec<PathBuf>,
    pub ablations: Vec<AblationResult>,
}

/// MI profile, cue validity and vocabulary usage of a corpus, plus
/// ablations when a Receiver is given. Writes CSVs into `out_dir`.
pub fn analyze(corpus: &LanguageCorpus, opts: &AnalyzeOptions, out_dir: &Path) -> Result<AnalysisOutput> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<()> {
        let p = out_dir.join(name);
        fs::write(&p, body)?;
        files.push(p);
        Ok(())
    };

    emit("mi_profile.csv", mi_profile(corpus)?.to_csv())?;

    let mut cv = String::from("position,attribute,symbol,count,validity\n");
    let mut cv_mean = String::from("position,attribute,mean\n");
    for j in 0..corpus.channel.msg_len {
        for a in 0..corpus.space.n_att {
            match cue_validity(corpus, j, a) {
                Ok(c) => {
                    for s in &c.per_symbol {
                        let _ = writeln!(cv, "{},{},{},{},{:.6}", j + 1, a + 1, s.symbol, s.count, s.validity);
                    }
                    let _ = writeln!(cv_mean, "{},{},{:.6}", j + 1, a + 1, c.mean);
                }
                Err(Error::Undefined(_)) => {
                    let _ = writeln!(cv_mean, "{},{},", j + 1, a + 1);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    emit("cue_validity.csv", cv)?;
    emit("cue_validity_mean.csv", cv_mean)?;

    let mut usage = String::from("position,distinct_symbols\n");
    for (j, n) in vocab_usage(corpus).into_iter().enumerate() {
        let _ = writeln!(usage, "{},{n}", j + 1);
    }
    emit("vocab_usage.csv", usage)?;

    let mut ablations = Vec::new();
    if let Some(source) = &opts.receiver {
        let protocols = if opts.protocols.is_empty() {
            default_protocols(corpus.channel.msg_len)
        } else {
            opts.protocols.clone()
        };
        let mut rng = Rng::derived(opts.seed, 0xab1a);
        match source {
            ReceiverSource::Checkpoint(path) => {
                let ckpt = AgentCheckpoint::load(path)?;
                if ckpt.space != corpus.space || ckpt.channel != corpus.channel {
                    return Err(CliError::Usage(format!(
                        "receiver checkpoint {} does not match the corpus space/channel",
                        path.display()
                    )));
                }
                let receiver = ckpt.to_receiver()?;
                ablations = run_ablations(corpus, &receiver, &protocols, opts.repetitions, &mut rng)?;
            }
            ReceiverSource::Oracle(assignment) => {
                let (_, receiver) = make_oracle_pair(&corpus.space, &corpus.channel, assignment)?;
                ablations = run_ablations(corpus, &receiver, &protocols, opts.repetitions, &mut rng)?;
            }
        }
        emit("ablation.csv", ablation_table_csv(&ablations))?;
    }
    Ok(AnalysisOutput { files, ablations })
}

fn default_protocols(msg_len: usize) -> Vec<AblationProtocol> {
    let mut v: Vec<AblationProtocol> = (0..msg_len).map(AblationProtocol::FixOne).collect();
    v.extend((0..msg_len).map(AblationProtocol::ShuffleOne));
    v.push(AblationProtocol::ShuffleWithinMessage);
    v.push(AblationProtocol::FixAll);
    v
}

fn run_ablations(
    corpus: &LanguageCorpus,
    receiver: &impl Decoder,
    protocols: &[AblationProtocol],
    repetitions: usize,
    rng: &mut Rng,
) -> Result<Vec<AblationResult>> {
    protocols
        .iter()
        .map(|&p| Ok(ablate(corpus, receiver, p, repetitions, rng)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    pub x: String,
    pub y: String,
    /// Rows with an empty cell in either column.
    pub skipped: usize,
    #[serde(flatten)]
    pub result: CorrelationResult,
}

/// Spearman correlation between two numeric columns of a CSV file. Rows
/// may be restricted with `column=value` filters; empty cells are skipped.
pub fn correlate(path: &Path, x: &str, y: &str, filters: &[(String, String)]) -> Result<Correlation> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            let known: Vec<&str> = headers.iter().collect();
            CliError::Usage(format!(
                "{}: no column '{name}' (columns: {})",
                path.display(),
                known.join(", ")
            ))
        })
    };
    let (xi, yi) = (column(x)?, column(y)?);
    let filters: Vec<(usize, &str)> = filters
        .iter()
        .map(|(c, v)| Ok((column(c)?, v.as_str())))
        .collect::<Result<_>>()?;

    let (mut xs, mut ys, mut skipped) = (Vec::new(), Vec::new(), 0);
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        if filters.iter().any(|&(c, v)| record.get(c) != Some(v)) {
            continue;
        }
        let (cx, cy) = (record.get(xi).unwrap_or(""), record.get(yi).unwrap_or(""));
        if cx.is_empty() || cy.is_empty() {
            skipped += 1;
            continue;
        }
        let offset = record.position().map_or(0, |p| p.byte() as usize);
        let num = |cell: &str, col: &str| {
            cell.parse::<f64>().map_err(|_| {
                CliError::Core(Error::Parse {
                    offset,
                    message: format!("{}: column '{col}' holds non-numeric '{cell}'", path.display()),
                })
            })
        };
        xs.push(num(cx, x)?);
        ys.push(num(cy, y)?);
    }
    Ok(Correlation {
        x: x.to_string(),
        y: y.to_string(),
        skipped,
        result: spearman(&xs, &ys)?,
    })
}

/// Writes the three reference languages as corpus files.
pub fn write_fixtures(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    reference_languages()
        .into_iter()
        .map(|(name, corpus)| {
            let p = dir.join(format!("{name}.txt"));
            fs::write(&p, corpus.to_text())?;
            Ok(p)
        })
        .collect()
}
