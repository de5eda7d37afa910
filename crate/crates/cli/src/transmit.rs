//! Retraining fresh Receivers on frozen Senders.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use emlab_core::agents::{AgentCheckpoint, ReceiverArch};
use emlab_core::env::{parse_inputs, split_unseen_combinations, DataSplit};
use emlab_core::metrics::metric_report;
use emlab_core::training::extract_language;
use emlab_core::transmission::{
    retrain_receiver, transmission_correlations, FrozenDecoding, SenderRecord, TransmissionConfig, MIN_SENDERS,
    SENDER_SELECTION_ACCURACY,
};

use crate::config::{parse_entries, Entry};
use crate::error::{CliError, Result};
use crate::run::{csv_err, RunRecord, RECORD_FILE, SENDER_FILE, TEST_SPLIT_FILE, TRAIN_SPLIT_FILE};

/// Transmission settings plus how to split data for bare checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitConfig {
    pub transmission: TransmissionConfig,
    pub test_fraction: f64,
    pub split_seed: u64,
    /// Senders with a recorded test accuracy below this are left out.
    pub min_test_accuracy: f64,
}

impl Default for TransmitConfig {
    fn default() -> Self {
        TransmitConfig {
            transmission: TransmissionConfig::default(),
            test_fraction: 0.1,
            split_seed: 0,
            min_test_accuracy: SENDER_SELECTION_ACCURACY,
        }
    }
}

impl TransmitConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut c = TransmitConfig::default();
        for e in parse_entries(text, source_name)? {
            let bad = |m: String| CliError::Field {
                source_name: source_name.to_string(),
                line: e.line,
                field: e.key.clone(),
                message: m,
            };
            let num = |e: &Entry| e.value.parse::<f64>().map_err(|err| bad(format!("'{}': {err}", e.value)));
            let int = |e: &Entry| e.value.parse::<usize>().map_err(|err| bad(format!("'{}': {err}", e.value)));
            let t = &mut c.transmission;
            match e.key.as_str() {
                "architectures" => {
                    t.architectures = e
                        .value
                        .split(',')
                        .map(|a| a.trim().parse::<ReceiverArch>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|err| bad(err.to_string()))?
                }
                "seeds_per_sender" => t.seeds_per_sender = int(&e)?,
                "epoch_budget" => t.epoch_budget = int(&e)?,
                "convergence_threshold" => t.convergence_threshold = num(&e)?,
                "learning_rate" => t.learning_rate = num(&e)?,
                "batch_size" => t.batch_size = int(&e)?,
                "embed_dim" => t.embed_dim = int(&e)?,
                "decoding" => {
                    t.decoding = match e.value.as_str() {
                        "greedy" => FrozenDecoding::Greedy,
                        "sample" => FrozenDecoding::Sample,
                        other => return Err(bad(format!("expected 'greedy' or 'sample', got '{other}'"))),
                    }
                }
                "test_fraction" => {
                    c.test_fraction = num(&e)?;
                    if !(c.test_fraction > 0.0 && c.test_fraction < 1.0) {
                        return Err(bad("must lie in (0, 1)".into()));
                    }
                }
                "split_seed" => c.split_seed = e.value.parse().map_err(|err| bad(format!("{err}")))?,
                "min_test_accuracy" => c.min_test_accuracy = num(&e)?,
                _ => return Err(bad("unknown field".into())),
            }
            c.transmission.validate().map_err(|err| bad(err.to_string()))?;
        }
        Ok(c)
    }
}

/// A Sender to retrain against: a run directory or a bare checkpoint.
struct FrozenSender {
    id: String,
    checkpoint: AgentCheckpoint,
    split: DataSplit,
    test_accuracy: Option<f64>,
}

fn load_sender(path: &Path, config: &TransmitConfig) -> Result<FrozenSender> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    if path.is_dir() {
        let checkpoint = AgentCheckpoint::load(&path.join(SENDER_FILE))?;
        let (header, train) = parse_inputs(&fs::read_to_string(path.join(TRAIN_SPLIT_FILE))?)?;
        let (_, test) = parse_inputs(&fs::read_to_string(path.join(TEST_SPLIT_FILE))?)?;
        let record = path
            .join(RECORD_FILE)
            .is_file()
            .then(|| RunRecord::load(path))
            .transpose()?;
        Ok(FrozenSender {
            id: record.as_ref().map_or(name, |r| r.run_id.clone()),
            split: DataSplit {
                space: header.space,
                train,
                test,
                seed: header.seed,
                coverage_enforced: false,
                redraws: 0,
            },
            test_accuracy: record.and_then(|r| r.test_accuracy),
            checkpoint,
        })
    } else {
        let checkpoint = AgentCheckpoint::load(path)?;
        let split = split_unseen_combinations(&checkpoint.space, config.test_fraction, config.split_seed)?;
        Ok(FrozenSender {
            id: name,
            checkpoint,
            split,
            test_accuracy: None,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
struct ResultRow<'a> {
    sender_id: &'a str,
    architecture: String,
    seed: u64,
    learning_speed: f64,
    test_accuracy: f64,
    train_accuracy: f64,
    converged_at: Option<usize>,
    topsim: Option<f64>,
    posdis: Option<f64>,
    bosdis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitOutput {
    pub records: Vec<SenderRecord>,
    /// Senders left out, with the reason.
    pub skipped: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
    /// Set when enough Senders took part for a correlation table.
    pub correlations: Option<PathBuf>,
    pub notes: Vec<String>,
}

/// Retrains every architecture × seed on every Sender and writes
/// `results.csv`, `curves.csv`, `senders.json` and, with at least
/// [`MIN_SENDERS`] Senders, `correlations.csv`.
pub fn transmit(paths: &[PathBuf], config: &TransmitConfig, seed: u64, out_dir: &Path) -> Result<TransmitOutput> {
    config.transmission.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for path in paths {
        let s = load_sender(path, config)?;
        if let Some(acc) = s.test_accuracy {
            if acc < config.min_test_accuracy {
                skipped.push((s.id, format!("test accuracy {acc:.3} below {}", config.min_test_accuracy)));
                continue;
            }
        }
        let sender = s.checkpoint.to_sender()?;
        let (space, channel) = (s.checkpoint.space, s.checkpoint.channel);
        let language = extract_language(&sender, &space, &channel, &s.split.train)?;
        let metrics = metric_report(&language.corpus)?;
        let mut results = Vec::new();
        for &arch in &config.transmission.architectures {
            for k in 0..config.transmission.seeds_per_sender as u64 {
                results.push(retrain_receiver(
                    &sender,
                    &s.id,
                    &s.split,
                    &channel,
                    arch,
                    &config.transmission,
                    seed + k,
                )?);
            }
        }
        records.push(SenderRecord {
            sender_id: s.id,
            metrics,
            results,
        });
    }

    let mut files = Vec::new();
    let results_path = out_dir.join("results.csv");
    let mut w = csv::Writer::from_path(&results_path).map_err(|e| csv_err(&results_path, e))?;
    let mut curves = String::from("sender_id,architecture,seed,epoch,accuracy\n");
    for r in &records {
        for t in &r.results {
            w.serialize(ResultRow {
                sender_id: &r.sender_id,
                architecture: t.architecture.to_string(),
                seed: t.seed,
                learning_speed: t.learning_speed,
                test_accuracy: t.test_accuracy,
                train_accuracy: t.train_accuracy,
                converged_at: t.converged_at,
                topsim: r.metrics.topsim.value(),
                posdis: r.metrics.posdis.value(),
                bosdis: r.metrics.bosdis.value(),
            })
            .map_err(|e| csv_err(&results_path, e))?;
            for (epoch, acc) in t.curve.iter().enumerate() {
                let _ = writeln!(curves, "{},{},{},{epoch},{acc}", r.sender_id, t.architecture, t.seed);
            }
        }
    }
    w.flush()?;
    files.push(results_path);
    let curves_path = out_dir.join("curves.csv");
    fs::write(&curves_path, curves)?;
    files.push(curves_path);
    let senders_path = out_dir.join("senders.json");
    fs::write(&senders_path, serde_json::to_string_pretty(&records)?)?;
    files.push(senders_path);

    let mut notes = Vec::new();
    let correlations = if records.len() >= MIN_SENDERS {
        match transmission_correlations(&records) {
            Ok(table) => {
                let p = out_dir.join("correlations.csv");
                fs::write(&p, table.to_csv())?;
                files.push(p.clone());
                Some(p)
            }
            Err(emlab_core::Error::InsufficientData(why)) => {
                notes.push(format!("no correlation table: {why}"));
                None
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        notes.push(format!(
            "no correlation table: {} senders retrained, need at least {MIN_SENDERS}",
            records.len()
        ));
        None
    };
    Ok(TransmitOutput {
        records,
        skipped,
        files,
        correlations,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let c = TransmitConfig::parse(
            "architectures = gru-50, ffn-20\nepoch_budget = 7\ndecoding = sample\nsplit_seed = 4\n",
            "t",
        )
        .unwrap();
        assert_eq!(
            c.transmission.architectures,
            vec![ReceiverArch::Gru { hidden: 50 }, ReceiverArch::Ffn { hidden: 20 }]
        );
        assert_eq!(c.transmission.epoch_budget, 7);
        assert_eq!(c.transmission.decoding, FrozenDecoding::Sample);
        assert_eq!(c.split_seed, 4);
        let e = TransmitConfig::parse("epoch_budget = 0\n", "t").unwrap_err();
        assert!(e.to_string().contains("'epoch_budget'"), "{e}");
        let e = TransmitConfig::parse("architectures = lstm-4\n", "t").unwrap_err();
        assert!(e.to_string().contains("'architectures'"), "{e}");
    }
}
