//! Single training runs and their on-disk records.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use emlab_core::agents::{AgentCheckpoint, Receiver, SenderParams};
use emlab_core::env::{format_inputs, split_unseen_combinations, SplitHeader};
use emlab_core::metrics::{metric_report, MetricReport};
use emlab_core::numerics::{Rng, RNG_ALGORITHM};
use emlab_core::training::{evaluate, extract_language, train, GamePair};

use crate::config::RunConfig;
use crate::error::Result;

pub const CONFIG_FILE: &str = "config.txt";
pub const RECORD_FILE: &str = "record.json";
pub const SENDER_FILE: &str = "sender.json";
pub const RECEIVER_FILE: &str = "receiver.json";
pub const CORPUS_FILE: &str = "corpus.txt";
pub const TRAIN_SPLIT_FILE: &str = "train.txt";
pub const TEST_SPLIT_FILE: &str = "test.txt";
pub const HISTORY_FILE: &str = "history.csv";
/// Written last; its presence marks a finished run.
pub const DONE_MARKER: &str = "done";

/// Files of a run, relative to its directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifacts {
    pub config: String,
    pub sender_checkpoint: String,
    pub receiver_checkpoint: String,
    pub corpus: String,
    pub train_split: String,
    pub test_split: String,
    pub history: String,
}

impl Default for Artifacts {
    fn default() -> Self {
        Artifacts {
            config: CONFIG_FILE.into(),
            sender_checkpoint: SENDER_FILE.into(),
            receiver_checkpoint: RECEIVER_FILE.into(),
            corpus: CORPUS_FILE.into(),
            train_split: TRAIN_SPLIT_FILE.into(),
            test_split: TEST_SPLIT_FILE.into(),
            history: HISTORY_FILE.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config: RunConfig,
    pub rng_algorithm: String,
    pub converged: bool,
    pub epochs_run: usize,
    pub train_accuracy: f64,
    /// Accuracy on held-out combinations; `None` when the test side is empty.
    pub test_accuracy: Option<f64>,
    /// Two training inputs share a greedy message.
    pub ambiguous: bool,
    pub metrics: MetricReport,
    pub wall_clock_secs: f64,
    pub warnings: Vec<String>,
    pub artifacts: Artifacts,
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(dir.join(RECORD_FILE))?)
    }
}

/// Stable identifier derived from the full configuration.
pub fn run_id(config: &RunConfig) -> String {
    let digest = Sha256::digest(config.to_text().as_bytes());
    let hex: String = digest.iter().take(4).map(|b| format!("{b:02x}")).collect();
    format!(
        "a{}v{}-c{}l{}-s{}-{hex}",
        config.n_att, config.n_val, config.c_voc, config.c_len, config.seed
    )
}

pub fn is_done(dir: &Path) -> bool {
    dir.join(DONE_MARKER).is_file()
}

/// Trains one Sender/Receiver pair and writes every artifact into `dir`.
pub fn execute_run(config: &RunConfig, dir: &Path) -> Result<RunRecord> {
    let started = Instant::now();
    let space = config.space()?;
    let channel = config.channel()?;
    let train_config = config.train_config();
    train_config.validate()?;
    let split = split_unseen_combinations(&space, config.test_fraction, config.seed)?;

    fs::create_dir_all(dir)?;
    let _ = fs::remove_file(dir.join(DONE_MARKER));
    fs::write(dir.join(CONFIG_FILE), config.to_text())?;
    for (file, role, inputs) in [
        (TRAIN_SPLIT_FILE, "train", &split.train),
        (TEST_SPLIT_FILE, "test", &split.test),
    ] {
        let header = SplitHeader {
            space,
            seed: config.seed,
            role: role.into(),
        };
        fs::write(dir.join(file), format_inputs(&header, inputs))?;
    }

    let mut rng = Rng::seed_from(config.seed);
    let sender = SenderParams::init(&space, &channel, config.sender_hidden, config.embed_dim, &mut rng);
    let receiver = Receiver::init(config.receiver, &space, &channel, config.embed_dim, &mut rng);
    let mut pair = GamePair { sender, receiver };
    let outcome = train(&space, &channel, &split.train, &mut pair, &train_config, &mut rng)?;

    let train_eval = evaluate(&pair.sender, &pair.receiver, &space, &channel, &split.train)?;
    let test_accuracy = if split.test.is_empty() {
        None
    } else {
        Some(evaluate(&pair.sender, &pair.receiver, &space, &channel, &split.test)?.accuracy)
    };
    let language = extract_language(&pair.sender, &space, &channel, &split.train)?;
    let metrics = metric_report(&language.corpus)?;

    AgentCheckpoint::from_sender(&pair.sender, &space, &channel).save(&dir.join(SENDER_FILE))?;
    AgentCheckpoint::from_receiver(&pair.receiver, &space, &channel).save(&dir.join(RECEIVER_FILE))?;
    fs::write(dir.join(CORPUS_FILE), language.corpus.to_text())?;
    fs::write(dir.join(HISTORY_FILE), outcome.history.to_csv())?;

    let record = RunRecord {
        run_id: run_id(config),
        config: config.clone(),
        rng_algorithm: RNG_ALGORITHM.into(),
        converged: outcome.converged,
        epochs_run: outcome.epochs_run,
        train_accuracy: train_eval.accuracy,
        test_accuracy,
        ambiguous: language.ambiguous,
        metrics,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        warnings: outcome.warnings,
        artifacts: Artifacts::default(),
    };
    fs::write(dir.join(RECORD_FILE), record.to_json()?)?;
    fs::write(dir.join(DONE_MARKER), "")?;
    Ok(record)
}

/// Directory of run `id` under an output root.
pub fn run_dir(out_root: &Path, id: &str) -> PathBuf {
    out_root.join("runs").join(id)
}

/// Flat, CSV-friendly view of a run. Failed runs keep the configuration
/// columns and the error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub run_id: String,
    pub status: RunStatus,
    pub error: Option<String>,
    pub n_att: usize,
    pub n_val: usize,
    pub c_voc: usize,
    pub c_len: usize,
    pub input_size: u128,
    pub capacity: u128,
    pub sender_hidden: usize,
    pub receiver: String,
    pub embed_dim: usize,
    pub learning_rate: f64,
    pub entropy_coeff: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub convergence_threshold: f64,
    pub eval_every: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub converged: Option<bool>,
    pub epochs_run: Option<usize>,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub topsim: Option<f64>,
    pub posdis: Option<f64>,
    pub bosdis: Option<f64>,
    pub ambiguous: Option<bool>,
    pub wall_clock_secs: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Failed,
}

impl RecordRow {
    fn from_config(config: &RunConfig, status: RunStatus, error: Option<String>) -> Self {
        RecordRow {
            run_id: run_id(config),
            status,
            error,
            n_att: config.n_att,
            n_val: config.n_val,
            c_voc: config.c_voc,
            c_len: config.c_len,
            input_size: config.input_space_size(),
            capacity: config.capacity(),
            sender_hidden: config.sender_hidden,
            receiver: config.receiver.to_string(),
            embed_dim: config.embed_dim,
            learning_rate: config.learning_rate,
            entropy_coeff: config.entropy_coeff,
            batch_size: config.batch_size,
            max_epochs: config.max_epochs,
            convergence_threshold: config.convergence_threshold,
            eval_every: config.eval_every,
            test_fraction: config.test_fraction,
            seed: config.seed,
            converged: None,
            epochs_run: None,
            train_accuracy: None,
            test_accuracy: None,
            topsim: None,
            posdis: None,
            bosdis: None,
            ambiguous: None,
            wall_clock_secs: None,
        }
    }

    pub fn completed(r: &RunRecord) -> Self {
        RecordRow {
            converged: Some(r.converged),
            epochs_run: Some(r.epochs_run),
            train_accuracy: Some(r.train_accuracy),
            test_accuracy: r.test_accuracy,
            topsim: r.metrics.topsim.value(),
            posdis: r.metrics.posdis.value(),
            bosdis: r.metrics.bosdis.value(),
            ambiguous: Some(r.ambiguous),
            wall_clock_secs: Some(r.wall_clock_secs),
            ..RecordRow::from_config(&r.config, RunStatus::Completed, None)
        }
    }

    pub fn failed(config: &RunConfig, error: &str) -> Self {
        RecordRow::from_config(config, RunStatus::Failed, Some(error.to_string()))
    }

    /// Sweep order: input-space size, then channel capacity, then the rest
    /// of the configuration.
    pub fn sort_key(&self) -> (u128, u128, usize, usize, usize, usize, u64, &str) {
        (
            self.input_size,
            self.capacity,
            self.n_att,
            self.n_val,
            self.c_voc,
            self.c_len,
            self.seed,
            &self.run_id,
        )
    }
}

pub fn write_rows(path: &Path, rows: &[RecordRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<RecordRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub(crate) fn csv_err(path: &Path, source: csv::Error) -> crate::error::CliError {
    crate::error::CliError::Csv {
        path: path.display().to_string(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_id_depends_on_every_field() {
        let a = RunConfig::with_defaults(2, 4, 5, 2);
        let mut b = a.clone();
        b.learning_rate = 2e-3;
        assert_ne!(run_id(&a), run_id(&b));
        assert_eq!(run_id(&a), run_id(&a.clone()));
        assert!(run_id(&a).starts_with("a2v4-c5l2-s0-"));
    }

    #[test]
    fn saturating_sizes() {
        let c = RunConfig::with_defaults(40, 100, 10, 3);
        assert_eq!(c.input_space_size(), u128::MAX);
        assert_eq!(c.capacity(), 1000);
    }
}
