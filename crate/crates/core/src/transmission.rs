//! Ease of transmission: fresh Receivers trained on a frozen Sender's
//! language, and rank correlations with compositionality scores.

use serde::{Deserialize, Serialize};

use crate::agents::{
    reconstruction_loss_batch, sender_forward, ChannelSpec, DecodeMode, Message, Receiver, ReceiverArch,
    SenderParams, DEFAULT_EMBED_DIM,
};
use crate::env::{DataSplit, InputVector};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::numerics::{adam_update, AdamConfig, AdamState, ParamSet, Rng};
use crate::stats::{mean, spearman, SIGNIFICANCE_LEVEL};
use crate::training::{score_reconstruction, Decoder, Encoder};

/// Minimum number of senders for a correlation table.
pub const MIN_SENDERS: usize = 10;
/// Senders generalizing below this are not used for transmission.
pub const SENDER_SELECTION_ACCURACY: f64 = 0.80;

/// How the frozen Sender produces messages while a new Receiver learns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrozenDecoding {
    /// One fixed message per input.
    #[default]
    Greedy,
    /// Fresh samples from the Sender's policy every batch.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionConfig {
    pub architectures: Vec<ReceiverArch>,
    pub seeds_per_sender: usize,
    pub epoch_budget: usize,
    pub convergence_threshold: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub embed_dim: usize,
    pub decoding: FrozenDecoding,
}

impl Default for TransmissionConfig {
    fn default() -> Self {
        TransmissionConfig {
            architectures: vec![
                ReceiverArch::Gru { hidden: 500 },
                ReceiverArch::Gru { hidden: 50 },
                ReceiverArch::Ffn { hidden: 500 },
            ],
            seeds_per_sender: 3,
            epoch_budget: 200,
            convergence_threshold: 0.999,
            learning_rate: 1e-3,
            batch_size: 32,
            embed_dim: DEFAULT_EMBED_DIM,
            decoding: FrozenDecoding::Greedy,
        }
    }
}

impl TransmissionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.architectures.is_empty() {
            return Err(Error::Config("transmission: at least one receiver architecture".into()));
        }
        if self.seeds_per_sender == 0 || self.epoch_budget == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "transmission: seeds, epoch budget and batch size must be positive".into(),
            ));
        }
        if !(self.convergence_threshold > 0.0 && self.convergence_threshold <= 1.0) {
            return Err(Error::Config("transmission: convergence threshold must lie in (0, 1]".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("transmission: learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionResult {
    pub sender_id: String,
    pub architecture: ReceiverArch,
    pub seed: u64,
    /// Normalized area under the train-accuracy curve, in [0, 1].
    pub learning_speed: f64,
    pub test_accuracy: f64,
    pub train_accuracy: f64,
    /// First epoch whose train accuracy passed the threshold.
    pub converged_at: Option<usize>,
    /// Train accuracy before training (index 0) and after each epoch.
    pub curve: Vec<f64>,
}

/// Trapezoidal area under `curve` (points at epochs 0..=n) divided by the
/// epoch budget. Points missing after early convergence repeat the last one.
pub fn learning_speed(curve: &[f64], epoch_budget: usize) -> f64 {
    if curve.is_empty() || epoch_budget == 0 {
        return 0.0;
    }
    let at = |e: usize| curve[e.min(curve.len() - 1)];
    let area: f64 = (1..=epoch_budget).map(|e| 0.5 * (at(e - 1) + at(e))).sum();
    (area / epoch_budget as f64).clamp(0.0, 1.0)
}

/// Trains a fresh Receiver on a frozen Sender's messages for the train part
/// of `split`, then measures accuracy on the held-out part.
///
/// Training stops once train accuracy exceeds the threshold; the remaining
/// epochs of the curve keep the final accuracy.
pub fn retrain_receiver(
    sender: &SenderParams,
    sender_id: &str,
    split: &DataSplit,
    channel: &ChannelSpec,
    architecture: ReceiverArch,
    config: &TransmissionConfig,
    seed: u64,
) -> Result<TransmissionResult> {
    let space = split.space;
    sender.check_compatible(&space, channel)?;
    let mut sample_rng = Rng::derived(seed, 0x5a3e);
    let sampler = |inputs: &[InputVector]| -> Result<Vec<Message>> {
        Ok(sender_forward(inputs, &space, sender, channel, DecodeMode::Sample(&mut sample_rng))?.messages)
    };
    match config.decoding {
        FrozenDecoding::Greedy => retrain_on_encoder(sender, sender_id, split, channel, architecture, config, seed),
        FrozenDecoding::Sample => retrain_impl(sender, Some(sampler), sender_id, split, channel, architecture, config, seed),
    }
}

/// [`retrain_receiver`] for any deterministic encoder (greedy decoding).
pub fn retrain_on_encoder(
    sender: &impl Encoder,
    sender_id: &str,
    split: &DataSplit,
    channel: &ChannelSpec,
    architecture: ReceiverArch,
    config: &TransmissionConfig,
    seed: u64,
) -> Result<TransmissionResult> {
    retrain_impl(
        sender,
        None::<fn(&[InputVector]) -> Result<Vec<Message>>>,
        sender_id,
        split,
        channel,
        architecture,
        config,
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn retrain_impl(
    sender: &impl Encoder,
    mut sampler: Option<impl FnMut(&[InputVector]) -> Result<Vec<Message>>>,
    sender_id: &str,
    split: &DataSplit,
    channel: &ChannelSpec,
    architecture: ReceiverArch,
    config: &TransmissionConfig,
    seed: u64,
) -> Result<TransmissionResult> {
    config.validate()?;
    let space = split.space;
    if split.train.is_empty() {
        return Err(Error::Argument("transmission needs training inputs".into()));
    }
    let mut rng = Rng::derived(seed, 0x7e57);
    let mut receiver = Receiver::init(architecture, &space, channel, config.embed_dim, &mut rng);
    receiver.check_compatible(&space, channel)?;
    let mut opt = AdamState::new(
        &receiver,
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );

    let train_msgs = sender.encode(&split.train, &space, channel)?;
    let test_msgs = sender.encode(&split.test, &space, channel)?;
    let accuracy_on = |r: &Receiver, msgs: &[Message], inputs: &[InputVector]| -> Result<f64> {
        if inputs.is_empty() {
            return Ok(0.0);
        }
        let decoded = r.decode(msgs, &space, channel)?;
        Ok(score_reconstruction(inputs, &decoded, space.n_att).accuracy)
    };

    let mut curve = vec![accuracy_on(&receiver, &train_msgs, &split.train)?];
    let mut converged_at = None;
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    for epoch in 1..=config.epoch_budget {
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let inputs: Vec<InputVector> = chunk.iter().map(|&k| split.train[k].clone()).collect();
            let msgs = match sampler.as_mut() {
                Some(f) => f(&inputs)?,
                None => chunk.iter().map(|&k| train_msgs[k].clone()).collect(),
            };
            let (logits, cache) = receiver.forward(&msgs, &space, channel)?;
            let loss = reconstruction_loss_batch(&logits, &inputs, &space)?;
            let mut d = loss.d_logits;
            let b = inputs.len() as f64;
            d.map_inplace(|x| x / b);
            let grads = receiver.backward(&cache, &d)?;
            if !grads.all_finite() {
                return Err(Error::NonFinite(format!("receiver gradients at epoch {epoch}")));
            }
            adam_update(&mut receiver, &grads, &mut opt)?;
        }
        let acc = accuracy_on(&receiver, &train_msgs, &split.train)?;
        curve.push(acc);
        if acc > config.convergence_threshold {
            converged_at = Some(epoch);
            break;
        }
    }
    Ok(TransmissionResult {
        sender_id: sender_id.to_string(),
        architecture,
        seed,
        learning_speed: learning_speed(&curve, config.epoch_budget),
        test_accuracy: accuracy_on(&receiver, &test_msgs, &split.test)?,
        train_accuracy: *curve.last().unwrap_or(&0.0),
        converged_at,
        curve,
    })
}

/// One frozen Sender's compositionality scores and transmission results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenderRecord {
    pub sender_id: String,
    pub metrics: MetricReport,
    pub results: Vec<TransmissionResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransmissionMeasure {
    LearningSpeed,
    Generalization,
}

impl TransmissionMeasure {
    pub fn name(&self) -> &'static str {
        match self {
            TransmissionMeasure::LearningSpeed => "learning_speed",
            TransmissionMeasure::Generalization => "generalization",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub metric: String,
    pub measure: TransmissionMeasure,
    pub architecture: ReceiverArch,
    pub n: usize,
    /// `None` when the correlation is undefined (a constant series).
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub cells: Vec<CorrelationCell>,
}

impl CorrelationTable {
    pub fn cell(&self, metric: &str, measure: TransmissionMeasure, arch: ReceiverArch) -> Option<&CorrelationCell> {
        self.cells
            .iter()
            .find(|c| c.metric == metric && c.measure == measure && c.architecture == arch)
    }

    /// Grid of ρ values (rows metric × measure, one column per architecture);
    /// cells that are not significant or undefined show `-`.
    pub fn to_csv(&self) -> String {
        let mut archs: Vec<ReceiverArch> = Vec::new();
        for c in &self.cells {
            if !archs.contains(&c.architecture) {
                archs.push(c.architecture);
            }
        }
        let mut s = String::from("metric,measure");
        for a in &archs {
            s.push_str(&format!(",{a}"));
        }
        s.push('\n');
        for metric in METRIC_NAMES {
            for measure in [TransmissionMeasure::LearningSpeed, TransmissionMeasure::Generalization] {
                s.push_str(&format!("{metric},{}", measure.name()));
                for &a in &archs {
                    let v = match self.cell(metric, measure, a) {
                        Some(CorrelationCell {
                            rho: Some(r),
                            significant: true,
                            ..
                        }) => format!("{r:.2}"),
                        _ => "-".into(),
                    };
                    s.push(',');
                    s.push_str(&v);
                }
                s.push('\n');
            }
        }
        s
    }
}

const METRIC_NAMES: [&str; 3] = ["posdis", "bosdis", "topsim"];

fn metric_value(report: &MetricReport, name: &str) -> Option<f64> {
    match name {
        "posdis" => report.posdis.value(),
        "bosdis" => report.bosdis.value(),
        "topsim" => report.topsim.value(),
        _ => None,
    }
}

/// Spearman ρ between each compositionality score and each transmission
/// measure (averaged over a Sender's receiver seeds), per architecture.
pub fn transmission_correlations(records: &[SenderRecord]) -> Result<CorrelationTable> {
    let mut archs: Vec<ReceiverArch> = Vec::new();
    for r in records {
        for t in &r.results {
            if !archs.contains(&t.architecture) {
                archs.push(t.architecture);
            }
        }
    }
    if archs.is_empty() {
        return Err(Error::InsufficientData("no transmission results".into()));
    }
    let mut cells = Vec::new();
    for &arch in &archs {
        for measure in [TransmissionMeasure::LearningSpeed, TransmissionMeasure::Generalization] {
            for metric in METRIC_NAMES {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for r in records {
                    let vals: Vec<f64> = r
                        .results
                        .iter()
                        .filter(|t| t.architecture == arch)
                        .map(|t| match measure {
                            TransmissionMeasure::LearningSpeed => t.learning_speed,
                            TransmissionMeasure::Generalization => t.test_accuracy,
                        })
                        .collect();
                    if let (Some(x), Some(y)) = (metric_value(&r.metrics, metric), mean(&vals)) {
                        xs.push(x);
                        ys.push(y);
                    }
                }
                if xs.len() < MIN_SENDERS {
                    return Err(Error::InsufficientData(format!(
                        "{metric} × {} × {arch}: {} senders with valid data, need {MIN_SENDERS}",
                        measure.name(),
                        xs.len()
                    )));
                }
                let n = xs.len();
                let cell = match spearman(&xs, &ys) {
                    Ok(c) => CorrelationCell {
                        metric: metric.into(),
                        measure,
                        architecture: arch,
                        n,
                        rho: Some(c.rho),
                        p_value: Some(c.p_value),
                        significant: c.p_value < SIGNIFICANCE_LEVEL,
                    },
                    Err(Error::Undefined(_)) => CorrelationCell {
                        metric: metric.into(),
                        measure,
                        architecture: arch,
                        n,
                        rho: None,
                        p_value: None,
                        significant: false,
                    },
                    Err(e) => return Err(e),
                };
                cells.push(cell);
            }
        }
    }
    Ok(CorrelationTable { cells })
}
