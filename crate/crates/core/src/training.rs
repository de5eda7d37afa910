//! REINFORCE + backprop training of a Sender/Receiver pair.

use serde::{Deserialize, Serialize};

use crate::agents::{
    reconstruction_loss_batch, sender_forward, ChannelSpec, DecodeMode, Message, Receiver, SenderParams,
};
use crate::env::{AttributeSpace, InputVector};
use crate::error::{Error, Result};
use crate::metrics::LanguageCorpus;
use crate::numerics::softmax::argmax;
use crate::numerics::{adam_update, AdamConfig, AdamState, ParamSet, Rng, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub entropy_coeff: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub convergence_threshold: f64,
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            entropy_coeff: 0.2,
            batch_size: 32,
            max_epochs: 2000,
            convergence_threshold: 0.999,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("train config: {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.entropy_coeff >= 0.0 && self.entropy_coeff.is_finite()) {
            return bad("entropy_coeff must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if !(self.convergence_threshold > 0.0 && self.convergence_threshold <= 1.0) {
            return bad("convergence_threshold must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// Cumulative mean of every reward observed so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineState {
    pub mean: f64,
    pub count: u64,
}

impl BaselineState {
    pub fn value(&self) -> f64 {
        self.mean
    }

    pub fn observe(&mut self, reward: f64) {
        self.count += 1;
        self.mean += (reward - self.mean) / self.count as f64;
    }
}

/// Sender/Receiver parameters trained together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamePair {
    pub sender: SenderParams,
    pub receiver: Receiver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub mean_loss: f64,
    pub mean_entropy: f64,
    /// Fraction of sampled messages decoded with every attribute right.
    pub sampled_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub sender_grads: SenderParams,
    pub receiver_grads: Receiver,
    pub stats: BatchStats,
}

/// Value and parameter gradient of the Sender surrogate
/// `(1/B) Σᵢ [ −Aᵢ Σₜ log π(sᵢₜ) − λ Σₜ H(πᵢₜ) ]` with messages and
/// advantages held fixed.
pub fn sender_surrogate(
    sender: &SenderParams,
    space: &AttributeSpace,
    channel: &ChannelSpec,
    inputs: &[InputVector],
    messages: &[Message],
    advantages: &[f64],
    entropy_coeff: f64,
) -> Result<(f64, SenderParams)> {
    if advantages.len() != inputs.len() {
        return Err(Error::Argument("one advantage per input required".into()));
    }
    let trace = sender_forward(inputs, space, sender, channel, DecodeMode::Forced(messages))?;
    let b = inputs.len() as f64;
    let mut value = 0.0;
    for i in 0..inputs.len() {
        let lp: f64 = trace.log_probs[i].iter().sum();
        let h: f64 = trace.entropies[i].iter().sum();
        value += -advantages[i] * lp - entropy_coeff * h;
    }
    value /= b;
    let d_logits = surrogate_logit_grads(&trace.messages, &trace, advantages, entropy_coeff)?;
    let grads = trace.backward(sender, &d_logits)?;
    Ok((value, grads))
}

fn surrogate_logit_grads(
    messages: &[Message],
    trace: &crate::agents::SenderTrace,
    advantages: &[f64],
    entropy_coeff: f64,
) -> Result<Vec<Tensor2>> {
    let b = messages.len();
    let inv_b = 1.0 / b as f64;
    let len = messages.first().map_or(0, |m| m.len());
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        let probs = trace.step_probs(t);
        let mut d = Tensor2::zeros(b, probs.cols());
        for i in 0..b {
            let p = probs.row(i);
            let ent = trace.entropies[i][t];
            let a = advantages[i];
            let s = messages[i].0[t];
            let row = d.row_mut(i);
            for (k, (dk, &pk)) in row.iter_mut().zip(p).enumerate() {
                let onehot = if k == s { 1.0 } else { 0.0 };
                let ent_term = if pk > 0.0 { pk * (pk.ln() + ent) } else { 0.0 };
                *dk = inv_b * (a * (pk - onehot) + entropy_coeff * ent_term);
            }
        }
        out.push(d);
    }
    Ok(out)
}

/// One game on a batch: the Sender samples, the Receiver reconstructs, and
/// both gradients are returned. The baseline used for every sample is the
/// one held before the batch; the batch rewards are folded in afterwards.
pub fn game_step(
    inputs: &[InputVector],
    space: &AttributeSpace,
    channel: &ChannelSpec,
    pair: &GamePair,
    baseline: &mut BaselineState,
    entropy_coeff: f64,
    rng: &mut Rng,
) -> Result<StepOutput> {
    if inputs.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    pair.receiver.check_compatible(space, channel)?;
    let trace = sender_forward(inputs, space, &pair.sender, channel, DecodeMode::Sample(rng))?;
    let (logits, cache) = pair.receiver.forward(&trace.messages, space, channel)?;
    let loss = reconstruction_loss_batch(&logits, inputs, space)?;
    if let Some(bad) = loss.losses.iter().find(|l| !l.is_finite()) {
        return Err(Error::NonFinite(format!("reconstruction loss {bad}")));
    }

    let b = inputs.len() as f64;
    let mut d_receiver = loss.d_logits.clone();
    d_receiver.map_inplace(|x| x / b);
    let receiver_grads = pair.receiver.backward(&cache, &d_receiver)?;

    let b0 = baseline.value();
    let advantages: Vec<f64> = loss.losses.iter().map(|l| -l - b0).collect();
    let d_logits = surrogate_logit_grads(&trace.messages, &trace, &advantages, entropy_coeff)?;
    let sender_grads = trace.backward(&pair.sender, &d_logits)?;
    for l in &loss.losses {
        baseline.observe(-l);
    }

    let mean_entropy = trace.entropies.iter().map(|e| e.iter().sum::<f64>()).sum::<f64>() / b;
    let stats = BatchStats {
        mean_loss: loss.losses.iter().sum::<f64>() / b,
        mean_entropy,
        sampled_accuracy: loss.all_correct.iter().filter(|&&c| c).count() as f64 / b,
    };
    Ok(StepOutput {
        sender_grads,
        receiver_grads,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Greedy train-set accuracy, present on evaluation epochs.
    pub accuracy: Option<f64>,
    pub loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "epoch,accuracy,loss,entropy";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for e in &self.epochs {
            let acc = e.accuracy.map(|a| format!("{a}")).unwrap_or_default();
            s.push_str(&format!("{},{},{},{}\n", e.epoch, acc, e.loss, e.entropy));
        }
        s
    }

    pub fn last_accuracy(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.accuracy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: TrainHistory,
    pub converged: bool,
    pub epochs_run: usize,
    pub warnings: Vec<String>,
}

/// Trains until greedy train accuracy exceeds the threshold or the epoch
/// budget runs out.
pub fn train(
    space: &AttributeSpace,
    channel: &ChannelSpec,
    train_inputs: &[InputVector],
    pair: &mut GamePair,
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<TrainOutcome> {
    train_with_observer(space, channel, train_inputs, pair, config, rng, |_, _| Ok(()))
}

/// As [`train`], calling `observer` after every epoch (e.g. for checkpoints).
pub fn train_with_observer(
    space: &AttributeSpace,
    channel: &ChannelSpec,
    train_inputs: &[InputVector],
    pair: &mut GamePair,
    config: &TrainConfig,
    rng: &mut Rng,
    mut observer: impl FnMut(&EpochRecord, &GamePair) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_inputs.is_empty() {
        return Err(Error::Argument("no training inputs".into()));
    }
    pair.sender.check_compatible(space, channel)?;
    pair.receiver.check_compatible(space, channel)?;

    let mut warnings = Vec::new();
    if let (Some(c), Some(i)) = (channel.capacity(), space.size()) {
        if c < i {
            warnings.push(format!("channel capacity {c} is smaller than the input space {i}"));
        }
    }

    let mut sender_opt = AdamState::new(&pair.sender, config.adam());
    let mut receiver_opt = AdamState::new(&pair.receiver, config.adam());
    let mut baseline = BaselineState::default();
    let mut order: Vec<usize> = (0..train_inputs.len()).collect();
    let mut history = TrainHistory::default();
    let mut converged = false;

    for epoch in 1..=config.max_epochs {
        rng.shuffle(&mut order);
        let (mut loss_sum, mut ent_sum, mut n) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<InputVector> = chunk.iter().map(|&k| train_inputs[k].clone()).collect();
            let out = game_step(&batch, space, channel, pair, &mut baseline, config.entropy_coeff, rng)?;
            if !out.sender_grads.all_finite() || !out.receiver_grads.all_finite() {
                return Err(Error::NonFinite(format!("gradients at epoch {epoch}")));
            }
            adam_update(&mut pair.sender, &out.sender_grads, &mut sender_opt)?;
            adam_update(&mut pair.receiver, &out.receiver_grads, &mut receiver_opt)?;
            let w = batch.len() as f64;
            loss_sum += out.stats.mean_loss * w;
            ent_sum += out.stats.mean_entropy * w;
            n += w;
        }
        if !pair.sender.all_finite() || !pair.receiver.all_finite() {
            return Err(Error::NonFinite(format!("parameters at epoch {epoch}")));
        }
        let evaluate_now = epoch % config.eval_every == 0 || epoch == config.max_epochs;
        let accuracy = if evaluate_now {
            Some(evaluate(&pair.sender, &pair.receiver, space, channel, train_inputs)?.accuracy)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            accuracy,
            loss: loss_sum / n,
            entropy: ent_sum / n,
        };
        history.epochs.push(record);
        observer(&record, pair)?;
        if accuracy.is_some_and(|a| a > config.convergence_threshold) {
            converged = true;
            break;
        }
    }
    Ok(TrainOutcome {
        epochs_run: history.epochs.len(),
        history,
        converged,
        warnings,
    })
}

/// Anything that maps inputs to messages deterministically.
pub trait Encoder {
    fn encode(&self, inputs: &[InputVector], space: &AttributeSpace, channel: &ChannelSpec) -> Result<Vec<Message>>;
}

/// Anything that reconstructs inputs from messages.
pub trait Decoder {
    fn decode(&self, messages: &[Message], space: &AttributeSpace, channel: &ChannelSpec) -> Result<Vec<InputVector>>;
}

impl Encoder for SenderParams {
    fn encode(&self, inputs: &[InputVector], space: &AttributeSpace, channel: &ChannelSpec) -> Result<Vec<Message>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        Ok(sender_forward(inputs, space, self, channel, DecodeMode::Greedy)?.messages)
    }
}

impl Decoder for Receiver {
    fn decode(&self, messages: &[Message], space: &AttributeSpace, channel: &ChannelSpec) -> Result<Vec<InputVector>> {
        if messages.is_empty() {
            return Ok(Vec::new());
        }
        let (logits, _) = self.forward(messages, space, channel)?;
        Ok((0..messages.len())
            .map(|i| {
                let row = logits.row(i);
                InputVector(
                    (0..space.n_att)
                        .map(|a| argmax(&row[a * space.n_val..(a + 1) * space.n_val]))
                        .collect(),
                )
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Fraction of inputs with every attribute reconstructed.
    pub accuracy: f64,
    pub attribute_accuracy: Vec<f64>,
}

/// Accuracy of decoded inputs against targets.
pub fn score_reconstruction(targets: &[InputVector], decoded: &[InputVector], n_att: usize) -> Evaluation {
    let n = targets.len().max(1) as f64;
    let mut per_att = vec![0.0; n_att];
    let mut all = 0.0;
    for (t, d) in targets.iter().zip(decoded) {
        let mut ok = true;
        for a in 0..n_att {
            if t.0[a] == d.0[a] {
                per_att[a] += 1.0;
            } else {
                ok = false;
            }
        }
        if ok {
            all += 1.0;
        }
    }
    Evaluation {
        accuracy: all / n,
        attribute_accuracy: per_att.into_iter().map(|c| c / n).collect(),
    }
}

/// Greedy Sender decoding followed by Receiver argmax reconstruction.
pub fn evaluate(
    sender: &impl Encoder,
    receiver: &impl Decoder,
    space: &AttributeSpace,
    channel: &ChannelSpec,
    inputs: &[InputVector],
) -> Result<Evaluation> {
    let messages = sender.encode(inputs, space, channel)?;
    let decoded = receiver.decode(&messages, space, channel)?;
    Ok(score_reconstruction(inputs, &decoded, space.n_att))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedLanguage {
    pub corpus: LanguageCorpus,
    /// True when two inputs share a message.
    pub ambiguous: bool,
}

/// Greedy message for each input.
pub fn extract_language(
    sender: &impl Encoder,
    space: &AttributeSpace,
    channel: &ChannelSpec,
    inputs: &[InputVector],
) -> Result<ExtractedLanguage> {
    let messages = sender.encode(inputs, space, channel)?;
    let corpus = LanguageCorpus::new(*space, *channel, inputs.iter().cloned().zip(messages).collect())?;
    Ok(ExtractedLanguage {
        ambiguous: !corpus.is_injective(),
        corpus,
    })
}
