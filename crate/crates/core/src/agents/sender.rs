use serde::{Deserialize, Serialize};

use crate::env::{write_one_hot, AttributeSpace, InputVector};
use crate::error::{Error, Result};
use crate::numerics::linear::normal_fill;
use crate::numerics::softmax::{argmax, sample_from_probs};
use crate::numerics::{gru_forward, gru_step_backward, GruCache, GruParams, Linear, ParamSet, Rng, Tensor2};

use super::{ChannelSpec, Message};

/// Sender network.
///
/// The input's one-hot encoding is mapped linearly onto the initial hidden
/// state. The GRU first consumes `bos`, then the embedding of each emitted
/// symbol; after every step the hidden state is projected onto vocabulary
/// logits and the next symbol is drawn from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenderParams {
    pub input_proj: Linear,
    pub gru: GruParams,
    pub embed: Tensor2,
    pub out_proj: Linear,
    pub bos: Vec<f64>,
}

impl SenderParams {
    pub fn zeros(space: &AttributeSpace, channel: &ChannelSpec, hidden: usize, embed_dim: usize) -> Self {
        SenderParams {
            input_proj: Linear::zeros(space.encoding_width(), hidden),
            gru: GruParams::zeros(embed_dim, hidden),
            embed: Tensor2::zeros(channel.vocab_size, embed_dim),
            out_proj: Linear::zeros(hidden, channel.vocab_size),
            bos: vec![0.0; embed_dim],
        }
    }

    pub fn init(
        space: &AttributeSpace,
        channel: &ChannelSpec,
        hidden: usize,
        embed_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let mut embed = Tensor2::zeros(channel.vocab_size, embed_dim);
        normal_fill(embed.as_mut_slice(), 1.0, rng);
        let mut bos = Tensor2::zeros(1, embed_dim);
        normal_fill(bos.as_mut_slice(), 0.01, rng);
        SenderParams {
            input_proj: Linear::init(space.encoding_width(), hidden, rng),
            gru: GruParams::init(embed_dim, hidden, rng),
            embed,
            out_proj: Linear::init(hidden, channel.vocab_size, rng),
            bos: bos.into_vec(),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.gru.hidden_size()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.embed.rows()
    }

    pub fn input_width(&self) -> usize {
        self.input_proj.input_size()
    }

    pub fn check_compatible(&self, space: &AttributeSpace, channel: &ChannelSpec) -> Result<()> {
        self.gru.validate()?;
        let h = self.hidden_size();
        let e = self.embed_dim();
        let ok = self.input_proj.input_size() == space.encoding_width()
            && self.input_proj.output_size() == h
            && self.gru.input_size() == e
            && self.embed.rows() == channel.vocab_size
            && self.out_proj.input_size() == h
            && self.out_proj.output_size() == channel.vocab_size
            && self.bos.len() == e;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "sender parameters do not match the input space / channel".into(),
            ))
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.zero();
        z
    }
}

impl ParamSet for SenderParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.input_proj.slices();
        v.extend(self.gru.slices());
        v.push(self.embed.as_slice());
        v.extend(self.out_proj.slices());
        v.push(&self.bos);
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.input_proj.slices_mut();
        v.extend(self.gru.slices_mut());
        v.push(self.embed.as_mut_slice());
        v.extend(self.out_proj.slices_mut());
        v.push(&mut self.bos);
        v
    }
}

/// How the Sender picks each symbol.
pub enum DecodeMode<'a> {
    Sample(&'a mut Rng),
    Greedy,
    /// Replays the given messages (one per input) and scores them.
    Forced(&'a [Message]),
}

/// Activations needed to backpropagate through a Sender pass.
#[derive(Debug, Clone)]
pub struct SenderCache {
    encoded: Tensor2,
    /// h_1 .. h_L, the states the output projection read.
    hidden: Vec<Tensor2>,
    steps: Vec<GruCache>,
    /// Softmax over the vocabulary at every step.
    probs: Vec<Tensor2>,
}

/// Batched Sender output. `log_probs[i][t]` is the log-probability of the
/// symbol chosen at position `t` for input `i`; `entropies[i][t]` the policy
/// entropy (nats) there.
#[derive(Debug, Clone)]
pub struct SenderTrace {
    pub messages: Vec<Message>,
    pub log_probs: Vec<Vec<f64>>,
    pub entropies: Vec<Vec<f64>>,
    pub cache: SenderCache,
}

impl SenderTrace {
    pub fn batch_size(&self) -> usize {
        self.messages.len()
    }
}

/// Runs the Sender on a batch of inputs.
pub fn sender_forward(
    inputs: &[InputVector],
    space: &AttributeSpace,
    params: &SenderParams,
    channel: &ChannelSpec,
    mut mode: DecodeMode<'_>,
) -> Result<SenderTrace> {
    params.check_compatible(space, channel)?;
    let b = inputs.len();
    if let DecodeMode::Forced(ms) = &mode {
        if ms.len() != b {
            return Err(Error::Argument(format!("{} forced messages for {b} inputs", ms.len())));
        }
        for m in ms.iter() {
            channel.validate(m)?;
        }
    }
    let mut encoded = Tensor2::zeros(b, space.encoding_width());
    for (i, input) in inputs.iter().enumerate() {
        space.validate(input)?;
        write_one_hot(input, space, encoded.row_mut(i));
    }
    let mut h = params.input_proj.forward(&encoded);

    let e = params.embed_dim();
    let mut x = Tensor2::zeros(b, e);
    for i in 0..b {
        x.row_mut(i).copy_from_slice(&params.bos);
    }

    let len = channel.msg_len;
    let mut symbols = vec![vec![0usize; len]; b];
    let mut log_probs = vec![vec![0.0; len]; b];
    let mut entropies = vec![vec![0.0; len]; b];
    let mut hidden = Vec::with_capacity(len);
    let mut steps = Vec::with_capacity(len);
    let mut probs_all = Vec::with_capacity(len);

    for t in 0..len {
        let (h_next, cache) = gru_forward(&x, &h, &params.gru)?;
        h = h_next;
        let logits = params.out_proj.forward(&h);
        let mut probs = Tensor2::zeros(b, channel.vocab_size);
        for i in 0..b {
            let row = logits.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            if !lse.is_finite() {
                return Err(Error::NonFinite("sender logits".into()));
            }
            let p = probs.row_mut(i);
            let mut ent = 0.0;
            for (pk, &z) in p.iter_mut().zip(row) {
                let lp = z - lse;
                *pk = lp.exp();
                if *pk > 0.0 {
                    ent -= *pk * lp;
                }
            }
            let s = match &mut mode {
                DecodeMode::Sample(rng) => sample_from_probs(p, rng),
                DecodeMode::Greedy => argmax(row),
                DecodeMode::Forced(ms) => ms[i].0[t],
            };
            symbols[i][t] = s;
            log_probs[i][t] = row[s] - lse;
            entropies[i][t] = ent;
        }
        hidden.push(h.clone());
        steps.push(cache);
        probs_all.push(probs);
        if t + 1 < len {
            for i in 0..b {
                x.row_mut(i).copy_from_slice(params.embed.row(symbols[i][t]));
            }
        }
    }

    Ok(SenderTrace {
        messages: symbols.into_iter().map(Message).collect(),
        log_probs,
        entropies,
        cache: SenderCache {
            encoded,
            hidden,
            steps,
            probs: probs_all,
        },
    })
}

impl SenderTrace {
    /// Softmax probabilities at step `t` (rows = batch).
    pub fn step_probs(&self, t: usize) -> &Tensor2 {
        &self.cache.probs[t]
    }

    /// Backpropagates per-step logit gradients (`d_logits[t]` is batch ×
    /// vocab) through the Sender with the emitted symbols held fixed.
    pub fn backward(&self, params: &SenderParams, d_logits: &[Tensor2]) -> Result<SenderParams> {
        let len = self.cache.steps.len();
        if d_logits.len() != len {
            return Err(Error::Internal("sender backward: step count mismatch".into()));
        }
        let mut grads = params.zeros_like();
        let b = self.batch_size();
        let mut dh = Tensor2::zeros(b, params.hidden_size());
        for t in (0..len).rev() {
            let dl = &d_logits[t];
            dh.add_assign(&params.out_proj.backward(&self.cache.hidden[t], dl, &mut grads.out_proj));
            let (dx, dh_prev) = gru_step_backward(&self.cache.steps[t], &dh, &params.gru, &mut grads.gru)?;
            if t == 0 {
                let mut acc = vec![0.0; params.embed_dim()];
                dx.sum_rows_into(&mut acc);
                for (g, a) in grads.bos.iter_mut().zip(acc) {
                    *g += a;
                }
            } else {
                for i in 0..b {
                    let s = self.messages[i].0[t - 1];
                    for (g, d) in grads.embed.row_mut(s).iter_mut().zip(dx.row(i)) {
                        *g += d;
                    }
                }
            }
            dh = dh_prev;
        }
        params
            .input_proj
            .accumulate_param_grads(&self.cache.encoded, &dh, &mut grads.input_proj);
        Ok(grads)
    }
}
