use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::AttributeSpace;
use crate::error::{Error, Result};
use crate::numerics::linear::normal_fill;
use crate::numerics::{gru_forward, gru_step_backward, GruCache, GruParams, Linear, ParamSet, Rng, Tensor2};

use super::{ChannelSpec, Message};

/// GRU Receiver: embeds each symbol, runs the GRU from a zero state and maps
/// the final hidden state onto `n_att` blocks of `n_val` logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruReceiverParams {
    pub embed: Tensor2,
    pub gru: GruParams,
    pub out_proj: Linear,
}

impl GruReceiverParams {
    pub fn zeros(space: &AttributeSpace, channel: &ChannelSpec, hidden: usize, embed_dim: usize) -> Self {
        GruReceiverParams {
            embed: Tensor2::zeros(channel.vocab_size, embed_dim),
            gru: GruParams::zeros(embed_dim, hidden),
            out_proj: Linear::zeros(hidden, space.encoding_width()),
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
        GruReceiverParams {
            embed,
            gru: GruParams::init(embed_dim, hidden, rng),
            out_proj: Linear::init(hidden, space.encoding_width(), rng),
        }
    }

    fn check(&self, space: &AttributeSpace, channel: &ChannelSpec) -> Result<()> {
        self.gru.validate()?;
        let ok = self.embed.shape() == (channel.vocab_size, self.gru.input_size())
            && self.out_proj.input_size() == self.gru.hidden_size()
            && self.out_proj.output_size() == space.encoding_width();
        if ok {
            Ok(())
        } else {
            Err(Error::Config("GRU receiver does not match space / channel".into()))
        }
    }
}

impl ParamSet for GruReceiverParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = vec![self.embed.as_slice()];
        v.extend(self.gru.slices());
        v.extend(self.out_proj.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = vec![self.embed.as_mut_slice()];
        v.extend(self.gru.slices_mut());
        v.extend(self.out_proj.slices_mut());
        v
    }
}

/// Two-layer feed-forward Receiver over the flattened one-hot message:
/// linear, ReLU, linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnReceiverParams {
    pub layer1: Linear,
    pub layer2: Linear,
}

impl FfnReceiverParams {
    pub fn zeros(space: &AttributeSpace, channel: &ChannelSpec, hidden: usize) -> Self {
        FfnReceiverParams {
            layer1: Linear::zeros(channel.msg_len * channel.vocab_size, hidden),
            layer2: Linear::zeros(hidden, space.encoding_width()),
        }
    }

    pub fn init(space: &AttributeSpace, channel: &ChannelSpec, hidden: usize, rng: &mut Rng) -> Self {
        FfnReceiverParams {
            layer1: Linear::init(channel.msg_len * channel.vocab_size, hidden, rng),
            layer2: Linear::init(hidden, space.encoding_width(), rng),
        }
    }

    fn check(&self, space: &AttributeSpace, channel: &ChannelSpec) -> Result<()> {
        let ok = self.layer1.input_size() == channel.msg_len * channel.vocab_size
            && self.layer2.input_size() == self.layer1.output_size()
            && self.layer2.output_size() == space.encoding_width();
        if ok {
            Ok(())
        } else {
            Err(Error::Config("FFN receiver does not match space / channel".into()))
        }
    }
}

impl ParamSet for FfnReceiverParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.layer1.slices();
        v.extend(self.layer2.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.layer1.slices_mut();
        v.extend(self.layer2.slices_mut());
        v
    }
}

/// Receiver architecture and hidden width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReceiverArch {
    Gru { hidden: usize },
    Ffn { hidden: usize },
}

impl ReceiverArch {
    pub fn hidden(&self) -> usize {
        match *self {
            ReceiverArch::Gru { hidden } | ReceiverArch::Ffn { hidden } => hidden,
        }
    }
}

impl fmt::Display for ReceiverArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReceiverArch::Gru { hidden } => write!(f, "gru-{hidden}"),
            ReceiverArch::Ffn { hidden } => write!(f, "ffn-{hidden}"),
        }
    }
}

impl FromStr for ReceiverArch {
    type Err = Error;

    /// Parses `gru-500`, `ffn-500`, ...
    fn from_str(s: &str) -> Result<Self> {
        let (kind, size) = s
            .split_once('-')
            .ok_or_else(|| Error::Argument(format!("receiver architecture '{s}' is not kind-size")))?;
        let hidden: usize = size
            .parse()
            .map_err(|_| Error::Argument(format!("bad hidden size in '{s}'")))?;
        if hidden == 0 {
            return Err(Error::Argument("hidden size must be positive".into()));
        }
        match kind.to_ascii_lowercase().as_str() {
            "gru" => Ok(ReceiverArch::Gru { hidden }),
            "ffn" => Ok(ReceiverArch::Ffn { hidden }),
            _ => Err(Error::Argument(format!("unknown receiver kind '{kind}'"))),
        }
    }
}

/// Either Receiver architecture behind one interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Receiver {
    Gru(GruReceiverParams),
    Ffn(FfnReceiverParams),
}

/// Activations kept for [`Receiver::backward`].
#[derive(Debug, Clone)]
pub enum ReceiverCache {
    Gru {
        messages: Vec<Message>,
        steps: Vec<GruCache>,
        last_hidden: Tensor2,
    },
    Ffn {
        flat: Tensor2,
        pre_relu: Tensor2,
        post_relu: Tensor2,
    },
}

impl Receiver {
    pub fn init(
        arch: ReceiverArch,
        space: &AttributeSpace,
        channel: &ChannelSpec,
        embed_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        match arch {
            ReceiverArch::Gru { hidden } => {
                Receiver::Gru(GruReceiverParams::init(space, channel, hidden, embed_dim, rng))
            }
            ReceiverArch::Ffn { hidden } => Receiver::Ffn(FfnReceiverParams::init(space, channel, hidden, rng)),
        }
    }

    pub fn zeros(arch: ReceiverArch, space: &AttributeSpace, channel: &ChannelSpec, embed_dim: usize) -> Self {
        match arch {
            ReceiverArch::Gru { hidden } => {
                Receiver::Gru(GruReceiverParams::zeros(space, channel, hidden, embed_dim))
            }
            ReceiverArch::Ffn { hidden } => Receiver::Ffn(FfnReceiverParams::zeros(space, channel, hidden)),
        }
    }

    pub fn arch(&self) -> ReceiverArch {
        match self {
            Receiver::Gru(p) => ReceiverArch::Gru {
                hidden: p.gru.hidden_size(),
            },
            Receiver::Ffn(p) => ReceiverArch::Ffn {
                hidden: p.layer1.output_size(),
            },
        }
    }

    pub fn check_compatible(&self, space: &AttributeSpace, channel: &ChannelSpec) -> Result<()> {
        match self {
            Receiver::Gru(p) => p.check(space, channel),
            Receiver::Ffn(p) => p.check(space, channel),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.zero();
        z
    }

    /// Batched forward: returns logits (batch × n_att·n_val) and the cache.
    pub fn forward(
        &self,
        messages: &[Message],
        space: &AttributeSpace,
        channel: &ChannelSpec,
    ) -> Result<(Tensor2, ReceiverCache)> {
        self.check_compatible(space, channel)?;
        for m in messages {
            channel.validate(m)?;
        }
        let b = messages.len();
        match self {
            Receiver::Gru(p) => {
                let mut h = Tensor2::zeros(b, p.gru.hidden_size());
                let mut steps = Vec::with_capacity(channel.msg_len);
                let mut x = Tensor2::zeros(b, p.embed.cols());
                for t in 0..channel.msg_len {
                    for (i, m) in messages.iter().enumerate() {
                        x.row_mut(i).copy_from_slice(p.embed.row(m.0[t]));
                    }
                    let (h_next, cache) = gru_forward(&x, &h, &p.gru)?;
                    h = h_next;
                    steps.push(cache);
                }
                let logits = p.out_proj.forward(&h);
                Ok((
                    logits,
                    ReceiverCache::Gru {
                        messages: messages.to_vec(),
                        steps,
                        last_hidden: h,
                    },
                ))
            }
            Receiver::Ffn(p) => {
                let v = channel.vocab_size;
                let mut flat = Tensor2::zeros(b, channel.msg_len * v);
                for (i, m) in messages.iter().enumerate() {
                    let row = flat.row_mut(i);
                    for (t, &s) in m.0.iter().enumerate() {
                        row[t * v + s] = 1.0;
                    }
                }
                let pre_relu = p.layer1.forward(&flat);
                let mut post_relu = pre_relu.clone();
                post_relu.map_inplace(|x| x.max(0.0));
                let logits = p.layer2.forward(&post_relu);
                Ok((
                    logits,
                    ReceiverCache::Ffn {
                        flat,
                        pre_relu,
                        post_relu,
                    },
                ))
            }
        }
    }

    /// Parameter gradients for upstream logit gradients `d_logits`.
    pub fn backward(&self, cache: &ReceiverCache, d_logits: &Tensor2) -> Result<Receiver> {
        let mut grads = self.zeros_like();
        match (self, cache, &mut grads) {
            (
                Receiver::Gru(p),
                ReceiverCache::Gru {
                    messages,
                    steps,
                    last_hidden,
                },
                Receiver::Gru(g),
            ) => {
                let mut dh = p.out_proj.backward(last_hidden, d_logits, &mut g.out_proj);
                for t in (0..steps.len()).rev() {
                    let (dx, dh_prev) = gru_step_backward(&steps[t], &dh, &p.gru, &mut g.gru)?;
                    for (i, m) in messages.iter().enumerate() {
                        for (ge, d) in g.embed.row_mut(m.0[t]).iter_mut().zip(dx.row(i)) {
                            *ge += d;
                        }
                    }
                    dh = dh_prev;
                }
            }
            (
                Receiver::Ffn(p),
                ReceiverCache::Ffn {
                    flat,
                    pre_relu,
                    post_relu,
                },
                Receiver::Ffn(g),
            ) => {
                let mut d_hidden = p.layer2.backward(post_relu, d_logits, &mut g.layer2);
                for (d, &z) in d_hidden.as_mut_slice().iter_mut().zip(pre_relu.as_slice()) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
                p.layer1.accumulate_param_grads(flat, &d_hidden, &mut g.layer1);
            }
            _ => return Err(Error::Internal("receiver cache does not match architecture".into())),
        }
        Ok(grads)
    }
}

impl ParamSet for Receiver {
    fn slices(&self) -> Vec<&[f64]> {
        match self {
            Receiver::Gru(p) => p.slices(),
            Receiver::Ffn(p) => p.slices(),
        }
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Receiver::Gru(p) => p.slices_mut(),
            Receiver::Ffn(p) => p.slices_mut(),
        }
    }
}

/// Logits for one message, reshaped into `n_att` blocks of `n_val`.
pub fn receiver_forward(
    message: &Message,
    params: &GruReceiverParams,
    space: &AttributeSpace,
    channel: &ChannelSpec,
) -> Result<Vec<Vec<f64>>> {
    let r = Receiver::Gru(params.clone());
    single(&r, message, space, channel)
}

pub fn ffn_receiver_forward(
    message: &Message,
    params: &FfnReceiverParams,
    space: &AttributeSpace,
    channel: &ChannelSpec,
) -> Result<Vec<Vec<f64>>> {
    let r = Receiver::Ffn(params.clone());
    single(&r, message, space, channel)
}

fn single(r: &Receiver, m: &Message, space: &AttributeSpace, channel: &ChannelSpec) -> Result<Vec<Vec<f64>>> {
    let (logits, _) = r.forward(std::slice::from_ref(m), space, channel)?;
    Ok(logits.row(0).chunks(space.n_val).map(<[f64]>::to_vec).collect())
}
