//! Language interpretation: MI profiles, cue validity, vocabulary usage,
//! shuffle ablations against a Receiver, and a hand-built positional oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{ChannelSpec, Message};
use crate::env::{AttributeSpace, InputVector};
use crate::error::{Error, Result};
use crate::metrics::{entropy_of, mutual_information_of, LanguageCorpus};
use crate::numerics::Rng;
use crate::stats::{mean, sample_sd};
use crate::training::{score_reconstruction, Decoder, Encoder};

/// `matrix[j][a]` = I(s_j; a) in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiProfile {
    pub matrix: Vec<Vec<f64>>,
}

impl MiProfile {
    pub fn get(&self, position: usize, attribute: usize) -> f64 {
        self.matrix[position][attribute]
    }

    pub fn to_csv(&self) -> String {
        let n_att = self.matrix.first().map_or(0, Vec::len);
        let mut s = String::from("position");
        for a in 0..n_att {
            s.push_str(&format!(",att{}", a + 1));
        }
        s.push('\n');
        for (j, row) in self.matrix.iter().enumerate() {
            s.push_str(&(j + 1).to_string());
            for v in row {
                s.push_str(&format!(",{v:.6}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn mi_profile(corpus: &LanguageCorpus) -> Result<MiProfile> {
    if corpus.is_empty() {
        return Err(Error::Argument("MI profile of an empty corpus".into()));
    }
    let attrs: Vec<Vec<usize>> = (0..corpus.space.n_att).map(|a| corpus.attribute_column(a)).collect();
    let matrix = (0..corpus.channel.msg_len)
        .map(|j| {
            let col = corpus.position_column(j);
            attrs.iter().map(|a| mutual_information_of(&col, a)).collect()
        })
        .collect();
    Ok(MiProfile { matrix })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolCueValidity {
    pub symbol: usize,
    pub count: usize,
    /// max over values of P(value | symbol).
    pub validity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueValidity {
    pub position: usize,
    pub attribute: usize,
    pub per_symbol: Vec<SymbolCueValidity>,
    /// Frequency-weighted mean over symbols.
    pub mean: f64,
}

/// How well each symbol at `position` predicts a value of `attribute`.
pub fn cue_validity(corpus: &LanguageCorpus, position: usize, attribute: usize) -> Result<CueValidity> {
    if position >= corpus.channel.msg_len {
        return Err(Error::Argument(format!("position {position} out of range")));
    }
    if attribute >= corpus.space.n_att {
        return Err(Error::Argument(format!("attribute {attribute} out of range")));
    }
    let col = corpus.position_column(position);
    if entropy_of(&col) <= 0.0 {
        return Err(Error::Undefined(format!(
            "cue validity: position {position} carries a single symbol"
        )));
    }
    let att = corpus.attribute_column(attribute);
    let mut table: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&s, &v) in col.iter().zip(&att) {
        *table.entry(s).or_default().entry(v).or_default() += 1;
    }
    let per_symbol: Vec<SymbolCueValidity> = table
        .into_iter()
        .map(|(symbol, by_value)| {
            let count: usize = by_value.values().sum();
            let best = by_value.values().copied().max().unwrap_or(0);
            SymbolCueValidity {
                symbol,
                count,
                validity: best as f64 / count as f64,
            }
        })
        .collect();
    let n = col.len() as f64;
    let mean = per_symbol.iter().map(|s| s.validity * s.count as f64).sum::<f64>() / n;
    Ok(CueValidity {
        position,
        attribute,
        per_symbol,
        mean,
    })
}

/// Distinct symbols used at each position.
pub fn vocab_usage(corpus: &LanguageCorpus) -> Vec<usize> {
    (0..corpus.channel.msg_len)
        .map(|j| {
            let mut col = corpus.position_column(j);
            col.sort_unstable();
            col.dedup();
            col.len()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationProtocol {
    /// Keep position p, shuffle every other column across the dataset.
    FixOne(usize),
    /// Shuffle only column p across the dataset.
    ShuffleOne(usize),
    /// Rearrange the symbols inside each message.
    ShuffleWithinMessage,
    /// Shuffle nothing.
    FixAll,
}

impl AblationProtocol {
    pub fn position(&self) -> Option<usize> {
        match self {
            AblationProtocol::FixOne(p) | AblationProtocol::ShuffleOne(p) => Some(*p),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AblationProtocol::FixOne(_) => "fix-one",
            AblationProtocol::ShuffleOne(_) => "shuffle-one",
            AblationProtocol::ShuffleWithinMessage => "shuffle-within-message",
            AblationProtocol::FixAll => "fix-all",
        }
    }
}

impl FromStr for AblationProtocol {
    type Err = Error;

    /// Inverse of `Display`: `fix-one:0`, `shuffle-one:1`, `shuffle-within-message`, `fix-all`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, pos) = match s.split_once(':') {
            Some((n, p)) => {
                let p = p
                    .parse::<usize>()
                    .map_err(|_| Error::Argument(format!("bad position in ablation protocol '{s}'")))?;
                (n, Some(p))
            }
            None => (s, None),
        };
        match (name, pos) {
            ("fix-one", Some(p)) => Ok(AblationProtocol::FixOne(p)),
            ("shuffle-one", Some(p)) => Ok(AblationProtocol::ShuffleOne(p)),
            ("shuffle-within-message", None) => Ok(AblationProtocol::ShuffleWithinMessage),
            ("fix-all", None) => Ok(AblationProtocol::FixAll),
            _ => Err(Error::Argument(format!("unknown ablation protocol '{s}'"))),
        }
    }
}

impl fmt::Display for AblationProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position() {
            Some(p) => write!(f, "{}:{}", self.name(), p),
            None => f.write_str(self.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub protocol: AblationProtocol,
    pub repetitions: usize,
    /// Messages the Receiver decoded correctly before ablation.
    pub evaluated: usize,
    pub attribute_accuracy: Vec<f64>,
    pub attribute_sd: Vec<f64>,
    pub accuracy: f64,
    pub accuracy_sd: f64,
}

pub const DEFAULT_ABLATION_REPETITIONS: usize = 10;

/// Feeds ablated messages to `receiver` and reports accuracy averaged over
/// `repetitions` independent shuffles. Only pairs the Receiver decodes
/// correctly in their original form take part.
pub fn ablate(
    corpus: &LanguageCorpus,
    receiver: &impl Decoder,
    protocol: AblationProtocol,
    repetitions: usize,
    rng: &mut Rng,
) -> Result<AblationResult> {
    let (space, channel) = (corpus.space, corpus.channel);
    if let Some(p) = protocol.position() {
        if p >= channel.msg_len {
            return Err(Error::Argument(format!(
                "position {p} out of range for messages of length {}",
                channel.msg_len
            )));
        }
    }
    if repetitions == 0 {
        return Err(Error::Argument("ablation needs at least one repetition".into()));
    }
    let messages: Vec<Message> = corpus.messages().cloned().collect();
    let decoded = receiver.decode(&messages, &space, &channel)?;
    let kept: Vec<(InputVector, Message)> = corpus
        .pairs()
        .iter()
        .zip(&decoded)
        .filter(|((i, _), d)| i == *d)
        .map(|(p, _)| p.clone())
        .collect();
    if kept.is_empty() {
        return Err(Error::Argument("receiver decodes no message correctly; nothing to ablate".into()));
    }
    let inputs: Vec<InputVector> = kept.iter().map(|(i, _)| i.clone()).collect();
    let originals: Vec<Message> = kept.into_iter().map(|(_, m)| m).collect();

    let mut all = Vec::with_capacity(repetitions);
    let mut per_att: Vec<Vec<f64>> = vec![Vec::with_capacity(repetitions); space.n_att];
    for _ in 0..repetitions {
        let mut rep_rng = Rng::seed_from(rng.next_seed());
        let ablated = apply_ablation(&originals, protocol, &mut rep_rng);
        let decoded = receiver.decode(&ablated, &space, &channel)?;
        let e = score_reconstruction(&inputs, &decoded, space.n_att);
        all.push(e.accuracy);
        for (acc, v) in per_att.iter_mut().zip(e.attribute_accuracy) {
            acc.push(v);
        }
    }
    let sd = |xs: &[f64]| sample_sd(xs).unwrap_or(0.0);
    Ok(AblationResult {
        protocol,
        repetitions,
        evaluated: inputs.len(),
        attribute_accuracy: per_att.iter().map(|xs| mean(xs).unwrap_or(0.0)).collect(),
        attribute_sd: per_att.iter().map(|xs| sd(xs)).collect(),
        accuracy: mean(&all).unwrap_or(0.0),
        accuracy_sd: sd(&all),
    })
}

/// One random realisation of a protocol over a batch of messages.
pub fn apply_ablation(messages: &[Message], protocol: AblationProtocol, rng: &mut Rng) -> Vec<Message> {
    let mut out = messages.to_vec();
    let len = messages.first().map_or(0, Message::len);
    let shuffle_column = |out: &mut Vec<Message>, j: usize, rng: &mut Rng| {
        let mut col: Vec<usize> = out.iter().map(|m| m.0[j]).collect();
        rng.shuffle(&mut col);
        for (m, s) in out.iter_mut().zip(col) {
            m.0[j] = s;
        }
    };
    match protocol {
        AblationProtocol::FixAll => {}
        AblationProtocol::ShuffleOne(p) => shuffle_column(&mut out, p, rng),
        AblationProtocol::FixOne(p) => {
            for j in (0..len).filter(|&j| j != p) {
                shuffle_column(&mut out, j, rng);
            }
        }
        AblationProtocol::ShuffleWithinMessage => {
            for m in &mut out {
                *m = Message(rearrange(&m.0, rng));
            }
        }
    }
    out
}

const REARRANGE_ATTEMPTS: usize = 64;

/// Moves every symbol to a different position (a derangement of positions).
/// When the message repeats symbols a derangement can still reproduce the
/// original sequence; such draws are rejected while a different sequence is
/// possible. A message made of one repeated symbol is returned unchanged.
fn rearrange(symbols: &[usize], rng: &mut Rng) -> Vec<usize> {
    let n = symbols.len();
    if n < 2 || symbols.iter().all(|&s| s == symbols[0]) {
        return symbols.to_vec();
    }
    let mut best = None;
    for _ in 0..REARRANGE_ATTEMPTS {
        let perm = random_derangement(n, rng);
        let candidate: Vec<usize> = perm.iter().map(|&k| symbols[k]).collect();
        if candidate != symbols {
            return candidate;
        }
        best = Some(candidate);
    }
    // Extremely unlikely: fall back to a rotation that changes the sequence.
    (1..n)
        .map(|r| (0..n).map(|i| symbols[(i + r) % n]).collect::<Vec<_>>())
        .find(|c| c.as_slice() != symbols)
        .or(best)
        .unwrap_or_else(|| symbols.to_vec())
}

fn random_derangement(n: usize, rng: &mut Rng) -> Vec<usize> {
    loop {
        let mut p: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut p);
        if p.iter().enumerate().all(|(i, &k)| i != k) {
            return p;
        }
    }
}

/// CSV with one row per protocol: `protocol,position,att1..attN,both`.
pub fn ablation_table_csv(results: &[AblationResult]) -> String {
    let n_att = results.first().map_or(0, |r| r.attribute_accuracy.len());
    let mut s = String::from("protocol,position");
    for a in 0..n_att {
        s.push_str(&format!(",att{}", a + 1));
    }
    s.push_str(",both\n");
    for r in results {
        s.push_str(r.protocol.name());
        s.push(',');
        if let Some(p) = r.protocol.position() {
            s.push_str(&(p + 1).to_string());
        }
        for v in &r.attribute_accuracy {
            s.push_str(&format!(",{v:.4}"));
        }
        s.push_str(&format!(",{:.4}\n", r.accuracy));
    }
    s
}

/// Perfectly positional Sender: value `v` of attribute `a` is written as
/// symbol `v` at position `assignment[a]`; other positions carry symbol 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSender {
    assignment: Vec<usize>,
}

/// Exact inverse of [`OracleSender`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReceiver {
    assignment: Vec<usize>,
}

pub fn make_oracle_pair(
    space: &AttributeSpace,
    channel: &ChannelSpec,
    assignment: &[usize],
) -> Result<(OracleSender, OracleReceiver)> {
    if assignment.len() != space.n_att {
        return Err(Error::Argument(format!(
            "assignment names {} positions for {} attributes",
            assignment.len(),
            space.n_att
        )));
    }
    if channel.vocab_size < space.n_val || channel.msg_len < space.n_att {
        return Err(Error::Resource(format!(
            "channel (c_voc={}, c_len={}) cannot hold {} attributes of {} values positionally",
            channel.vocab_size, channel.msg_len, space.n_att, space.n_val
        )));
    }
    let mut seen = vec![false; channel.msg_len];
    for &p in assignment {
        if p >= channel.msg_len || seen[p] {
            return Err(Error::Argument("assignment must be an injective map into positions".into()));
        }
        seen[p] = true;
    }
    Ok((
        OracleSender {
            assignment: assignment.to_vec(),
        },
        OracleReceiver {
            assignment: assignment.to_vec(),
        },
    ))
}

impl Encoder for OracleSender {
    fn encode(&self, inputs: &[InputVector], space: &AttributeSpace, channel: &ChannelSpec) -> Result<Vec<Message>> {
        inputs
            .iter()
            .map(|i| {
                space.validate(i)?;
                let mut m = vec![0; channel.msg_len];
                for (a, &p) in self.assignment.iter().enumerate() {
                    m[p] = i.0[a];
                }
                Ok(Message(m))
            })
            .collect()
    }
}

impl Decoder for OracleReceiver {
    fn decode(&self, messages: &[Message], space: &AttributeSpace, channel: &ChannelSpec) -> Result<Vec<InputVector>> {
        messages
            .iter()
            .map(|m| {
                channel.validate(m)?;
                Ok(InputVector(
                    self.assignment
                        .iter()
                        .map(|&p| if m.0[p] < space.n_val { m.0[p] } else { 0 })
                        .collect(),
                ))
            })
            .collect()
    }
}
