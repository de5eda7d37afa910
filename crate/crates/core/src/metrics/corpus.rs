use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::agents::{ChannelSpec, Message};
use crate::env::{AttributeSpace, InputVector};
use crate::error::{Error, Result};

/// Deterministic input → message mapping, usually a Sender's greedy output
/// over its training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageCorpus {
    pub space: AttributeSpace,
    pub channel: ChannelSpec,
    pairs: Vec<(InputVector, Message)>,
}

impl LanguageCorpus {
    pub fn new(
        space: AttributeSpace,
        channel: ChannelSpec,
        pairs: Vec<(InputVector, Message)>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for (i, m) in &pairs {
            space.validate(i)?;
            channel.validate(m)?;
            if !seen.insert(i) {
                return Err(Error::Argument(format!("duplicate input {i} in corpus")));
            }
        }
        Ok(LanguageCorpus {
            space,
            channel,
            pairs,
        })
    }

    pub fn pairs(&self) -> &[(InputVector, Message)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &InputVector> {
        self.pairs.iter().map(|(i, _)| i)
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.pairs.iter().map(|(_, m)| m)
    }

    /// Column `position` of the message matrix.
    pub fn position_column(&self, position: usize) -> Vec<usize> {
        self.pairs.iter().map(|(_, m)| m.0[position]).collect()
    }

    /// Column `attribute` of the input matrix.
    pub fn attribute_column(&self, attribute: usize) -> Vec<usize> {
        self.pairs.iter().map(|(i, _)| i.0[attribute]).collect()
    }

    /// Groups of inputs that share a message (empty when the mapping is injective).
    pub fn collisions(&self) -> Vec<Vec<InputVector>> {
        let mut by_msg: HashMap<&Message, Vec<InputVector>> = HashMap::new();
        for (i, m) in &self.pairs {
            by_msg.entry(m).or_default().push(i.clone());
        }
        let mut out: Vec<Vec<InputVector>> = by_msg.into_values().filter(|g| g.len() > 1).collect();
        out.sort();
        out
    }

    pub fn is_injective(&self) -> bool {
        let distinct: HashSet<&Message> = self.messages().collect();
        distinct.len() == self.pairs.len()
    }

    /// Text form: `natt nval cvoc clen` header, then `values<TAB>symbols` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} {} {}\n",
            self.space.n_att, self.space.n_val, self.channel.vocab_size, self.channel.msg_len
        );
        for (i, m) in &self.pairs {
            s.push_str(&join(i.values()));
            s.push('\t');
            s.push_str(&join(m.symbols()));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut offset = 0usize;
        let mut lines = text.split_inclusive('\n');
        let header = lines.next().ok_or_else(|| parse_err(0, "empty corpus file"))?;
        let nums = parse_numbers(header.trim_end(), 0)?;
        if nums.len() != 4 {
            return Err(parse_err(0, "header must be 'natt nval cvoc clen'"));
        }
        let space = AttributeSpace::new(nums[0], nums[1]).map_err(|e| parse_err(0, &e.to_string()))?;
        let channel = ChannelSpec::new(nums[2], nums[3]).map_err(|e| parse_err(0, &e.to_string()))?;
        offset += header.len();
        let mut pairs = Vec::new();
        for line in lines {
            let body = line.trim_end_matches(['\n', '\r']);
            if !body.trim().is_empty() {
                let (lhs, rhs) = body
                    .split_once('\t')
                    .ok_or_else(|| parse_err(offset, "expected a tab between input and message"))?;
                let input = InputVector(parse_numbers(lhs, offset)?);
                let message = Message(parse_numbers(rhs, offset + lhs.len() + 1)?);
                if !space.contains(&input) {
                    return Err(parse_err(offset, &format!("input {input} outside declared space")));
                }
                if !channel.contains(&message) {
                    return Err(parse_err(
                        offset + lhs.len() + 1,
                        &format!("message {message} invalid for declared channel"),
                    ));
                }
                pairs.push((input, message));
            }
            offset += line.len();
        }
        LanguageCorpus::new(space, channel, pairs)
    }
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_numbers(s: &str, offset: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let mut pos = 0;
    for tok in s.split(' ') {
        if !tok.is_empty() {
            out.push(
                tok.parse::<usize>()
                    .map_err(|_| parse_err(offset + pos, &format!("'{tok}' is not a non-negative integer")))?,
            );
        }
        pos += tok.len() + 1;
    }
    Ok(out)
}

fn parse_err(offset: usize, msg: &str) -> Error {
    Error::Parse {
        offset,
        message: msg.to_string(),
    }
}
