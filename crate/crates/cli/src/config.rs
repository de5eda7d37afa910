//! `key = value` run configurations and sweep grids.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use emlab_core::agents::{ChannelSpec, ReceiverArch, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN};
use emlab_core::env::AttributeSpace;
use emlab_core::training::TrainConfig;

use crate::error::{CliError, Result};

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits a key-value file into entries. `#` starts a comment; blank lines
/// are skipped; a key may appear once.
pub fn parse_entries(text: &str, source_name: &str) -> Result<Vec<Entry>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| CliError::Syntax {
            source_name: source_name.to_string(),
            line,
            message: format!("expected 'key = value', got '{body}'"),
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(CliError::Syntax {
                source_name: source_name.to_string(),
                line,
                message: "empty key".into(),
            });
        }
        if !seen.insert(key.clone()) {
            return Err(CliError::Field {
                source_name: source_name.to_string(),
                line,
                field: key,
                message: "given more than once".into(),
            });
        }
        out.push(Entry {
            line,
            key,
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

fn field_err(source_name: &str, e: &Entry, message: impl Into<String>) -> CliError {
    CliError::Field {
        source_name: source_name.to_string(),
        line: e.line,
        field: e.key.clone(),
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(source_name: &str, e: &Entry) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    e.value
        .parse::<T>()
        .map_err(|err| field_err(source_name, e, format!("cannot parse '{}': {err}", e.value)))
}

fn positive(source_name: &str, e: &Entry) -> Result<usize> {
    let v: usize = parse_value(source_name, e)?;
    if v == 0 {
        return Err(field_err(source_name, e, "must be positive"));
    }
    Ok(v)
}

fn unit_interval(source_name: &str, e: &Entry, open_top: bool) -> Result<f64> {
    let v: f64 = parse_value(source_name, e)?;
    let ok = v > 0.0 && if open_top { v < 1.0 } else { v <= 1.0 };
    if !ok {
        let range = if open_top { "(0, 1)" } else { "(0, 1]" };
        return Err(field_err(source_name, e, format!("must lie in {range}")));
    }
    Ok(v)
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_att: usize,
    pub n_val: usize,
    pub c_voc: usize,
    pub c_len: usize,
    pub sender_hidden: usize,
    #[serde(with = "arch_text")]
    pub receiver: ReceiverArch,
    pub embed_dim: usize,
    pub learning_rate: f64,
    pub entropy_coeff: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub convergence_threshold: f64,
    pub eval_every: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

pub const REQUIRED_KEYS: [&str; 4] = ["n_att", "n_val", "c_voc", "c_len"];

pub const RUN_KEYS: [&str; 15] = [
    "n_att",
    "n_val",
    "c_voc",
    "c_len",
    "sender_hidden",
    "receiver",
    "embed_dim",
    "learning_rate",
    "entropy_coeff",
    "batch_size",
    "max_epochs",
    "convergence_threshold",
    "eval_every",
    "test_fraction",
    "seed",
];

impl RunConfig {
    /// Defaults for every optional field around the four required ones.
    pub fn with_defaults(n_att: usize, n_val: usize, c_voc: usize, c_len: usize) -> Self {
        let t = TrainConfig::default();
        RunConfig {
            n_att,
            n_val,
            c_voc,
            c_len,
            sender_hidden: DEFAULT_HIDDEN,
            receiver: ReceiverArch::Gru { hidden: DEFAULT_HIDDEN },
            embed_dim: DEFAULT_EMBED_DIM,
            learning_rate: t.learning_rate,
            entropy_coeff: t.entropy_coeff,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            convergence_threshold: t.convergence_threshold,
            eval_every: t.eval_every,
            test_fraction: 0.1,
            seed: 0,
        }
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        Self::from_entries(&parse_entries(text, source_name)?, source_name)
    }

    pub fn from_entries(entries: &[Entry], source_name: &str) -> Result<Self> {
        let find = |k: &str| entries.iter().find(|e| e.key == k);
        let mut req = [0usize; 4];
        for (slot, key) in req.iter_mut().zip(REQUIRED_KEYS) {
            let e = find(key).ok_or_else(|| CliError::MissingField {
                source_name: source_name.to_string(),
                field: key.to_string(),
            })?;
            *slot = positive(source_name, e)?;
        }
        let mut c = RunConfig::with_defaults(req[0], req[1], req[2], req[3]);
        for e in entries {
            let s = source_name;
            match e.key.as_str() {
                "n_att" | "n_val" | "c_voc" | "c_len" => {}
                "sender_hidden" => c.sender_hidden = positive(s, e)?,
                "receiver" => c.receiver = parse_value(s, e)?,
                "embed_dim" => c.embed_dim = positive(s, e)?,
                "learning_rate" => {
                    c.learning_rate = parse_value(s, e)?;
                    if !(c.learning_rate > 0.0 && c.learning_rate.is_finite()) {
                        return Err(field_err(s, e, "must be positive"));
                    }
                }
                "entropy_coeff" => {
                    c.entropy_coeff = parse_value(s, e)?;
                    if !(c.entropy_coeff >= 0.0 && c.entropy_coeff.is_finite()) {
                        return Err(field_err(s, e, "must be non-negative"));
                    }
                }
                "batch_size" => c.batch_size = positive(s, e)?,
                "max_epochs" => c.max_epochs = positive(s, e)?,
                "convergence_threshold" => c.convergence_threshold = unit_interval(s, e, false)?,
                "eval_every" => c.eval_every = positive(s, e)?,
                "test_fraction" => c.test_fraction = unit_interval(s, e, true)?,
                "seed" => c.seed = parse_value(s, e)?,
                _ => return Err(field_err(s, e, "unknown field")),
            }
        }
        c.space().map_err(|err| field_err(source_name, find("n_val").unwrap(), err.to_string()))?;
        c.channel().map_err(|err| field_err(source_name, find("c_voc").unwrap(), err.to_string()))?;
        Ok(c)
    }

    /// Canonical text with every field, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in RUN_KEYS {
            let _ = writeln!(s, "{key} = {}", self.value_of(key));
        }
        s
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "n_att" => self.n_att.to_string(),
            "n_val" => self.n_val.to_string(),
            "c_voc" => self.c_voc.to_string(),
            "c_len" => self.c_len.to_string(),
            "sender_hidden" => self.sender_hidden.to_string(),
            "receiver" => self.receiver.to_string(),
            "embed_dim" => self.embed_dim.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "entropy_coeff" => self.entropy_coeff.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "convergence_threshold" => self.convergence_threshold.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "test_fraction" => self.test_fraction.to_string(),
            "seed" => self.seed.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    pub fn space(&self) -> emlab_core::Result<AttributeSpace> {
        AttributeSpace::new(self.n_att, self.n_val)
    }

    pub fn channel(&self) -> emlab_core::Result<ChannelSpec> {
        ChannelSpec::new(self.c_voc, self.c_len)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            entropy_coeff: self.entropy_coeff,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            convergence_threshold: self.convergence_threshold,
            eval_every: self.eval_every,
        }
    }

    /// `n_val ^ n_att`, saturating.
    pub fn input_space_size(&self) -> u128 {
        saturating_pow(self.n_val, self.n_att)
    }

    /// `c_voc ^ c_len`, saturating.
    pub fn capacity(&self) -> u128 {
        saturating_pow(self.c_voc, self.c_len)
    }
}

fn saturating_pow(base: usize, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base as u128))
}

/// Grid file: the run-config syntax where any value may be a comma list.
/// The cartesian product of all lists gives the runs. `seeds = N` expands
/// to the seed list `base..base+N`.
#[derive(Debug, Clone)]
pub struct Grid {
    entries: Vec<Entry>,
    source_name: String,
}

impl Grid {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let entries = parse_entries(text, source_name)?;
        if entries.iter().any(|e| e.key == "seeds") && entries.iter().any(|e| e.key == "seed") {
            let e = entries.iter().find(|e| e.key == "seeds").unwrap();
            return Err(field_err(source_name, e, "give either 'seed' or 'seeds', not both"));
        }
        Ok(Grid {
            entries,
            source_name: source_name.to_string(),
        })
    }

    /// Every run of the grid. `base_seed` offsets the seeds of a `seeds = N` entry.
    pub fn expand(&self, base_seed: u64) -> Result<Vec<RunConfig>> {
        let mut axes: Vec<(Entry, Vec<String>)> = Vec::new();
        for e in &self.entries {
            if e.key == "seeds" {
                let n: u64 = parse_value(&self.source_name, e)?;
                if n == 0 {
                    return Err(field_err(&self.source_name, e, "must be positive"));
                }
                let seed_entry = Entry {
                    key: "seed".into(),
                    ..e.clone()
                };
                axes.push((seed_entry, (base_seed..base_seed + n).map(|s| s.to_string()).collect()));
            } else {
                let values: Vec<String> = e.value.split(',').map(|v| v.trim().to_string()).collect();
                if values.iter().any(|v| v.is_empty()) {
                    return Err(field_err(&self.source_name, e, "empty item in list"));
                }
                axes.push((e.clone(), values));
            }
        }
        let mut runs = Vec::new();
        let mut idx = vec![0usize; axes.len()];
        loop {
            let entries: Vec<Entry> = axes
                .iter()
                .zip(&idx)
                .map(|((e, vals), &i)| Entry {
                    value: vals[i].clone(),
                    ..e.clone()
                })
                .collect();
            runs.push(RunConfig::from_entries(&entries, &self.source_name)?);
            // odometer increment
            let mut k = axes.len();
            loop {
                if k == 0 {
                    return Ok(runs);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < axes[k].1.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// Receiver architecture as its `gru-500` text form.
pub(crate) mod arch_text {
    use emlab_core::agents::ReceiverArch;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(a: &ReceiverArch, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(a)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ReceiverArch, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
