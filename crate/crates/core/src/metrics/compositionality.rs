use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::stats::spearman;

use super::corpus::LanguageCorpus;
use super::distance::{edit_distance, input_distance};
use super::info::{entropy_of, mutual_information_of};

/// Above this many unordered input pairs, topsim switches to a seeded sample.
pub const DEFAULT_PAIR_CAP: u64 = 1_000_000;

/// Which vocabulary symbols bosdis counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BosdisSymbols {
    /// Symbol 0 is the reserved filler / end-of-sequence id and is not counted.
    #[default]
    ExcludeReserved,
    All,
}

/// Spearman correlation between pairwise input distances (attributes that
/// differ) and message edit distances.
pub fn topsim(corpus: &LanguageCorpus, pair_cap: u64, seed: u64) -> Result<f64> {
    let n = corpus.len();
    if n < 3 {
        return Err(Error::Undefined(format!("topsim needs at least 3 entries, got {n}")));
    }
    let pairs = corpus.pairs();
    let total = (n as u64) * (n as u64 - 1) / 2;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut push = |i: usize, j: usize| -> Result<()> {
        xs.push(input_distance(&pairs[i].0, &pairs[j].0)? as f64);
        ys.push(edit_distance(&pairs[i].1, &pairs[j].1) as f64);
        Ok(())
    };
    if total <= pair_cap {
        for i in 0..n {
            for j in i + 1..n {
                push(i, j)?;
            }
        }
    } else {
        let mut rng = Rng::derived(seed, 0x7095);
        let offsets = row_offsets(n);
        let picks = rand::seq::index::sample(&mut rng, total as usize, pair_cap as usize);
        for k in picks.iter() {
            let (i, j) = pair_from_index(&offsets, n, k as u64);
            push(i, j)?;
        }
    }
    spearman(&xs, &ys)
        .map(|r| r.rho)
        .map_err(|e| match e {
            Error::Undefined(m) => Error::Undefined(format!("topsim: {m}")),
            other => other,
        })
}

/// `offsets[i]` = linear index of pair (i, i+1) in row-major upper-triangle order.
fn row_offsets(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut acc = 0u64;
    for i in 0..n {
        out.push(acc);
        acc += (n - 1 - i) as u64;
    }
    out
}

fn pair_from_index(offsets: &[u64], n: usize, k: u64) -> (usize, usize) {
    let i = offsets.partition_point(|&o| o <= k) - 1;
    let j = i + 1 + (k - offsets[i]) as usize;
    debug_assert!(j < n);
    (i, j)
}

/// Information gap of one discrete variable against all attributes:
/// `(I(x; a₁) − I(x; a₂)) / H(x)`, or `None` when `H(x) = 0`.
fn information_gap(var: &[usize], attributes: &[Vec<usize>]) -> Option<f64> {
    let h = entropy_of(var);
    if h <= 0.0 {
        return None;
    }
    let mut mi: Vec<f64> = attributes.iter().map(|a| mutual_information_of(var, a)).collect();
    mi.sort_by(|a, b| b.total_cmp(a));
    let first = mi[0];
    let second = mi.get(1).copied().unwrap_or(0.0);
    Some((first - second) / h)
}

fn attribute_columns(corpus: &LanguageCorpus) -> Vec<Vec<usize>> {
    (0..corpus.space.n_att).map(|a| corpus.attribute_column(a)).collect()
}

fn mean_gap(vars: &[Vec<usize>], attributes: &[Vec<usize>], what: &str) -> Result<f64> {
    let gaps: Vec<f64> = vars.iter().filter_map(|v| information_gap(v, attributes)).collect();
    if gaps.is_empty() {
        return Err(Error::Undefined(format!("{what}: every variable has zero entropy (degenerate language)")));
    }
    Ok(gaps.iter().sum::<f64>() / gaps.len() as f64)
}

/// Positional disentanglement: mean information gap of each message
/// position, over positions with non-zero entropy.
pub fn posdis(corpus: &LanguageCorpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::Undefined("posdis of an empty corpus".into()));
    }
    let positions: Vec<Vec<usize>> = (0..corpus.channel.msg_len).map(|p| corpus.position_column(p)).collect();
    mean_gap(&positions, &attribute_columns(corpus), "posdis")
}

/// Per-message occurrence count of every counted symbol.
pub fn symbol_counts(corpus: &LanguageCorpus, symbols: BosdisSymbols) -> Vec<Vec<usize>> {
    let first = match symbols {
        BosdisSymbols::ExcludeReserved => 1,
        BosdisSymbols::All => 0,
    };
    (first..corpus.channel.vocab_size)
        .map(|s| {
            corpus
                .messages()
                .map(|m| m.symbols().iter().filter(|&&x| x == s).count())
                .collect()
        })
        .collect()
}

/// Bag-of-symbols disentanglement with the reserved symbol 0 excluded.
pub fn bosdis(corpus: &LanguageCorpus) -> Result<f64> {
    bosdis_with(corpus, BosdisSymbols::ExcludeReserved)
}

/// Mean information gap of per-message symbol counts, over symbols whose
/// count has non-zero entropy.
pub fn bosdis_with(corpus: &LanguageCorpus, symbols: BosdisSymbols) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::Undefined("bosdis of an empty corpus".into()));
    }
    mean_gap(&symbol_counts(corpus, symbols), &attribute_columns(corpus), "bosdis")
}

/// A metric value or the reason it does not exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricValue {
    Value(f64),
    Undefined { undefined: String },
}

impl MetricValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Value(v) => Some(*v),
            MetricValue::Undefined { .. } => None,
        }
    }

    pub fn from_result(r: Result<f64>) -> Result<Self> {
        match r {
            Ok(v) => Ok(MetricValue::Value(v)),
            Err(Error::Undefined(reason)) => Ok(MetricValue::Undefined { undefined: reason }),
            Err(e) => Err(e),
        }
    }

    /// CSV cell: the number, or empty when undefined.
    pub fn csv_cell(&self) -> String {
        self.value().map(|v| format!("{v:.6}")).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub topsim: MetricValue,
    pub posdis: MetricValue,
    pub bosdis: MetricValue,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "topsim,posdis,bosdis";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{}",
            self.topsim.csv_cell(),
            self.posdis.csv_cell(),
            self.bosdis.csv_cell()
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// All three scores; undefined ones carry their reason instead of failing.
pub fn metric_report(corpus: &LanguageCorpus) -> Result<MetricReport> {
    metric_report_with(corpus, DEFAULT_PAIR_CAP, 0)
}

pub fn metric_report_with(corpus: &LanguageCorpus, pair_cap: u64, seed: u64) -> Result<MetricReport> {
    Ok(MetricReport {
        topsim: MetricValue::from_result(topsim(corpus, pair_cap, seed))?,
        posdis: MetricValue::from_result(posdis(corpus))?,
        bosdis: MetricValue::from_result(bosdis(corpus))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{ChannelSpec, Message};
    use crate::env::{enumerate_inputs, AttributeSpace, InputVector};

    fn corpus_from(space: AttributeSpace, channel: ChannelSpec, f: impl Fn(&InputVector) -> Vec<usize>) -> LanguageCorpus {
        let pairs = enumerate_inputs(&space)
            .unwrap()
            .into_iter()
            .map(|i| {
                let m = Message(f(&i));
                (i, m)
            })
            .collect();
        LanguageCorpus::new(space, channel, pairs).unwrap()
    }

    #[test]
    fn pair_indexing_covers_upper_triangle() {
        let n = 7;
        let offsets = row_offsets(n);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                assert_eq!(pair_from_index(&offsets, n, k), (i, j));
                k += 1;
            }
        }
    }

    #[test]
    fn identity_language_is_fully_positional() {
        let space = AttributeSpace::new(3, 4).unwrap();
        let channel = ChannelSpec::new(5, 3).unwrap();
        let c = corpus_from(space, channel, |i| i.values().to_vec());
        assert!((posdis(&c).unwrap() - 1.0).abs() < 1e-12);
        assert!(topsim(&c, DEFAULT_PAIR_CAP, 0).unwrap() > 0.9);
    }

    #[test]
    fn constant_language_is_undefined() {
        let space = AttributeSpace::new(2, 3).unwrap();
        let channel = ChannelSpec::new(4, 2).unwrap();
        let c = corpus_from(space, channel, |_| vec![1, 1]);
        let r = metric_report(&c).unwrap();
        assert!(r.topsim.value().is_none());
        assert!(r.posdis.value().is_none());
        assert!(r.bosdis.value().is_none());
        let json = r.to_json().unwrap();
        assert!(json.contains("undefined"));
        assert_eq!(r.csv_row(), ",,");
    }

    #[test]
    fn single_attribute_gap_is_i_over_h() {
        let space = AttributeSpace::new(1, 4).unwrap();
        let channel = ChannelSpec::new(3, 1).unwrap();
        // position carries one of the two bits of the attribute
        let c = corpus_from(space, channel, |i| vec![i.values()[0] / 2]);
        assert!((posdis(&c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_topsim_close_to_exact() {
        let space = AttributeSpace::new(2, 12).unwrap();
        let channel = ChannelSpec::new(13, 3).unwrap();
        let c = corpus_from(space, channel, |i| {
            let v = i.values();
            vec![v[0], (v[0] + v[1]) % 13, v[1]]
        });
        let exact = topsim(&c, DEFAULT_PAIR_CAP, 0).unwrap();
        let sampled = topsim(&c, 5000, 3).unwrap();
        assert!((exact - sampled).abs() < 0.05, "{exact} vs {sampled}");
        assert_eq!(sampled, topsim(&c, 5000, 3).unwrap());
    }
}
