//! Attribute-value input spaces, one-hot encodings and train/test splits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::numerics::Rng;

/// Default ceiling on how many inputs [`enumerate_inputs`] will materialize.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Re-draws allowed while searching for a split whose train side covers
/// every attribute value.
pub const SPLIT_MAX_RETRIES: usize = 1000;

/// `n_att` categorical attributes with `n_val` values each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeSpace {
    pub n_att: usize,
    pub n_val: usize,
}

impl AttributeSpace {
    pub fn new(n_att: usize, n_val: usize) -> Result<Self> {
        if n_att < 1 {
            return argument("n_att must be at least 1");
        }
        if n_val < 2 {
            return argument("n_val must be at least 2");
        }
        Ok(AttributeSpace { n_att, n_val })
    }

    /// `n_val^n_att`, or `None` on overflow.
    pub fn size(&self) -> Option<u64> {
        (self.n_val as u64).checked_pow(self.n_att as u32)
    }

    /// Width of the concatenated one-hot encoding.
    pub fn encoding_width(&self) -> usize {
        self.n_att * self.n_val
    }

    pub fn contains(&self, input: &InputVector) -> bool {
        input.0.len() == self.n_att && input.0.iter().all(|&v| v < self.n_val)
    }

    pub fn validate(&self, input: &InputVector) -> Result<()> {
        if self.contains(input) {
            Ok(())
        } else {
            argument(format!(
                "input {input} is not valid for space (n_att={}, n_val={})",
                self.n_att, self.n_val
            ))
        }
    }
}

/// One value index per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputVector(pub Vec<usize>);

impl InputVector {
    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<usize>> for InputVector {
    fn from(v: Vec<usize>) -> Self {
        InputVector(v)
    }
}

impl fmt::Display for InputVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All inputs of the space in lexicographic order (last attribute fastest).
pub fn enumerate_inputs(space: &AttributeSpace) -> Result<Vec<InputVector>> {
    enumerate_inputs_capped(space, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_inputs_capped(space: &AttributeSpace, cap: u64) -> Result<Vec<InputVector>> {
    let total = match space.size() {
        Some(n) if n <= cap => n as usize,
        _ => {
            return Err(Error::Resource(format!(
                "input space {}^{} exceeds enumeration cap {cap}",
                space.n_val, space.n_att
            )))
        }
    };
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0usize; space.n_att];
    for _ in 0..total {
        out.push(InputVector(cur.clone()));
        for a in (0..space.n_att).rev() {
            cur[a] += 1;
            if cur[a] < space.n_val {
                break;
            }
            cur[a] = 0;
        }
    }
    Ok(out)
}

/// Concatenation of one one-hot block per attribute.
pub fn one_hot(input: &InputVector, space: &AttributeSpace) -> Result<Vec<f64>> {
    space.validate(input)?;
    let mut v = vec![0.0; space.encoding_width()];
    write_one_hot(input, space, &mut v);
    Ok(v)
}

pub(crate) fn write_one_hot(input: &InputVector, space: &AttributeSpace, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (a, &v) in input.0.iter().enumerate() {
        out[a * space.n_val + v] = 1.0;
    }
}

/// Disjoint train/test partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSplit {
    pub space: AttributeSpace,
    pub train: Vec<InputVector>,
    pub test: Vec<InputVector>,
    pub seed: u64,
    /// Train side covers every value of every attribute.
    pub coverage_enforced: bool,
    /// How many draws were rejected before coverage held.
    pub redraws: usize,
}

/// Uniformly random 1−f / f partition of the whole space such that every
/// attribute value appears in train (re-drawn up to [`SPLIT_MAX_RETRIES`]
/// times).
pub fn split_unseen_combinations(
    space: &AttributeSpace,
    test_fraction: f64,
    seed: u64,
) -> Result<DataSplit> {
    let inputs = enumerate_inputs(space)?;
    split_inputs(space, inputs, test_fraction, seed)
}

/// Same partition procedure over an arbitrary set of distinct inputs.
pub fn split_inputs(
    space: &AttributeSpace,
    mut inputs: Vec<InputVector>,
    test_fraction: f64,
    seed: u64,
) -> Result<DataSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return argument(format!("test fraction {test_fraction} not in (0,1)"));
    }
    for i in &inputs {
        space.validate(i)?;
    }
    let n = inputs.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    let mut rng = Rng::derived(seed, 0x5917);
    for attempt in 0..=SPLIT_MAX_RETRIES {
        rng.shuffle(&mut inputs);
        let (test, train) = inputs.split_at(n_test);
        if covers_all_values(space, train) {
            let mut train = train.to_vec();
            let mut test = test.to_vec();
            train.sort();
            test.sort();
            return Ok(DataSplit {
                space: *space,
                train,
                test,
                seed,
                coverage_enforced: true,
                redraws: attempt,
            });
        }
    }
    Err(Error::Split(format!(
        "no split of {n} inputs with {n_test} held out covers every value in train after {SPLIT_MAX_RETRIES} retries"
    )))
}

/// Every value of every attribute occurs at least once in `inputs`.
pub fn covers_all_values(space: &AttributeSpace, inputs: &[InputVector]) -> bool {
    let mut seen = vec![false; space.n_att * space.n_val];
    for i in inputs {
        for (a, &v) in i.0.iter().enumerate() {
            seen[a * space.n_val + v] = true;
        }
    }
    seen.into_iter().all(|s| s)
}

/// Fixed-size sample of a two-attribute space of `n_val` values: the full
/// diagonal plus uniformly drawn off-diagonal cells, without replacement.
/// Output is sorted.
pub fn sample_with_density(n_val: usize, n_samples: usize, seed: u64) -> Result<Vec<InputVector>> {
    if n_val < 2 {
        return argument("n_val must be at least 2");
    }
    if n_samples < n_val || n_samples > n_val * n_val {
        return argument(format!(
            "n_samples {n_samples} must lie in [{n_val}, {}]",
            n_val * n_val
        ));
    }
    let mut out: Vec<InputVector> = (0..n_val).map(|v| InputVector(vec![v, v])).collect();
    let off_cells = n_val * (n_val - 1);
    let mut rng = Rng::derived(seed, 0xde_75);
    let picks = rand::seq::index::sample(&mut rng, off_cells, n_samples - n_val);
    for k in picks.iter() {
        // Off-diagonal cell k: row k / (n-1), column skipping the diagonal.
        let row = k / (n_val - 1);
        let mut col = k % (n_val - 1);
        if col >= row {
            col += 1;
        }
        out.push(InputVector(vec![row, col]));
    }
    out.sort();
    Ok(out)
}

/// Fraction of the ambient two-attribute space covered by a sample.
pub fn density(n_val: usize, n_samples: usize) -> f64 {
    n_samples as f64 / (n_val * n_val) as f64
}

/// Header of a split file: `# natt=.. nval=.. seed=.. role=..`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitHeader {
    pub space: AttributeSpace,
    pub seed: u64,
    pub role: String,
}

/// One input per line, space-separated values, after a header line.
pub fn format_inputs(header: &SplitHeader, inputs: &[InputVector]) -> String {
    let mut s = format!(
        "# natt={} nval={} seed={} role={}\n",
        header.space.n_att, header.space.n_val, header.seed, header.role
    );
    for i in inputs {
        let vals: Vec<String> = i.0.iter().map(|v| v.to_string()).collect();
        s.push_str(&vals.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_inputs(text: &str) -> Result<(SplitHeader, Vec<InputVector>)> {
    let mut offset = 0;
    let mut lines = text.split_inclusive('\n');
    let first = lines.next().ok_or_else(|| Error::Parse {
        offset: 0,
        message: "empty split file".into(),
    })?;
    let header = parse_split_header(first.trim_end())?;
    offset += first.len();
    let mut inputs = Vec::new();
    for line in lines {
        let body = line.trim_end();
        if !body.is_empty() {
            let vals = body
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    offset,
                    message: format!("bad value: {e}"),
                })?;
            let input = InputVector(vals);
            if !header.space.contains(&input) {
                return Err(Error::Parse {
                    offset,
                    message: format!("input {input} outside declared space"),
                });
            }
            inputs.push(input);
        }
        offset += line.len();
    }
    Ok((header, inputs))
}

fn parse_split_header(line: &str) -> Result<SplitHeader> {
    let bad = |m: String| Error::Parse {
        offset: 0,
        message: m,
    };
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| bad("missing '#' header".into()))?;
    let (mut natt, mut nval, mut seed, mut role) = (None, None, None, None);
    for tok in body.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| bad(format!("header token '{tok}' is not key=value")))?;
        match k {
            "natt" => natt = v.parse().ok(),
            "nval" => nval = v.parse().ok(),
            "seed" => seed = v.parse().ok(),
            "role" => role = Some(v.to_string()),
            _ => return Err(bad(format!("unknown header key '{k}'"))),
        }
    }
    let space = AttributeSpace::new(
        natt.ok_or_else(|| bad("header lacks natt".into()))?,
        nval.ok_or_else(|| bad("header lacks nval".into()))?,
    )
    .map_err(|e| bad(e.to_string()))?;
    Ok(SplitHeader {
        space,
        seed: seed.ok_or_else(|| bad("header lacks seed".into()))?,
        role: role.ok_or_else(|| bad("header lacks role".into()))?,
    })
}
