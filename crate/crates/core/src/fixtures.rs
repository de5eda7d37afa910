//! Three small reference languages over a 2-attribute, 4-value space with
//! 3-symbol messages from an 8-symbol vocabulary. Inputs are listed in
//! lexicographic order.

use crate::agents::{ChannelSpec, Message};
use crate::env::{enumerate_inputs, AttributeSpace};
use crate::metrics::LanguageCorpus;

const LANG1: [&str; 16] = [
    "000", "001", "002", "003", "010", "011", "012", "013", "200", "201", "202", "203", "210", "211", "212", "213",
];
const LANG2: [&str; 16] = [
    "000", "001", "002", "003", "120", "121", "122", "123", "230", "231", "232", "233", "310", "311", "321", "331",
];
const LANG3: [&str; 16] = [
    "004", "005", "006", "007", "141", "151", "161", "171", "242", "252", "262", "272", "343", "335", "336", "337",
];

/// Names of the reference languages, in order.
pub const REFERENCE_NAMES: [&str; 3] = ["lang1", "lang2", "lang3"];

/// Expected (topsim, posdis, bosdis) of each reference language, to two decimals.
pub const REFERENCE_SCORES: [(f64, f64, f64); 3] = [(0.82, 1.00, 0.42), (0.75, 0.79, 0.13), (0.75, 0.43, 1.00)];

pub fn reference_space() -> (AttributeSpace, ChannelSpec) {
    (
        AttributeSpace { n_att: 2, n_val: 4 },
        ChannelSpec {
            vocab_size: 8,
            msg_len: 3,
        },
    )
}

fn build(codes: &[&str; 16]) -> LanguageCorpus {
    let (space, channel) = reference_space();
    let inputs = enumerate_inputs(&space).expect("16 inputs");
    let pairs = inputs
        .into_iter()
        .zip(codes.iter())
        .map(|(i, code)| {
            let m = code.bytes().map(|b| (b - b'0') as usize).collect();
            (i, Message(m))
        })
        .collect();
    LanguageCorpus::new(space, channel, pairs).expect("reference language is well formed")
}

/// A perfectly positional language: position 2 copies attribute 2 and
/// position 1 carries one bit of attribute 1.
pub fn lang1() -> LanguageCorpus {
    build(&LANG1)
}

pub fn lang2() -> LanguageCorpus {
    build(&LANG2)
}

/// Order-free language: each attribute has its own symbol set.
pub fn lang3() -> LanguageCorpus {
    build(&LANG3)
}

pub fn reference_languages() -> Vec<(&'static str, LanguageCorpus)> {
    REFERENCE_NAMES.into_iter().zip([lang1(), lang2(), lang3()]).collect()
}
