//! Compositionality scores over a fixed input → message language.

mod compositionality;
mod corpus;
mod distance;
mod info;

pub use compositionality::{
    bosdis, bosdis_with, metric_report, metric_report_with, posdis, symbol_counts, topsim,
    BosdisSymbols, MetricReport, MetricValue, DEFAULT_PAIR_CAP,
};
pub use corpus::LanguageCorpus;
pub use distance::{edit_distance, input_distance, levenshtein};
pub use info::{entropy, entropy_of, mutual_information, mutual_information_of, JointCounts};
pub use crate::stats::spearman;
