mod common;

use common::{same_metric, scores};
use emlab_core::agents::{ChannelSpec, Message};
use emlab_core::env::{enumerate_inputs, AttributeSpace, InputVector};
use emlab_core::metrics::LanguageCorpus;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Case {
    corpus: LanguageCorpus,
    seed_perm: Vec<usize>,
}

fn corpus_strategy() -> impl Strategy<Value = Case> {
    (2usize..=3, 2usize..=4, 3usize..=6, 2usize..=4)
        .prop_flat_map(|(n_att, n_val, voc, len)| {
            let n = n_val.pow(n_att as u32);
            (
                Just((n_att, n_val, voc, len)),
                prop::collection::vec(prop::collection::vec(0..voc, len), n),
                prop::collection::vec(any::<bool>(), n),
                Just((0..voc.max(n_att).max(n)).collect::<Vec<usize>>()).prop_shuffle(),
            )
        })
        .prop_map(|((n_att, n_val, voc, len), msgs, keep, seed_perm)| {
            let space = AttributeSpace::new(n_att, n_val).unwrap();
            let channel = ChannelSpec::new(voc, len).unwrap();
            let pairs: Vec<(InputVector, Message)> = enumerate_inputs(&space)
                .unwrap()
                .into_iter()
                .zip(msgs)
                .zip(keep)
                .enumerate()
                // keep a random subset, but never fewer than four inputs
                .filter(|(k, (_, keep))| *keep || *k < 4)
                .map(|(_, ((i, m), _))| (i, Message(m)))
                .collect();
            Case {
                corpus: LanguageCorpus::new(space, channel, pairs).unwrap(),
                seed_perm,
            }
        })
}

fn relabel(c: &LanguageCorpus, f: impl Fn(&InputVector, &Message) -> (InputVector, Message)) -> LanguageCorpus {
    let pairs = c.pairs().iter().map(|(i, m)| f(i, m)).collect();
    LanguageCorpus::new(c.space, c.channel, pairs).unwrap()
}

/// Permutation of `0..n` derived from a longer shuffled list.
fn perm_from(seed_perm: &[usize], n: usize) -> Vec<usize> {
    seed_perm.iter().copied().filter(|&v| v < n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vocabulary_relabeling_fixing_reserved_symbol(case in corpus_strategy()) {
        let c = &case.corpus;
        let v = c.channel.vocab_size;
        // permute 1..v, keep 0 in place
        let mut p = vec![0];
        p.extend(perm_from(&case.seed_perm, v - 1).into_iter().map(|s| s + 1));
        let d = relabel(c, |i, m| (i.clone(), Message(m.0.iter().map(|&s| p[s]).collect())));
        let (a, b) = (scores(c), scores(&d));
        for k in 0..4 {
            prop_assert!(same_metric(&a[k], &b[k]), "metric {k}: {:?} vs {:?}", a[k], b[k]);
        }
    }

    #[test]
    fn vocabulary_relabeling_any_permutation(case in corpus_strategy()) {
        let c = &case.corpus;
        let p = perm_from(&case.seed_perm, c.channel.vocab_size);
        let d = relabel(c, |i, m| (i.clone(), Message(m.0.iter().map(|&s| p[s]).collect())));
        let (a, b) = (scores(c), scores(&d));
        // topsim, posdis and the all-symbols bosdis do not single out any symbol
        for k in [0, 1, 3] {
            prop_assert!(same_metric(&a[k], &b[k]), "metric {k}: {:?} vs {:?}", a[k], b[k]);
        }
    }

    #[test]
    fn attribute_reordering(case in corpus_strategy()) {
        let c = &case.corpus;
        let p = perm_from(&case.seed_perm, c.space.n_att);
        let d = relabel(c, |i, m| (InputVector(p.iter().map(|&a| i.0[a]).collect()), m.clone()));
        let (a, b) = (scores(c), scores(&d));
        for k in 0..4 {
            prop_assert!(same_metric(&a[k], &b[k]), "metric {k}: {:?} vs {:?}", a[k], b[k]);
        }
    }

    #[test]
    fn input_reordering(case in corpus_strategy()) {
        let c = &case.corpus;
        let n = c.len();
        let p = perm_from(&case.seed_perm, n);
        let pairs = if p.len() == n {
            p.iter().map(|&k| c.pairs()[k].clone()).collect()
        } else {
            c.pairs().iter().rev().cloned().collect()
        };
        let d = LanguageCorpus::new(c.space, c.channel, pairs).unwrap();
        let (a, b) = (scores(c), scores(&d));
        for k in 0..4 {
            prop_assert!(same_metric(&a[k], &b[k]), "metric {k}: {:?} vs {:?}", a[k], b[k]);
        }
    }

    #[test]
    fn bosdis_ignores_symbol_order_within_messages(case in corpus_strategy(), rot in 1usize..4) {
        let c = &case.corpus;
        let d = relabel(c, |i, m| {
            let mut s = m.0.clone();
            let r = (rot + i.0.iter().sum::<usize>()) % s.len();
            s.rotate_left(r);
            if i.0[0] % 2 == 1 {
                s.reverse();
            }
            (i.clone(), Message(s))
        });
        let (a, b) = (scores(c), scores(&d));
        prop_assert!(same_metric(&a[2], &b[2]), "{:?} vs {:?}", a[2], b[2]);
        prop_assert!(same_metric(&a[3], &b[3]), "{:?} vs {:?}", a[3], b[3]);
    }

    #[test]
    fn metric_ranges(case in corpus_strategy()) {
        for v in scores(&case.corpus).iter().filter_map(|m| m.value()) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
        }
        let r = scores(&case.corpus);
        for k in 1..4 {
            if let Some(v) = r[k].value() {
                prop_assert!(v >= -1e-12);
            }
        }
    }
}
