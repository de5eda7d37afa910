use emlab_core::agents::{ChannelSpec, Message};
use emlab_core::analysis::*;
use emlab_core::env::{enumerate_inputs, AttributeSpace, InputVector};
use emlab_core::fixtures::{lang1, lang3};
use emlab_core::metrics::{entropy_of, posdis, topsim, LanguageCorpus, DEFAULT_PAIR_CAP};
use emlab_core::numerics::Rng;
use emlab_core::training::{evaluate, extract_language, Decoder};
use emlab_core::{Error, Result};

fn oracle_setup() -> (AttributeSpace, ChannelSpec, OracleSender, OracleReceiver, LanguageCorpus) {
    let space = AttributeSpace::new(2, 8).unwrap();
    let channel = ChannelSpec::new(10, 3).unwrap();
    let (s, r) = make_oracle_pair(&space, &channel, &[0, 2]).unwrap();
    let inputs = enumerate_inputs(&space).unwrap();
    let corpus = extract_language(&s, &space, &channel, &inputs).unwrap().corpus;
    (space, channel, s, r, corpus)
}

#[test]
fn lang1_mutual_information_profile() {
    let p = mi_profile(&lang1()).unwrap();
    assert!((p.get(2, 1) - 2.0).abs() < 1e-12);
    assert!(p.get(2, 0).abs() < 1e-12);
    assert!((p.get(0, 0) - 1.0).abs() < 1e-12);
    let c = lang1();
    for j in 0..3 {
        let h = entropy_of(&c.position_column(j));
        for a in 0..2 {
            assert!(p.get(j, a) >= 0.0 && p.get(j, a) <= h + 1e-9);
        }
    }
}

#[test]
fn lang1_cue_validity_and_vocabulary() {
    let c = lang1();
    let cv = cue_validity(&c, 0, 0).unwrap();
    let symbols: Vec<usize> = cv.per_symbol.iter().map(|s| s.symbol).collect();
    assert_eq!(symbols, vec![0, 2]);
    assert!(cv.per_symbol.iter().all(|s| (s.validity - 0.5).abs() < 1e-12));

    // position 3 copies attribute 2 exactly and is independent of attribute 1
    let cv = cue_validity(&c, 2, 1).unwrap();
    assert!(cv.per_symbol.iter().all(|s| s.validity == 1.0));
    assert_eq!(cv.mean, 1.0);
    let cv = cue_validity(&c, 2, 0).unwrap();
    assert!(cv.per_symbol.iter().all(|s| (s.validity - 0.25).abs() < 1e-12));

    assert_eq!(vocab_usage(&c), vec![2, 2, 4]);
    assert_eq!(vocab_usage(&lang3()), vec![4, 6, 7]);
}

#[test]
fn degenerate_position_has_no_cue_validity() {
    let space = AttributeSpace::new(2, 2).unwrap();
    let channel = ChannelSpec::new(3, 2).unwrap();
    let pairs = enumerate_inputs(&space)
        .unwrap()
        .into_iter()
        .map(|i| (i, Message(vec![1, 1])))
        .collect();
    let c = LanguageCorpus::new(space, channel, pairs).unwrap();
    assert!(matches!(cue_validity(&c, 0, 0), Err(Error::Undefined(_))));
    assert_eq!(vocab_usage(&c), vec![1, 1]);
    assert!(cue_validity(&c, 5, 0).is_err());
}

#[test]
fn oracle_pair_is_perfect_and_positional() {
    let (space, channel, s, r, corpus) = oracle_setup();
    let inputs = enumerate_inputs(&space).unwrap();
    assert_eq!(evaluate(&s, &r, &space, &channel, &inputs).unwrap().accuracy, 1.0);
    assert!((posdis(&corpus).unwrap() - 1.0).abs() < 1e-9);
    assert!(topsim(&corpus, DEFAULT_PAIR_CAP, 0).unwrap() > 0.0);
    let p = mi_profile(&corpus).unwrap();
    assert!((p.get(0, 0) - 3.0).abs() < 1e-12);
    assert!((p.get(2, 1) - 3.0).abs() < 1e-12);
    for (j, a) in [(0, 1), (2, 0), (1, 0), (1, 1)] {
        assert!(p.get(j, a).abs() < 1e-12, "I(s{j}; a{a}) = {}", p.get(j, a));
    }
}

#[test]
fn fix_one_keeps_and_shuffle_one_destroys_the_encoded_attribute() {
    let (_, _, _, r, corpus) = oracle_setup();
    let mut rng = Rng::seed_from(11);
    let n = corpus.len() as f64;
    let reps = DEFAULT_ABLATION_REPETITIONS;
    let chance = 1.0 / 8.0;
    let three_sigma = 3.0 * (chance * (1.0 - chance) / (n * reps as f64)).sqrt();
    for (attr, pos) in [(0usize, 0usize), (1, 2)] {
        let fix = ablate(&corpus, &r, AblationProtocol::FixOne(pos), reps, &mut rng).unwrap();
        assert_eq!(fix.attribute_accuracy[attr], 1.0);
        let other = 1 - attr;
        assert!((fix.attribute_accuracy[other] - chance).abs() < three_sigma, "{fix:?}");

        let shuf = ablate(&corpus, &r, AblationProtocol::ShuffleOne(pos), reps, &mut rng).unwrap();
        assert!((shuf.attribute_accuracy[attr] - chance).abs() < three_sigma, "{shuf:?}");
        assert_eq!(shuf.attribute_accuracy[other], 1.0);
        assert!(fix.attribute_accuracy[attr] >= shuf.attribute_accuracy[attr]);
        assert!(fix.accuracy <= fix.attribute_accuracy.iter().copied().fold(1.0, f64::min));
    }
}

#[test]
fn ablation_without_shuffling_reproduces_plain_accuracy() {
    let (_, _, _, r, corpus) = oracle_setup();
    let mut rng = Rng::seed_from(3);
    let res = ablate(&corpus, &r, AblationProtocol::FixAll, 3, &mut rng).unwrap();
    assert_eq!(res.accuracy, 1.0);
    assert_eq!(res.accuracy_sd, 0.0);
    assert_eq!(res.evaluated, 64);
    // the unused middle position is constant, so fixing it equals shuffling everything else
    let empty = ablate(&corpus, &r, AblationProtocol::ShuffleOne(1), 3, &mut rng).unwrap();
    assert_eq!(empty.accuracy, 1.0);
}

#[test]
fn within_message_shuffle_moves_symbols() {
    let (_, _, _, r, corpus) = oracle_setup();
    let mut rng = Rng::seed_from(5);
    let res = ablate(&corpus, &r, AblationProtocol::ShuffleWithinMessage, 10, &mut rng).unwrap();
    // only inputs whose message survives rearrangement unchanged stay correct
    assert!(res.accuracy < 0.2, "{res:?}");
    let msgs: Vec<Message> = corpus.messages().cloned().collect();
    let shuffled = apply_ablation(&msgs, AblationProtocol::ShuffleWithinMessage, &mut rng);
    for (a, b) in msgs.iter().zip(&shuffled) {
        let mut x = a.0.clone();
        let mut y = b.0.clone();
        if x.iter().any(|&s| s != x[0]) {
            assert_ne!(x, y);
        }
        x.sort_unstable();
        y.sort_unstable();
        assert_eq!(x, y);
    }
}

struct AlwaysWrong;

impl Decoder for AlwaysWrong {
    fn decode(&self, messages: &[Message], space: &AttributeSpace, _: &ChannelSpec) -> Result<Vec<InputVector>> {
        Ok(messages.iter().map(|_| InputVector(vec![space.n_val; space.n_att])).collect())
    }
}

#[test]
fn ablation_errors() {
    let (_, _, _, r, corpus) = oracle_setup();
    let mut rng = Rng::seed_from(1);
    assert!(matches!(
        ablate(&corpus, &r, AblationProtocol::FixOne(3), 1, &mut rng),
        Err(Error::Argument(_))
    ));
    assert!(ablate(&corpus, &AlwaysWrong, AblationProtocol::FixAll, 1, &mut rng).is_err());
    assert!(ablate(&corpus, &r, AblationProtocol::FixAll, 0, &mut rng).is_err());
}
