use emlab_core::agents::{ChannelSpec, Receiver, ReceiverArch, SenderParams};
use emlab_core::env::{enumerate_inputs, AttributeSpace, InputVector};
use emlab_core::numerics::{adam_update, AdamConfig, AdamState, ParamSet, Rng};
use emlab_core::training::*;
use emlab_core::Error;

fn pair(space: &AttributeSpace, channel: &ChannelSpec, hidden: usize, seed: u64) -> GamePair {
    let mut rng = Rng::seed_from(seed);
    GamePair {
        sender: SenderParams::init(space, channel, hidden, 8, &mut rng),
        receiver: Receiver::init(ReceiverArch::Gru { hidden }, space, channel, 8, &mut rng),
    }
}

#[test]
fn zero_advantage_without_entropy_gives_zero_sender_gradient() {
    let space = AttributeSpace::new(2, 3).unwrap();
    let channel = ChannelSpec::new(4, 2).unwrap();
    let p = pair(&space, &channel, 6, 1);
    let inputs = enumerate_inputs(&space).unwrap();
    let msgs = p.sender.encode(&inputs, &space, &channel).unwrap();
    let (value, grads) =
        sender_surrogate(&p.sender, &space, &channel, &inputs, &msgs, &vec![0.0; inputs.len()], 0.0).unwrap();
    assert_eq!(value, 0.0);
    assert!(grads.to_flat().iter().all(|&g| g == 0.0));

    let mut s = p.sender.clone();
    let mut opt = AdamState::new(&s, AdamConfig::default());
    adam_update(&mut s, &grads, &mut opt).unwrap();
    assert_eq!(s, p.sender);
}

#[test]
fn baseline_tracks_mean_of_batch_rewards() {
    let space = AttributeSpace::new(2, 3).unwrap();
    let channel = ChannelSpec::new(4, 2).unwrap();
    let p = pair(&space, &channel, 6, 3);
    let inputs = enumerate_inputs(&space).unwrap();
    let mut baseline = BaselineState::default();
    let mut rng = Rng::seed_from(4);
    let mut rewards = Vec::new();
    for _ in 0..3 {
        let out = game_step(&inputs, &space, &channel, &p, &mut baseline, 0.1, &mut rng).unwrap();
        rewards.push(-out.stats.mean_loss);
    }
    assert_eq!(baseline.count, 27);
    let expected = rewards.iter().sum::<f64>() / 3.0;
    assert!((baseline.value() - expected).abs() < 1e-12);
}

#[test]
fn training_is_deterministic() {
    let space = AttributeSpace::new(2, 3).unwrap();
    let channel = ChannelSpec::new(5, 2).unwrap();
    let inputs = enumerate_inputs(&space).unwrap();
    let cfg = TrainConfig {
        max_epochs: 15,
        batch_size: 4,
        eval_every: 3,
        ..TrainConfig::default()
    };
    let run = || {
        let mut p = pair(&space, &channel, 12, 9);
        let mut rng = Rng::seed_from(10);
        let out = train(&space, &channel, &inputs, &mut p, &cfg, &mut rng).unwrap();
        (out, p)
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a.history, b.history);
    assert_eq!(pa, pb);
    assert_eq!(a.history.epochs.len(), a.epochs_run);
    assert!(a.history.epochs.iter().all(|e| e.accuracy.is_some() == (e.epoch % 3 == 0 || e.epoch == 15)));
}

#[test]
fn single_training_input_converges_quickly() {
    let space = AttributeSpace::new(2, 4).unwrap();
    let channel = ChannelSpec::new(6, 2).unwrap();
    let inputs = vec![InputVector(vec![2, 1])];
    for seed in 0..5 {
        let mut p = pair(&space, &channel, 64, seed);
        let mut rng = Rng::seed_from(seed);
        let cfg = TrainConfig {
            max_epochs: 50,
            ..TrainConfig::default()
        };
        let out = train(&space, &channel, &inputs, &mut p, &cfg, &mut rng).unwrap();
        assert!(out.converged, "seed {seed}");
        assert_eq!(out.history.last_accuracy(), Some(1.0));
    }
}

#[test]
fn converged_flag_implies_threshold_met() {
    let space = AttributeSpace::new(2, 2).unwrap();
    let channel = ChannelSpec::new(4, 2).unwrap();
    let inputs = enumerate_inputs(&space).unwrap();
    let mut p = pair(&space, &channel, 16, 5);
    let mut rng = Rng::seed_from(5);
    let cfg = TrainConfig {
        max_epochs: 400,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let out = train(&space, &channel, &inputs, &mut p, &cfg, &mut rng).unwrap();
    if out.converged {
        assert!(out.history.last_accuracy().unwrap() > cfg.convergence_threshold);
    } else {
        assert_eq!(out.epochs_run, 400);
    }
}

#[test]
fn untrained_agents_are_near_chance_and_conjunction_bound_holds() {
    let space = AttributeSpace::new(2, 100).unwrap();
    let channel = ChannelSpec::new(10, 3).unwrap();
    let p = pair(&space, &channel, 8, 7);
    let inputs = enumerate_inputs(&space).unwrap();
    let e = evaluate(&p.sender, &p.receiver, &space, &channel, &inputs).unwrap();
    assert!(e.accuracy < 0.005, "{}", e.accuracy);
    let min_att = e.attribute_accuracy.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(e.accuracy <= min_att);
}

#[test]
fn extracted_language_is_deterministic_and_flags_collisions() {
    let space = AttributeSpace::new(2, 3).unwrap();
    let channel = ChannelSpec::new(2, 1).unwrap();
    let p = pair(&space, &channel, 6, 8);
    let inputs = enumerate_inputs(&space).unwrap();
    let a = extract_language(&p.sender, &space, &channel, &inputs).unwrap();
    let b = extract_language(&p.sender, &space, &channel, &inputs).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.corpus.len(), 9);
    // 9 inputs over 2 possible messages must collide
    assert!(a.ambiguous);
    assert!(!a.corpus.collisions().is_empty());
}

#[test]
fn non_finite_parameters_abort_training() {
    let space = AttributeSpace::new(2, 3).unwrap();
    let channel = ChannelSpec::new(4, 2).unwrap();
    let inputs = enumerate_inputs(&space).unwrap();
    let mut p = pair(&space, &channel, 6, 1);
    p.sender.out_proj.bias[0] = f64::NAN;
    let mut rng = Rng::seed_from(1);
    let err = train(&space, &channel, &inputs, &mut p, &TrainConfig::default(), &mut rng).unwrap_err();
    assert!(matches!(err, Error::NonFinite(_)), "{err}");
}

#[test]
fn small_capacity_channel_is_warned_about() {
    let space = AttributeSpace::new(2, 3).unwrap();
    let channel = ChannelSpec::new(2, 2).unwrap();
    let inputs = enumerate_inputs(&space).unwrap();
    let mut p = pair(&space, &channel, 6, 1);
    let mut rng = Rng::seed_from(1);
    let cfg = TrainConfig {
        max_epochs: 1,
        ..TrainConfig::default()
    };
    let out = train(&space, &channel, &inputs, &mut p, &cfg, &mut rng).unwrap();
    assert_eq!(out.warnings.len(), 1);
}
