mod common;

use emlab_core::agents::ReceiverArch;

const TOLERANCE: f64 = 1e-4;

#[test]
fn gru_cell_matches_finite_differences() {
    for seed in 0..20 {
        let e = common::gru_cell_error(seed);
        assert!(e < TOLERANCE, "seed {seed}: relative error {e:e}");
    }
}

#[test]
fn gru_receiver_matches_finite_differences() {
    for seed in 0..20 {
        let e = common::receiver_error(ReceiverArch::Gru { hidden: 5 }, seed);
        assert!(e < TOLERANCE, "seed {seed}: relative error {e:e}");
    }
}

#[test]
fn ffn_receiver_matches_finite_differences() {
    for seed in 0..20 {
        let e = common::receiver_error(ReceiverArch::Ffn { hidden: 6 }, seed);
        assert!(e < TOLERANCE, "seed {seed}: relative error {e:e}");
    }
}

#[test]
fn sender_surrogate_matches_finite_differences() {
    for seed in 0..20 {
        let e = common::sender_surrogate_error(seed);
        assert!(e < TOLERANCE, "seed {seed}: relative error {e:e}");
    }
}
