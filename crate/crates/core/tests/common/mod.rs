#![allow(dead_code)]

use emlab_core::agents::{reconstruction_loss_batch, ChannelSpec, Message, Receiver, ReceiverArch, SenderParams};
use emlab_core::env::{AttributeSpace, InputVector};
use emlab_core::numerics::gradcheck::{max_relative_error, numeric_gradient};
use emlab_core::numerics::{gru_forward, gru_step_backward, GruParams, ParamSet, Rng, Tensor2};
use emlab_core::training::sender_surrogate;

pub const FD_STEP: f64 = 1e-5;

fn random_tensor(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Tensor2 {
    let data = (0..rows * cols).map(|_| rng.uniform_range(-scale, scale)).collect();
    Tensor2::from_vec(rows, cols, data).unwrap()
}

fn random_inputs(space: &AttributeSpace, n: usize, rng: &mut Rng) -> Vec<InputVector> {
    (0..n)
        .map(|_| InputVector((0..space.n_att).map(|_| rng.below(space.n_val)).collect()))
        .collect()
}

fn random_messages(channel: &ChannelSpec, n: usize, rng: &mut Rng) -> Vec<Message> {
    (0..n)
        .map(|_| Message((0..channel.msg_len).map(|_| rng.below(channel.vocab_size)).collect()))
        .collect()
}

/// Worst relative error of the GRU cell's parameter, input and state
/// gradients for a random linear readout of the next state.
pub fn gru_cell_error(seed: u64) -> f64 {
    let mut rng = Rng::seed_from(seed);
    let (b, nin, nh) = (3, 4, 5);
    let mut p = GruParams::init(nin, nh, &mut rng);
    for s in p.slices_mut() {
        for v in s.iter_mut() {
            *v *= 3.0;
        }
    }
    let x = random_tensor(b, nin, 1.5, &mut rng);
    let h = random_tensor(b, nh, 0.9, &mut rng);
    let w = random_tensor(b, nh, 1.0, &mut rng);
    let readout = |out: &Tensor2| -> f64 { out.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum() };

    let (_, cache) = gru_forward(&x, &h, &p).unwrap();
    let mut grads = GruParams::zeros(nin, nh);
    let (dx, dh) = gru_step_backward(&cache, &w, &p, &mut grads).unwrap();

    let num_p = numeric_gradient(&p, FD_STEP, |q| readout(&gru_forward(&x, &h, q).unwrap().0));
    let mut worst = max_relative_error(&grads.to_flat(), &num_p);

    let fd_tensor = |t: &Tensor2, f: &dyn Fn(&Tensor2) -> f64| -> Vec<f64> {
        let mut probe = t.clone();
        (0..t.as_slice().len())
            .map(|k| {
                let orig = probe.as_slice()[k];
                probe.as_mut_slice()[k] = orig + FD_STEP;
                let up = f(&probe);
                probe.as_mut_slice()[k] = orig - FD_STEP;
                let down = f(&probe);
                probe.as_mut_slice()[k] = orig;
                (up - down) / (2.0 * FD_STEP)
            })
            .collect()
    };
    let num_x = fd_tensor(&x, &|xx| readout(&gru_forward(xx, &h, &p).unwrap().0));
    let num_h = fd_tensor(&h, &|hh| readout(&gru_forward(&x, hh, &p).unwrap().0));
    worst = worst.max(max_relative_error(dx.as_slice(), &num_x));
    worst.max(max_relative_error(dh.as_slice(), &num_h))
}

fn batch_loss(r: &Receiver, msgs: &[Message], inputs: &[InputVector], space: &AttributeSpace, channel: &ChannelSpec) -> f64 {
    let (logits, _) = r.forward(msgs, space, channel).unwrap();
    let l = reconstruction_loss_batch(&logits, inputs, space).unwrap();
    l.losses.iter().sum::<f64>() / inputs.len() as f64
}

/// Worst relative error of a Receiver's end-to-end parameter gradient of
/// the batch-mean reconstruction loss.
pub fn receiver_error(arch: ReceiverArch, seed: u64) -> f64 {
    let mut rng = Rng::seed_from(seed);
    let space = AttributeSpace::new(2, 3).unwrap();
    let channel = ChannelSpec::new(4, 3).unwrap();
    let mut r = Receiver::init(arch, &space, &channel, 3, &mut rng);
    for s in r.slices_mut() {
        for v in s.iter_mut() {
            *v *= 2.0;
        }
    }
    // FFN kinks: keep pre-activations away from 0 by shifting hidden biases.
    if let Receiver::Ffn(p) = &mut r {
        for b in p.layer1.bias.iter_mut() {
            *b += if *b >= 0.0 { 0.3 } else { -0.3 };
        }
    }
    let n = 4;
    let inputs = random_inputs(&space, n, &mut rng);
    let msgs = random_messages(&channel, n, &mut rng);
    let (logits, cache) = r.forward(&msgs, &space, &channel).unwrap();
    let loss = reconstruction_loss_batch(&logits, &inputs, &space).unwrap();
    let mut d = loss.d_logits;
    d.map_inplace(|x| x / n as f64);
    let grads = r.backward(&cache, &d).unwrap();
    let num = numeric_gradient(&r, FD_STEP, |q| batch_loss(q, &msgs, &inputs, &space, &channel));
    max_relative_error(&grads.to_flat(), &num)
}

/// Worst relative error of the Sender's REINFORCE surrogate gradient with
/// messages and advantages held fixed.
pub fn sender_surrogate_error(seed: u64) -> f64 {
    let mut rng = Rng::seed_from(seed);
    let space = AttributeSpace::new(2, 3).unwrap();
    let channel = ChannelSpec::new(4, 3).unwrap();
    let mut s = SenderParams::init(&space, &channel, 5, 3, &mut rng);
    for sl in s.slices_mut() {
        for v in sl.iter_mut() {
            *v *= 2.0;
        }
    }
    let n = 4;
    let inputs = random_inputs(&space, n, &mut rng);
    let msgs = random_messages(&channel, n, &mut rng);
    let adv: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.5, 1.5)).collect();
    let lambda = 0.3;
    let (_, grads) = sender_surrogate(&s, &space, &channel, &inputs, &msgs, &adv, lambda).unwrap();
    let num = numeric_gradient(&s, FD_STEP, |q| {
        sender_surrogate(q, &space, &channel, &inputs, &msgs, &adv, lambda).unwrap().0
    });
    max_relative_error(&grads.to_flat(), &num)
}

use emlab_core::metrics::{bosdis_with, metric_report, BosdisSymbols, LanguageCorpus, MetricValue};

/// Plain recursive Levenshtein, exponential time.
pub fn levenshtein_brute(a: &[usize], b: &[usize]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = levenshtein_brute(ra, rb) + usize::from(x != y);
            let del = levenshtein_brute(ra, b) + 1;
            let ins = levenshtein_brute(a, rb) + 1;
            sub.min(del).min(ins)
        }
    }
}

/// Every sequence over `vocab` symbols with length at most `max_len`.
pub fn all_sequences(vocab: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for v in 0..vocab {
                let mut t: Vec<usize> = s.clone();
                t.push(v);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn same_metric(a: &MetricValue, b: &MetricValue) -> bool {
    match (a.value(), b.value()) {
        (Some(x), Some(y)) => (x - y).abs() < 1e-9,
        (None, None) => true,
        _ => false,
    }
}

/// Metric triple plus the all-symbols bosdis variant.
pub fn scores(c: &LanguageCorpus) -> [MetricValue; 4] {
    let r = metric_report(c).unwrap();
    let all = match bosdis_with(c, BosdisSymbols::All) {
        Ok(v) => MetricValue::Value(v),
        Err(e) => MetricValue::Undefined { undefined: e.to_string() },
    };
    [r.topsim, r.posdis, r.bosdis, all]
}
