use crate::error::{argument, Result};

use super::rng::Rng;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_inplace(&mut out);
    out
}

pub fn softmax_inplace(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// `log softmax(logits)`, computed via log-sum-exp.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let top = argmax(logits);
    let max = logits[top];
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, x)| (x - max).exp())
        .sum();
    let log_norm = rest.ln_1p();
    logits.iter().map(|x| (x - max) - log_norm).collect()
}

/// Cross-entropy of `softmax(logits)` against class `target`, and its
/// gradient `softmax(logits) - onehot(target)`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return argument(format!(
            "target {target} out of range for {} classes",
            logits.len()
        ));
    }
    let logp = log_softmax(logits);
    let loss = -logp[target];
    let mut grad: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Shannon entropy (nats) of `softmax(logits)`.
pub fn softmax_entropy(logits: &[f64]) -> f64 {
    log_softmax(logits)
        .iter()
        .map(|&l| {
            let p = l.exp();
            if p > 0.0 {
                -p * l
            } else {
                0.0
            }
        })
        .sum()
}

/// Draws an index from `softmax(logits)`.
pub fn categorical_sample(logits: &[f64], rng: &mut Rng) -> Result<usize> {
    if logits.is_empty() {
        return argument("cannot sample from empty logits");
    }
    let probs = softmax(logits);
    Ok(sample_from_probs(&probs, rng))
}

/// Inverse-CDF draw; the last index absorbs rounding slack.
pub(crate) fn sample_from_probs(probs: &[f64], rng: &mut Rng) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Index of the largest logit, ties to the lowest index.
pub fn greedy_argmax(logits: &[f64]) -> Result<usize> {
    if logits.is_empty() {
        return argument("cannot take argmax of empty logits");
    }
    Ok(argmax(logits))
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_k() {
        for k in [2usize, 3, 10, 100] {
            let (loss, _) = softmax_cross_entropy(&vec![0.3; k], 1).unwrap();
            assert!((loss - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_logits_closed_form() {
        let (loss, _) = softmax_cross_entropy(&[10.0, -10.0], 0).unwrap();
        let want = (-20f64).exp().ln_1p();
        assert!((loss - want).abs() < 1e-12 * want);
        assert!((loss - 2.06e-9).abs() < 1e-11);
    }

    #[test]
    fn gradient_sums_to_zero() {
        let logits = [0.2, -1.7, 3.3, 0.0, 12.0];
        for t in 0..logits.len() {
            let (_, g) = softmax_cross_entropy(&logits, t).unwrap();
            assert!(g.iter().sum::<f64>().abs() < 1e-12);
        }
        assert!((softmax(&logits).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let logits = [0.4, -0.9, 1.3, 0.05];
        let (_, g) = softmax_cross_entropy(&logits, 2).unwrap();
        let eps = 1e-6;
        for i in 0..logits.len() {
            let mut hi = logits;
            let mut lo = logits;
            hi[i] += eps;
            lo[i] -= eps;
            let fd = (softmax_cross_entropy(&hi, 2).unwrap().0
                - softmax_cross_entropy(&lo, 2).unwrap().0)
                / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn target_out_of_range() {
        assert!(softmax_cross_entropy(&[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(greedy_argmax(&[1.0, 3.0, 2.0]).unwrap(), 1);
        assert_eq!(greedy_argmax(&[2.0, 2.0, 1.0]).unwrap(), 0);
        assert!(greedy_argmax(&[]).is_err());
        let mut rng = Rng::seed_from(0);
        assert!(categorical_sample(&[], &mut rng).is_err());
    }

    #[test]
    fn uniform_sampling_within_binomial_bounds() {
        let k = 5;
        let draws = 100_000;
        let mut rng = Rng::seed_from(11);
        let mut counts = vec![0usize; k];
        for _ in 0..draws {
            counts[categorical_sample(&vec![0.0; k], &mut rng).unwrap()] += 1;
        }
        let p = 1.0 / k as f64;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sd, "count {c}");
        }
    }

    #[test]
    fn dominant_logit_is_nearly_always_drawn() {
        let mut rng = Rng::seed_from(3);
        let logits = [0.0, 0.0, 50.0, 0.0];
        let hits = (0..10_000)
            .filter(|_| categorical_sample(&logits, &mut rng).unwrap() == 2)
            .count();
        assert!(hits as f64 / 10_000.0 > 0.999);
    }

    #[test]
    fn entropy_of_uniform() {
        assert!((softmax_entropy(&[1.0; 8]) - 8f64.ln()).abs() < 1e-12);
        assert!(softmax_entropy(&[0.0, 1000.0]) < 1e-12);
    }
}
