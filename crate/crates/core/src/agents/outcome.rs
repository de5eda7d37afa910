use crate::env::{AttributeSpace, InputVector};
use crate::error::{argument, Result};
use crate::numerics::softmax::argmax;
use crate::numerics::{softmax_cross_entropy, Tensor2};

/// How well one set of Receiver logits reconstructs one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionOutcome {
    pub attribute_correct: Vec<bool>,
    pub all_correct: bool,
    pub attribute_losses: Vec<f64>,
    pub mean_loss: f64,
}

/// Scores flat logits (`n_att` blocks of `n_val`) against `input`.
pub fn reconstruction_outcome(
    logits: &[f64],
    input: &InputVector,
    space: &AttributeSpace,
) -> Result<ReconstructionOutcome> {
    if logits.len() != space.encoding_width() {
        return argument(format!(
            "expected {} logits, got {}",
            space.encoding_width(),
            logits.len()
        ));
    }
    space.validate(input)?;
    let mut attribute_correct = Vec::with_capacity(space.n_att);
    let mut attribute_losses = Vec::with_capacity(space.n_att);
    for (block, &v) in logits.chunks(space.n_val).zip(input.values()) {
        attribute_correct.push(argmax(block) == v);
        attribute_losses.push(softmax_cross_entropy(block, v)?.0);
    }
    let mean_loss = attribute_losses.iter().sum::<f64>() / space.n_att as f64;
    Ok(ReconstructionOutcome {
        all_correct: attribute_correct.iter().all(|&c| c),
        attribute_correct,
        attribute_losses,
        mean_loss,
    })
}

/// Per-sample results over a batch of logits.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    /// Mean cross-entropy over attributes, per sample.
    pub losses: Vec<f64>,
    pub all_correct: Vec<bool>,
    pub attribute_correct: Vec<Vec<bool>>,
    /// Gradient of each sample's own mean loss w.r.t. its logits.
    pub d_logits: Tensor2,
}

pub fn reconstruction_loss_batch(
    logits: &Tensor2,
    inputs: &[InputVector],
    space: &AttributeSpace,
) -> Result<BatchLoss> {
    if logits.rows() != inputs.len() || logits.cols() != space.encoding_width() {
        return argument("logit batch does not match inputs");
    }
    let n_att = space.n_att as f64;
    let mut d_logits = Tensor2::zeros(logits.rows(), logits.cols());
    let mut losses = Vec::with_capacity(inputs.len());
    let mut all_correct = Vec::with_capacity(inputs.len());
    let mut attribute_correct = Vec::with_capacity(inputs.len());
    for (i, input) in inputs.iter().enumerate() {
        space.validate(input)?;
        let mut loss = 0.0;
        let mut flags = Vec::with_capacity(space.n_att);
        let row = logits.row(i);
        let drow = d_logits.row_mut(i);
        for (a, &v) in input.values().iter().enumerate() {
            let block = &row[a * space.n_val..(a + 1) * space.n_val];
            let (l, g) = softmax_cross_entropy(block, v)?;
            loss += l;
            flags.push(argmax(block) == v);
            for (d, gk) in drow[a * space.n_val..(a + 1) * space.n_val].iter_mut().zip(g) {
                *d = gk / n_att;
            }
        }
        losses.push(loss / n_att);
        all_correct.push(flags.iter().all(|&c| c));
        attribute_correct.push(flags);
    }
    Ok(BatchLoss {
        losses,
        all_correct,
        attribute_correct,
        d_logits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_logits() {
        let s = AttributeSpace::new(2, 4).unwrap();
        let input = InputVector(vec![1, 3]);
        let mut logits = vec![0.0; 8];
        logits[1] = 50.0;
        logits[4 + 3] = 50.0;
        let o = reconstruction_outcome(&logits, &input, &s).unwrap();
        assert!(o.all_correct);
        assert!(o.mean_loss < 1e-20);
    }

    #[test]
    fn uniform_logits() {
        let s = AttributeSpace::new(2, 4).unwrap();
        let o = reconstruction_outcome(&[0.0; 8], &InputVector(vec![2, 0]), &s).unwrap();
        assert!((o.mean_loss - 4f64.ln()).abs() < 1e-12);
        assert!((o.mean_loss - 1.386).abs() < 1e-3);
    }

    #[test]
    fn one_right_one_wrong() {
        let s = AttributeSpace::new(2, 3).unwrap();
        let logits = [5.0, 0.0, 0.0, 5.0, 0.0, 0.0];
        let o = reconstruction_outcome(&logits, &InputVector(vec![0, 2]), &s).unwrap();
        assert_eq!(o.attribute_correct, vec![true, false]);
        assert!(!o.all_correct);
    }

    #[test]
    fn batch_agrees_with_single() {
        let s = AttributeSpace::new(3, 3).unwrap();
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..9).map(|k| ((i * 9 + k) as f64 * 0.37).sin()).collect())
            .collect();
        let logits = Tensor2::from_rows(&rows).unwrap();
        let inputs: Vec<InputVector> = (0..4).map(|i| InputVector(vec![i % 3, (i + 1) % 3, 2])).collect();
        let batch = reconstruction_loss_batch(&logits, &inputs, &s).unwrap();
        for i in 0..4 {
            let o = reconstruction_outcome(&rows[i], &inputs[i], &s).unwrap();
            assert!((o.mean_loss - batch.losses[i]).abs() < 1e-15);
            assert_eq!(o.all_correct, batch.all_correct[i]);
        }
    }
}
