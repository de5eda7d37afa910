use crate::agents::Message;
use crate::env::InputVector;
use crate::error::{argument, Result};

/// Number of attributes whose values differ.
pub fn input_distance(a: &InputVector, b: &InputVector) -> Result<usize> {
    if a.len() != b.len() {
        return argument(format!(
            "inputs of different arity ({} vs {})",
            a.len(),
            b.len()
        ));
    }
    Ok(a.values().iter().zip(b.values()).filter(|(x, y)| x != y).count())
}

/// Levenshtein distance with unit insert/delete/substitute costs.
pub fn edit_distance(a: &Message, b: &Message) -> usize {
    levenshtein(a.symbols(), b.symbols())
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
