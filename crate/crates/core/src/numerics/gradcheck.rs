//! Central finite differences for checking hand-written gradients.

use super::params::ParamSet;

/// Relative error with an absolute floor so that entries which are zero in
/// both estimates do not blow up the ratio.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / scale
}

/// Numerical gradient of `loss` with respect to every entry of `params`,
/// by central differences with step `h`.
pub fn numeric_gradient<P, F>(params: &P, h: f64, mut loss: F) -> Vec<f64>
where
    P: ParamSet + Clone,
    F: FnMut(&P) -> f64,
{
    let mut probe = params.clone();
    let n = params.num_params();
    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        let orig = get_flat(&probe, idx);
        set_flat(&mut probe, idx, orig + h);
        let up = loss(&probe);
        set_flat(&mut probe, idx, orig - h);
        let down = loss(&probe);
        set_flat(&mut probe, idx, orig);
        out.push((up - down) / (2.0 * h));
    }
    out
}

/// Largest relative error between two gradient vectors.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

fn locate<P: ParamSet>(p: &P, mut idx: usize) -> (usize, usize) {
    for (k, s) in p.slices().iter().enumerate() {
        if idx < s.len() {
            return (k, idx);
        }
        idx -= s.len();
    }
    panic!("flat index out of range");
}

fn get_flat<P: ParamSet>(p: &P, idx: usize) -> f64 {
    let (k, i) = locate(p, idx);
    p.slices()[k][i]
}

fn set_flat<P: ParamSet>(p: &mut P, idx: usize, v: f64) {
    let (k, i) = locate(p, idx);
    p.slices_mut()[k][i] = v;
}
