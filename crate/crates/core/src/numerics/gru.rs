//! Single-layer GRU cell with hand-written backward pass.
//!
//! Convention used throughout the crate:
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! ĥ  = tanh(W_h x + U_h (r ⊙ h) + b_h)
//! h' = z ⊙ h + (1 − z) ⊙ ĥ
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::linear::uniform_fill;
use super::params::ParamSet;
use super::rng::Rng;
use super::tensor::{matvec, sigmoid, Tensor2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub w_z: Tensor2,
    pub w_r: Tensor2,
    pub w_h: Tensor2,
    pub u_z: Tensor2,
    pub u_r: Tensor2,
    pub u_h: Tensor2,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_h: Vec<f64>,
}

impl GruParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let w = || Tensor2::zeros(hidden_size, input_size);
        let u = || Tensor2::zeros(hidden_size, hidden_size);
        GruParams {
            w_z: w(),
            w_r: w(),
            w_h: w(),
            u_z: u(),
            u_r: u(),
            u_h: u(),
            b_z: vec![0.0; hidden_size],
            b_r: vec![0.0; hidden_size],
            b_h: vec![0.0; hidden_size],
        }
    }

    pub fn init(input_size: usize, hidden_size: usize, rng: &mut Rng) -> Self {
        let mut p = GruParams::zeros(input_size, hidden_size);
        for w in [&mut p.w_z, &mut p.w_r, &mut p.w_h, &mut p.u_z, &mut p.u_r, &mut p.u_h] {
            uniform_fill(w.as_mut_slice(), hidden_size, rng);
        }
        for b in [&mut p.b_z, &mut p.b_r, &mut p.b_h] {
            uniform_fill(b, hidden_size, rng);
        }
        p
    }

    pub fn input_size(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_z.rows()
    }

    /// Checks that every matrix agrees with the declared sizes.
    pub fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden_size(), self.input_size());
        let ok = [&self.w_z, &self.w_r, &self.w_h]
            .iter()
            .all(|w| w.shape() == (h, i))
            && [&self.u_z, &self.u_r, &self.u_h]
                .iter()
                .all(|u| u.shape() == (h, h))
            && [&self.b_z, &self.b_r, &self.b_h]
                .iter()
                .all(|b| b.len() == h);
        if ok {
            Ok(())
        } else {
            Err(Error::Config("inconsistent GRU parameter shapes".into()))
        }
    }
}

impl ParamSet for GruParams {
    fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.w_z.as_slice(),
            self.w_r.as_slice(),
            self.w_h.as_slice(),
            self.u_z.as_slice(),
            self.u_r.as_slice(),
            self.u_h.as_slice(),
            &self.b_z,
            &self.b_r,
            &self.b_h,
        ]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_z.as_mut_slice(),
            self.w_r.as_mut_slice(),
            self.w_h.as_mut_slice(),
            self.u_z.as_mut_slice(),
            self.u_r.as_mut_slice(),
            self.u_h.as_mut_slice(),
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }
}

/// Single-sample step.
pub fn gru_step(x: &[f64], h: &[f64], p: &GruParams) -> Result<Vec<f64>> {
    if x.len() != p.input_size() || h.len() != p.hidden_size() {
        return Err(Error::Config(format!(
            "gru_step: got input {} / hidden {}, expected {} / {}",
            x.len(),
            h.len(),
            p.input_size(),
            p.hidden_size()
        )));
    }
    let xs = Tensor2::from_vec(1, x.len(), x.to_vec())?;
    let hs = Tensor2::from_vec(1, h.len(), h.to_vec())?;
    let (out, _) = gru_forward(&xs, &hs, p)?;
    Ok(out.into_vec())
}

/// Activations kept from a forward step for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    x: Tensor2,
    h_prev: Tensor2,
    z: Tensor2,
    r: Tensor2,
    rh: Tensor2,
    h_cand: Tensor2,
}

impl GruCache {
    pub fn batch_size(&self) -> usize {
        self.x.rows()
    }
}

/// Batched forward step: rows of `x` and `h` are samples.
pub fn gru_forward(x: &Tensor2, h: &Tensor2, p: &GruParams) -> Result<(Tensor2, GruCache)> {
    if x.cols() != p.input_size() || h.cols() != p.hidden_size() || x.rows() != h.rows() {
        return Err(Error::Config(format!(
            "gru_forward: input {:?} / hidden {:?} do not match cell ({} -> {})",
            x.shape(),
            h.shape(),
            p.input_size(),
            p.hidden_size()
        )));
    }
    let mut z = x.matmul_nt(&p.w_z);
    z.add_assign(&h.matmul_nt(&p.u_z));
    z.add_row_broadcast(&p.b_z);
    z.map_inplace(sigmoid);

    let mut r = x.matmul_nt(&p.w_r);
    r.add_assign(&h.matmul_nt(&p.u_r));
    r.add_row_broadcast(&p.b_r);
    r.map_inplace(sigmoid);

    let mut rh = r.clone();
    for (a, b) in rh.as_mut_slice().iter_mut().zip(h.as_slice()) {
        *a *= b;
    }

    let mut h_cand = x.matmul_nt(&p.w_h);
    h_cand.add_assign(&rh.matmul_nt(&p.u_h));
    h_cand.add_row_broadcast(&p.b_h);
    h_cand.map_inplace(f64::tanh);

    let mut out = Tensor2::zeros(h.rows(), h.cols());
    for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
        let zi = z.as_slice()[i];
        *o = zi * h.as_slice()[i] + (1.0 - zi) * h_cand.as_slice()[i];
    }
    let cache = GruCache {
        x: x.clone(),
        h_prev: h.clone(),
        z,
        r,
        rh,
        h_cand,
    };
    Ok((out, cache))
}

/// Backward through one step. Parameter gradients are accumulated into
/// `grads`; returns `(∂L/∂x, ∂L/∂h_prev)`.
pub fn gru_step_backward(
    cache: &GruCache,
    d_out: &Tensor2,
    p: &GruParams,
    grads: &mut GruParams,
) -> Result<(Tensor2, Tensor2)> {
    if d_out.shape() != cache.h_prev.shape() {
        return Err(Error::Internal(format!(
            "gru backward: upstream gradient {:?} does not match cached step {:?}",
            d_out.shape(),
            cache.h_prev.shape()
        )));
    }
    let n = d_out.as_slice().len();
    let (b, hs) = d_out.shape();
    let dy = d_out.as_slice();
    let z = cache.z.as_slice();
    let r = cache.r.as_slice();
    let hp = cache.h_prev.as_slice();
    let hc = cache.h_cand.as_slice();

    let mut d_hprev = Tensor2::zeros(b, hs);
    let mut da_z = Tensor2::zeros(b, hs);
    let mut da_h = Tensor2::zeros(b, hs);
    {
        let dhp = d_hprev.as_mut_slice();
        let daz = da_z.as_mut_slice();
        let dah = da_h.as_mut_slice();
        for i in 0..n {
            dhp[i] = dy[i] * z[i];
            let dz = dy[i] * (hp[i] - hc[i]);
            daz[i] = dz * z[i] * (1.0 - z[i]);
            let dcand = dy[i] * (1.0 - z[i]);
            dah[i] = dcand * (1.0 - hc[i] * hc[i]);
        }
    }

    da_h.matmul_tn_acc(&cache.x, &mut grads.w_h);
    da_h.matmul_tn_acc(&cache.rh, &mut grads.u_h);
    da_h.sum_rows_into(&mut grads.b_h);
    let d_rh = da_h.matmul_nn(&p.u_h);

    let mut da_r = Tensor2::zeros(b, hs);
    {
        let drh = d_rh.as_slice();
        let dar = da_r.as_mut_slice();
        let dhp = d_hprev.as_mut_slice();
        for i in 0..n {
            dhp[i] += drh[i] * r[i];
            let dr = drh[i] * hp[i];
            dar[i] = dr * r[i] * (1.0 - r[i]);
        }
    }

    da_r.matmul_tn_acc(&cache.x, &mut grads.w_r);
    da_r.matmul_tn_acc(&cache.h_prev, &mut grads.u_r);
    da_r.sum_rows_into(&mut grads.b_r);
    da_z.matmul_tn_acc(&cache.x, &mut grads.w_z);
    da_z.matmul_tn_acc(&cache.h_prev, &mut grads.u_z);
    da_z.sum_rows_into(&mut grads.b_z);

    let mut d_x = da_z.matmul_nn(&p.w_z);
    d_x.add_assign(&da_r.matmul_nn(&p.w_r));
    d_x.add_assign(&da_h.matmul_nn(&p.w_h));

    d_hprev.add_assign(&da_z.matmul_nn(&p.u_z));
    d_hprev.add_assign(&da_r.matmul_nn(&p.u_r));

    Ok((d_x, d_hprev))
}

/// Unbatched scalar-loop version of the cell equations, kept as an
/// independent reference for the batched path.
pub fn gru_step_reference(x: &[f64], h: &[f64], p: &GruParams) -> Vec<f64> {
    let add3 = |a: Vec<f64>, b: Vec<f64>, c: &[f64]| -> Vec<f64> {
        a.iter().zip(&b).zip(c).map(|((x, y), z)| x + y + z).collect()
    };
    let z: Vec<f64> = add3(matvec(&p.w_z, x), matvec(&p.u_z, h), &p.b_z)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = add3(matvec(&p.w_r, x), matvec(&p.u_r, h), &p.b_r)
        .into_iter()
        .map(sigmoid)
        .collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let cand: Vec<f64> = add3(matvec(&p.w_h, x), matvec(&p.u_h, &rh), &p.b_h)
        .into_iter()
        .map(f64::tanh)
        .collect();
    (0..h.len())
        .map(|i| z[i] * h[i] + (1.0 - z[i]) * cand[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_params(input: usize, hidden: usize, seed: u64) -> GruParams {
        let mut rng = Rng::seed_from(seed);
        let mut p = GruParams::init(input, hidden, &mut rng);
        for b in [&mut p.b_z, &mut p.b_r, &mut p.b_h] {
            for x in b.iter_mut() {
                *x = rng.uniform_range(-0.5, 0.5);
            }
        }
        p
    }

    fn random_vec(n: usize, rng: &mut Rng) -> Vec<f64> {
        (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()
    }

    #[test]
    fn zero_params_halve_hidden() {
        let p = GruParams::zeros(3, 4);
        let h = [0.4, -1.0, 2.0, 0.0];
        let out = gru_step(&[1.0, 2.0, 3.0], &h, &p).unwrap();
        for (o, x) in out.iter().zip(h) {
            assert!((o - 0.5 * x).abs() < 1e-15);
        }
        let out = gru_step(&[1.0, 2.0, 3.0], &[0.0; 4], &p).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn batched_matches_scalar_reference() {
        let mut rng = Rng::seed_from(99);
        for seed in 0..10 {
            let p = random_params(5, 7, seed);
            let x = random_vec(5, &mut rng);
            let h = random_vec(7, &mut rng);
            let got = gru_step(&x, &h, &p).unwrap();
            let want = gru_step_reference(&x, &h, &p);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let p = GruParams::zeros(3, 4);
        assert!(matches!(
            gru_step(&[0.0; 2], &[0.0; 4], &p),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            gru_step(&[0.0; 3], &[0.0; 5], &p),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = random_params(3, 4, 5);
        let mut rng = Rng::seed_from(1);
        let x = Tensor2::from_vec(2, 3, random_vec(6, &mut rng)).unwrap();
        let h = Tensor2::from_vec(2, 4, random_vec(8, &mut rng)).unwrap();
        let (_, cache) = gru_forward(&x, &h, &p).unwrap();
        let mut g = GruParams::zeros(3, 4);
        let (dx, dh) = gru_step_backward(&cache, &Tensor2::zeros(2, 4), &p, &mut g).unwrap();
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
        assert!(dh.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_params_hidden_gradient_is_half() {
        let p = GruParams::zeros(3, 4);
        let x = Tensor2::from_vec(1, 3, vec![0.3, 0.1, -0.2]).unwrap();
        let h = Tensor2::from_vec(1, 4, vec![0.5, -0.5, 1.0, 2.0]).unwrap();
        let (_, cache) = gru_forward(&x, &h, &p).unwrap();
        let up = Tensor2::from_vec(1, 4, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let mut g = GruParams::zeros(3, 4);
        let (_, dh) = gru_step_backward(&cache, &up, &p, &mut g).unwrap();
        for (d, u) in dh.as_slice().iter().zip(up.as_slice()) {
            assert!((d - 0.5 * u).abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_cache_is_internal_error() {
        let p = GruParams::zeros(3, 4);
        let (_, cache) =
            gru_forward(&Tensor2::zeros(2, 3), &Tensor2::zeros(2, 4), &p).unwrap();
        let mut g = GruParams::zeros(3, 4);
        assert!(matches!(
            gru_step_backward(&cache, &Tensor2::zeros(1, 4), &p, &mut g),
            Err(Error::Internal(_))
        ));
    }
}
