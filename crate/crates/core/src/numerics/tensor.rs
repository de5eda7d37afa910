use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
///
/// The shape is fixed at construction; only the elements change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "tensor data length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Tensor2 { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Config("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor2 {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        self.data.iter_mut().for_each(|x| *x = f(*x));
    }

    /// Errors with [`Error::NonFinite`] if any element is NaN or infinite.
    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        ensure_finite(&self.data, what)
    }

    /// `self ⋅ otherᵀ`: (m×k)·(n×k)ᵀ → m×n.
    pub fn matmul_nt(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, other.cols, "matmul_nt inner dimension");
        let mut out = Tensor2::zeros(self.rows, other.rows);
        gemm(
            1.0,
            MatRef::new(self),
            MatRef::new(other).t(),
            0.0,
            &mut out,
        );
        out
    }

    /// `self ⋅ other`: (m×k)·(k×n) → m×n.
    pub fn matmul_nn(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, other.rows, "matmul_nn inner dimension");
        let mut out = Tensor2::zeros(self.rows, other.cols);
        gemm(1.0, MatRef::new(self), MatRef::new(other), 0.0, &mut out);
        out
    }

    /// `acc += selfᵀ ⋅ other`: (m×n)ᵀ·(m×k) → n×k.
    pub fn matmul_tn_acc(&self, other: &Tensor2, acc: &mut Tensor2) {
        assert_eq!(self.rows, other.rows, "matmul_tn inner dimension");
        assert_eq!(acc.shape(), (self.cols, other.cols), "matmul_tn output");
        gemm(1.0, MatRef::new(self).t(), MatRef::new(other), 1.0, acc);
    }

    /// Adds `bias` to every row.
    pub fn add_row_broadcast(&mut self, bias: &[f64]) {
        assert_eq!(bias.len(), self.cols);
        for row in self.data.chunks_exact_mut(self.cols) {
            for (x, b) in row.iter_mut().zip(bias) {
                *x += b;
            }
        }
    }

    /// Accumulates the column sums into `acc`.
    pub fn sum_rows_into(&self, acc: &mut [f64]) {
        assert_eq!(acc.len(), self.cols);
        for row in self.data.chunks_exact(self.cols) {
            for (a, x) in acc.iter_mut().zip(row) {
                *a += x;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Tensor2) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

#[derive(Clone, Copy)]
struct MatRef<'a> {
    rows: usize,
    cols: usize,
    row_stride: isize,
    col_stride: isize,
    data: &'a [f64],
}

impl<'a> MatRef<'a> {
    fn new(t: &'a Tensor2) -> Self {
        MatRef {
            rows: t.rows,
            cols: t.cols,
            row_stride: t.cols as isize,
            col_stride: 1,
            data: &t.data,
        }
    }

    fn t(self) -> Self {
        MatRef {
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
            data: self.data,
        }
    }
}

/// `c = alpha·a·b + beta·c`.
fn gemm(alpha: f64, a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: &mut Tensor2) {
    debug_assert_eq!(a.cols, b.rows);
    debug_assert_eq!((a.rows, b.cols), c.shape());
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.map_inplace(|x| x * beta);
        return;
    }
    // SAFETY: the strides and extents describe regions inside the borrowed
    // slices (checked by the shape asserts above), and `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

pub fn ensure_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Matrix-vector product `w ⋅ x` for a single sample.
pub fn matvec(w: &Tensor2, x: &[f64]) -> Vec<f64> {
    assert_eq!(w.cols(), x.len());
    (0..w.rows())
        .map(|r| w.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}
