use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major tensor of `f64` values.
///
/// Every op in this crate works on rank-2 tensors; a scalar is `[1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Tensor { shape, values })
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], values)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            shape: vec![rows, cols],
            values: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            shape: vec![rows, cols],
            values: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1, 1],
            values: vec![value],
        }
    }

    /// Column vector `[n, 1]`.
    pub fn column(values: Vec<f64>) -> Self {
        Tensor {
            shape: vec![values.len(), 1],
            values,
        }
    }

    /// Single row `[1, n]`.
    pub fn row(values: Vec<f64>) -> Self {
        Tensor {
            shape: vec![1, values.len()],
            values,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::dim("ragged rows"));
            }
            values.extend_from_slice(r);
        }
        Self::matrix(rows.len(), cols, values)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.values[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.values.len() == 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols() + c]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    /// The sole value of a one-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.values[0]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if !self.same_shape(other) {
            return Err(Error::dim(format!(
                "elementwise op on {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.values[i * c + j];
            }
        }
        Tensor {
            shape: vec![c, r],
            values: out,
        }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(Error::dim(format!(
                "matmul inner dimensions {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.values, false, &other.values, false, &mut out, false);
        Ok(Tensor {
            shape: vec![m, n],
            values: out,
        })
    }

    /// Adds a `[1, cols]` bias to every row.
    pub fn add_row(&self, bias: &Tensor) -> Result<Tensor> {
        if bias.rows() != 1 || bias.cols() != self.cols() {
            return Err(Error::dim(format!(
                "row bias {:?} for {:?}",
                bias.shape, self.shape
            )));
        }
        let c = self.cols();
        let mut values = self.values.clone();
        for row in values.chunks_mut(c.max(1)) {
            for (v, b) in row.iter_mut().zip(&bias.values) {
                *v += b;
            }
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            values,
        })
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        self.map(|v| if v > 0.0 { v } else { slope * v })
    }

    pub fn tanh(&self) -> Tensor {
        self.map(f64::tanh)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Concatenates along columns; both inputs must have the same row count.
    pub fn concat_cols(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows() != other.rows() {
            return Err(Error::dim("concat_cols row mismatch"));
        }
        let (ca, cb) = (self.cols(), other.cols());
        let mut values = Vec::with_capacity(self.len() + other.len());
        for r in 0..self.rows() {
            values.extend_from_slice(&self.values[r * ca..(r + 1) * ca]);
            values.extend_from_slice(&other.values[r * cb..(r + 1) * cb]);
        }
        Tensor::matrix(self.rows(), ca + cb, values)
    }

    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Tensor> {
        if start > end || end > self.cols() {
            return Err(Error::dim(format!("column slice {start}..{end} of {:?}", self.shape)));
        }
        let c = self.cols();
        let mut values = Vec::with_capacity(self.rows() * (end - start));
        for r in 0..self.rows() {
            values.extend_from_slice(&self.values[r * c + start..r * c + end]);
        }
        Tensor::matrix(self.rows(), end - start, values)
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Tensor> {
        if start > end || end > self.rows() {
            return Err(Error::dim(format!("row slice {start}..{end} of {:?}", self.shape)));
        }
        let c = self.cols();
        Tensor::matrix(end - start, c, self.values[start * c..end * c].to_vec())
    }
}

/// `c = op(a) * op(b)` (or `c += ...` when `accumulate`), with `a` stored as
/// `m x k` (or `k x m` when transposed) and `b` as `k x n` (or `n x k`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above pin every buffer to exactly the extent the
    // strides address, and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(a: &Tensor, b: &Tensor) -> Vec<f64> {
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for t in 0..k {
                    s += a.get(i, t) * b.get(t, j);
                }
                out[i * n + j] = s;
            }
        }
        out
    }

    #[test]
    fn identity_times_vector() {
        let v = Tensor::column(vec![3.0, -2.0]);
        assert_eq!(Tensor::identity(2).matmul(&v).unwrap(), v);
    }

    #[test]
    fn hand_product() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Tensor::column(vec![1.0, 1.0]);
        assert_eq!(a.matmul(&b).unwrap().values(), &[3.0, 7.0]);
    }

    #[test]
    fn random_product_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Tensor::matrix(5, 7, (0..35).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let b = Tensor::matrix(7, 3, (0..21).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let got = a.matmul(&b).unwrap();
        for (g, e) in got.values().iter().zip(naive(&a, &b)) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn transposed_gemm_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Tensor::matrix(4, 6, (0..24).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let b = Tensor::matrix(4, 3, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let mut c = vec![0.0; 18];
        gemm(6, 4, 3, a.values(), true, b.values(), false, &mut c, false);
        let expect = naive(&a.transpose(), &b);
        for (g, e) in c.iter().zip(expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        let a = Tensor::zeros(2, 3);
        assert!(matches!(a.matmul(&Tensor::zeros(2, 3)), Err(Error::Dimension(_))));
        assert!(a.add_row(&Tensor::zeros(1, 2)).is_err());
    }
}
