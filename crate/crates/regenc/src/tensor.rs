//! Dense row-major float64 tensors and the numeric kernels shared by the
//! autodiff tape and the pure evaluation paths.
//!
//! Keeping one kernel per operation (softmax, matmul, ...) guarantees that a
//! value computed on the tape and the same value computed in eval mode are
//! bit-identical, which the pipeline's determinism checks rely on.

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Dense multi-dimensional array of f64 in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor, validating that the shape is positive and matches the
    /// data length.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::shape("tensor", format!("non-positive shape {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} implies {numel} elements, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor { shape, data: vec![0.0; numel] }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![1], data: vec![v] }
    }

    /// 2-D tensor from rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if r == 0 || c == 0 {
            return Err(Error::shape("tensor", "from_rows requires a non-empty matrix"));
        }
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::shape(
                    "tensor",
                    format!("row {i} has {} entries, expected {c}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Tensor::new(vec![r, c], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    pub fn rows(&self) -> usize {
        debug_assert!(self.is_matrix());
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        debug_assert!(self.is_matrix());
        self.shape[1]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Sum of squared entries.
    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub(crate) fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }
}

// ── kernels ──────────────────────────────────────────────────────────

/// Rough work threshold above which matmul parallelizes over output rows.
/// Each row is computed independently in a fixed order, so the result is
/// identical for any thread count.
const PAR_MATMUL_WORK: usize = 1 << 15;

fn matmul_row(out_row: &mut [f64], a_row: &[f64], b: &Tensor) {
    let n = b.cols();
    out_row.fill(0.0);
    for (ak, b_row) in a_row.iter().zip(b.data.chunks_exact(n)) {
        if *ak == 0.0 {
            continue;
        }
        for (o, bv) in out_row.iter_mut().zip(b_row) {
            *o += ak * bv;
        }
    }
}

/// Matrix product `a[m,k] @ b[k,n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if !a.is_matrix() || !b.is_matrix() || a.cols() != b.rows() {
        return Err(Error::shape(
            "matmul",
            format!("{:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = Tensor::zeros(vec![m, n]);
    if m * k * n >= PAR_MATMUL_WORK {
        out.data
            .par_chunks_exact_mut(n)
            .zip(a.data.par_chunks_exact(k))
            .for_each(|(out_row, a_row)| matmul_row(out_row, a_row, b));
    } else {
        for (out_row, a_row) in out.data.chunks_exact_mut(n).zip(a.data.chunks_exact(k)) {
            matmul_row(out_row, a_row, b);
        }
    }
    Ok(out)
}

/// `a^T @ b` without materializing the transpose: a[m,k], b[m,n] -> [k,n].
pub(crate) fn matmul_at_b(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    debug_assert_eq!(m, b.rows());
    let mut out = Tensor::zeros(vec![k, n]);
    for r in 0..m {
        let a_row = a.row(r);
        let b_row = b.row(r);
        for (i, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let o = &mut out.data[i * n..(i + 1) * n];
            for (ov, &bv) in o.iter_mut().zip(b_row) {
                *ov += av * bv;
            }
        }
    }
    out
}

/// `a @ b^T`: a[m,n], b[k,n] -> [m,k].
pub(crate) fn matmul_a_bt(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, n, k) = (a.rows(), a.cols(), b.rows());
    debug_assert_eq!(n, b.cols());
    let mut out = Tensor::zeros(vec![m, k]);
    for r in 0..m {
        let a_row = a.row(r);
        let o = &mut out.data[r * k..(r + 1) * k];
        for (j, ov) in o.iter_mut().enumerate() {
            let b_row = b.row(j);
            *ov = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
        }
    }
    out
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if !a.same_shape(b) {
        return Err(Error::shape("add", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Ok(Tensor { shape: a.shape.clone(), data })
}

/// `[r,c] + [c]`, the bias-add broadcast.
pub fn add_row_broadcast(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if !a.is_matrix() || b.shape() != [a.cols()] {
        return Err(Error::shape(
            "add_row_broadcast",
            format!("{:?} + {:?}", a.shape(), b.shape()),
        ));
    }
    let c = a.cols();
    let mut out = a.clone();
    for row in out.data.chunks_exact_mut(c) {
        for (o, bv) in row.iter_mut().zip(&b.data) {
            *o += bv;
        }
    }
    Ok(out)
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Row-wise softmax with max subtraction; every output row is a probability
/// vector.
pub fn softmax_rows(x: &Tensor) -> Result<Tensor> {
    if !x.is_matrix() {
        return Err(Error::shape("softmax_rows", format!("{:?}", x.shape())));
    }
    let c = x.cols();
    let mut out = x.clone();
    for row in out.data.chunks_exact_mut(c) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(out)
}

/// Row-wise log-softmax: `x - max - ln(sum(exp(x - max)))`.
pub fn log_softmax_rows(x: &Tensor) -> Result<Tensor> {
    if !x.is_matrix() {
        return Err(Error::shape("log_softmax_rows", format!("{:?}", x.shape())));
    }
    let c = x.cols();
    let mut out = x.clone();
    for row in out.data.chunks_exact_mut(c) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v = *v - max - log_sum;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_bad_shapes() {
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![], vec![]).is_err());
    }

    #[test]
    fn matmul_small() {
        let a = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::new(vec![3, 2], vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![2, 3]);
        assert!(matmul(&a, &b).is_err());
    }

    #[test]
    fn matmul_parallel_matches_serial() {
        // Exceeds the parallel threshold; values must be identical to the
        // row-by-row serial kernel.
        let n = 40;
        let mut rng = crate::rng::Rng::from_seed(11);
        let a = Tensor::new(vec![n, n], (0..n * n).map(|_| rng.normal()).collect()).unwrap();
        let b = Tensor::new(vec![n, n], (0..n * n).map(|_| rng.normal()).collect()).unwrap();
        let par = matmul(&a, &b).unwrap();
        let mut serial = Tensor::zeros(vec![n, n]);
        for (out_row, a_row) in serial.data.chunks_exact_mut(n).zip(a.data.chunks_exact(n)) {
            matmul_row(out_row, a_row, &b);
        }
        assert_eq!(par.data(), serial.data());
    }

    #[test]
    fn transpose_products_match_explicit_matmul() {
        let a = Tensor::new(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::new(vec![3, 4], (0..12).map(|i| i as f64).collect()).unwrap();
        // a^T b via explicit transpose
        let mut at = Tensor::zeros(vec![2, 3]);
        for r in 0..3 {
            for c in 0..2 {
                at.set(c, r, a.at(r, c));
            }
        }
        assert_eq!(matmul_at_b(&a, &b).data(), matmul(&at, &b).unwrap().data());

        let c = Tensor::new(vec![5, 4], (0..20).map(|i| (i as f64).sin()).collect()).unwrap();
        let mut ct = Tensor::zeros(vec![4, 5]);
        for r in 0..5 {
            for k in 0..4 {
                ct.set(k, r, c.at(r, k));
            }
        }
        assert_eq!(matmul_a_bt(&b, &c).data(), matmul(&b, &ct).unwrap().data());
    }

    #[test]
    fn relu_definition() {
        let x = Tensor::new(vec![1, 3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn softmax_symmetry_and_shift_invariance() {
        let x = Tensor::new(vec![1, 3], vec![0.0, 0.0, 0.0]).unwrap();
        let s = softmax_rows(&x).unwrap();
        for &v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        let a = softmax_rows(&Tensor::new(vec![1, 3], vec![0.0, 0.5, 0.0]).unwrap()).unwrap();
        let b = softmax_rows(&Tensor::new(vec![1, 3], vec![-0.5, 0.0, -0.5]).unwrap()).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn log_softmax_consistent_with_softmax() {
        let x = Tensor::new(vec![2, 4], vec![1.0, -2.0, 0.5, 3.0, 100.0, 100.5, 99.0, 98.0]).unwrap();
        let s = softmax_rows(&x).unwrap();
        let ls = log_softmax_rows(&x).unwrap();
        for (a, b) in s.data().iter().zip(ls.data()) {
            assert!((a - b.exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = Tensor::new(vec![1, 3], vec![5.0, -300.0, 200.0]).unwrap();
        let s = softmax_rows(&x).unwrap();
        assert!((s.data().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(s.data().iter().all(|&v| v >= 0.0));
    }
}
