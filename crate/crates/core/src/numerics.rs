//! Dense linear algebra and the seeded random stream.
//!
//! Everything here is deliberately plain: row-major `Vec` storage, exact
//! (unblocked) products, and a single RNG algorithm.
//!
//! # Random stream
//!
//! [`RngStream`] is ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded through
//! `SeedableRng::seed_from_u64`, with the 64-bit ChaCha stream id selecting
//! independent sub-streams. Gaussian draws use `rand_distr::StandardNormal`
//! (ziggurat). Both are value-stable across platforms, so a seed pins every
//! trace byte for byte.

use std::ops::{Deref, DerefMut, Index, IndexMut};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Owned dense vector.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DenseVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> DenseVector<T> {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![T::zero(); len],
        }
    }

    pub fn filled(len: usize, value: T) -> Self {
        Self {
            values: vec![value; len],
        }
    }

    pub fn from_vec(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn from_f64(values: &[f64]) -> Self {
        Self {
            values: values.iter().map(|&v| T::lit(v)).collect(),
        }
    }

    /// Unit vector `e_index`.
    pub fn basis(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.values[index] = T::one();
        v
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &Self) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum()
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: T, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// Number of entries with `|v| > tol`.
    pub fn count_nonzero(&self, tol: T) -> usize {
        self.values.iter().filter(|v| v.abs() > tol).count()
    }
}

impl<T> Deref for DenseVector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.values
    }
}

impl<T> DerefMut for DenseVector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

impl<T> From<Vec<T>> for DenseVector<T> {
    fn from(values: Vec<T>) -> Self {
        Self { values }
    }
}

impl<T: Scalar> FromIterator<T> for DenseVector<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        check_dim("matrix storage", rows * cols, values.len())?;
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut values = Vec::with_capacity(r * c);
        for row in rows {
            check_dim("matrix row", c, row.len())?;
            values.extend(row.iter().map(|&v| T::lit(v)));
        }
        Ok(Self {
            rows: r,
            cols: c,
            values,
        })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[DenseVector<T>]) -> Result<Self> {
        let c = columns.len();
        let r = columns.first().map_or(0, |v| v.len());
        let mut m = Self::zeros(r, c);
        for (j, col) in columns.iter().enumerate() {
            check_dim("matrix column", r, col.len())?;
            for i in 0..r {
                m.values[i * c + j] = col[i];
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> DenseVector<T> {
        (0..self.rows).map(|i| self.values[i * self.cols + j]).collect()
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.values[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        t
    }

    /// `A x`.
    pub fn matvec(&self, x: &DenseVector<T>) -> Result<DenseVector<T>> {
        check_dim("matvec", self.cols, x.len())?;
        Ok(self.matvec_unchecked(x))
    }

    /// `Aᵀ r`.
    pub fn matvec_adjoint(&self, r: &DenseVector<T>) -> Result<DenseVector<T>> {
        check_dim("matvec_adjoint", self.rows, r.len())?;
        Ok(self.matvec_adjoint_unchecked(r))
    }

    pub(crate) fn matvec_unchecked(&self, x: &[T]) -> DenseVector<T> {
        self.values
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub(crate) fn matvec_adjoint_unchecked(&self, r: &[T]) -> DenseVector<T> {
        let mut out = vec![T::zero(); self.cols];
        for (i, &ri) in r.iter().enumerate().take(self.rows) {
            if ri == T::zero() {
                continue;
            }
            let row = &self.values[i * self.cols..(i + 1) * self.cols];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * ri;
            }
        }
        DenseVector::from_vec(out)
    }

    /// `AB`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim("matmul", self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.values[i * self.cols + l];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(l);
                let dst = &mut out.values[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// True when `AᵀA = I` entrywise within `tol` (orthonormal columns).
    pub fn has_orthonormal_columns(&self, tol: T) -> bool {
        for a in 0..self.cols {
            for b in a..self.cols {
                let mut s = T::zero();
                for i in 0..self.rows {
                    s += self.values[i * self.cols + a] * self.values[i * self.cols + b];
                }
                let target = if a == b { T::one() } else { T::zero() };
                if (s - target).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl<T: Scalar> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.values[i * self.cols + j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.values[i * self.cols + j]
    }
}

/// Seeded ChaCha20 stream. Single owner; clone to replay.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent sub-stream `stream` of `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Draws a fresh key for a family of derived streams; pair it with
    /// [`RngStream::with_stream`] to give item `i` its own stream.
    pub fn split_key(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn index_below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn normal<T: Scalar>(&mut self, std: T) -> T {
        T::lit(self.standard_normal()) * std
    }

    pub fn normal_vector<T: Scalar>(&mut self, len: usize, std: T) -> DenseVector<T> {
        (0..len).map(|_| self.normal(std)).collect()
    }

    /// Uniformly random unit vector.
    pub fn unit_vector<T: Scalar>(&mut self, len: usize) -> DenseVector<T> {
        loop {
            let v = self.normal_vector::<T>(len, T::one());
            let nrm = v.norm();
            if nrm > T::zero() {
                return v.scaled(T::one() / nrm);
            }
        }
    }

    /// `count` distinct indices from `0..n`, in sampling order.
    pub fn distinct_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.rng, n, count).into_vec()
    }

    /// Random sign, `±1` with equal probability.
    pub fn sign<T: Scalar>(&mut self) -> T {
        if self.rng.random::<bool>() {
            T::one()
        } else {
            -T::one()
        }
    }
}

/// `m × n` matrix with i.i.d. `N(0, variance)` entries, drawn in row-major order.
pub fn gaussian_matrix<T: Scalar>(
    m: usize,
    n: usize,
    variance: T,
    rng: &mut RngStream,
) -> Result<DenseMatrix<T>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "gaussian_matrix needs positive dimensions, got {m}x{n}"
        )));
    }
    if !(variance >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "variance must be nonnegative, got {variance}"
        )));
    }
    let std = variance.sqrt();
    let values = (0..m * n).map(|_| rng.normal(std)).collect();
    DenseMatrix::from_row_major(m, n, values)
}

/// Random `n × n` orthonormal matrix (modified Gram–Schmidt on a Gaussian draw).
pub fn orthonormal_matrix<T: Scalar>(n: usize, rng: &mut RngStream) -> Result<DenseMatrix<T>> {
    let g = gaussian_matrix::<T>(n, n, T::one(), rng)?;
    let mut cols: Vec<DenseVector<T>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j);
        // two passes keep the basis orthonormal to ~1e-15
        for _ in 0..2 {
            for q in &cols {
                let c = q.dot(&v);
                v = v.add_scaled(-c, q);
            }
        }
        let nrm = v.norm();
        if nrm <= T::epsilon() {
            return Err(Error::Degenerate("rank-deficient Gaussian draw".into()));
        }
        cols.push(v.scaled(T::one() / nrm));
    }
    DenseMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_gram_times(a: &DenseMatrix<f64>, x: &DenseVector<f64>) -> Vec<f64> {
        let (m, n) = (a.rows(), a.cols());
        let mut gram = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                for r in 0..m {
                    gram[i][j] += a[(r, i)] * a[(r, j)];
                }
            }
        }
        (0..n)
            .map(|i| (0..n).map(|j| gram[i][j] * x[j]).sum())
            .collect()
    }

    #[test]
    fn zero_variance_gives_zero_matrix() {
        let mut rng = RngStream::new(3);
        let a = gaussian_matrix::<f64>(2, 3, 0.0, &mut rng).unwrap();
        assert!(a.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!((a.rows(), a.cols()), (2, 3));
    }

    #[test]
    fn gaussian_matrix_sample_statistics() {
        let mut rng = RngStream::new(7);
        let a = gaussian_matrix::<f64>(100, 784, 0.01, &mut rng).unwrap();
        let n = a.as_slice().len() as f64;
        let mean = a.as_slice().iter().sum::<f64>() / n;
        let var = a.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 0.01).abs() < 0.002, "variance {var}");
    }

    #[test]
    fn gaussian_matrix_rejects_empty() {
        let mut rng = RngStream::new(0);
        assert!(gaussian_matrix::<f64>(0, 3, 1.0, &mut rng).is_err());
        assert!(gaussian_matrix::<f64>(3, 0, 1.0, &mut rng).is_err());
        assert!(gaussian_matrix::<f64>(3, 3, -1.0, &mut rng).is_err());
    }

    #[test]
    fn gaussian_matrix_reproducible() {
        let a = gaussian_matrix::<f64>(9, 5, 0.3, &mut RngStream::new(11)).unwrap();
        let b = gaussian_matrix::<f64>(9, 5, 0.3, &mut RngStream::new(11)).unwrap();
        let bits = |m: &DenseMatrix<f64>| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn identity_and_zero_products() {
        let x = DenseVector::<f64>::from_f64(&[1.0, 2.0, 3.0]);
        assert_eq!(DenseMatrix::identity(3).matvec(&x).unwrap(), x);
        let z = DenseMatrix::<f64>::zeros(4, 3).matvec(&x).unwrap();
        assert_eq!(z, DenseVector::zeros(4));
    }

    #[test]
    fn gram_product_matches_double_loop() {
        let mut rng = RngStream::new(5);
        let a = gaussian_matrix::<f64>(5, 4, 1.0, &mut rng).unwrap();
        let x = rng.normal_vector::<f64>(4, 1.0);
        let fast = a.matvec_adjoint(&a.matvec(&x).unwrap()).unwrap();
        let slow = brute_gram_times(&a, &x);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = DenseMatrix::<f64>::zeros(2, 3);
        assert!(matches!(
            a.matvec(&DenseVector::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(a.matvec_adjoint(&DenseVector::zeros(3)).is_err());
    }

    #[test]
    fn orthonormal_draw_is_orthonormal() {
        let q = orthonormal_matrix::<f64>(12, &mut RngStream::new(2)).unwrap();
        assert!(q.has_orthonormal_columns(1e-12));
        assert!(q.transpose().has_orthonormal_columns(1e-12));
    }

    #[test]
    fn streams_are_independent_and_replayable() {
        let mut a = RngStream::with_stream(4, 0);
        let mut b = RngStream::with_stream(4, 1);
        assert_ne!(a.next_u64(), b.next_u64());
        let mut c = RngStream::with_stream(4, 1);
        let mut d = RngStream::with_stream(4, 1);
        assert_eq!(c.standard_normal().to_bits(), d.standard_normal().to_bits());
    }

    #[test]
    fn matmul_against_matvec() {
        let mut rng = RngStream::new(8);
        let a = gaussian_matrix::<f64>(3, 4, 1.0, &mut rng).unwrap();
        let b = gaussian_matrix::<f64>(4, 2, 1.0, &mut rng).unwrap();
        let ab = a.matmul(&b).unwrap();
        for j in 0..2 {
            let col = a.matvec(&b.column(j)).unwrap();
            for i in 0..3 {
                assert!((ab[(i, j)] - col[i]).abs() < 1e-12);
            }
        }
    }
}
