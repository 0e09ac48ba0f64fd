//! Minimal dense linear algebra: vectors, row-major square matrices, LU with
//! partial pivoting, and the ∞-norms used throughout the crate.
//!
//! Everything here is plain `f64` storage with no views or strides. Values are
//! immutable after construction and all entries are finite by construction.

use thiserror::Error;

/// Relative pivot threshold below which a factorization is declared singular.
///
/// The test is scale invariant: a pivot counts as zero when its magnitude does
/// not exceed `SINGULARITY_THRESHOLD * ‖A‖∞`.
pub const SINGULARITY_THRESHOLD: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error(
        "singular matrix: pivot {pivot:e} at elimination step {step} (threshold {threshold:e})"
    )]
    SingularMatrix {
        step: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
}

fn check_finite(entries: &[f64]) -> Result<(), LinalgError> {
    match entries.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(LinalgError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Dense vector of finite `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    entries: Vec<f64>,
}

impl DenseVector {
    /// Wraps `entries`, rejecting NaN and infinities.
    pub fn new(entries: Vec<f64>) -> Result<Self, LinalgError> {
        check_finite(&entries)?;
        Ok(Self { entries })
    }

    /// Internal constructor for values produced by arithmetic on finite inputs.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        Self { entries }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: vec![0.0; n],
        }
    }

    pub fn ones(n: usize) -> Self {
        Self {
            entries: vec![1.0; n],
        }
    }

    /// Builds a vector from `f(i)`, `i = 0..n`. Panics on non-finite output.
    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
        let entries: Vec<f64> = (0..n).map(f).collect();
        assert!(
            entries.iter().all(|v| v.is_finite()),
            "from_fn produced a non-finite entry"
        );
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.entries.iter()
    }

    /// Max absolute entry; 0 for the empty vector.
    pub fn inf_norm(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Entrywise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_len(other.len())?;
        Ok(Self::from_raw(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a * b)
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_len(other.len())?;
        Ok(Self::from_raw(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_len(other.len())?;
        Ok(Self::from_raw(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_raw(self.entries.iter().map(|v| v * factor).collect())
    }

    fn check_len(&self, other: usize) -> Result<(), LinalgError> {
        if self.len() != other {
            return Err(LinalgError::DimensionMismatch {
                expected: self.len(),
                found: other,
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.entries[i]
    }
}

/// Dense row-major matrix of finite `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    /// Wraps row-major `entries`, rejecting wrong counts and non-finite values.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self, LinalgError> {
        if entries.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        check_finite(&entries)?;
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), rows * cols);
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from `f(i, j)`. Panics on non-finite output.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        assert!(
            entries.iter().all(|v| v.is_finite()),
            "from_fn produced a non-finite entry"
        );
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub(crate) fn into_raw_entries(self) -> Vec<f64> {
        self.entries
    }

    /// Max absolute row sum; 0 for an empty matrix.
    pub fn inf_norm(&self) -> f64 {
        self.entries
            .chunks_exact(self.cols.max(1))
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &DenseVector) -> Result<DenseVector, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        let xs = x.as_slice();
        let out = self
            .entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(xs).map(|(a, b)| a * b).sum())
            .collect();
        Ok(DenseVector::from_raw(out))
    }

    /// `self * other`, accumulated row by row so the inner loops stay on
    /// contiguous memory.
    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let (n, m) = (self.rows, other.cols);
        let mut out = vec![0.0; n * m];
        for (i, c_row) in out.chunks_exact_mut(m).enumerate() {
            let a_row = self.row(i);
            for (k, &aik) in a_row.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let b_row = &other.entries[k * m..(k + 1) * m];
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv += aik * bv;
                }
            }
        }
        Ok(Self::from_raw(n, m, out))
    }

    /// `diag(d) * self`: row `i` scaled by `d[i]`.
    pub fn scale_rows(&self, d: &DenseVector) -> Result<Self, LinalgError> {
        if d.len() != self.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.rows,
                found: d.len(),
            });
        }
        let mut entries = self.entries.clone();
        for (row, &s) in entries.chunks_exact_mut(self.cols).zip(d.iter()) {
            for v in row {
                *v *= s;
            }
        }
        Ok(Self::from_raw(self.rows, self.cols, entries))
    }

    /// `self * diag(d)`: column `j` scaled by `d[j]`.
    pub fn scale_cols(&self, d: &DenseVector) -> Result<Self, LinalgError> {
        if d.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                found: d.len(),
            });
        }
        let mut entries = self.entries.clone();
        for row in entries.chunks_exact_mut(self.cols) {
            for (v, &s) in row.iter_mut().zip(d.iter()) {
                *v *= s;
            }
        }
        Ok(Self::from_raw(self.rows, self.cols, entries))
    }

    /// LU factorization with partial (row) pivoting, `P A = L U`.
    pub fn lu_factor(&self) -> Result<LuFactorization, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let n = self.rows;
        let threshold = SINGULARITY_THRESHOLD * self.inf_norm();
        let mut lu = self.entries.clone();
        let mut swaps = vec![0usize; n];

        for k in 0..n {
            // Pivot: largest magnitude in column k at or below the diagonal.
            let mut p = k;
            let mut pmax = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax <= threshold {
                return Err(LinalgError::SingularMatrix {
                    step: k,
                    pivot: pmax,
                    threshold,
                });
            }
            swaps[k] = p;
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
            }
            let pivot = lu[k * n + k];
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n + k + 1..(k + 1) * n];
            for row in tail.chunks_exact_mut(n) {
                let m = row[k] / pivot;
                row[k] = m;
                if m != 0.0 {
                    for (rv, &pv) in row[k + 1..].iter_mut().zip(pivot_row) {
                        *rv -= m * pv;
                    }
                }
            }
        }
        Ok(LuFactorization { lu, swaps, n })
    }
}

/// Packed LU factors of a square matrix plus the pivot row swap record.
///
/// Reusable for any number of right-hand sides.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    /// Unit lower triangle (strictly below the diagonal) and upper triangle.
    lu: Vec<f64>,
    /// `swaps[k]` is the row exchanged with row `k` at elimination step `k`.
    swaps: Vec<usize>,
    n: usize,
}

impl LuFactorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` via the stored factors.
    pub fn solve(&self, b: &DenseVector) -> Result<DenseVector, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                found: b.len(),
            });
        }
        let n = self.n;
        let mut x = b.as_slice().to_vec();
        for (k, &p) in self.swaps.iter().enumerate() {
            if p != k {
                x.swap(k, p);
            }
        }
        // Forward substitution with unit L.
        for i in 1..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x).map(|(l, xv)| l * xv).sum();
            x[i] -= s;
        }
        // Back substitution with U.
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, xv)| u * xv).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Ok(DenseVector::from_raw(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn lu_identity_is_trivial() {
        let a = DenseMatrix::identity(3);
        let f = a.lu_factor().unwrap();
        assert_eq!(f.dim(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_eq!(f.lu[i * 3 + j], expected);
            }
        }
        assert_eq!(f.swaps, vec![0, 1, 2]);
    }

    #[test]
    fn lu_permutation_matrix_pivots() {
        let a = DenseMatrix::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let f = a.lu_factor().unwrap();
        let x = f.solve(&DenseVector::new(vec![2.0, 5.0]).unwrap()).unwrap();
        assert_eq!(x.as_slice(), &[5.0, 2.0]);
    }

    #[test]
    fn lu_rank_one_is_singular() {
        let a = DenseMatrix::new(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        match a.lu_factor() {
            Err(LinalgError::SingularMatrix { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let b = DenseVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let x = DenseMatrix::identity(3)
            .lu_factor()
            .unwrap()
            .solve(&b)
            .unwrap();
        assert_eq!(x.as_slice(), b.as_slice());

        let a = DenseMatrix::new(2, 2, vec![2.0, 0.0, 0.0, 4.0]).unwrap();
        let x = a
            .lu_factor()
            .unwrap()
            .solve(&DenseVector::new(vec![2.0, 8.0]).unwrap())
            .unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn solve_two_by_two() {
        // x + y = 3, x - y = 1  =>  (2, 1)
        let a = DenseMatrix::new(2, 2, vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        let x = a
            .lu_factor()
            .unwrap()
            .solve(&DenseVector::new(vec![3.0, 1.0]).unwrap())
            .unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn solve_dimension_mismatch() {
        let f = DenseMatrix::identity(3).lu_factor().unwrap();
        let err = f.solve(&DenseVector::zeros(2)).unwrap_err();
        assert!(matches!(err, LinalgError::DimensionMismatch { .. }));
    }

    #[test]
    fn inf_norm_examples() {
        let v = DenseVector::new(vec![1.0, -3.0, 2.0]).unwrap();
        assert_eq!(v.inf_norm(), 3.0);
        assert_eq!(DenseMatrix::zeros(3, 3).inf_norm(), 0.0);
        let m = DenseMatrix::new(2, 2, vec![1.0, -2.0, 0.0, 0.5]).unwrap();
        assert_eq!(m.inf_norm(), 3.0);
    }

    #[test]
    fn hadamard_examples() {
        let x = DenseVector::new(vec![1.0, 2.0]).unwrap();
        let y = DenseVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(x.hadamard(&y).unwrap().as_slice(), &[3.0, 8.0]);
        assert_eq!(x.hadamard(&DenseVector::ones(2)).unwrap(), x);
        let a = DenseVector::new(vec![0.0, 5.0]).unwrap();
        let b = DenseVector::new(vec![7.0, 0.0]).unwrap();
        assert_eq!(a.hadamard(&b).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(x.hadamard(&DenseVector::zeros(3)).is_err());
    }

    #[test]
    fn constructors_reject_non_finite() {
        assert!(matches!(
            DenseVector::new(vec![1.0, f64::NAN]),
            Err(LinalgError::NonFinite(1))
        ));
        assert!(DenseMatrix::new(1, 2, vec![f64::INFINITY, 0.0]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn shared_factorization_matches_fresh_solves_exactly() {
        let a = DenseMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                6.0
            } else {
                ((3 * i + 5 * j + 1) % 7) as f64 - 3.0
            }
        });
        let b1 = DenseVector::from_fn(4, |i| i as f64 + 1.0);
        let b2 = DenseVector::from_fn(4, |i| (i as f64).sin());
        let shared = a.lu_factor().unwrap();
        let x1 = shared.solve(&b1).unwrap();
        let x2 = shared.solve(&b2).unwrap();
        let y1 = a.lu_factor().unwrap().solve(&b1).unwrap();
        let y2 = a.lu_factor().unwrap().solve(&b2).unwrap();
        assert_eq!(x1, y1);
        assert_eq!(x2, y2);
    }

    fn diag_dominant(n: usize, seed: &[f64]) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |i, j| {
            let v = seed[(i * n + j) % seed.len()];
            if i == j {
                2.0 * n as f64 + v
            } else {
                v
            }
        })
    }

    proptest! {
        #[test]
        fn lu_solve_residual_small(seed in proptest::collection::vec(-1.0f64..1.0, 16), bvals in proptest::collection::vec(-10.0f64..10.0, 4)) {
            let a = diag_dominant(4, &seed);
            let b = DenseVector::new(bvals).unwrap();
            let x = a.lu_factor().unwrap().solve(&b).unwrap();
            let r = a.matvec(&x).unwrap().sub(&b).unwrap();
            prop_assert!(r.inf_norm() <= 1e-10 * a.inf_norm() * x.inf_norm().max(1.0));
        }

        #[test]
        fn inf_norm_homogeneous_and_triangle(xs in proptest::collection::vec(-100.0f64..100.0, 6), ys in proptest::collection::vec(-100.0f64..100.0, 6), s in -50.0f64..50.0) {
            let x = DenseVector::new(xs).unwrap();
            let y = DenseVector::new(ys).unwrap();
            let scaled = x.scale(s);
            prop_assert!((scaled.inf_norm() - s.abs() * x.inf_norm()).abs() <= 1e-12 * x.inf_norm().max(1.0));
            let sum = x.add(&y).unwrap();
            prop_assert!(sum.inf_norm() <= x.inf_norm() + y.inf_norm() + 1e-12);
        }
    }
}
