//! Compressed sparse row storage.

use nalgebra::DMatrix;

use crate::error::{GaveError, Result};

/// A real matrix in compressed sparse row (CSR) form.
///
/// Column indices are strictly increasing within each row, so every
/// `(row, col)` pair is stored at most once. Explicit zeros are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, validating every structural invariant.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 {
            return Err(GaveError::Structure(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                n_rows + 1
            )));
        }
        if row_ptr[0] != 0 {
            return Err(GaveError::Structure("row_ptr[0] must be 0".into()));
        }
        if col_idx.len() != values.len() || row_ptr[n_rows] != col_idx.len() {
            return Err(GaveError::Structure(format!(
                "row_ptr[n_rows] = {}, col_idx has {} entries, values has {}",
                row_ptr[n_rows],
                col_idx.len(),
                values.len()
            )));
        }
        for r in 0..n_rows {
            let (start, end) = (row_ptr[r], row_ptr[r + 1]);
            if start > end {
                return Err(GaveError::Structure(format!("row_ptr decreases at row {r}")));
            }
            let cols = &col_idx[start..end];
            for (k, &c) in cols.iter().enumerate() {
                if c >= n_cols {
                    return Err(GaveError::Structure(format!(
                        "column index {c} out of range in row {r}"
                    )));
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(GaveError::Structure(format!(
                        "column indices not strictly increasing in row {r}"
                    )));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Repeated coordinates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(GaveError::Structure(format!(
                    "triplet ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            counts[r + 1] += 1;
        }
        for r in 0..n_rows {
            counts[r + 1] += counts[r];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            entries[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..n_rows {
            let row = &mut entries[counts[r]..counts[r + 1]];
            row.sort_by_key(|e| e.0);
            for &(c, v) in row.iter() {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Row-major dense input; zeros are not stored.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(GaveError::dim("ragged dense rows"));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n_rows, n_cols, &triplets)
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored entries of row `r` as `(column, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Iterates over all stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Stored value at `(r, c)`, or zero.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(GaveError::dim(format!(
                "spmv: matrix has {} columns, vector has length {}",
                self.n_cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without dimension checks beyond debug assertions.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    /// `y += A x`
    pub fn spmv_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr += acc;
        }
    }

    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_rows {
            return Err(GaveError::dim(format!(
                "spmv_transpose: matrix has {} rows, vector has length {}",
                self.n_rows,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.n_cols];
        self.spmv_transpose_into(x, &mut y);
        Ok(y)
    }

    /// `y = Aᵀ x`
    pub fn spmv_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                col_idx[next[c]] = r;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Returns `alpha * self + beta * other` by merging sorted rows.
    ///
    /// The result's pattern is the union of both patterns. An entry stored by
    /// only one operand is dropped if its scaled value is zero; an entry stored
    /// by both is kept even when the sum cancels.
    pub fn lin_comb(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(GaveError::dim(format!(
                "cannot combine {}x{} with {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        row_ptr.push(0);
        for r in 0..self.n_rows {
            let (mut i, ie) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let (mut j, je) = (other.row_ptr[r], other.row_ptr[r + 1]);
            while i < ie || j < je {
                let ci = if i < ie { self.col_idx[i] } else { usize::MAX };
                let cj = if j < je { other.col_idx[j] } else { usize::MAX };
                if ci == cj {
                    col_idx.push(ci);
                    values.push(alpha * self.values[i] + beta * other.values[j]);
                    i += 1;
                    j += 1;
                } else if ci < cj {
                    let v = alpha * self.values[i];
                    if v != 0.0 {
                        col_idx.push(ci);
                        values.push(v);
                    }
                    i += 1;
                } else {
                    let v = beta * other.values[j];
                    if v != 0.0 {
                        col_idx.push(cj);
                        values.push(v);
                    }
                    j += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    /// `alpha * self`; zero products are dropped.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                let s = alpha * v;
                if s != 0.0 {
                    col_idx.push(c);
                    values.push(s);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Keeps the entries for which `keep(row, col)` is true.
    pub fn filter(&self, keep: impl Fn(usize, usize) -> bool) -> Self {
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                if keep(r, c) {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.n_cols];
        for (c, v) in self.col_idx.iter().zip(&self.values) {
            sums[*c] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Lower and upper bandwidth: the largest `r - c` and `c - r` over stored entries.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut lower, mut upper) = (0, 0);
        for (r, c, _) in self.triplets() {
            if r > c {
                lower = lower.max(r - c);
            } else {
                upper = upper.max(c - r);
            }
        }
        (lower, upper)
    }

    /// True if `|a_ij - a_ji| <= rel_tol * max|a|` for every stored pair.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.symmetry_defect(1.0) <= rel_tol * self.max_abs()
    }

    /// True if `|a_ij + a_ji| <= rel_tol * max|a|` for every stored pair.
    pub fn is_antisymmetric(&self, rel_tol: f64) -> bool {
        self.symmetry_defect(-1.0) <= rel_tol * self.max_abs()
    }

    fn symmetry_defect(&self, sign: f64) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.triplets()
            .map(|(r, c, v)| (v - sign * self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] = v;
        }
        d
    }

    pub fn from_dense(d: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for r in 0..d.nrows() {
            for c in 0..d.ncols() {
                if d[(r, c)] != 0.0 {
                    triplets.push((r, c, d[(r, c)]));
                }
            }
        }
        Self::from_triplets(d.nrows(), d.ncols(), &triplets).expect("in-range triplets")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tridiag(n: usize, lo: f64, d: f64, up: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, d));
            if i > 0 {
                t.push((i, i - 1, lo));
            }
            if i + 1 < n {
                t.push((i, i + 1, up));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn random_sparse(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rng.random::<f64>() < density {
                    t.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn spmv_examples() {
        let id = SparseMatrix::identity(3);
        assert_eq!(id.spmv(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);

        let t = tridiag(3, -1.0, 4.0, -1.0);
        let y = t.spmv(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(y, vec![3.0, 2.0, 3.0]);
        assert_eq!(t.to_dense() * nalgebra::DVector::from_element(3, 1.0), nalgebra::DVector::from_vec(y));

        let z = SparseMatrix::zeros(4, 4);
        assert_eq!(z.spmv(&[1.0, -2.0, 3.0, 9.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let id = SparseMatrix::identity(3);
        assert!(matches!(id.spmv(&[1.0, 2.0]), Err(GaveError::Dimension(_))));
        assert!(matches!(id.spmv_transpose(&[1.0]), Err(GaveError::Dimension(_))));
    }

    #[test]
    fn spmv_transpose_examples() {
        let t = tridiag(5, -1.0, 4.0, -1.0);
        let x = [1.0, -2.0, 0.5, 3.0, 7.0];
        assert_eq!(t.spmv(&x).unwrap(), t.spmv_transpose(&x).unwrap());

        let a = SparseMatrix::from_dense_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(a.spmv_transpose(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn adjoint_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_sparse(&mut rng, 20, 0.3);
            let x: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = dot(&a.spmv(&x).unwrap(), &y);
            let rhs = dot(&x, &a.spmv_transpose(&y).unwrap());
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn from_csr_rejects_bad_structure() {
        // duplicate column in a row
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 2.0]).is_err());
        // out of range column
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        // row_ptr[0] != 0
        assert!(SparseMatrix::from_csr(1, 2, vec![1, 1], vec![], vec![]).is_err());
        // decreasing row_ptr
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 1, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.5), (1, 0, 1.0)]).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), 3.5);
    }

    #[test]
    fn lin_comb_keeps_cancellation_only_for_shared_entries() {
        let a = SparseMatrix::from_dense_rows(&[vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap();
        let b = SparseMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![4.0, 0.0]]).unwrap();
        let d = a.sub(&b).unwrap();
        // (0,0) cancels but both stored it
        assert_eq!(d.nnz(), 4);
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.get(1, 0), -4.0);
        let z = a.lin_comb(0.0, &b, 1.0).unwrap();
        // a's unique entries scale to zero and are dropped; shared (0,0) stays
        assert_eq!(z.nnz(), 2);
    }

    #[test]
    fn transpose_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_sparse(&mut rng, 13, 0.25);
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn norms_and_bandwidth() {
        let t = tridiag(4, -1.0, 4.0, -2.0);
        assert_eq!(t.norm_inf(), 7.0);
        assert_eq!(t.norm_one(), 7.0);
        assert_eq!(t.bandwidths(), (1, 1));
        assert!(!t.is_symmetric(1e-12));
        assert!(tridiag(4, -1.0, 4.0, -1.0).is_symmetric(0.0));
    }
}
