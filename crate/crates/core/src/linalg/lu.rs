//! Banded LU factorization with row partial pivoting.
//!
//! The band is detected from the sparsity pattern, so narrow-band matrices
//! (the block-tridiagonal test family, triangular splittings of it) factor in
//! `O(n · kl · (kl + ku))` while general matrices fall back to a full band.

use super::sparse::SparseMatrix;
use crate::error::{GaveError, Result};

/// Relative size below which a pivot counts as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Pre-computed `P A = L U` for a square matrix, stored in band form.
///
/// Row `i` of the working array covers columns `i - kl ..= i + kl + ku`; the
/// extra `kl` columns on the right hold the fill produced by row interchanges.
#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    pivots: Vec<usize>,
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth of the factored matrix.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(GaveError::dim(format!(
                "LU solve: system has order {}, rhs has length {}",
                self.n,
                rhs.len()
            )));
        }
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// Overwrites `x` (holding the right-hand side) with `A⁻¹ x`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let upper = self.kl + self.ku;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                let last = (k + self.kl).min(n - 1);
                for i in k + 1..=last {
                    x[i] -= self.band[self.at(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let last = (k + upper).min(n - 1);
            let row = self.at(k, k);
            let mut acc = x[k];
            for (off, xj) in x[k + 1..=last].iter().enumerate() {
                acc -= self.band[row + 1 + off] * xj;
            }
            x[k] = acc / self.band[row];
        }
    }

    /// Solves `Aᵀ y = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(GaveError::dim("LU transpose solve: rhs length mismatch"));
        }
        let n = self.n;
        let upper = self.kl + self.ku;
        let mut x = rhs.to_vec();
        // Uᵀ w = b
        for k in 0..n {
            let row = self.at(k, k);
            x[k] /= self.band[row];
            let xk = x[k];
            let last = (k + upper).min(n - 1);
            for j in k + 1..=last {
                x[j] -= self.band[row + (j - k)] * xk;
            }
        }
        // apply L_kᵀ then P_k for k = n-1 .. 0
        for k in (0..n).rev() {
            let last = (k + self.kl).min(n - 1);
            let mut acc = x[k];
            for i in k + 1..=last {
                acc -= self.band[self.at(i, k)] * x[i];
            }
            x[k] = acc;
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
        }
        Ok(x)
    }
}

/// Factorizes a square matrix with row partial pivoting (the largest
/// magnitude in the pivot column wins).
///
/// Fails with [`GaveError::Singular`] when a pivot falls below
/// `PIVOT_TOLERANCE · ‖A‖_∞`.
pub fn lu_factorize(a: &SparseMatrix) -> Result<Factorization> {
    if !a.is_square() {
        return Err(GaveError::dim(format!(
            "LU needs a square matrix, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let n = a.n_rows();
    let (kl, ku) = a.bandwidths();
    let width = 2 * kl + ku + 1;
    let mut f = Factorization {
        n,
        kl,
        ku,
        width,
        band: vec![0.0; n * width],
        pivots: vec![0; n],
    };
    for (r, c, v) in a.triplets() {
        let idx = f.at(r, c);
        f.band[idx] = v;
    }
    let threshold = PIVOT_TOLERANCE * a.norm_inf();

    for k in 0..n {
        let last_row = (k + kl).min(n - 1);
        let mut p = k;
        let mut best = f.band[f.at(k, k)].abs();
        for i in k + 1..=last_row {
            let v = f.band[f.at(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if !(best > threshold) {
            return Err(GaveError::Singular(format!(
                "pivot {best:e} at column {k} is below {threshold:e}"
            )));
        }
        f.pivots[k] = p;
        let last_col = (k + kl + ku).min(n - 1);
        if p != k {
            for j in k..=last_col {
                let (ik, ip) = (f.at(k, j), f.at(p, j));
                f.band.swap(ik, ip);
            }
        }
        let pivot = f.band[f.at(k, k)];
        let span = last_col - k;
        for i in k + 1..=last_row {
            let lik_idx = f.at(i, k);
            let l = f.band[lik_idx] / pivot;
            f.band[lik_idx] = l;
            if l == 0.0 {
                continue;
            }
            let src = f.at(k, k) + 1;
            let dst = lik_idx + 1;
            // rows k and i are disjoint slices of the band array
            let (head, tail) = f.band.split_at_mut(dst);
            let upper_row = &head[src..src + span];
            for (t, u) in tail[..span].iter_mut().zip(upper_row) {
                *t -= l * u;
            }
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector::{norm2, sub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tridiag(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn random_dominant(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                if i != j && rng.random::<f64>() < density {
                    let v = rng.random_range(-1.0..1.0);
                    sum += f64::abs(v);
                    t.push((i, j, v));
                }
            }
            t.push((i, i, sum + 1.0 + rng.random::<f64>()));
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let f = lu_factorize(&SparseMatrix::identity(4)).unwrap();
        let b = vec![1.0, -2.0, 3.5, 0.0];
        assert_eq!(f.solve(&b).unwrap(), b);
    }

    #[test]
    fn tridiagonal_constructed_solution() {
        let a = tridiag(50);
        let b = a.spmv(&vec![1.0; 50]).unwrap();
        let x = lu_factorize(&a).unwrap().solve(&b).unwrap();
        for v in x {
            assert!((v - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_row_is_singular() {
        let a = SparseMatrix::from_dense_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 1.0, 3.0],
        ])
        .unwrap();
        assert!(matches!(lu_factorize(&a), Err(GaveError::Singular(_))));
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let a = SparseMatrix::from_dense_rows(&[vec![0.0, 1.0], vec![2.0, 1.0]]).unwrap();
        let f = lu_factorize(&a).unwrap();
        let x = f.solve(&[3.0, 4.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
        let y = f.solve_transpose(&[3.0, 4.0]).unwrap();
        let back = a.spmv_transpose(&y).unwrap();
        assert!(norm2(&sub(&back, &[3.0, 4.0])) < 1e-14);
    }

    #[test]
    fn random_dominant_residual_and_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 5, 40, 120] {
            let a = random_dominant(&mut rng, n, 0.1);
            let f = lu_factorize(&a).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = f.solve(&b).unwrap();
            let r = norm2(&sub(&a.spmv(&x).unwrap(), &b));
            assert!(r <= 1e-10 * norm2(&b), "n={n} residual {r}");
            let y = f.solve_transpose(&b).unwrap();
            let rt = norm2(&sub(&a.spmv_transpose(&y).unwrap(), &b));
            assert!(rt <= 1e-10 * norm2(&b), "n={n} transpose residual {rt}");
        }
    }

    #[test]
    fn general_nonsymmetric_needs_pivots() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let f = lu_factorize(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x = f.solve(&b).unwrap();
        let expected = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
        for (u, v) in x.iter().zip(expected.iter()) {
            assert!((u - v).abs() <= 1e-9 * v.abs().max(1.0));
        }
    }
}
