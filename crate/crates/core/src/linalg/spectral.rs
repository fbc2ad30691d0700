//! Norm and eigenvalue estimates: power iteration, inverse iteration and the
//! small-matrix dense paths that back them.

use nalgebra::{DMatrix, SymmetricEigen};

use super::lu::lu_factorize;
use super::sparse::SparseMatrix;
use super::vector::{dot, norm2, scale};
use crate::error::{GaveError, Result};

/// Largest dimension handled by the dense SVD / eigensolver paths.
pub const DENSE_LIMIT: usize = 500;
pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Consecutive iterations that must satisfy the tolerance before stopping.
const SETTLE_ITERS: usize = 3;

/// Deterministic start vector: alternating ±1, normalized.
fn start_vector(n: usize) -> Vec<f64> {
    let s = 1.0 / (n as f64).sqrt();
    (0..n).map(|i| if i % 2 == 0 { s } else { -s }).collect()
}

/// Quasi-random start vector with a component along every eigenvector of
/// the usual structured test matrices.
fn perturbed_start(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|i| ((i + 1) as f64 * 0.618_033_988_749_894_9).fract() - 0.5)
        .collect();
    let nv = norm2(&v);
    scale(1.0 / nv, &mut v);
    v
}

/// Power iteration for the dominant eigenpair of a symmetric positive
/// semidefinite operator.
///
/// Stops once the Rayleigh quotient has settled: for `SETTLE_ITERS`
/// consecutive steps both its relative change and the extrapolated remaining
/// error (change · r / (1 − r), with r the ratio of successive changes) are
/// below `rel_tol`.
fn power_iterate(
    n: usize,
    start: Vec<f64>,
    mut apply: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    if n == 0 {
        return Ok((0.0, Vec::new()));
    }
    let mut v = start;
    let mut y = vec![0.0; n];
    apply(&v, &mut y)?;
    if norm2(&y) <= f64::MIN_POSITIVE.sqrt() {
        v = perturbed_start(n);
        apply(&v, &mut y)?;
        if norm2(&y) == 0.0 {
            // the alternating and perturbed vectors both map to zero;
            // fall back to the first unit vector before declaring a zero operator
            v = vec![0.0; n];
            v[0] = 1.0;
            apply(&v, &mut y)?;
        }
    }

    let mut lambda = dot(&v, &y);
    let mut prev_change = f64::NAN;
    let mut settled = 0;
    for it in 1..=max_iter {
        let ny = norm2(&y);
        if !ny.is_finite() {
            return Err(GaveError::NonFinite("power iteration overflowed".into()));
        }
        if ny == 0.0 {
            return Ok((0.0, v));
        }
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = yi / ny;
        }
        apply(&v, &mut y)?;
        let next = dot(&v, &y);
        let change = (next - lambda).abs() / next.abs().max(f64::MIN_POSITIVE);
        let ratio = change / prev_change;
        let extrapolated = if ratio.is_finite() && ratio < 1.0 {
            change * ratio / (1.0 - ratio)
        } else {
            change
        };
        lambda = next;
        prev_change = change;
        if change < rel_tol && extrapolated < rel_tol {
            settled += 1;
            if settled >= SETTLE_ITERS {
                return Ok((lambda, v));
            }
        } else {
            settled = 0;
        }
        if it == max_iter {
            break;
        }
    }
    Err(GaveError::NoConvergence {
        iterations: max_iter,
        estimate: lambda,
    })
}

/// Largest singular value `‖A‖₂` by power iteration on `AᵀA`, together with
/// the corresponding right singular vector.
pub fn spectral_norm_with_vector(
    a: &SparseMatrix,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    if !(rel_tol > 0.0) {
        return Err(GaveError::Parameter("rel_tol must be positive".into()));
    }
    let mut tmp = vec![0.0; a.n_rows()];
    let result = power_iterate(
        a.n_cols(),
        start_vector(a.n_cols()),
        |x, y| {
            a.spmv_into(x, &mut tmp);
            a.spmv_transpose_into(&tmp, y);
            Ok(())
        },
        rel_tol,
        max_iter,
    );
    match result {
        Ok((lambda, v)) => Ok((lambda.max(0.0).sqrt(), v)),
        Err(GaveError::NoConvergence { iterations, estimate }) => Err(GaveError::NoConvergence {
            iterations,
            estimate: estimate.max(0.0).sqrt(),
        }),
        Err(e) => Err(e),
    }
}

/// Largest singular value `‖A‖₂` by power iteration on `AᵀA`.
pub fn spectral_norm(a: &SparseMatrix, rel_tol: f64, max_iter: usize) -> Result<f64> {
    spectral_norm_with_vector(a, rel_tol, max_iter).map(|(s, _)| s)
}

/// `‖A‖₂` through the dense SVD for small matrices and power iteration otherwise.
pub fn operator_norm(a: &SparseMatrix) -> Result<f64> {
    if a.n_rows().max(a.n_cols()) <= DENSE_LIMIT {
        if a.nnz() == 0 {
            return Ok(0.0);
        }
        let sv = a.to_dense().singular_values();
        Ok(sv.iter().fold(0.0, |m, &s| m.max(s)))
    } else {
        spectral_norm(a, DEFAULT_REL_TOL, DEFAULT_MAX_ITER)
    }
}

/// Smallest singular value: dense SVD for `n <= DENSE_LIMIT`, inverse power
/// iteration through an LU factorization above.
pub fn min_singular_value(a: &SparseMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(GaveError::dim("min_singular_value needs a square matrix"));
    }
    if a.n_rows() <= DENSE_LIMIT {
        min_singular_value_dense(a)
    } else {
        min_singular_value_iterative(a, DEFAULT_REL_TOL, DEFAULT_MAX_ITER)
    }
}

pub fn min_singular_value_dense(a: &SparseMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(GaveError::dim("min_singular_value needs a square matrix"));
    }
    if a.n_rows() == 0 {
        return Err(GaveError::dim("empty matrix"));
    }
    let sv = a.to_dense().singular_values();
    let max = sv.iter().fold(0.0f64, |m, &s| m.max(s));
    let min = sv.iter().fold(f64::INFINITY, |m, &s| m.min(s));
    if !(min > 1e-14 * max) {
        return Err(GaveError::Singular(format!(
            "smallest singular value {min:e} relative to largest {max:e}"
        )));
    }
    Ok(min)
}

/// Inverse power iteration on `(AᵀA)⁻¹` using one LU factorization of `A`.
pub fn min_singular_value_iterative(
    a: &SparseMatrix,
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let lu = lu_factorize(a)?;
    let (lambda, _) = power_iterate(
        a.n_rows(),
        perturbed_start(a.n_rows()),
        |x, y| {
            let t = lu.solve_transpose(x)?;
            let s = lu.solve(&t)?;
            y.copy_from_slice(&s);
            Ok(())
        },
        rel_tol,
        max_iter,
    )?;
    if !(lambda > 0.0) {
        return Err(GaveError::Singular("inverse iteration produced no growth".into()));
    }
    Ok(1.0 / lambda.sqrt())
}

/// `H = ½(A + Aᵀ)` and `S = ½(A − Aᵀ)`.
///
/// `H` is bitwise symmetric and `S` bitwise antisymmetric. `H + S`
/// reproduces `A` exactly whenever `a_ij ± a_ji` are representable, and to
/// within one rounding otherwise.
pub fn hermitian_split(a: &SparseMatrix) -> Result<(SparseMatrix, SparseMatrix)> {
    if !a.is_square() {
        return Err(GaveError::dim("hermitian_split needs a square matrix"));
    }
    let at = a.transpose();
    let h = a.lin_comb(0.5, &at, 0.5)?;
    let s = a.lin_comb(0.5, &at, -0.5)?;
    Ok((h, s))
}

fn gershgorin_bounds(h: &SparseMatrix) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in 0..h.n_rows() {
        let mut d = 0.0;
        let mut off = 0.0;
        for (c, v) in h.row(r) {
            if c == r {
                d = v;
            } else {
                off += v.abs();
            }
        }
        lo = lo.min(d - off);
        hi = hi.max(d + off);
    }
    (lo, hi)
}

/// Extreme eigenvalues `(λ_min, λ_max)` of a symmetric matrix.
pub fn symmetric_eig_extremes(h: &SparseMatrix) -> Result<(f64, f64)> {
    if !h.is_square() {
        return Err(GaveError::dim("symmetric_eig_extremes needs a square matrix"));
    }
    if !h.is_symmetric(1e-12) {
        return Err(GaveError::Precondition("matrix is not symmetric".into()));
    }
    let n = h.n_rows();
    if n == 0 {
        return Err(GaveError::dim("empty matrix"));
    }
    if n <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(h.to_dense());
        let lo = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        let hi = eig.eigenvalues.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        return Ok((lo, hi));
    }

    let (g_lo, g_hi) = gershgorin_bounds(h);
    let span = (g_hi - g_lo).max(f64::MIN_POSITIVE);
    // Inverse iteration from shifts just outside the Gershgorin interval:
    // the eigenvalue nearest each shift is the corresponding extreme one.
    let below = g_lo - 1e-3 * span;
    let above = g_hi + 1e-3 * span;
    let lambda_min = rayleigh(h, &shifted_inverse_vector(h, below, 1.0)?);
    let lambda_max = rayleigh(h, &shifted_inverse_vector(h, above, -1.0)?);
    Ok((lambda_min, lambda_max))
}

fn rayleigh(h: &SparseMatrix, v: &[f64]) -> f64 {
    let mut hv = vec![0.0; v.len()];
    h.spmv_into(v, &mut hv);
    dot(v, &hv) / dot(v, v)
}

/// Dominant eigenvector of `(H − σI)⁻¹`. `σ` lies outside the spectrum:
/// `sign = 1` below it (H − σI positive definite), `sign = −1` above.
fn shifted_inverse_vector(h: &SparseMatrix, sigma: f64, sign: f64) -> Result<Vec<f64>> {
    let n = h.n_rows();
    let shifted = h.lin_comb(1.0, &SparseMatrix::identity(n), -sigma)?;
    let lu = lu_factorize(&shifted)?;
    // the alternating vector is nearly orthogonal to smooth eigenvectors
    let (_, v) = power_iterate(
        n,
        perturbed_start(n),
        |x, y| {
            y.copy_from_slice(x);
            lu.solve_in_place(y);
            for v in y.iter_mut() {
                *v *= sign;
            }
            Ok(())
        },
        DEFAULT_REL_TOL * 1e-4,
        DEFAULT_MAX_ITER,
    )?;
    Ok(v)
}

/// Largest eigenvalue modulus of an antisymmetric matrix, i.e. its spectral norm.
pub fn skew_spectral_radius(s: &SparseMatrix) -> Result<f64> {
    if !s.is_square() {
        return Err(GaveError::dim("skew_spectral_radius needs a square matrix"));
    }
    if !s.is_antisymmetric(1e-12) {
        return Err(GaveError::Precondition("matrix is not antisymmetric".into()));
    }
    operator_norm(s)
}

/// Dense helper used by the oracle paths: all singular values of a sparse matrix.
pub fn dense_singular_values(a: &SparseMatrix) -> Vec<f64> {
    let d: DMatrix<f64> = a.to_dense();
    d.singular_values().iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn random_dense(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut v = rng.random_range(-1.0..1.0);
                if i == j {
                    v += shift;
                }
                t.push((i, j, v));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    /// Largest eigenvalue of AᵀA via a symmetric eigensolver: independent of
    /// both the power iteration and the SVD route.
    fn oracle_sigma_max(a: &SparseMatrix) -> f64 {
        let d = a.to_dense();
        let g = d.transpose() * &d;
        SymmetricEigen::new(g).eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v)).sqrt()
    }

    #[test]
    fn spectral_norm_diagonal_and_identity() {
        let d = SparseMatrix::from_diagonal(&[1.0, -3.0, 2.0]);
        assert!((spectral_norm(&d, 1e-10, 10_000).unwrap() - 3.0).abs() < 1e-9);
        for n in [1, 4, 17] {
            let s = spectral_norm(&SparseMatrix::identity(n), 1e-10, 100).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(spectral_norm(&SparseMatrix::zeros(3, 3), 1e-8, 10).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_random_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let a = random_dense(&mut rng, 30, 0.0);
        let rel_tol = 1e-8;
        let est = spectral_norm(&a, rel_tol, DEFAULT_MAX_ITER).unwrap();
        let oracle = oracle_sigma_max(&a);
        assert!((est - oracle).abs() <= rel_tol * oracle, "{est} vs {oracle}");
    }

    #[test]
    fn spectral_norm_bounds_random_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = random_dense(&mut rng, 25, 0.5);
        let tol = 1e-8;
        let (sigma, v) = spectral_norm_with_vector(&a, tol, DEFAULT_MAX_ITER).unwrap();
        for _ in 0..50 {
            let mut x: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nx = norm2(&x);
            scale(1.0 / nx, &mut x);
            assert!(norm2(&a.spmv(&x).unwrap()) <= sigma * (1.0 + tol));
        }
        let attained = norm2(&a.spmv(&v).unwrap()) / norm2(&v);
        assert!((attained - sigma).abs() <= tol * sigma);
    }

    #[test]
    fn alternating_start_in_null_space_is_perturbed() {
        // rows sum to zero against (1,-1,1,-1): A maps the start vector to zero
        let a = SparseMatrix::from_dense_rows(&[
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 2.0, 2.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        let s = spectral_norm(&a, 1e-10, 1000).unwrap();
        assert!((s - 8f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn spectral_norm_reports_non_convergence_with_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_dense(&mut rng, 20, 0.0);
        match spectral_norm(&a, 1e-15, 2) {
            Err(GaveError::NoConvergence { iterations, estimate }) => {
                assert_eq!(iterations, 2);
                assert!(estimate > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn min_singular_value_examples() {
        let d = SparseMatrix::from_diagonal(&[1.0, -3.0, 2.0]);
        assert!((min_singular_value(&d).unwrap() - 1.0).abs() < 1e-14);
        let p = SparseMatrix::from_dense_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!((min_singular_value(&p).unwrap() - 1.0).abs() < 1e-14);
        let sing = SparseMatrix::from_dense_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(min_singular_value(&sing), Err(GaveError::Singular(_))));
        assert!(matches!(
            min_singular_value_iterative(&sing, 1e-8, 100),
            Err(GaveError::Singular(_))
        ));
    }

    #[test]
    fn min_singular_value_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let a = random_dense(&mut rng, 100, 12.0);
        let dense = min_singular_value_dense(&a).unwrap();
        let iter = min_singular_value_iterative(&a, 1e-10, DEFAULT_MAX_ITER).unwrap();
        assert!((dense - iter).abs() <= 1e-6 * dense, "{dense} vs {iter}");
    }

    #[test]
    fn min_singular_value_times_inverse_norm_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [5, 20, 50] {
            let a = random_dense(&mut rng, n, 4.0);
            let lu = lu_factorize(&a).unwrap();
            let mut inv = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let col = lu.solve(&e).unwrap();
                for i in 0..n {
                    inv[(i, j)] = col[i];
                }
            }
            let inv = SparseMatrix::from_dense(&inv);
            let prod = min_singular_value(&a).unwrap()
                * spectral_norm(&inv, 1e-12, DEFAULT_MAX_ITER).unwrap();
            assert!((prod - 1.0).abs() <= 1e-6, "n={n}: {prod}");
        }
    }

    #[test]
    fn hermitian_split_examples() {
        let sym = tridiag(4);
        let (h, s) = hermitian_split(&sym).unwrap();
        assert_eq!(h.to_dense(), sym.to_dense());
        assert_eq!(s.max_abs(), 0.0);

        let skew = SparseMatrix::from_dense_rows(&[vec![0.0, 2.0], vec![-2.0, 0.0]]).unwrap();
        let (h, s) = hermitian_split(&skew).unwrap();
        assert_eq!(h.max_abs(), 0.0);
        assert_eq!(s.to_dense(), skew.to_dense());

        let a = SparseMatrix::from_dense_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let (h, s) = hermitian_split(&a).unwrap();
        assert_eq!(h.to_dense(), DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn hermitian_split_exact_on_dyadic_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 20;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rng.random::<f64>() < 0.3 {
                    // small integers scaled by a power of two: a ± b is exact
                    t.push((i, j, rng.random_range(-64i32..64) as f64 / 8.0));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let (h, s) = hermitian_split(&a).unwrap();
        assert_eq!(h.transpose(), h);
        assert_eq!(s.transpose().scaled(-1.0).to_dense(), s.to_dense());
        assert_eq!(h.add(&s).unwrap().to_dense(), a.to_dense());
    }

    #[test]
    fn hermitian_split_general_floats() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_dense(&mut rng, 15, 0.0);
        let (h, s) = hermitian_split(&a).unwrap();
        assert_eq!(h.transpose(), h);
        for (r, c, v) in s.triplets() {
            assert_eq!(s.get(c, r), -v);
        }
        let sum = h.add(&s).unwrap();
        for (r, c, v) in a.triplets() {
            let scale = v.abs().max(a.get(c, r).abs());
            assert!((sum.get(r, c) - v).abs() <= f64::EPSILON * scale);
        }
    }

    #[test]
    fn symmetric_eig_extremes_examples() {
        let (lo, hi) = symmetric_eig_extremes(&SparseMatrix::from_diagonal(&[1.0, 2.0, 5.0])).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 5.0).abs() < 1e-14);
        let (lo, hi) = symmetric_eig_extremes(&SparseMatrix::identity(6)).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
        for m in [3usize, 10, 40] {
            let c = (std::f64::consts::PI / (m as f64 + 1.0)).cos();
            let (lo, hi) = symmetric_eig_extremes(&tridiag(m)).unwrap();
            assert!((lo - (4.0 - 2.0 * c)).abs() < 1e-12);
            assert!((hi - (4.0 + 2.0 * c)).abs() < 1e-12);
        }
        let asym = SparseMatrix::from_dense_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(symmetric_eig_extremes(&asym), Err(GaveError::Precondition(_))));
    }

    #[test]
    fn symmetric_eig_extremes_iterative_path() {
        // above DENSE_LIMIT: closed form for the tridiagonal family
        let m = 600;
        let c = (std::f64::consts::PI / (m as f64 + 1.0)).cos();
        let h = tridiag(m);
        let (lo, hi) = symmetric_eig_extremes(&h).unwrap();
        assert!((lo - (4.0 - 2.0 * c)).abs() <= 1e-6 * (4.0 - 2.0 * c));
        assert!((hi - (4.0 + 2.0 * c)).abs() <= 1e-6 * (4.0 + 2.0 * c));
    }

    #[test]
    fn skew_spectral_radius_examples() {
        assert_eq!(skew_spectral_radius(&SparseMatrix::zeros(3, 3)).unwrap(), 0.0);
        let s = SparseMatrix::from_dense_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert!((skew_spectral_radius(&s).unwrap() - 1.0).abs() < 1e-14);
        assert!(skew_spectral_radius(&SparseMatrix::identity(2)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_dense(&mut rng, 30, 0.0);
        let (_, s) = hermitian_split(&a).unwrap();
        let mu = skew_spectral_radius(&s).unwrap();
        let eig = s.to_dense().complex_eigenvalues();
        let oracle = eig.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!((mu - oracle).abs() <= 1e-8 * oracle, "{mu} vs {oracle}");
    }
}
