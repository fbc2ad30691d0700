//! LSQR: Golub–Kahan bidiagonalization applied to `min ‖A x − b‖`.
//!
//! The solver runs until the true residual `‖A x − rhs‖` drops below an
//! absolute target. The recurrence's residual estimate drives the loop; the
//! true residual is recomputed before accepting a point.

use super::sparse::SparseMatrix;
use super::vector::{all_finite, axpy, norm2, scale};
use crate::error::{GaveError, Result};

/// Iterations without a relative improvement of `STAGNATION_REL` that count as stagnation.
pub const STAGNATION_WINDOW: usize = 20;
pub const STAGNATION_REL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsqrStop {
    TargetMet,
    MaxIter,
    Stagnation,
}

#[derive(Debug, Clone)]
pub struct LsqrOutcome {
    pub x: Vec<f64>,
    /// `‖A x − rhs‖`, recomputed directly from `x`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub stop_reason: LsqrStop,
}

fn true_residual(a: &SparseMatrix, x: &[f64], rhs: &[f64], work: &mut [f64]) -> f64 {
    a.spmv_into(x, work);
    work.iter()
        .zip(rhs)
        .map(|(ax, b)| (ax - b) * (ax - b))
        .sum::<f64>()
        .sqrt()
}

/// Solves `A x ≈ rhs` until `‖A x − rhs‖ ≤ target_residual` or `max_iter` steps.
///
/// With `warm_start = Some(w)` the correction system `A d = rhs − A w` is
/// solved instead and `x = w + d` is returned; the residual contract refers
/// to the original system either way. Reaching `max_iter` is reported via
/// [`LsqrStop::MaxIter`], not as an error.
pub fn lsqr(
    a: &SparseMatrix,
    rhs: &[f64],
    target_residual: f64,
    max_iter: usize,
    warm_start: Option<&[f64]>,
) -> Result<LsqrOutcome> {
    let (m, n) = (a.n_rows(), a.n_cols());
    if rhs.len() != m {
        return Err(GaveError::dim(format!(
            "lsqr: matrix has {m} rows, rhs has length {}",
            rhs.len()
        )));
    }
    if !(target_residual >= 0.0) {
        return Err(GaveError::Parameter(format!(
            "lsqr target residual must be >= 0, got {target_residual}"
        )));
    }
    let x0 = match warm_start {
        Some(w) if w.len() != n => {
            return Err(GaveError::dim("lsqr: warm start length mismatch"));
        }
        Some(w) => w.to_vec(),
        None => vec![0.0; n],
    };
    if !all_finite(rhs) || !all_finite(&x0) {
        return Err(GaveError::NonFinite("lsqr input contains NaN or infinity".into()));
    }

    let mut work = vec![0.0; m];
    // u = rhs - A x0
    let mut u = vec![0.0; m];
    a.spmv_into(&x0, &mut u);
    for (ui, bi) in u.iter_mut().zip(rhs) {
        *ui = bi - *ui;
    }
    let mut beta = norm2(&u);
    let r0_norm = beta;
    if beta <= target_residual {
        return Ok(LsqrOutcome {
            x: x0,
            residual_norm: beta,
            iterations: 0,
            stop_reason: LsqrStop::TargetMet,
        });
    }
    scale(1.0 / beta, &mut u);
    let mut v = vec![0.0; n];
    a.spmv_transpose_into(&u, &mut v);
    let mut alpha = norm2(&v);
    if alpha == 0.0 {
        // rhs - A x0 is orthogonal to range(A): x0 is already a least-squares solution
        return Ok(LsqrOutcome {
            x: x0,
            residual_norm: beta,
            iterations: 0,
            stop_reason: LsqrStop::Stagnation,
        });
    }
    scale(1.0 / alpha, &mut v);

    let mut w = v.clone();
    let mut d = vec![0.0; n];
    let mut x = x0.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm_sq = alpha * alpha;
    let mut best = phibar;
    let mut since_improvement = 0usize;
    let mut tmp_m = vec![0.0; m];
    let mut tmp_n = vec![0.0; n];

    let eps = f64::EPSILON;
    let mut iterations = 0;
    let stop_reason = loop {
        if iterations >= max_iter {
            break LsqrStop::MaxIter;
        }
        iterations += 1;

        // bidiagonalization step
        a.spmv_into(&v, &mut tmp_m);
        for (ui, ai) in u.iter_mut().zip(&tmp_m) {
            *ui = ai - alpha * *ui;
        }
        beta = norm2(&u);
        if beta > 0.0 {
            scale(1.0 / beta, &mut u);
        }
        a.spmv_transpose_into(&u, &mut tmp_n);
        for (vi, ati) in v.iter_mut().zip(&tmp_n) {
            *vi = ati - beta * *vi;
        }
        alpha = norm2(&v);
        if alpha > 0.0 {
            scale(1.0 / alpha, &mut v);
        }
        anorm_sq += alpha * alpha + beta * beta;

        // plane rotation
        let rho = rhobar.hypot(beta);
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;

        axpy(phi / rho, &w, &mut d);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = vi - (theta / rho) * *wi;
        }
        if !phibar.is_finite() || !phi.is_finite() {
            return Err(GaveError::NonFinite(format!(
                "lsqr recurrence produced a non-finite value at iteration {iterations}"
            )));
        }

        let breakdown = alpha == 0.0 || beta == 0.0;
        let d_norm = norm2(&d);
        let floor = 4.0 * eps * (anorm_sq.sqrt() * d_norm + r0_norm);

        if phibar <= target_residual || breakdown || phibar <= floor {
            for (xi, (x0i, di)) in x.iter_mut().zip(x0.iter().zip(&d)) {
                *xi = x0i + di;
            }
            let r = true_residual(a, &x, rhs, &mut work);
            if r <= target_residual {
                break LsqrStop::TargetMet;
            }
            if breakdown || phibar <= floor {
                break LsqrStop::Stagnation;
            }
        }

        if phibar < best * (1.0 - STAGNATION_REL) {
            best = phibar;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= STAGNATION_WINDOW {
                break LsqrStop::Stagnation;
            }
        }
    };

    for (xi, (x0i, di)) in x.iter_mut().zip(x0.iter().zip(&d)) {
        *xi = x0i + di;
    }
    if !all_finite(&x) {
        return Err(GaveError::NonFinite("lsqr iterate is not finite".into()));
    }
    let residual_norm = true_residual(a, &x, rhs, &mut work);
    Ok(LsqrOutcome {
        x,
        residual_norm,
        iterations,
        stop_reason,
    })
}
