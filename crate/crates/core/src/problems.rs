//! GAVE instances: the LCP-derived grid family, the LCP ↔ GAVE reduction,
//! seeded random instances with a known solution, and a directory format.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GaveError, Result};
use crate::io::{load_matrix, load_vector, save_matrix, save_vector};
use crate::linalg::spectral::{spectral_norm, DEFAULT_MAX_ITER};
use crate::linalg::vector::{abs_vec, norm2};
use crate::linalg::SparseMatrix;

/// Provenance tag for problems produced by the LCP reduction.
pub const LCP_REDUCTION: &str = "lcp-reduction";
/// Provenance tag for [`gen_certified`] output.
pub const CERTIFIED: &str = "certified";

/// `A x − B |x| = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaveProblem {
    pub a: SparseMatrix,
    pub b_mat: SparseMatrix,
    pub b: Vec<f64>,
    pub known_solution: Option<Vec<f64>>,
    pub provenance: String,
}

impl GaveProblem {
    pub fn new(a: SparseMatrix, b_mat: SparseMatrix, b: Vec<f64>) -> Result<Self> {
        let n = a.n_rows();
        if !a.is_square() || !b_mat.is_square() || b_mat.n_rows() != n || b.len() != n {
            return Err(GaveError::dim(format!(
                "A is {}x{}, B is {}x{}, b has length {}",
                a.n_rows(),
                a.n_cols(),
                b_mat.n_rows(),
                b_mat.n_cols(),
                b.len()
            )));
        }
        Ok(GaveProblem {
            a,
            b_mat,
            b,
            known_solution: None,
            provenance: String::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.a.n_rows()
    }

    /// `A x − B|x| − b`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(GaveError::dim(format!(
                "x has length {}, problem has order {}",
                x.len(),
                self.n()
            )));
        }
        let mut f = self.a.spmv(x)?;
        let bx = self.b_mat.spmv(&abs_vec(x))?;
        for ((fi, bi), rhs) in f.iter_mut().zip(&bx).zip(&self.b) {
            *fi = *fi - bi - rhs;
        }
        Ok(f)
    }
}

/// LCP(M, q): find `z ≥ 0` with `w = M z + q ≥ 0` and `zᵀw = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LcpInstance {
    pub matrix: SparseMatrix,
    pub q: Vec<f64>,
    pub known_solution: Option<Vec<f64>>,
}

/// The grid LCP family together with its GAVE form and the unshifted matrix
/// `M̂`, from which the usual Ω choices (`M̂`, `1.5 M̂`) are formed.
#[derive(Debug, Clone)]
pub struct LcpGrid {
    pub lcp: LcpInstance,
    pub problem: GaveProblem,
    pub hat_m: SparseMatrix,
    pub m: usize,
    pub mu: f64,
}

/// Block-tridiagonal `tridiag(−I, S, −I)` with `S = tridiag(−1, 4, −1)` of
/// order `m`, i.e. the five-point Laplacian on an `m × m` grid (order `m²`).
pub fn grid_laplacian(m: usize) -> SparseMatrix {
    let n = m * m;
    let mut t = Vec::with_capacity(5 * n);
    for bi in 0..m {
        for bj in 0..m {
            let r = bi * m + bj;
            if bi > 0 {
                t.push((r, r - m, -1.0));
            }
            if bj > 0 {
                t.push((r, r - 1, -1.0));
            }
            t.push((r, r, 4.0));
            if bj + 1 < m {
                t.push((r, r + 1, -1.0));
            }
            if bi + 1 < m {
                t.push((r, r + m, -1.0));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("grid indices are in range")
}

/// The grid LCP with `M = M̂ + μI`, `z* = 1.2·1`, `q = −M z*`, reduced to
/// a GAVE whose solution is `x* = −0.6·1`.
pub fn gen_lcp_grid(m: usize, mu: f64) -> Result<LcpGrid> {
    if m < 2 {
        return Err(GaveError::Parameter(format!("grid size m must be >= 2, got {m}")));
    }
    if !mu.is_finite() {
        return Err(GaveError::Parameter("mu must be finite".into()));
    }
    let hat_m = grid_laplacian(m);
    let n = m * m;
    let matrix = hat_m.lin_comb(1.0, &SparseMatrix::identity(n), mu)?;
    let z = vec![1.2; n];
    let mut q = matrix.spmv(&z)?;
    q.iter_mut().for_each(|v| *v = -*v);
    let lcp = LcpInstance {
        matrix,
        q,
        known_solution: Some(z),
    };
    let mut problem = lcp_to_gave(&lcp)?;
    problem.known_solution = Some(vec![-0.6; n]);
    problem.provenance = format!("{LCP_REDUCTION} grid m={m} mu={mu}");
    Ok(LcpGrid {
        lcp,
        problem,
        hat_m,
        m,
        mu,
    })
}

/// `A = M + I`, `B = M − I`, `b = q`; a known `z*` maps to `x* = ½[(M − I)z* + q]`.
pub fn lcp_to_gave(lcp: &LcpInstance) -> Result<GaveProblem> {
    let mat = &lcp.matrix;
    if !mat.is_square() || lcp.q.len() != mat.n_rows() {
        return Err(GaveError::dim("LCP matrix and q are inconsistent"));
    }
    let eye = SparseMatrix::identity(mat.n_rows());
    let a = mat.lin_comb(1.0, &eye, 1.0)?;
    let b_mat = mat.lin_comb(1.0, &eye, -1.0)?;
    let known_solution = match &lcp.known_solution {
        Some(z) => {
            let mut x = b_mat.spmv(z)?;
            for (xi, qi) in x.iter_mut().zip(&lcp.q) {
                *xi = 0.5 * (*xi + qi);
            }
            Some(x)
        }
        None => None,
    };
    let mut p = GaveProblem::new(a, b_mat, lcp.q.clone())?;
    p.known_solution = known_solution;
    p.provenance = LCP_REDUCTION.to_string();
    Ok(p)
}

/// Maps a GAVE point back to the LCP pair `z = |x| − x`, `w = |x| + x`.
pub fn gave_to_lcp(problem: &GaveProblem, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if !problem.provenance.starts_with(LCP_REDUCTION) {
        return Err(GaveError::Precondition(format!(
            "problem provenance `{}` is not an LCP reduction",
            problem.provenance
        )));
    }
    if x.len() != problem.n() {
        return Err(GaveError::dim("x length does not match the problem"));
    }
    let z = x.iter().map(|v| v.abs() - v).collect();
    let w = x.iter().map(|v| v.abs() + v).collect();
    Ok((z, w))
}

fn random_sparse(rng: &mut ChaCha8Rng, n: usize, per_row: usize) -> SparseMatrix {
    let p = (per_row as f64 / n as f64).min(1.0);
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng.random::<f64>() < p {
                t.push((i, j, rng.random_range(-1.0..=1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("indices are in range")
}

/// Expected off-diagonal entries per row of the random parts.
const ENTRIES_PER_ROW: usize = 6;

/// Seeded instance with `σ_min(A) ≥ dominance − 1 > ‖B‖₂ = b_norm_scale`.
///
/// `A = dominance·I + R` where `R` has entries uniform on `[−1, 1]` and is
/// scaled so that `max(‖R‖₁, ‖R‖∞) ≤ 1`, hence `‖R‖₂ ≤ 1`. `B` is random
/// with its spectral norm rescaled to `b_norm_scale`. `x*` has entries in
/// `{−1, 1}` and `b = A x* − B|x*|`. The generator is ChaCha8 seeded with
/// `seed`.
pub fn gen_certified(n: usize, seed: u64, b_norm_scale: f64, dominance: f64) -> Result<GaveProblem> {
    if n == 0 {
        return Err(GaveError::Parameter("n must be positive".into()));
    }
    if !(dominance > 1.0) || !dominance.is_finite() {
        return Err(GaveError::Parameter(format!("dominance must exceed 1, got {dominance}")));
    }
    if !(b_norm_scale >= 0.0) || b_norm_scale >= dominance - 1.0 {
        return Err(GaveError::Parameter(format!(
            "b_norm_scale = {b_norm_scale} must lie in [0, dominance − 1 = {})",
            dominance - 1.0
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let r = random_sparse(&mut rng, n, ENTRIES_PER_ROW);
    let bound = r.norm_one().max(r.norm_inf());
    let r = if bound > 0.0 { r.scaled(1.0 / bound) } else { r };
    let a = r.lin_comb(1.0, &SparseMatrix::identity(n), dominance)?;

    let raw_b = random_sparse(&mut rng, n, ENTRIES_PER_ROW);
    let b_mat = if b_norm_scale == 0.0 || raw_b.nnz() == 0 {
        SparseMatrix::zeros(n, n)
    } else {
        let tau = spectral_norm(&raw_b, 1e-8, DEFAULT_MAX_ITER)?;
        raw_b.scaled(b_norm_scale / tau)
    };

    let x: Vec<f64> = (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut b = a.spmv(&x)?;
    let bx = b_mat.spmv(&abs_vec(&x))?;
    for (bi, v) in b.iter_mut().zip(&bx) {
        *bi -= v;
    }

    // re-check against the estimated norms
    let sigma = crate::linalg::min_singular_value(&a)?;
    let tau = if b_mat.nnz() == 0 {
        0.0
    } else {
        spectral_norm(&b_mat, 1e-8, DEFAULT_MAX_ITER)?
    };
    if !(sigma > tau) {
        return Err(GaveError::Precondition(format!(
            "generated instance has sigma_min(A) = {sigma} <= ||B|| = {tau}"
        )));
    }

    let mut p = GaveProblem::new(a, b_mat, b)?;
    p.known_solution = Some(x);
    p.provenance = format!("{CERTIFIED} n={n} seed={seed} b_norm_scale={b_norm_scale} dominance={dominance}");
    Ok(p)
}

/// Contents of the `meta` file in a problem directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub provenance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Writes `A.mtx`, `B.mtx`, `b.txt`, `xstar.txt` (when known) and `meta`.
pub fn save_problem(problem: &GaveProblem, meta: &ProblemMeta, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_matrix(&problem.a, &dir.join("A.mtx"))?;
    save_matrix(&problem.b_mat, &dir.join("B.mtx"))?;
    save_vector(&problem.b, &dir.join("b.txt"))?;
    if let Some(x) = &problem.known_solution {
        save_vector(x, &dir.join("xstar.txt"))?;
    }
    let text = toml::to_string(meta).map_err(|e| GaveError::Config(e.to_string()))?;
    fs::write(dir.join("meta"), text)?;
    Ok(())
}

pub fn load_problem(dir: &Path) -> Result<(GaveProblem, ProblemMeta)> {
    let a = load_matrix(&dir.join("A.mtx"))?;
    let b_mat = load_matrix(&dir.join("B.mtx"))?;
    let b = load_vector(&dir.join("b.txt"))?;
    let mut p = GaveProblem::new(a, b_mat, b)?;
    let xs = dir.join("xstar.txt");
    if xs.exists() {
        let x = load_vector(&xs)?;
        if x.len() != p.n() {
            return Err(GaveError::dim("xstar.txt length does not match the problem"));
        }
        p.known_solution = Some(x);
    }
    let meta_path = dir.join("meta");
    let meta: ProblemMeta = if meta_path.exists() {
        toml::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| GaveError::Parse {
            location: meta_path.display().to_string(),
            message: e.to_string(),
        })?
    } else {
        ProblemMeta::default()
    };
    p.provenance = meta.provenance.clone();
    Ok((p, meta))
}

/// `‖A x* − B|x*| − b‖`, or `None` when no solution is attached.
pub fn known_solution_residual(problem: &GaveProblem) -> Result<Option<f64>> {
    match &problem.known_solution {
        Some(x) => Ok(Some(norm2(&problem.residual(x)?))),
        None => Ok(None),
    }
}
