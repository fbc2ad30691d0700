//! Matrix splittings `A = M − N` and the shift matrix Ω for each named
//! Newton-based splitting method.

use std::fmt;
use std::str::FromStr;

use crate::error::{GaveError, Result};
use crate::linalg::{hermitian_split, SparseMatrix};

/// The named special cases of the Newton-based matrix splitting iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplittingKind {
    /// `M = A`, `N = 0`, `Ω = 0`.
    Picard,
    /// Modified Newton: `M = A`, `N = 0`.
    Mn,
    /// Newton-based Jacobi: `M = D`, `N = L + U`.
    Nj,
    /// Newton-based Gauss–Seidel: `M = D − L`, `N = U`.
    Ngs,
    /// Newton-based SOR.
    Nsor { alpha: f64 },
    /// Newton-based AOR.
    Naor { alpha: f64, beta: f64 },
    /// Hermitian / skew-Hermitian: `M = H`, `N = −S`.
    Hss,
    /// New modified Newton: `M = ½(A − Ω)`, `N = −½(A + Ω)`.
    Nmn,
    /// Douglas–Rachford: `M = A`, `N = 0`, `Ω = (2/γ − 1)A`.
    Drs { gamma: f64 },
}

impl SplittingKind {
    /// Lowercase CLI token.
    pub fn token(&self) -> &'static str {
        match self {
            SplittingKind::Picard => "picard",
            SplittingKind::Mn => "mn",
            SplittingKind::Nj => "nj",
            SplittingKind::Ngs => "ngs",
            SplittingKind::Nsor { .. } => "nsor",
            SplittingKind::Naor { .. } => "naor",
            SplittingKind::Hss => "hss",
            SplittingKind::Nmn => "nmn",
            SplittingKind::Drs { .. } => "drs",
        }
    }

    /// Builds a kind from its token and optional `alpha`, `beta`, `gamma`.
    pub fn from_token(
        token: &str,
        alpha: Option<f64>,
        beta: Option<f64>,
        gamma: Option<f64>,
    ) -> Result<Self> {
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| GaveError::Config(format!("splitting `{token}` needs `{name}`")))
        };
        Ok(match token.to_ascii_lowercase().as_str() {
            "picard" => SplittingKind::Picard,
            "mn" => SplittingKind::Mn,
            "nj" => SplittingKind::Nj,
            "ngs" => SplittingKind::Ngs,
            "nsor" => SplittingKind::Nsor {
                alpha: need("alpha", alpha)?,
            },
            "naor" => SplittingKind::Naor {
                alpha: need("alpha", alpha)?,
                beta: need("beta", beta)?,
            },
            "hss" => SplittingKind::Hss,
            "nmn" => SplittingKind::Nmn,
            "drs" => SplittingKind::Drs {
                gamma: need("gamma", gamma)?,
            },
            other => {
                return Err(GaveError::Config(format!("unknown splitting `{other}`")));
            }
        })
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            SplittingKind::Nsor { alpha } | SplittingKind::Naor { alpha, .. } => Some(alpha),
            _ => None,
        }
    }
}

impl fmt::Display for SplittingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SplittingKind::Nsor { alpha } => write!(f, "nsor(alpha={alpha})"),
            SplittingKind::Naor { alpha, beta } => write!(f, "naor(alpha={alpha},beta={beta})"),
            SplittingKind::Drs { gamma } => write!(f, "drs(gamma={gamma})"),
            other => f.write_str(other.token()),
        }
    }
}

/// How the shift matrix Ω is specified before it is materialized.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaSpec {
    Zero,
    ScalarTimesIdentity(f64),
    ScaledMatrix { c: f64, base: SparseMatrix },
    Explicit(SparseMatrix),
}

impl OmegaSpec {
    /// `Some(ω)` when Ω is a scalar multiple of the identity.
    pub fn scalar(&self) -> Option<f64> {
        match self {
            OmegaSpec::ScalarTimesIdentity(w) => Some(*w),
            _ => None,
        }
    }
}

/// Materializes Ω as an `n × n` sparse matrix.
pub fn resolve_omega(spec: &OmegaSpec, n: usize) -> Result<SparseMatrix> {
    let check = |m: &SparseMatrix| {
        if m.n_rows() != n || m.n_cols() != n {
            Err(GaveError::dim(format!(
                "Ω is {}x{}, expected {n}x{n}",
                m.n_rows(),
                m.n_cols()
            )))
        } else {
            Ok(())
        }
    };
    match spec {
        OmegaSpec::Zero => Ok(SparseMatrix::zeros(n, n)),
        OmegaSpec::ScalarTimesIdentity(w) => Ok(SparseMatrix::from_diagonal(&vec![*w; n])),
        OmegaSpec::ScaledMatrix { c, base } => {
            check(base)?;
            Ok(base.scaled(*c))
        }
        OmegaSpec::Explicit(m) => {
            check(m)?;
            Ok(m.clone())
        }
    }
}

/// `A = M − N` together with any Ω the method pins.
#[derive(Debug, Clone)]
pub struct Splitting {
    pub kind: SplittingKind,
    /// `M`, the matrix inverted (with Ω) at every step.
    pub m_part: SparseMatrix,
    /// `N = M − A`.
    pub n_part: SparseMatrix,
    /// Ω fixed by the method itself (NMN, DRS).
    pub implied_omega: Option<SparseMatrix>,
    /// Parameters accepted outside their conventional range.
    pub warnings: Vec<String>,
}

impl Splitting {
    /// The Ω a solver must use with this splitting: the pinned one when the
    /// method fixes it, the caller's otherwise. Picard always uses Ω = 0.
    pub fn effective_omega(&self, spec: &OmegaSpec) -> Result<SparseMatrix> {
        let n = self.m_part.n_rows();
        if let Some(pinned) = &self.implied_omega {
            return Ok(pinned.clone());
        }
        if self.kind == SplittingKind::Picard {
            return Ok(SparseMatrix::zeros(n, n));
        }
        resolve_omega(spec, n)
    }
}

/// Returns `(D, L, U)` with `A = D − L − U`: `D` the diagonal, `L` and `U`
/// the negated strictly lower and upper triangles.
pub fn triangular_parts(a: &SparseMatrix) -> Result<(SparseMatrix, SparseMatrix, SparseMatrix)> {
    if !a.is_square() {
        return Err(GaveError::dim("triangular_parts needs a square matrix"));
    }
    let d = a.filter(|r, c| r == c);
    let l = a.filter(|r, c| r > c).scaled(-1.0);
    let u = a.filter(|r, c| r < c).scaled(-1.0);
    Ok((d, l, u))
}

fn is_zero_spec(spec: &OmegaSpec, n: usize) -> Result<bool> {
    Ok(match spec {
        OmegaSpec::Zero => true,
        other => resolve_omega(other, n)?.max_abs() == 0.0,
    })
}

/// Builds the splitting for `kind`.
///
/// Picard and DRS pin Ω themselves; passing a different nonzero Ω for them is
/// a configuration error. NMN defines `M` and `N` through Ω and rejects
/// `OmegaSpec::Zero`.
pub fn build_splitting(a: &SparseMatrix, kind: SplittingKind, omega: &OmegaSpec) -> Result<Splitting> {
    if !a.is_square() {
        return Err(GaveError::dim("splittings need a square matrix"));
    }
    let n = a.n_rows();
    let zero = SparseMatrix::zeros(n, n);
    let mut warnings = Vec::new();
    let mut implied_omega = None;

    let (m_part, n_part) = match kind {
        SplittingKind::Picard => {
            if !is_zero_spec(omega, n)? {
                return Err(GaveError::Config("the Picard method fixes Ω = 0".into()));
            }
            (a.clone(), zero)
        }
        SplittingKind::Mn => (a.clone(), zero),
        SplittingKind::Nj => {
            let (d, l, u) = triangular_parts(a)?;
            (d, l.add(&u)?)
        }
        SplittingKind::Ngs => {
            let (d, l, u) = triangular_parts(a)?;
            (d.sub(&l)?, u)
        }
        SplittingKind::Nsor { alpha } => {
            if !(alpha > 0.0 && alpha < 2.0) {
                return Err(GaveError::Parameter(format!("NSOR needs alpha in (0, 2), got {alpha}")));
            }
            relaxed_parts(a, alpha, alpha)?
        }
        SplittingKind::Naor { alpha, beta } => {
            if !(alpha.is_finite() && alpha != 0.0 && beta.is_finite()) {
                return Err(GaveError::Parameter(format!(
                    "NAOR needs finite nonzero alpha and finite beta, got ({alpha}, {beta})"
                )));
            }
            if !(alpha > 0.0 && alpha < 2.0) {
                warnings.push(format!("NAOR alpha = {alpha} outside (0, 2)"));
            }
            if !(0.0..=alpha).contains(&beta) {
                warnings.push(format!("NAOR beta = {beta} outside [0, alpha]"));
            }
            relaxed_parts(a, alpha, beta)?
        }
        SplittingKind::Hss => {
            let (h, s) = hermitian_split(a)?;
            (h, s.scaled(-1.0))
        }
        SplittingKind::Nmn => {
            if is_zero_spec(omega, n)? {
                return Err(GaveError::Config(
                    "NMN is defined through Ω; supply a nonzero Ω".into(),
                ));
            }
            let om = resolve_omega(omega, n)?;
            let m = a.lin_comb(0.5, &om, -0.5)?;
            let nn = a.lin_comb(-0.5, &om, -0.5)?;
            implied_omega = Some(om);
            (m, nn)
        }
        SplittingKind::Drs { gamma } => {
            if !(gamma > 0.0 && gamma < 2.0) {
                return Err(GaveError::Parameter(format!("DRS needs gamma in (0, 2), got {gamma}")));
            }
            let pinned = a.scaled(2.0 / gamma - 1.0);
            if !is_zero_spec(omega, n)? && resolve_omega(omega, n)?.to_dense() != pinned.to_dense() {
                return Err(GaveError::Config(
                    "the Douglas–Rachford method fixes Ω = (2/γ − 1)A".into(),
                ));
            }
            implied_omega = Some(pinned);
            (a.clone(), zero)
        }
    };

    Ok(Splitting {
        kind,
        m_part,
        n_part,
        implied_omega,
        warnings,
    })
}

/// `M = (1/α)(D − βL)`, `N = (1/α − 1)D + ((α − β)/α)L + U`.
/// With `β = α` this is the SOR splitting, with `α = β = 1` Gauss–Seidel.
fn relaxed_parts(a: &SparseMatrix, alpha: f64, beta: f64) -> Result<(SparseMatrix, SparseMatrix)> {
    let (d, l, u) = triangular_parts(a)?;
    let m = d.lin_comb(1.0 / alpha, &l, -(beta / alpha))?;
    let n = d
        .lin_comb(1.0 / alpha - 1.0, &l, (alpha - beta) / alpha)?
        .add(&u)?;
    Ok((m, n))
}

impl FromStr for SplittingKind {
    type Err = GaveError;

    /// Parses `token` or `token:key=value,key=value`, e.g. `nsor:alpha=0.9`.
    fn from_str(s: &str) -> Result<Self> {
        let (token, params) = s.split_once(':').unwrap_or((s, ""));
        let (mut alpha, mut beta, mut gamma) = (None, None, None);
        for kv in params.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| GaveError::Config(format!("bad parameter `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| GaveError::Config(format!("bad value in `{kv}`")))?;
            match k.trim() {
                "alpha" => alpha = Some(v),
                "beta" => beta = Some(v),
                "gamma" => gamma = Some(v),
                other => return Err(GaveError::Config(format!("unknown parameter `{other}`"))),
            }
        }
        SplittingKind::from_token(token.trim(), alpha, beta, gamma)
    }
}
