//! Sufficient convergence conditions for the exact and inexact iterations,
//! evaluated numerically.
//!
//! Each check returns a [`Certificate`] holding both sides of a strict
//! inequality `lhs < rhs` and the norms that went into it. Inverse norms are
//! always computed as `1 / σ_min`, never by forming an inverse.

use std::fmt;

use crate::error::{GaveError, Result};
use crate::linalg::spectral::{
    hermitian_split, min_singular_value, operator_norm, skew_spectral_radius,
    symmetric_eig_extremes, DENSE_LIMIT,
};
use crate::linalg::SparseMatrix;

/// Relative width of the band around equality reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    /// `‖(M+Ω)⁻¹‖(‖N+Ω‖ + ‖B‖) < 1`.
    Exact,
    /// `‖(Ω+M)⁻¹‖ < 1 / (θ(‖Ω+M‖ + ‖Ω+N‖ + ‖B‖) + ‖Ω+N‖ + ‖B‖)`.
    Inexact,
    /// Same bracket plus `‖Ω‖`, bounded through `‖M⁻¹‖`.
    MInverse,
    /// `Ω = ωI`, `M = H`, `N = −S`, in terms of the spectra of `H` and `S`.
    ScalarOmega,
    ModifiedNewton,
    ModifiedNewtonAInverse,
    NewModifiedNewton,
    NewModifiedNewtonAInverse,
    Picard,
    Ave,
    AveMInverse,
    DouglasRachford,
    DouglasRachfordAlt,
    AveScalarOmega,
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::Exact => "exact",
            Condition::Inexact => "inexact",
            Condition::MInverse => "m-inverse",
            Condition::ScalarOmega => "scalar-omega",
            Condition::ModifiedNewton => "mn",
            Condition::ModifiedNewtonAInverse => "mn-a-inverse",
            Condition::NewModifiedNewton => "nmn",
            Condition::NewModifiedNewtonAInverse => "nmn-a-inverse",
            Condition::Picard => "picard",
            Condition::Ave => "ave",
            Condition::AveMInverse => "ave-m-inverse",
            Condition::DouglasRachford => "drs",
            Condition::DouglasRachfordAlt => "drs-alt",
            Condition::AveScalarOmega => "ave-scalar-omega",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One norm or spectral quantity used by a certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct NormDetail {
    pub label: String,
    pub value: f64,
    pub method: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Marginal,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "true",
            Verdict::Fails => "false",
            Verdict::Marginal => "marginal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub condition: Condition,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs < rhs` as computed.
    pub holds: bool,
    /// `|lhs − rhs| ≤ MARGINAL_BAND · (|lhs| + |rhs|)`.
    pub marginal: bool,
    /// Error-reduction factor bounding `‖x_{k+1} − x*‖ / ‖x_k − x*‖`, when
    /// the condition determines it.
    pub contraction_factor: Option<f64>,
    pub norm_details: Vec<NormDetail>,
}

impl Certificate {
    fn new(condition: Condition, lhs: f64, rhs: f64, log: NormLog) -> Self {
        Certificate {
            condition,
            lhs,
            rhs,
            holds: lhs < rhs,
            marginal: (lhs - rhs).abs() <= MARGINAL_BAND * (lhs.abs() + rhs.abs()),
            contraction_factor: None,
            norm_details: log.details,
        }
    }

    fn with_factor(mut self, factor: f64) -> Self {
        self.contraction_factor = Some(factor);
        self
    }

    pub fn verdict(&self) -> Verdict {
        if self.marginal {
            Verdict::Marginal
        } else if self.holds {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn detail(&self, label: &str) -> Option<f64> {
        self.norm_details.iter().find(|d| d.label == label).map(|d| d.value)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} lhs={:.16e} rhs={:.16e} holds={}",
            self.condition,
            self.lhs,
            self.rhs,
            self.verdict()
        )
    }
}

#[derive(Default)]
struct NormLog {
    details: Vec<NormDetail>,
}

impl NormLog {
    fn push(&mut self, label: &str, value: f64, method: &'static str) -> f64 {
        self.details.push(NormDetail {
            label: label.to_string(),
            value,
            method,
        });
        value
    }

    fn norm(&mut self, label: &str, a: &SparseMatrix) -> Result<f64> {
        let method = if a.n_rows().min(a.n_cols()) <= DENSE_LIMIT {
            "dense-svd"
        } else {
            "power-iteration"
        };
        let v = operator_norm(a)?;
        Ok(self.push(label, v, method))
    }

    fn inv_norm(&mut self, label: &str, a: &SparseMatrix) -> Result<f64> {
        let method = if a.n_rows() <= DENSE_LIMIT {
            "dense-svd"
        } else {
            "inverse-iteration"
        };
        let s = min_singular_value(a)?;
        Ok(self.push(label, 1.0 / s, method))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&theta) {
        return Err(GaveError::Parameter(format!("theta must lie in [0, 1), got {theta}")));
    }
    Ok(())
}

fn check_square(mats: &[&SparseMatrix]) -> Result<usize> {
    let n = mats[0].n_rows();
    if mats.iter().any(|m| m.n_rows() != n || m.n_cols() != n) {
        return Err(GaveError::dim("certificate inputs must be square of equal order"));
    }
    Ok(n)
}

/// Exact-iteration condition `‖(M+Ω)⁻¹‖(‖N+Ω‖ + ‖B‖) < 1`.
pub fn check_exact(
    a: &SparseMatrix,
    b: &SparseMatrix,
    m: &SparseMatrix,
    n: &SparseMatrix,
    omega: &SparseMatrix,
) -> Result<Certificate> {
    check_square(&[a, b, m, n, omega])?;
    let mut log = NormLog::default();
    let inv = log.inv_norm("‖(Ω+M)⁻¹‖", &omega.add(m)?)?;
    let on = log.norm("‖Ω+N‖", &omega.add(n)?)?;
    let nb = log.norm("‖B‖", b)?;
    let lhs = inv * (on + nb);
    Ok(Certificate::new(Condition::Exact, lhs, 1.0, log).with_factor(lhs))
}

/// Inexact-iteration condition with the contraction factor
/// `‖(Ω+M)⁻¹‖ [θ(‖Ω+M‖ + ‖Ω+N‖ + ‖B‖) + ‖Ω+N‖ + ‖B‖]`.
pub fn check_inexact(
    a: &SparseMatrix,
    b: &SparseMatrix,
    m: &SparseMatrix,
    n: &SparseMatrix,
    omega: &SparseMatrix,
    theta: f64,
) -> Result<Certificate> {
    check_theta(theta)?;
    check_square(&[a, b, m, n, omega])?;
    let mut log = NormLog::default();
    let om_m = omega.add(m)?;
    let inv = log.inv_norm("‖(Ω+M)⁻¹‖", &om_m)?;
    let nm = log.norm("‖Ω+M‖", &om_m)?;
    let on = log.norm("‖Ω+N‖", &omega.add(n)?)?;
    let nb = log.norm("‖B‖", b)?;
    let bracket = theta * (nm + on + nb) + on + nb;
    Ok(Certificate::new(Condition::Inexact, inv, 1.0 / bracket, log).with_factor(inv * bracket))
}

/// `‖M⁻¹‖ < 1 / (θ(‖Ω+M‖ + ‖Ω+N‖ + ‖B‖) + ‖Ω+N‖ + ‖B‖ + ‖Ω‖)`, which
/// implies the inexact condition by a Banach perturbation argument.
pub fn check_m_inverse(
    a: &SparseMatrix,
    b: &SparseMatrix,
    m: &SparseMatrix,
    n: &SparseMatrix,
    omega: &SparseMatrix,
    theta: f64,
) -> Result<Certificate> {
    check_theta(theta)?;
    check_square(&[a, b, m, n, omega])?;
    let mut log = NormLog::default();
    let inv = log.inv_norm("‖M⁻¹‖", m)?;
    let nm = log.norm("‖Ω+M‖", &omega.add(m)?)?;
    let on = log.norm("‖Ω+N‖", &omega.add(n)?)?;
    let nb = log.norm("‖B‖", b)?;
    let no = log.norm("‖Ω‖", omega)?;
    let rhs = 1.0 / (theta * (nm + on + nb) + on + nb + no);
    Ok(Certificate::new(Condition::MInverse, inv, rhs, log))
}

struct ScalarSpectra {
    lambda_min: f64,
    lambda_max: f64,
    mu_max: f64,
}

fn scalar_spectra(a: &SparseMatrix, log: &mut NormLog) -> Result<ScalarSpectra> {
    let (h, s) = hermitian_split(a)?;
    let method = if a.n_rows() <= DENSE_LIMIT {
        "dense-eigen"
    } else {
        "inverse-iteration"
    };
    let (lambda_min, lambda_max) = symmetric_eig_extremes(&h)?;
    if !(lambda_min > 0.0) {
        return Err(GaveError::Precondition(format!(
            "symmetric part of A is not positive definite (λ_min = {lambda_min:e})"
        )));
    }
    log.push("λ_min(H)", lambda_min, method);
    log.push("λ_max(H)", lambda_max, method);
    let mu_max = skew_spectral_radius(&s)?;
    log.push("μ_max(S)", mu_max, if a.n_rows() <= DENSE_LIMIT { "dense-svd" } else { "power-iteration" });
    Ok(ScalarSpectra {
        lambda_min,
        lambda_max,
        mu_max,
    })
}

fn scalar_certificate(
    condition: Condition,
    sp: &ScalarSpectra,
    omega: f64,
    tau: f64,
    theta: f64,
    log: NormLog,
) -> Certificate {
    let root = omega.hypot(sp.mu_max);
    let lhs = root + theta * (omega + sp.lambda_max + tau + root);
    let rhs = omega + sp.lambda_min - tau;
    let factor = (theta * (omega + sp.lambda_max + root + tau) + root + tau) / (omega + sp.lambda_min);
    Certificate::new(condition, lhs, rhs, log).with_factor(factor)
}

/// Condition for `Ω = ωI`, `M = H`, `N = −S` with `A = H + S`:
/// `√(ω² + μ_max²) + θ(ω + λ_max + τ + √(ω² + μ_max²)) < ω + λ_min − τ`,
/// where `λ` are eigenvalues of `H`, `μ_max` the spectral radius of `S` and
/// `τ = ‖B‖`. Reported with `lhs` the left of that inequality.
pub fn check_scalar_omega(a: &SparseMatrix, b: &SparseMatrix, omega: f64, theta: f64) -> Result<Certificate> {
    check_theta(theta)?;
    check_square(&[a, b])?;
    if !(omega > 0.0) {
        return Err(GaveError::Parameter(format!("omega must be positive, got {omega}")));
    }
    let mut log = NormLog::default();
    let sp = scalar_spectra(a, &mut log)?;
    let tau = log.norm("‖B‖", b)?;
    Ok(scalar_certificate(Condition::ScalarOmega, &sp, omega, tau, theta, log))
}

/// Special-method conditions, each evaluated exactly as displayed in its
/// doc comment. Norms are spectral norms.
#[derive(Debug, Clone, Copy)]
pub enum Corollary<'a> {
    /// Modified Newton (`M = A`, `N = 0`):
    /// `‖(Ω+A)⁻¹‖ < 1 / (‖B‖ + ‖Ω‖ + θ(‖Ω+A‖ + ‖B‖ + ‖Ω‖))`.
    ModifiedNewton { a: &'a SparseMatrix, b: &'a SparseMatrix, omega: &'a SparseMatrix, theta: f64 },
    /// `‖A⁻¹‖ < 1 / (‖B‖ + 2‖Ω‖ + θ(‖Ω+A‖ + ‖B‖ + ‖Ω‖))`.
    ModifiedNewtonAInverse { a: &'a SparseMatrix, b: &'a SparseMatrix, omega: &'a SparseMatrix, theta: f64 },
    /// New modified Newton:
    /// `‖(Ω+A)⁻¹‖ < 1 / (2‖B‖ + ‖Ω−A‖ + θ(‖Ω+A‖ + 2‖B‖ + ‖Ω−A‖))`.
    NewModifiedNewton { a: &'a SparseMatrix, b: &'a SparseMatrix, omega: &'a SparseMatrix, theta: f64 },
    /// `‖A⁻¹‖ < 1 / (2‖B‖ + ‖Ω‖ + ‖Ω−A‖ + θ(‖Ω+A‖ + 2‖B‖ + ‖Ω−A‖))`.
    NewModifiedNewtonAInverse { a: &'a SparseMatrix, b: &'a SparseMatrix, omega: &'a SparseMatrix, theta: f64 },
    /// Picard: `‖A⁻¹‖ < 1 / (‖B‖ + θ(‖A‖ + ‖B‖))`.
    Picard { a: &'a SparseMatrix, b: &'a SparseMatrix, theta: f64 },
    /// `B = I`, general splitting:
    /// `‖(Ω+M)⁻¹‖ < 1 / (θ(‖Ω+M‖ + ‖Ω+N‖ + 1) + ‖Ω+N‖ + 1)`.
    Ave { m: &'a SparseMatrix, n: &'a SparseMatrix, omega: &'a SparseMatrix, theta: f64 },
    /// `‖M⁻¹‖ < 1 / (θ(‖Ω+M‖ + ‖Ω+N‖ + 1) + ‖Ω+N‖ + ‖Ω‖ + 1)`.
    AveMInverse { m: &'a SparseMatrix, n: &'a SparseMatrix, omega: &'a SparseMatrix, theta: f64 },
    /// Douglas–Rachford, `B = I`, `γ ∈ (0, 2)`:
    /// `‖A⁻¹‖ < 1 / (θ[(2 − γ/2)‖A‖ + 1] + 2(1 − γ/2)‖A‖ + 1)`.
    DouglasRachford { a: &'a SparseMatrix, gamma: f64, theta: f64 },
    /// `‖A⁻¹‖ < 1 / (θ[(4/γ − 1)‖A‖ + 1] + 2(2/γ − 1)‖A‖ + 1)`.
    DouglasRachfordAlt { a: &'a SparseMatrix, gamma: f64, theta: f64 },
    /// Scalar Ω with `B = I` (τ = 1).
    AveScalarOmega { a: &'a SparseMatrix, omega: f64, theta: f64 },
}

pub fn check_corollary(c: Corollary<'_>) -> Result<Certificate> {
    let mut log = NormLog::default();
    match c {
        Corollary::ModifiedNewton { a, b, omega, theta } => {
            check_theta(theta)?;
            check_square(&[a, b, omega])?;
            let oa = omega.add(a)?;
            let inv = log.inv_norm("‖(Ω+A)⁻¹‖", &oa)?;
            let noa = log.norm("‖Ω+A‖", &oa)?;
            let nb = log.norm("‖B‖", b)?;
            let no = log.norm("‖Ω‖", omega)?;
            let bracket = nb + no + theta * (noa + nb + no);
            Ok(Certificate::new(Condition::ModifiedNewton, inv, 1.0 / bracket, log).with_factor(inv * bracket))
        }
        Corollary::ModifiedNewtonAInverse { a, b, omega, theta } => {
            check_theta(theta)?;
            check_square(&[a, b, omega])?;
            let inv = log.inv_norm("‖A⁻¹‖", a)?;
            let noa = log.norm("‖Ω+A‖", &omega.add(a)?)?;
            let nb = log.norm("‖B‖", b)?;
            let no = log.norm("‖Ω‖", omega)?;
            let rhs = 1.0 / (nb + 2.0 * no + theta * (noa + nb + no));
            Ok(Certificate::new(Condition::ModifiedNewtonAInverse, inv, rhs, log))
        }
        Corollary::NewModifiedNewton { a, b, omega, theta } => {
            check_theta(theta)?;
            check_square(&[a, b, omega])?;
            let oa = omega.add(a)?;
            let inv = log.inv_norm("‖(Ω+A)⁻¹‖", &oa)?;
            let noa = log.norm("‖Ω+A‖", &oa)?;
            let nb = log.norm("‖B‖", b)?;
            let nd = log.norm("‖Ω−A‖", &omega.sub(a)?)?;
            let bracket = 2.0 * nb + nd + theta * (noa + 2.0 * nb + nd);
            Ok(Certificate::new(Condition::NewModifiedNewton, inv, 1.0 / bracket, log).with_factor(inv * bracket))
        }
        Corollary::NewModifiedNewtonAInverse { a, b, omega, theta } => {
            check_theta(theta)?;
            check_square(&[a, b, omega])?;
            let inv = log.inv_norm("‖A⁻¹‖", a)?;
            let noa = log.norm("‖Ω+A‖", &omega.add(a)?)?;
            let nb = log.norm("‖B‖", b)?;
            let no = log.norm("‖Ω‖", omega)?;
            let nd = log.norm("‖Ω−A‖", &omega.sub(a)?)?;
            let rhs = 1.0 / (2.0 * nb + no + nd + theta * (noa + 2.0 * nb + nd));
            Ok(Certificate::new(Condition::NewModifiedNewtonAInverse, inv, rhs, log))
        }
        Corollary::Picard { a, b, theta } => {
            check_theta(theta)?;
            check_square(&[a, b])?;
            let inv = log.inv_norm("‖A⁻¹‖", a)?;
            let na = log.norm("‖A‖", a)?;
            let nb = log.norm("‖B‖", b)?;
            let bracket = nb + theta * (na + nb);
            Ok(Certificate::new(Condition::Picard, inv, 1.0 / bracket, log).with_factor(inv * bracket))
        }
        Corollary::Ave { m, n, omega, theta } => {
            check_theta(theta)?;
            check_square(&[m, n, omega])?;
            let om = omega.add(m)?;
            let inv = log.inv_norm("‖(Ω+M)⁻¹‖", &om)?;
            let nm = log.norm("‖Ω+M‖", &om)?;
            let on = log.norm("‖Ω+N‖", &omega.add(n)?)?;
            let bracket = theta * (nm + on + 1.0) + on + 1.0;
            Ok(Certificate::new(Condition::Ave, inv, 1.0 / bracket, log).with_factor(inv * bracket))
        }
        Corollary::AveMInverse { m, n, omega, theta } => {
            check_theta(theta)?;
            check_square(&[m, n, omega])?;
            let inv = log.inv_norm("‖M⁻¹‖", m)?;
            let nm = log.norm("‖Ω+M‖", &omega.add(m)?)?;
            let on = log.norm("‖Ω+N‖", &omega.add(n)?)?;
            let no = log.norm("‖Ω‖", omega)?;
            let rhs = 1.0 / (theta * (nm + on + 1.0) + on + no + 1.0);
            Ok(Certificate::new(Condition::AveMInverse, inv, rhs, log))
        }
        Corollary::DouglasRachford { a, gamma, theta } => {
            check_theta(theta)?;
            check_gamma(gamma)?;
            check_square(&[a])?;
            let inv = log.inv_norm("‖A⁻¹‖", a)?;
            let na = log.norm("‖A‖", a)?;
            let rhs = 1.0
                / (theta * ((2.0 - gamma / 2.0) * na + 1.0) + 2.0 * (1.0 - gamma / 2.0) * na + 1.0);
            Ok(Certificate::new(Condition::DouglasRachford, inv, rhs, log))
        }
        Corollary::DouglasRachfordAlt { a, gamma, theta } => {
            check_theta(theta)?;
            check_gamma(gamma)?;
            check_square(&[a])?;
            let inv = log.inv_norm("‖A⁻¹‖", a)?;
            let na = log.norm("‖A‖", a)?;
            let rhs = 1.0
                / (theta * ((4.0 / gamma - 1.0) * na + 1.0) + 2.0 * (2.0 / gamma - 1.0) * na + 1.0);
            Ok(Certificate::new(Condition::DouglasRachfordAlt, inv, rhs, log))
        }
        Corollary::AveScalarOmega { a, omega, theta } => {
            check_theta(theta)?;
            check_square(&[a])?;
            if !(omega > 0.0) {
                return Err(GaveError::Parameter(format!("omega must be positive, got {omega}")));
            }
            let sp = scalar_spectra(a, &mut log)?;
            Ok(scalar_certificate(Condition::AveScalarOmega, &sp, omega, 1.0, theta, log))
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(GaveError::Parameter(format!("gamma must lie in (0, 2), got {gamma}")));
    }
    Ok(())
}
