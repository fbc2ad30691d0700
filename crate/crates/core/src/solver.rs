//! Exact (NMS) and inexact (INMS) Newton-based matrix splitting iterations.
//!
//! Both iterate on `(Ω + M) x_{k+1} = (Ω + N) x_k + B|x_k| + b`. The exact
//! variant factors `Ω + M` once; the inexact one hands each system to LSQR
//! with residual target `θ_k ‖F(x_k)‖`, warm-started at `x_k`.

use std::str::FromStr;
use std::time::Instant;

use crate::error::{GaveError, Result};
use crate::linalg::lsqr::{lsqr, LsqrStop};
use crate::linalg::lu::lu_factorize;
use crate::linalg::vector::{abs_vec, all_finite, norm2};
use crate::linalg::SparseMatrix;
use crate::problems::GaveProblem;
use crate::splittings::{OmegaSpec, Splitting};

/// RES above which a solve is aborted as divergent.
pub const DIVERGENCE_RES: f64 = 1e12;

/// Per-step relative inexactness θ_k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaSchedule {
    Constant(f64),
    /// `θ_k = min{0.5, 1/max{1, k − l_max}}`.
    Decaying { l_max: usize },
}

impl Default for ThetaSchedule {
    fn default() -> Self {
        ThetaSchedule::Decaying { l_max: 10 }
    }
}

impl ThetaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThetaSchedule::Constant(t) if !(0.0..1.0).contains(&t) => Err(GaveError::Parameter(
                format!("constant theta must lie in [0, 1), got {t}"),
            )),
            _ => Ok(()),
        }
    }

    /// Largest θ the schedule ever produces.
    pub fn sup(&self) -> f64 {
        match *self {
            ThetaSchedule::Constant(t) => t,
            ThetaSchedule::Decaying { .. } => 0.5,
        }
    }
}

/// θ for outer step `k` (k = 0 is the first update).
pub fn theta_at(schedule: ThetaSchedule, k: usize) -> f64 {
    match schedule {
        ThetaSchedule::Constant(t) => t,
        ThetaSchedule::Decaying { l_max } => {
            let denom = k.saturating_sub(l_max).max(1) as f64;
            0.5f64.min(1.0 / denom)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSolver {
    /// LU factorization of `Ω + M`, reused across steps.
    Direct,
    /// LSQR with an iteration cap; `None` means `ceil(10 √n)`.
    Lsqr { max_inner: Option<usize> },
}

/// Starting point of the outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// `(1, 0, 1, 0, …)`, token `alt10`.
    Alternating,
    Zeros,
    Vector(Vec<f64>),
}

impl InitialGuess {
    pub fn materialize(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            InitialGuess::Alternating => Ok((0..n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect()),
            InitialGuess::Zeros => Ok(vec![0.0; n]),
            InitialGuess::Vector(v) if v.len() == n => Ok(v.clone()),
            InitialGuess::Vector(v) => Err(GaveError::dim(format!(
                "initial vector has length {}, problem has order {n}",
                v.len()
            ))),
        }
    }
}

impl FromStr for InitialGuess {
    type Err = GaveError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alt10" => Ok(InitialGuess::Alternating),
            "zeros" => Ok(InitialGuess::Zeros),
            other => Err(GaveError::Config(format!(
                "unknown initial vector token `{other}` (expected `alt10` or `zeros`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub k_max: usize,
    pub x0: InitialGuess,
    pub theta: ThetaSchedule,
    pub inner: InnerSolver,
    pub record_history: bool,
    /// Re-verify the inexact step condition after every LSQR solve and
    /// record a warning when it fails.
    pub audit: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-6,
            k_max: 500,
            x0: InitialGuess::Alternating,
            theta: ThetaSchedule::default(),
            inner: InnerSolver::Direct,
            record_history: true,
            audit: false,
        }
    }
}

impl SolverConfig {
    pub fn inexact() -> Self {
        SolverConfig {
            inner: InnerSolver::Lsqr { max_inner: None },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(GaveError::Parameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.k_max == 0 {
            return Err(GaveError::Parameter("k_max must be at least 1".into()));
        }
        if let InnerSolver::Lsqr { max_inner: Some(0) } = self.inner {
            return Err(GaveError::Parameter("max_inner must be at least 1".into()));
        }
        self.theta.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    /// Completed outer updates (IT).
    pub iterations: usize,
    /// RES at the returned iterate.
    pub final_res: f64,
    /// RES of `x_0, x_1, …` when history is recorded.
    pub res_history: Vec<f64>,
    /// LSQR iterations per outer step (empty for exact solves).
    pub inner_iters: Vec<usize>,
    pub wall_time_s: f64,
    pub x: Vec<f64>,
    pub warnings: Vec<String>,
}

/// `F(x) = A x − B|x| − b`.
pub fn residual(problem: &GaveProblem, x: &[f64]) -> Result<Vec<f64>> {
    problem.residual(x)
}

/// RES(x) = `‖F(x)‖ / ‖b‖`.
pub fn relative_res(problem: &GaveProblem, x: &[f64]) -> Result<f64> {
    let nb = norm2(&problem.b);
    if nb == 0.0 {
        return Err(GaveError::Precondition(
            "b = 0: the relative residual is undefined, use the absolute residual ‖F(x)‖".into(),
        ));
    }
    Ok(norm2(&residual(problem, x)?) / nb)
}

/// `Ω + M` and `Ω + N` for a splitting and the Ω it runs with.
#[derive(Debug, Clone)]
pub struct StepOperators {
    pub omega_m: SparseMatrix,
    pub omega_n: SparseMatrix,
}

impl StepOperators {
    pub fn new(splitting: &Splitting, omega: &OmegaSpec) -> Result<Self> {
        let om = splitting.effective_omega(omega)?;
        Ok(StepOperators {
            omega_m: om.add(&splitting.m_part)?,
            omega_n: om.add(&splitting.n_part)?,
        })
    }

    /// `(Ω + N) x + B|x| + b`.
    pub fn rhs(&self, problem: &GaveProblem, x: &[f64]) -> Vec<f64> {
        let mut c = problem.b.clone();
        self.omega_n.spmv_add(x, &mut c);
        problem.b_mat.spmv_add(&abs_vec(x), &mut c);
        c
    }
}

fn check_sizes(problem: &GaveProblem, splitting: &Splitting) -> Result<()> {
    if splitting.m_part.n_rows() != problem.n() {
        return Err(GaveError::dim(format!(
            "splitting has order {}, problem has order {}",
            splitting.m_part.n_rows(),
            problem.n()
        )));
    }
    Ok(())
}

struct Tracker {
    nb: f64,
    tol: f64,
    record: bool,
    history: Vec<f64>,
}

impl Tracker {
    /// RES at `x`, with the non-finite and divergence checks applied.
    fn observe(&mut self, problem: &GaveProblem, x: &[f64], k: usize) -> Result<(f64, f64)> {
        if !all_finite(x) {
            return Err(GaveError::NonFinite(format!("iterate {k} is not finite")));
        }
        let fnorm = norm2(&problem.residual(x)?);
        let res = fnorm / self.nb;
        if self.record {
            self.history.push(res);
        }
        if !res.is_finite() {
            return Err(GaveError::NonFinite(format!("RES at iterate {k} is not finite")));
        }
        if res > DIVERGENCE_RES {
            return Err(GaveError::Divergence { iteration: k, res });
        }
        Ok((fnorm, res))
    }

    fn done(&self, fnorm: f64, res: f64) -> bool {
        res <= self.tol || fnorm == 0.0
    }
}

fn start(problem: &GaveProblem, splitting: &Splitting, config: &SolverConfig) -> Result<(Vec<f64>, Tracker)> {
    config.validate()?;
    check_sizes(problem, splitting)?;
    let nb = norm2(&problem.b);
    if nb == 0.0 {
        return Err(GaveError::Precondition(
            "b = 0: RES-based stopping is undefined (x = 0 solves the system when A − B|·| is injective)"
                .into(),
        ));
    }
    let x = config.x0.materialize(problem.n())?;
    Ok((
        x,
        Tracker {
            nb,
            tol: config.tol,
            record: config.record_history,
            history: Vec::new(),
        },
    ))
}

/// Exact iteration: factors `Ω + M` once and solves each step directly.
pub fn nms_solve(
    problem: &GaveProblem,
    splitting: &Splitting,
    omega: &OmegaSpec,
    config: &SolverConfig,
) -> Result<SolveReport> {
    if config.inner != InnerSolver::Direct {
        return Err(GaveError::Config("nms_solve needs the direct inner solver".into()));
    }
    let t0 = Instant::now();
    let (mut x, mut track) = start(problem, splitting, config)?;
    let ops = StepOperators::new(splitting, omega)?;
    let lu = lu_factorize(&ops.omega_m)?;

    let (mut fnorm, mut res) = track.observe(problem, &x, 0)?;
    let mut k = 0;
    while !track.done(fnorm, res) && k < config.k_max {
        let mut c = ops.rhs(problem, &x);
        lu.solve_in_place(&mut c);
        x = c;
        k += 1;
        (fnorm, res) = track.observe(problem, &x, k)?;
    }
    Ok(SolveReport {
        converged: track.done(fnorm, res),
        iterations: k,
        final_res: res,
        res_history: track.history,
        inner_iters: Vec::new(),
        wall_time_s: t0.elapsed().as_secs_f64(),
        x,
        warnings: splitting.warnings.clone(),
    })
}

/// Inexact iteration: each step is an LSQR solve of `(Ω + M) y = c_k`,
/// warm-started at `x_k` and stopped once `‖(Ω + M) y − c_k‖ ≤ θ_k ‖F(x_k)‖`.
/// If LSQR hits its cap first, its last iterate is accepted and a warning is
/// recorded.
pub fn inms_solve(
    problem: &GaveProblem,
    splitting: &Splitting,
    omega: &OmegaSpec,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let max_inner = match config.inner {
        InnerSolver::Lsqr { max_inner } => {
            max_inner.unwrap_or_else(|| (10.0 * (problem.n() as f64).sqrt()).ceil() as usize)
        }
        InnerSolver::Direct => {
            return Err(GaveError::Config("inms_solve needs the LSQR inner solver".into()));
        }
    };
    let t0 = Instant::now();
    let (mut x, mut track) = start(problem, splitting, config)?;
    let ops = StepOperators::new(splitting, omega)?;
    let mut warnings = splitting.warnings.clone();
    let mut inner_iters = Vec::new();
    let mut capped = 0usize;
    let mut stalled = 0usize;
    let mut audit_failures = 0usize;

    let (mut fnorm, mut res) = track.observe(problem, &x, 0)?;
    let mut k = 0;
    while !track.done(fnorm, res) && k < config.k_max {
        let theta = theta_at(config.theta, k);
        let c = ops.rhs(problem, &x);
        let out = lsqr(&ops.omega_m, &c, theta * fnorm, max_inner, Some(&x))?;
        match out.stop_reason {
            LsqrStop::TargetMet => {}
            LsqrStop::MaxIter => capped += 1,
            LsqrStop::Stagnation => stalled += 1,
        }
        inner_iters.push(out.iterations);
        if config.audit && !step_condition_holds(&ops, problem, &x, &out.x, theta, fnorm) {
            audit_failures += 1;
        }
        x = out.x;
        k += 1;
        (fnorm, res) = track.observe(problem, &x, k)?;
    }
    if capped > 0 {
        warnings.push(format!("LSQR reached max_inner = {max_inner} in {capped} outer steps"));
    }
    if stalled > 0 {
        warnings.push(format!("LSQR stagnated above its target in {stalled} outer steps"));
    }
    if audit_failures > 0 {
        warnings.push(format!("inexact step condition failed in {audit_failures} outer steps"));
    }
    Ok(SolveReport {
        converged: track.done(fnorm, res),
        iterations: k,
        final_res: res,
        res_history: track.history,
        inner_iters,
        wall_time_s: t0.elapsed().as_secs_f64(),
        x,
        warnings,
    })
}

/// Dispatches on `config.inner`.
pub fn solve(
    problem: &GaveProblem,
    splitting: &Splitting,
    omega: &OmegaSpec,
    config: &SolverConfig,
) -> Result<SolveReport> {
    match config.inner {
        InnerSolver::Direct => nms_solve(problem, splitting, omega, config),
        InnerSolver::Lsqr { .. } => inms_solve(problem, splitting, omega, config),
    }
}

fn step_condition_holds(
    ops: &StepOperators,
    problem: &GaveProblem,
    x_prev: &[f64],
    x_next: &[f64],
    theta: f64,
    f_norm: f64,
) -> bool {
    let c = ops.rhs(problem, x_prev);
    let mut r = vec![0.0; c.len()];
    ops.omega_m.spmv_into(x_next, &mut r);
    let lhs = r
        .iter()
        .zip(&c)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    lhs <= theta * f_norm
}

/// Whether `‖(Ω + M) x_next − [(Ω + N) x_prev + B|x_prev| + b]‖ ≤ θ f_norm`,
/// recomputed from scratch. `f_norm` is `‖F(x_prev)‖`.
pub fn verify_inexact_condition(
    problem: &GaveProblem,
    splitting: &Splitting,
    omega: &OmegaSpec,
    x_prev: &[f64],
    x_next: &[f64],
    theta: f64,
    f_norm: f64,
) -> Result<bool> {
    check_sizes(problem, splitting)?;
    if x_prev.len() != problem.n() || x_next.len() != problem.n() {
        return Err(GaveError::dim("iterate length does not match the problem"));
    }
    let ops = StepOperators::new(splitting, omega)?;
    Ok(step_condition_holds(&ops, problem, x_prev, x_next, theta, f_norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector::sub;
    use crate::problems::{gen_certified, gen_lcp_grid};
    use crate::splittings::{build_splitting, SplittingKind};

    #[test]
    fn theta_schedule_values() {
        let s = ThetaSchedule::Decaying { l_max: 10 };
        assert_eq!(theta_at(s, 0), 0.5);
        assert_eq!(theta_at(s, 5), 0.5);
        assert_eq!(theta_at(s, 12), 0.5);
        assert_eq!(theta_at(s, 13), 1.0 / 3.0);
        assert_eq!(theta_at(s, 110), 0.01);
        for k in [0, 7, 1000] {
            assert_eq!(theta_at(ThetaSchedule::Constant(0.0), k), 0.0);
        }
        assert!(ThetaSchedule::Constant(1.0).validate().is_err());
        assert!(ThetaSchedule::Constant(-0.1).validate().is_err());
    }

    #[test]
    fn residual_examples() {
        let g = gen_lcp_grid(6, 4.0).unwrap();
        let p = &g.problem;
        let f = residual(p, &vec![-0.6; 36]).unwrap();
        assert!(norm2(&f) <= 1e-12 * norm2(&p.b));
        assert_eq!(relative_res(p, &vec![0.0; 36]).unwrap(), 1.0);

        let a = SparseMatrix::from_dense_rows(&[vec![2.0, 1.0], vec![0.0, 4.0]]).unwrap();
        let lin = GaveProblem::new(a, SparseMatrix::zeros(2, 2), vec![3.0, 8.0]).unwrap();
        assert!(norm2(&residual(&lin, &[0.5, 2.0]).unwrap()) == 0.0);

        let zero_b = GaveProblem::new(SparseMatrix::identity(2), SparseMatrix::zeros(2, 2), vec![0.0; 2]).unwrap();
        assert!(matches!(relative_res(&zero_b, &[1.0, 1.0]), Err(GaveError::Precondition(_))));
    }

    #[test]
    fn start_at_solution_takes_zero_steps() {
        let p = gen_certified(30, 3, 1.0, 6.0).unwrap();
        let xs = p.known_solution.clone().unwrap();
        let s = build_splitting(&p.a, SplittingKind::Nj, &OmegaSpec::Zero).unwrap();
        let mut cfg = SolverConfig {
            x0: InitialGuess::Vector(xs.clone()),
            ..Default::default()
        };
        let r = nms_solve(&p, &s, &OmegaSpec::Zero, &cfg).unwrap();
        assert!(r.converged && r.iterations == 0);
        assert_eq!(r.res_history.len(), 1);
        cfg.inner = InnerSolver::Lsqr { max_inner: None };
        let r = inms_solve(&p, &s, &OmegaSpec::Zero, &cfg).unwrap();
        assert!(r.converged && r.iterations == 0);
    }

    #[test]
    fn exact_solve_reaches_known_solution() {
        let p = gen_certified(80, 11, 1.0, 8.0).unwrap();
        let s = build_splitting(&p.a, SplittingKind::Picard, &OmegaSpec::Zero).unwrap();
        let cfg = SolverConfig {
            tol: 1e-12,
            ..Default::default()
        };
        let r = nms_solve(&p, &s, &OmegaSpec::Zero, &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.res_history.len(), r.iterations + 1);
        assert!(norm2(&sub(&r.x, p.known_solution.as_ref().unwrap())) <= 1e-10);
        let recomputed = relative_res(&p, &r.x).unwrap();
        assert!((recomputed - r.final_res).abs() <= 1e-12 * recomputed.max(1e-300));
    }

    #[test]
    fn inexact_steps_satisfy_condition() {
        let p = gen_certified(60, 5, 1.0, 8.0).unwrap();
        let w = OmegaSpec::ScalarTimesIdentity(1.0);
        let s = build_splitting(&p.a, SplittingKind::Ngs, &w).unwrap();
        let cfg = SolverConfig {
            inner: InnerSolver::Lsqr { max_inner: Some(600) },
            audit: true,
            ..Default::default()
        };
        let r = inms_solve(&p, &s, &w, &cfg).unwrap();
        assert!(r.converged, "{r:?}");
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        assert_eq!(r.inner_iters.len(), r.iterations);
    }

    #[test]
    fn verify_condition_cases() {
        let p = gen_certified(25, 9, 1.0, 8.0).unwrap();
        let w = OmegaSpec::ScalarTimesIdentity(0.5);
        let s = build_splitting(&p.a, SplittingKind::Nj, &w).unwrap();
        let x0 = vec![1.0; 25];
        let fnorm = norm2(&residual(&p, &x0).unwrap());
        let ops = StepOperators::new(&s, &w).unwrap();
        let exact = lu_factorize(&ops.omega_m).unwrap().solve(&ops.rhs(&p, &x0)).unwrap();
        // exact steps leave a residual at rounding level only
        assert!(verify_inexact_condition(&p, &s, &w, &x0, &exact, 1e-10, fnorm).unwrap());
        let far: Vec<f64> = exact.iter().map(|v| v + 100.0).collect();
        assert!(!verify_inexact_condition(&p, &s, &w, &x0, &far, 0.9, fnorm).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        // A = I, B = 3I: Picard multiplies |x| by 3 every step
        let p = GaveProblem::new(
            SparseMatrix::identity(3),
            SparseMatrix::from_diagonal(&[3.0; 3]),
            vec![1.0; 3],
        )
        .unwrap();
        let s = build_splitting(&p.a, SplittingKind::Picard, &OmegaSpec::Zero).unwrap();
        let err = nms_solve(&p, &s, &OmegaSpec::Zero, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, GaveError::Divergence { .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn nonconvergence_is_not_an_error() {
        let p = gen_certified(30, 2, 1.0, 5.0).unwrap();
        let s = build_splitting(&p.a, SplittingKind::Nj, &OmegaSpec::Zero).unwrap();
        let cfg = SolverConfig {
            k_max: 2,
            tol: 1e-14,
            ..Default::default()
        };
        let r = nms_solve(&p, &s, &OmegaSpec::Zero, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn singular_shifted_matrix_is_an_error() {
        let p = GaveProblem::new(SparseMatrix::identity(2), SparseMatrix::zeros(2, 2), vec![1.0; 2]).unwrap();
        let w = OmegaSpec::ScalarTimesIdentity(-1.0);
        let s = build_splitting(&p.a, SplittingKind::Mn, &w).unwrap();
        let err = nms_solve(&p, &s, &w, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, GaveError::Singular(_)));
    }

    #[test]
    fn wrong_inner_mode_is_config_error() {
        let p = gen_certified(5, 1, 0.5, 3.0).unwrap();
        let s = build_splitting(&p.a, SplittingKind::Nj, &OmegaSpec::Zero).unwrap();
        assert!(matches!(
            nms_solve(&p, &s, &OmegaSpec::Zero, &SolverConfig::inexact()),
            Err(GaveError::Config(_))
        ));
        assert!(matches!(
            inms_solve(&p, &s, &OmegaSpec::Zero, &SolverConfig::default()),
            Err(GaveError::Config(_))
        ));
    }

    #[test]
    fn initial_guess_tokens() {
        assert_eq!(
            "alt10".parse::<InitialGuess>().unwrap().materialize(5).unwrap(),
            vec![1.0, 0.0, 1.0, 0.0, 1.0]
        );
        assert!("ones".parse::<InitialGuess>().is_err());
        assert!(InitialGuess::Vector(vec![1.0]).materialize(2).is_err());
    }
}
