//! Experiment specification files (TOML).
//!
//! ```toml
//! name = "grid-mu4"
//! repeats = 10
//!
//! [problem]
//! family = "lcp-grid"
//! m = [100, 110]
//! mu = 4.0
//!
//! [[methods]]
//! label = "NSOR"
//! splitting = "nsor"
//! alpha = "tune"
//! omega = "hat"
//! ```
//!
//! The full schema is documented in `docs/experiment-spec.md`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{GaveError, Result};
use crate::io::load_matrix;
use crate::linalg::SparseMatrix;
use crate::solver::{InitialGuess, InnerSolver, SolverConfig, ThetaSchedule};
use crate::splittings::{OmegaSpec, SplittingKind};

use super::tune::{alpha_grid, default_grid};

/// Where the problem instances of an experiment come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    /// The LCP grid family, one instance per `m` (order `m²`).
    LcpGrid { m: Vec<usize>, mu: f64 },
    /// Seeded random instances with a known solution, one per `n`.
    Certified {
        n: Vec<usize>,
        seed: u64,
        b_norm_scale: f64,
        dominance: f64,
    },
    /// A saved problem directory.
    Directory(PathBuf),
}

/// How Ω is chosen for a method.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaChoice {
    Zero,
    Scalar(f64),
    /// `c · M̂` for the grid family.
    Hat(f64),
    File(PathBuf),
}

impl OmegaChoice {
    /// Parses `zero`, `scalar:<ω>`, `hat`, `hat:<c>` or `file:<path>`.
    pub fn parse(token: &str, base_dir: &Path) -> Result<Self> {
        let bad = || GaveError::Config(format!("bad omega `{token}`"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let (head, arg) = token.split_once(':').map_or((token, None), |(h, a)| (h, Some(a)));
        match (head.trim(), arg) {
            ("zero", None) => Ok(OmegaChoice::Zero),
            ("scalar", Some(a)) => Ok(OmegaChoice::Scalar(num(a)?)),
            ("hat", None) => Ok(OmegaChoice::Hat(1.0)),
            ("hat", Some(a)) => Ok(OmegaChoice::Hat(num(a)?)),
            ("file", Some(p)) => Ok(OmegaChoice::File(base_dir.join(p.trim()))),
            _ => Err(bad()),
        }
    }

    /// Short tag used in result tables.
    pub fn tag(&self) -> String {
        match self {
            OmegaChoice::Zero => "0".into(),
            OmegaChoice::Scalar(w) => format!("{w}I"),
            OmegaChoice::Hat(c) if *c == 1.0 => "hatM".into(),
            OmegaChoice::Hat(c) => format!("{c}hatM"),
            OmegaChoice::File(p) => p
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into()),
        }
    }

    /// Resolves to an [`OmegaSpec`]; `hat` needs the grid base matrix.
    pub fn to_spec(&self, hat_m: Option<&SparseMatrix>) -> Result<OmegaSpec> {
        match self {
            OmegaChoice::Zero => Ok(OmegaSpec::Zero),
            OmegaChoice::Scalar(w) => Ok(OmegaSpec::ScalarTimesIdentity(*w)),
            OmegaChoice::Hat(c) => {
                let base = hat_m.ok_or_else(|| {
                    GaveError::Config("omega `hat` is only available for the lcp-grid family".into())
                })?;
                Ok(OmegaSpec::ScaledMatrix {
                    c: *c,
                    base: base.clone(),
                })
            }
            OmegaChoice::File(p) => Ok(OmegaSpec::Explicit(load_matrix(p)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaChoice {
    Fixed(f64),
    /// Tune on the grid; `None` picks the default grid for the problem.
    Tune(Option<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub label: String,
    /// Splitting token (`nj`, `nsor`, …).
    pub splitting: String,
    pub alpha: Option<AlphaChoice>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub omega: OmegaChoice,
    pub inner: InnerSolver,
    pub theta: ThetaSchedule,
}

impl MethodSpec {
    /// The splitting kind once α is known.
    pub fn kind(&self, alpha: Option<f64>) -> Result<SplittingKind> {
        SplittingKind::from_token(&self.splitting, alpha, self.beta, self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub problem: ProblemSource,
    pub methods: Vec<MethodSpec>,
    pub repeats: usize,
    pub output: Option<PathBuf>,
    pub tol: f64,
    pub k_max: usize,
    pub x0: InitialGuess,
}

impl ExperimentSpec {
    /// Solver configuration for one method.
    pub fn solver_config(&self, method: &MethodSpec) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            k_max: self.k_max,
            x0: self.x0.clone(),
            theta: method.theta,
            inner: method.inner,
            record_history: false,
            audit: false,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            GaveError::Parse { location, message } => GaveError::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }

    /// Parses and validates a spec; relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| GaveError::Parse {
            location: "spec".into(),
            message: e.to_string(),
        })?;
        raw.into_spec(base_dir)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: Option<String>,
    repeats: Option<usize>,
    output: Option<String>,
    tol: Option<f64>,
    k_max: Option<usize>,
    x0: Option<String>,
    problem: RawProblem,
    #[serde(default)]
    methods: Vec<RawMethod>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    family: String,
    m: Option<Vec<usize>>,
    mu: Option<f64>,
    n: Option<Vec<usize>>,
    seed: Option<u64>,
    b_norm_scale: Option<f64>,
    dominance: Option<f64>,
    path: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawAlpha {
    Value(f64),
    Token(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    start: f64,
    stop: f64,
    step: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawTheta {
    Value(f64),
    Token(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    label: Option<String>,
    splitting: String,
    alpha: Option<RawAlpha>,
    alpha_grid: Option<RawGrid>,
    beta: Option<f64>,
    gamma: Option<f64>,
    omega: Option<String>,
    inner: Option<String>,
    max_inner: Option<usize>,
    theta: Option<RawTheta>,
    l_max: Option<usize>,
}

fn cfg(msg: impl Into<String>) -> GaveError {
    GaveError::Config(msg.into())
}

impl RawProblem {
    fn into_source(self, base_dir: &Path) -> Result<ProblemSource> {
        match self.family.as_str() {
            "lcp-grid" => {
                let m = self.m.ok_or_else(|| cfg("lcp-grid problems need `m`"))?;
                let mu = self.mu.ok_or_else(|| cfg("lcp-grid problems need `mu`"))?;
                if m.is_empty() || m.iter().any(|&v| v < 2) {
                    return Err(cfg("`m` must be a nonempty list of values >= 2"));
                }
                Ok(ProblemSource::LcpGrid { m, mu })
            }
            "certified" => {
                let n = self.n.ok_or_else(|| cfg("certified problems need `n`"))?;
                if n.is_empty() || n.contains(&0) {
                    return Err(cfg("`n` must be a nonempty list of positive sizes"));
                }
                Ok(ProblemSource::Certified {
                    n,
                    seed: self.seed.unwrap_or(0),
                    b_norm_scale: self.b_norm_scale.unwrap_or(1.0),
                    dominance: self.dominance.unwrap_or(10.0),
                })
            }
            "directory" => {
                let p = self.path.ok_or_else(|| cfg("directory problems need `path`"))?;
                Ok(ProblemSource::Directory(base_dir.join(p)))
            }
            other => Err(cfg(format!(
                "unknown problem family `{other}` (expected lcp-grid, certified or directory)"
            ))),
        }
    }
}

impl RawMethod {
    fn into_method(self, base_dir: &Path) -> Result<MethodSpec> {
        let alpha = match (self.alpha, self.alpha_grid) {
            (None, None) => None,
            (Some(RawAlpha::Value(a)), None) => Some(AlphaChoice::Fixed(a)),
            (Some(RawAlpha::Token(t)), grid) if t == "tune" => Some(AlphaChoice::Tune(
                grid.map(|g| alpha_grid(g.start, g.stop, g.step)).transpose()?,
            )),
            (Some(RawAlpha::Token(t)), _) => {
                return Err(cfg(format!("alpha must be a number or \"tune\", got `{t}`")));
            }
            (_, Some(_)) => return Err(cfg("`alpha_grid` requires alpha = \"tune\"")),
        };
        let inner = match self.inner.as_deref().unwrap_or("direct") {
            "direct" => {
                if self.max_inner.is_some() {
                    return Err(cfg("`max_inner` only applies to inner = \"lsqr\""));
                }
                InnerSolver::Direct
            }
            "lsqr" => InnerSolver::Lsqr {
                max_inner: self.max_inner,
            },
            other => return Err(cfg(format!("unknown inner solver `{other}`"))),
        };
        let theta = match self.theta {
            None => ThetaSchedule::Decaying {
                l_max: self.l_max.unwrap_or(10),
            },
            Some(RawTheta::Token(t)) if t == "decaying" => ThetaSchedule::Decaying {
                l_max: self.l_max.unwrap_or(10),
            },
            Some(RawTheta::Value(t)) => ThetaSchedule::Constant(t),
            Some(RawTheta::Token(t)) => return Err(cfg(format!("unknown theta `{t}`"))),
        };
        theta.validate()?;
        let omega = OmegaChoice::parse(self.omega.as_deref().unwrap_or("zero"), base_dir)?;
        let m = MethodSpec {
            label: self.label.unwrap_or_else(|| self.splitting.to_uppercase()),
            splitting: self.splitting.to_ascii_lowercase(),
            alpha,
            beta: self.beta,
            gamma: self.gamma,
            omega,
            inner,
            theta,
        };
        // validate the token and parameters with a placeholder α when tuning
        let probe = match &m.alpha {
            Some(AlphaChoice::Fixed(a)) => Some(*a),
            Some(AlphaChoice::Tune(_)) => Some(1.0),
            None => None,
        };
        let kind = m.kind(probe)?;
        if matches!(m.alpha, Some(AlphaChoice::Tune(_))) && !matches!(kind, SplittingKind::Nsor { .. }) {
            return Err(cfg(format!("alpha tuning is only supported for nsor, not `{}`", m.splitting)));
        }
        Ok(m)
    }
}

impl RawSpec {
    fn into_spec(self, base_dir: &Path) -> Result<ExperimentSpec> {
        if self.methods.is_empty() {
            return Err(cfg("the experiment lists no methods"));
        }
        let repeats = self.repeats.unwrap_or(10);
        if repeats == 0 {
            return Err(cfg("repeats must be at least 1"));
        }
        let x0 = match self.x0 {
            Some(t) => t.parse()?,
            None => InitialGuess::Alternating,
        };
        let spec = ExperimentSpec {
            name: self.name.unwrap_or_else(|| "experiment".into()),
            problem: self.problem.into_source(base_dir)?,
            methods: self
                .methods
                .into_iter()
                .map(|m| m.into_method(base_dir))
                .collect::<Result<_>>()?,
            repeats,
            output: self.output.map(|o| base_dir.join(o)),
            tol: self.tol.unwrap_or(1e-6),
            k_max: self.k_max.unwrap_or(500),
            x0,
        };
        for m in &spec.methods {
            spec.solver_config(m).validate()?;
        }
        Ok(spec)
    }
}

/// Default tuning grid for a problem source.
pub fn grid_for(source: &ProblemSource) -> Vec<f64> {
    match source {
        ProblemSource::LcpGrid { mu, .. } => default_grid(*mu),
        _ => default_grid(1.0),
    }
}
