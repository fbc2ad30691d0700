//! Experiment harness: generates the configured instances, runs every
//! method on each, and collects one [`ResultRow`] per pair.

pub mod spec;
pub mod table;
pub mod tune;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{GaveError, Result};
use crate::linalg::SparseMatrix;
use crate::problems::{gen_certified, gen_lcp_grid, load_problem, GaveProblem};
use crate::solver::{solve, InnerSolver, SolveReport, SolverConfig};
use crate::splittings::build_splitting;

pub use spec::{AlphaChoice, ExperimentSpec, MethodSpec, OmegaChoice, ProblemSource};
pub use table::{emit_table, fmt_sci, TableFormat, CSV_HEADER};
pub use tune::{alpha_grid, default_grid, tune_alpha, TuneResult};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub n: usize,
    pub mu: Option<f64>,
    pub omega: String,
    pub alpha: Option<f64>,
    /// IT of the first run.
    pub iterations: usize,
    /// Mean wall time over the repeats.
    pub cpu_s: f64,
    /// RES of the first run.
    pub res: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// Final iterate of the first run.
    pub x: Vec<f64>,
}

/// A generated or loaded instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: GaveProblem,
    /// `M̂` for the grid family, from which `hat` Ω choices are formed.
    pub hat_m: Option<SparseMatrix>,
    pub mu: Option<f64>,
}

pub fn build_instances(source: &ProblemSource) -> Result<Vec<Instance>> {
    match source {
        ProblemSource::LcpGrid { m, mu } => m
            .par_iter()
            .map(|&m| {
                let g = gen_lcp_grid(m, *mu)?;
                Ok(Instance {
                    problem: g.problem,
                    hat_m: Some(g.hat_m),
                    mu: Some(*mu),
                })
            })
            .collect(),
        ProblemSource::Certified {
            n,
            seed,
            b_norm_scale,
            dominance,
        } => n
            .par_iter()
            .map(|&n| {
                Ok(Instance {
                    problem: gen_certified(n, *seed, *b_norm_scale, *dominance)?,
                    hat_m: None,
                    mu: None,
                })
            })
            .collect(),
        ProblemSource::Directory(path) => {
            let (problem, meta) = load_problem(path)?;
            Ok(vec![Instance {
                problem,
                hat_m: None,
                mu: meta.mu,
            }])
        }
    }
}

/// Runs the solve `repeats` times: IT, RES and the iterate come from the
/// first run, the time is the mean over all runs. Every run re-factorizes.
fn timed_runs(
    instance: &Instance,
    method: &MethodSpec,
    alpha: Option<f64>,
    config: &SolverConfig,
    repeats: usize,
) -> Result<(SolveReport, f64)> {
    let omega = method.omega.to_spec(instance.hat_m.as_ref())?;
    let kind = method.kind(alpha)?;
    let splitting = build_splitting(&instance.problem.a, kind, &omega)?;
    let first = solve(&instance.problem, &splitting, &omega, config)?;
    let mut total = first.wall_time_s;
    for _ in 1..repeats {
        total += solve(&instance.problem, &splitting, &omega, config)?.wall_time_s;
    }
    Ok((first, total / repeats as f64))
}

fn run_row(
    spec: &ExperimentSpec,
    instance: &Instance,
    method: &MethodSpec,
    alpha: Option<f64>,
) -> Result<ResultRow> {
    let config = spec.solver_config(method);
    let mut row = ResultRow {
        method: method.label.clone(),
        n: instance.problem.n(),
        mu: instance.mu,
        omega: method.omega.tag(),
        alpha,
        iterations: 0,
        cpu_s: 0.0,
        res: f64::NAN,
        converged: false,
        warnings: Vec::new(),
        x: Vec::new(),
    };
    match timed_runs(instance, method, alpha, &config, spec.repeats) {
        Ok((report, mean)) => {
            row.iterations = report.iterations;
            row.cpu_s = mean;
            row.res = report.final_res;
            row.converged = report.converged;
            row.warnings.extend(report.warnings);
            row.x = report.x;
            if !report.converged {
                row.warnings.push(format!("no convergence within k_max = {}", config.k_max));
            }
        }
        Err(GaveError::Divergence { iteration, res }) => {
            row.iterations = iteration;
            row.res = res;
            row.warnings.push(format!("diverged at step {iteration}"));
        }
        Err(e) => return Err(e),
    }
    Ok(row)
}

/// Executes the experiment. Rows come out in spec order (problem sizes
/// outer, methods inner). With `threads > 1` rows run concurrently on a
/// dedicated pool; the repeats of one row always run on one thread.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> Result<Vec<ResultRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| GaveError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(spec))
}

fn run_in_pool(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let instances = build_instances(&spec.problem)?;

    // α per (instance, method); tuning is shared between methods with the
    // same Ω and grid, e.g. the exact and inexact SOR variants
    let mut tuned: HashMap<(usize, String, String), f64> = HashMap::new();
    let mut alphas = vec![vec![None; spec.methods.len()]; instances.len()];
    for (ii, inst) in instances.iter().enumerate() {
        for (mi, method) in spec.methods.iter().enumerate() {
            alphas[ii][mi] = match &method.alpha {
                None => None,
                Some(AlphaChoice::Fixed(a)) => Some(*a),
                Some(AlphaChoice::Tune(grid)) => {
                    let grid = grid.clone().unwrap_or_else(|| spec::grid_for(&spec.problem));
                    let key = (ii, method.omega.tag(), format!("{grid:?}"));
                    if !tuned.contains_key(&key) {
                        let omega = method.omega.to_spec(inst.hat_m.as_ref())?;
                        let config = SolverConfig {
                            inner: InnerSolver::Direct,
                            ..spec.solver_config(method)
                        };
                        let r = tune_alpha(&inst.problem, &omega, &grid, &config)?;
                        tuned.insert(key.clone(), r.alpha);
                    }
                    Some(tuned[&key])
                }
            };
        }
    }

    let tasks: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..spec.methods.len()).map(move |m| (i, m)))
        .collect();
    tasks
        .par_iter()
        .map(|&(i, m)| {
            run_row(spec, &instances[i], &spec.methods[m], alphas[i][m])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn small_spec(extra: &str) -> ExperimentSpec {
        let text = format!(
            r#"
repeats = 2
[problem]
family = "lcp-grid"
m = [6, 8]
mu = 4.0

[[methods]]
label = "NJ"
splitting = "nj"
omega = "hat"

[[methods]]
label = "INSOR"
splitting = "nsor"
alpha = "tune"
omega = "hat"
inner = "lsqr"
{extra}
"#
        );
        ExperimentSpec::from_toml(&text, Path::new(".")).unwrap()
    }

    #[test]
    fn rows_in_spec_order() {
        let rows = run_experiment(&small_spec(""), 1).unwrap();
        assert_eq!(rows.len(), 4);
        let order: Vec<(&str, usize)> = rows.iter().map(|r| (r.method.as_str(), r.n)).collect();
        assert_eq!(order, vec![("NJ", 36), ("INSOR", 36), ("NJ", 64), ("INSOR", 64)]);
        for r in &rows {
            assert!(r.converged && r.res <= 1e-6);
            assert!(r.cpu_s >= 0.0);
        }
        assert!(rows[1].alpha.is_some() && rows[0].alpha.is_none());
    }

    #[test]
    fn parallel_rows_match_serial() {
        let spec = small_spec("");
        let a = run_experiment(&spec, 1).unwrap();
        let b = run_experiment(&spec, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.iterations, x.res, x.alpha), (y.iterations, y.res, y.alpha));
        }
    }

    #[test]
    fn divergence_becomes_a_row() {
        use crate::problems::{save_problem, ProblemMeta};
        // A = I, B = 3I: the Picard map triples |x| every step
        let p = GaveProblem::new(
            SparseMatrix::identity(3),
            SparseMatrix::from_diagonal(&[3.0; 3]),
            vec![1.0; 3],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_problem(&p, &ProblemMeta::default(), dir.path()).unwrap();
        let text = format!(
            "repeats = 1\n[problem]\nfamily = \"directory\"\npath = {:?}\n\
             [[methods]]\nsplitting = \"picard\"\n",
            dir.path().display().to_string()
        );
        let spec = ExperimentSpec::from_toml(&text, Path::new(".")).unwrap();
        let rows = run_experiment(&spec, 1).unwrap();
        assert!(!rows[0].converged);
        assert!(rows[0].warnings.iter().any(|w| w.contains("diverged")));
        assert!(rows[0].res > crate::solver::DIVERGENCE_RES);
    }
}
