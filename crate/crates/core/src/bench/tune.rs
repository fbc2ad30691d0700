//! Experimental choice of the NSOR relaxation parameter.

use rayon::prelude::*;

use crate::error::{GaveError, Result};
use crate::problems::GaveProblem;
use crate::solver::{nms_solve, SolverConfig};
use crate::splittings::{build_splitting, OmegaSpec, SplittingKind};

/// Default grid spacing for α tuning.
pub const DEFAULT_STEP: f64 = 0.1;

/// `start, start + step, …` up to `stop` inclusive, rounded to 9 decimals
/// so the points print as typed.
pub fn alpha_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(start <= stop) || !start.is_finite() || !stop.is_finite() {
        return Err(GaveError::Config(format!(
            "bad alpha grid start={start} stop={stop} step={step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// `[0.5, 1.5]` for `μ > 0` and `[0.5, 1.9]` otherwise, step [`DEFAULT_STEP`].
pub fn default_grid(mu: f64) -> Vec<f64> {
    let stop = if mu > 0.0 { 1.5 } else { 1.9 };
    alpha_grid(0.5, stop, DEFAULT_STEP).expect("constant grid is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunePoint {
    pub alpha: f64,
    /// `None` when the run diverged or hit a numerical failure.
    pub iterations: Option<usize>,
    pub res: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub alpha: f64,
    pub iterations: usize,
    pub res: f64,
    pub points: Vec<TunePoint>,
}

/// Runs the exact NSOR iteration at every grid point and returns the α with
/// the fewest iterations. Ties go to the smaller final RES, then the smaller α.
/// Points that diverge or fail to converge within `k_max` are not eligible.
pub fn tune_alpha(
    problem: &GaveProblem,
    omega: &OmegaSpec,
    grid: &[f64],
    config: &SolverConfig,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(GaveError::Config("alpha grid is empty".into()));
    }
    if let Some(a) = grid.iter().find(|a| !(**a > 0.0 && **a < 2.0)) {
        return Err(GaveError::Parameter(format!("alpha grid value {a} is outside (0, 2)")));
    }
    let points: Vec<TunePoint> = grid
        .par_iter()
        .map(|&alpha| -> Result<TunePoint> {
            let s = build_splitting(&problem.a, SplittingKind::Nsor { alpha }, omega)?;
            match nms_solve(problem, &s, omega, config) {
                Ok(r) => Ok(TunePoint {
                    alpha,
                    iterations: Some(r.iterations),
                    res: r.final_res,
                    converged: r.converged,
                }),
                Err(e) if e.is_numerical() => Ok(TunePoint {
                    alpha,
                    iterations: None,
                    res: f64::INFINITY,
                    converged: false,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let best = points
        .iter()
        .filter(|p| p.converged)
        .min_by(|x, y| {
            x.iterations
                .cmp(&y.iterations)
                .then(x.res.total_cmp(&y.res))
                .then(x.alpha.total_cmp(&y.alpha))
        })
        .ok_or(GaveError::NoConvergence {
            iterations: config.k_max,
            estimate: f64::NAN,
        })?;
    Ok(TuneResult {
        alpha: best.alpha,
        iterations: best.iterations.expect("converged points have a count"),
        res: best.res,
        points: points.clone(),
    })
}
