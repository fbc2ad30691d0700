use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gave::bench::{
    alpha_grid, default_grid, emit_table, run_experiment, tune_alpha, ExperimentSpec, Instance,
    OmegaChoice, TableFormat,
};
use gave::certify::{
    check_corollary, check_exact, check_inexact, check_m_inverse, check_scalar_omega, Certificate,
    Corollary,
};
use gave::io::save_vector;
use gave::linalg::SparseMatrix;
use gave::problems::{gen_certified, gen_lcp_grid, load_problem, save_problem, ProblemMeta};
use gave::solver::{solve, InitialGuess, InnerSolver, SolverConfig, ThetaSchedule};
use gave::splittings::{build_splitting, SplittingKind};
use gave::{GaveError, Result};

#[derive(Parser)]
#[command(name = "gave", version, about = "Newton-based matrix splitting solvers for A x - B|x| = b")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format for tables.
    #[arg(long, global = true, default_value = "csv")]
    format: TableFormat,

    /// Write output here instead of stdout (a directory for `gen`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for `bench`.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Seed for randomly generated problems.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Write a problem directory.
    Gen(ProblemArgs),
    /// Run a single solve and print its report.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        method: MethodArgs,
        /// Use LSQR inner solves.
        #[arg(long)]
        inexact: bool,
        /// `decaying` or a constant in [0, 1).
        #[arg(long, default_value = "decaying")]
        theta: String,
        #[arg(long, default_value_t = 10)]
        l_max: usize,
        #[arg(long)]
        max_inner: Option<usize>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        k_max: usize,
        /// `alt10` or `zeros`.
        #[arg(long, default_value = "alt10")]
        x0: String,
    },
    /// Evaluate the sufficient convergence conditions for a method.
    Certify {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
    },
    /// Search the NSOR relaxation parameter.
    Tune {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "zero")]
        omega: String,
        /// `start:stop:step`; defaults depend on the sign of mu.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Run an experiment spec and write its result table.
    Bench {
        #[arg(long)]
        spec: PathBuf,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem directory.
    #[arg(long, conflicts_with_all = ["m", "n"])]
    problem: Option<PathBuf>,
    /// Grid size of the LCP grid family (order m²).
    #[arg(long, requires = "mu")]
    m: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// Order of a random certified instance.
    #[arg(long, conflicts_with = "m")]
    n: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    b_norm_scale: f64,
    #[arg(long, default_value_t = 10.0)]
    dominance: f64,
}

#[derive(Args)]
struct MethodArgs {
    /// Splitting, e.g. `nj`, `nsor:alpha=0.9`, `drs:gamma=1`.
    #[arg(long, default_value = "nj")]
    method: SplittingKind,
    /// `zero`, `scalar:<w>`, `hat`, `hat:<c>` or `file:<path>`.
    #[arg(long, default_value = "zero")]
    omega: String,
}

impl ProblemArgs {
    fn load(&self, seed: u64) -> Result<(Instance, ProblemMeta)> {
        if let Some(dir) = &self.problem {
            let (problem, meta) = load_problem(dir)?;
            let hat_m = match (meta.m, meta.mu) {
                (Some(m), Some(_)) => Some(gave::problems::grid_laplacian(m)),
                _ => None,
            };
            let inst = Instance {
                problem,
                hat_m,
                mu: meta.mu,
            };
            return Ok((inst, meta));
        }
        if let Some(m) = self.m {
            let mu = self.mu.expect("clap enforces --mu with --m");
            let g = gen_lcp_grid(m, mu)?;
            let meta = ProblemMeta {
                provenance: g.problem.provenance.clone(),
                m: Some(m),
                mu: Some(mu),
                seed: None,
            };
            return Ok((
                Instance {
                    problem: g.problem,
                    hat_m: Some(g.hat_m),
                    mu: Some(mu),
                },
                meta,
            ));
        }
        if let Some(n) = self.n {
            let problem = gen_certified(n, seed, self.b_norm_scale, self.dominance)?;
            let meta = ProblemMeta {
                provenance: problem.provenance.clone(),
                m: None,
                mu: None,
                seed: Some(seed),
            };
            return Ok((
                Instance {
                    problem,
                    hat_m: None,
                    mu: None,
                },
                meta,
            ));
        }
        Err(GaveError::Config("give --problem, --m with --mu, or --n".into()))
    }
}

fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            Ok(fs::write(p, text)?)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn is_identity(b: &SparseMatrix) -> bool {
    b.nnz() == b.n_rows() && b.triplets().all(|(r, c, v)| r == c && v == 1.0)
}

fn certificates(inst: &Instance, kind: SplittingKind, omega_token: &str, theta: f64) -> Result<Vec<Result<Certificate>>> {
    let choice = OmegaChoice::parse(omega_token, Path::new("."))?;
    let spec = choice.to_spec(inst.hat_m.as_ref())?;
    let p = &inst.problem;
    let s = build_splitting(&p.a, kind, &spec)?;
    let om = s.effective_omega(&spec)?;
    let (a, b) = (&p.a, &p.b_mat);
    let (m, n) = (&s.m_part, &s.n_part);
    let mut out = vec![
        check_exact(a, b, m, n, &om),
        check_inexact(a, b, m, n, &om, theta),
        check_m_inverse(a, b, m, n, &om, theta),
    ];
    let scalar = spec.scalar();
    if let (SplittingKind::Hss, Some(w)) = (kind, scalar) {
        out.push(check_scalar_omega(a, b, w, theta));
    }
    match kind {
        SplittingKind::Mn => {
            out.push(check_corollary(Corollary::ModifiedNewton { a, b, omega: &om, theta }));
            out.push(check_corollary(Corollary::ModifiedNewtonAInverse { a, b, omega: &om, theta }));
        }
        SplittingKind::Picard => out.push(check_corollary(Corollary::Picard { a, b, theta })),
        SplittingKind::Nmn => {
            out.push(check_corollary(Corollary::NewModifiedNewton { a, b, omega: &om, theta }));
            out.push(check_corollary(Corollary::NewModifiedNewtonAInverse { a, b, omega: &om, theta }));
        }
        _ => {}
    }
    if is_identity(b) {
        out.push(check_corollary(Corollary::Ave { m, n, omega: &om, theta }));
        out.push(check_corollary(Corollary::AveMInverse { m, n, omega: &om, theta }));
        if let SplittingKind::Drs { gamma } = kind {
            out.push(check_corollary(Corollary::DouglasRachford { a, gamma, theta }));
            out.push(check_corollary(Corollary::DouglasRachfordAlt { a, gamma, theta }));
        }
        if let (SplittingKind::Hss, Some(w)) = (kind, scalar) {
            out.push(check_corollary(Corollary::AveScalarOmega { a, omega: w, theta }));
        }
    }
    Ok(out)
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| GaveError::Config(format!("bad grid `{text}`")))?;
    match nums.as_slice() {
        [start, stop, step] => alpha_grid(*start, *stop, *step),
        _ => Err(GaveError::Config(format!("grid must be start:stop:step, got `{text}`"))),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Gen(args) => {
            let dir = out.ok_or_else(|| GaveError::Config("gen needs --out <dir>".into()))?;
            let (inst, meta) = args.load(cli.seed)?;
            save_problem(&inst.problem, &meta, dir)?;
            eprintln!("wrote problem of order {} to {}", inst.problem.n(), dir.display());
        }
        Command::Solve {
            problem,
            method,
            inexact,
            theta,
            l_max,
            max_inner,
            tol,
            k_max,
            x0,
        } => {
            let (inst, _) = problem.load(cli.seed)?;
            let choice = OmegaChoice::parse(&method.omega, Path::new("."))?;
            let omega = choice.to_spec(inst.hat_m.as_ref())?;
            let splitting = build_splitting(&inst.problem.a, method.method, &omega)?;
            let theta = match theta.as_str() {
                "decaying" => ThetaSchedule::Decaying { l_max },
                t => ThetaSchedule::Constant(
                    t.parse()
                        .map_err(|_| GaveError::Config(format!("bad theta `{t}`")))?,
                ),
            };
            let config = SolverConfig {
                tol,
                k_max,
                x0: x0.parse::<InitialGuess>()?,
                theta,
                inner: if inexact {
                    InnerSolver::Lsqr { max_inner }
                } else {
                    InnerSolver::Direct
                },
                record_history: true,
                audit: false,
            };
            let r = solve(&inst.problem, &splitting, &omega, &config)?;
            println!("method={} omega={} n={}", method.method, choice.tag(), inst.problem.n());
            println!(
                "converged={} IT={} RES={} time_s={:.4}",
                r.converged,
                r.iterations,
                gave::bench::fmt_sci(r.final_res, 4),
                r.wall_time_s
            );
            if !r.inner_iters.is_empty() {
                let total: usize = r.inner_iters.iter().sum();
                println!("inner_total={total} inner_per_step={:?}", r.inner_iters);
            }
            for w in &r.warnings {
                println!("warning: {w}");
            }
            if let Some(p) = out {
                save_vector(&r.x, p)?;
            }
            if !r.converged {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Certify {
            problem,
            method,
            theta,
        } => {
            let (inst, _) = problem.load(cli.seed)?;
            let mut text = String::new();
            for c in certificates(&inst, method.method, &method.omega, theta)? {
                match c {
                    Ok(c) => text.push_str(&format!("{c}\n")),
                    Err(e) if e.is_numerical() || matches!(e, GaveError::Precondition(_)) => {
                        eprintln!("skipped: {e}");
                    }
                    Err(e) => return Err(e),
                }
            }
            write_output(&text, out)?;
        }
        Command::Tune {
            problem,
            omega,
            grid,
        } => {
            let (inst, _) = problem.load(cli.seed)?;
            let spec = OmegaChoice::parse(&omega, Path::new("."))?.to_spec(inst.hat_m.as_ref())?;
            let grid = match grid {
                Some(g) => parse_grid(&g)?,
                None => default_grid(inst.mu.unwrap_or(1.0)),
            };
            let r = tune_alpha(&inst.problem, &spec, &grid, &SolverConfig::default())?;
            let mut text = String::from("alpha,IT,RES,converged\n");
            for p in &r.points {
                let it = p.iterations.map(|i| i.to_string()).unwrap_or_else(|| "-".into());
                text.push_str(&format!(
                    "{},{it},{},{}\n",
                    p.alpha,
                    gave::bench::fmt_sci(p.res, 4),
                    p.converged
                ));
            }
            text.push_str(&format!("# alpha_exp={} IT={}\n", r.alpha, r.iterations));
            write_output(&text, out)?;
        }
        Command::Bench { spec } => {
            let spec = ExperimentSpec::from_file(&spec)?;
            let rows = run_experiment(&spec, cli.threads)?;
            let text = emit_table(&rows, cli.format);
            write_output(&text, out.or(spec.output.as_deref()))?;
            if rows.iter().any(|r| r.warnings.iter().any(|w| w.starts_with("diverged"))) {
                eprintln!("error: at least one run diverged");
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
