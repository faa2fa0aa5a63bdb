//! Library half of the `saddlecert` command-line tool.
//!
//! [`run`] does everything except touching the process: it reads the
//! problem file, dispatches to the `saddlecert` crate and returns the exit
//! code together with the report text for standard output.

pub mod problem;
pub mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use saddlecert::minimax::{self, grid_minimax, verify_saddle, weak_duality_check};
use saddlecert::objective::check_convex_concave;
use saddlecert::phi::DEFAULT_PHI_RESOLUTION;
use saddlecert::quadratic::{solve_quadratic_game, verify_saddle_chain, QuadraticParams};
use saddlecert::{default_resolution, Domain, Error, Objective, PhiContext, PhiSolveResult, SolverParams};
use serde::Serialize;

pub use problem::ProblemFile;

/// Version of the report layout.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Parser)]
#[command(name = "saddlecert", version, about = "Certify and compute saddle points of convex-concave games")]
pub struct Args {
    pub command: Command,
    /// JSON problem file.
    pub problem: PathBuf,
    /// Point in X, comma separated (verify, phi; start point for solve-phi).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Point in Y, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Option<Vec<f64>>,
    /// Overrides the grid resolution of the problem file.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Writes the solve-phi trajectory as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Gap,
    Verify,
    Phi,
    SolvePhi,
    SolveQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Degenerate,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Degenerate => 3,
        }
    }
}

pub const EXIT_INPUT_ERROR: i32 = 2;

/// What the process should do on exit.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    /// Report for standard output; empty on input errors.
    pub stdout: String,
    /// Diagnostic for standard error on input errors.
    pub error: Option<String>,
}

impl Outcome {
    fn input_error(message: String) -> Self {
        Outcome { code: EXIT_INPUT_ERROR, stdout: String::new(), error: Some(message) }
    }
}

#[derive(Debug, Serialize)]
struct Flags<'a> {
    x: &'a Option<Vec<f64>>,
    y: &'a Option<Vec<f64>>,
    resolution: Option<usize>,
    trace: Option<String>,
}

#[derive(Debug, Serialize)]
struct Inputs<'a> {
    problem_path: String,
    problem: &'a ProblemFile,
    flags: Flags<'a>,
}

#[derive(Debug, Serialize)]
struct Versions {
    library: &'static str,
    format: u32,
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    command: Command,
    inputs: Inputs<'a>,
    results: serde_json::Value,
    status: Status,
    versions: Versions,
}

#[derive(Debug, Serialize)]
struct EstimateOut {
    sup_inf: f64,
    inf_sup: f64,
    gap: f64,
    outer_max_arg: Vec<f64>,
    outer_min_arg: Vec<f64>,
    resolution: usize,
    error_bound: Option<f64>,
    weak_duality_holds: bool,
}

#[derive(Debug, Serialize)]
struct CandidateOut {
    x_star: Vec<f64>,
    y_star: Vec<f64>,
    value: f64,
    max_violation: f64,
    min_violation: f64,
    verified: bool,
    resolution: usize,
    tol: f64,
}

impl CandidateOut {
    fn new(c: minimax::SaddleCandidate, resolution: usize, tol: f64) -> Self {
        CandidateOut {
            x_star: c.x_star,
            y_star: c.y_star,
            value: c.value,
            max_violation: c.max_violation,
            min_violation: c.min_violation,
            verified: c.verified,
            resolution,
            tol,
        }
    }
}

#[derive(Debug, Serialize)]
struct ConvexityOut {
    samples: usize,
    seed: u64,
    concavity_in_x_worst: f64,
    convexity_in_y_worst: f64,
    summary: String,
}

#[derive(Debug, Serialize)]
struct PhiSolveOut {
    x_star: Vec<f64>,
    y_star: Vec<f64>,
    phi_value: f64,
    iterations: usize,
    converged: bool,
    termination: String,
    phi_resolution: usize,
    verification: CandidateOut,
}

#[derive(Debug, Serialize)]
struct QuadraticOut {
    x_star: Vec<f64>,
    y_star: Vec<f64>,
    value_sup_inf: f64,
    value_inf_sup: f64,
    #[serde(rename = "R")]
    radius: f64,
    x0_members_checked: usize,
    chain_ok: bool,
    ascent_iterations: usize,
    bound_ok: bool,
    chain: Option<ChainOut>,
}

#[derive(Debug, Serialize)]
struct ChainOut {
    min_max: f64,
    max_at_y_star: f64,
    value: f64,
    min_at_x_star: f64,
    max_inf: f64,
    max_min_x0: f64,
    x0_nodes: usize,
    holds: bool,
}

enum Failure {
    Input(String),
    Degenerate(String),
}

impl From<String> for Failure {
    fn from(message: String) -> Self {
        Failure::Input(message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Degenerate(m) => Failure::Degenerate(m),
            other => Failure::Input(other.to_string()),
        }
    }
}

/// Runs one command. Progress lines go to `progress`.
pub fn run(args: &Args, progress: &mut dyn Write) -> Outcome {
    let text = match fs::read_to_string(&args.problem) {
        Ok(t) => t,
        Err(e) => return Outcome::input_error(format!("{}: {e}", args.problem.display())),
    };
    let problem = match ProblemFile::parse(&text) {
        Ok(p) => p,
        Err(e) => return Outcome::input_error(format!("{}: {e}", args.problem.display())),
    };
    if args.trace.is_some() && args.command != Command::SolvePhi {
        return Outcome::input_error("--trace is only accepted by solve-phi".into());
    }
    let name = args.command.to_possible_value().expect("no skipped commands");
    let _ = writeln!(progress, "saddlecert: {} on {}", name.get_name(), args.problem.display());

    let (results, status) = match dispatch(args, &problem, progress) {
        Ok(r) => r,
        Err(Failure::Input(m)) => return Outcome::input_error(m),
        Err(Failure::Degenerate(m)) => (serde_json::json!({ "degenerate": true, "reason": m }), Status::Degenerate),
    };
    let report = RunReport {
        command: args.command,
        inputs: Inputs {
            problem_path: args.problem.display().to_string(),
            problem: &problem,
            flags: Flags {
                x: &args.x,
                y: &args.y,
                resolution: args.resolution,
                trace: args.trace.as_ref().map(|p| p.display().to_string()),
            },
        },
        results,
        status,
        versions: Versions { library: saddlecert::VERSION, format: FORMAT_VERSION },
    };
    let mut stdout = report::to_exact_json(&report);
    stdout.push('\n');
    Outcome { code: status.exit_code(), stdout, error: None }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("result types serialize")
}

fn dispatch(
    args: &Args,
    problem: &ProblemFile,
    progress: &mut dyn Write,
) -> Result<(serde_json::Value, Status), Failure> {
    if args.command == Command::SolveQuadratic {
        return solve_quadratic(args, problem, progress);
    }
    let f = problem.objective()?;
    let dx = problem.domain_x()?;
    let dy = problem.domain_y()?;
    let opts = &problem.options;
    let resolution = args.resolution.or(opts.resolution).unwrap_or_else(|| default_resolution(dx.dim().max(dy.dim())));
    let tol = opts.tol.unwrap_or(minimax::DEFAULT_TOL);
    let convexity = convexity(problem, &f, &dx, &dy)?;

    let (mut results, status) = match args.command {
        Command::Gap => {
            let est = grid_minimax(&f, &dx, &dy, resolution)?;
            let holds = weak_duality_check(&est);
            let out = EstimateOut {
                sup_inf: est.sup_inf,
                inf_sup: est.inf_sup,
                gap: est.gap(),
                outer_max_arg: est.outer_max_arg,
                outer_min_arg: est.outer_min_arg,
                resolution: est.resolution,
                error_bound: est.error_bound,
                weak_duality_holds: holds,
            };
            (to_value(&out), if holds { Status::Pass } else { Status::Fail })
        }
        Command::Verify => {
            let (x, y) = point(args)?;
            let cand = verify_saddle(&f, &x, &y, &dx, &dy, resolution, tol)?;
            let status = if cand.verified { Status::Pass } else { Status::Fail };
            (to_value(&CandidateOut::new(cand, resolution, tol)), status)
        }
        Command::Phi => {
            let (x, y) = point(args)?;
            for (d, p, name) in [(&dx, &x, "--x"), (&dy, &y, "--y")] {
                if !d.contains(p, saddlecert::MEMBERSHIP_TOL)? {
                    return Err(format!("{name} is not in its domain").into());
                }
            }
            let phi_res = opts.phi_resolution.unwrap_or(DEFAULT_PHI_RESOLUTION);
            let ctx = PhiContext::new(f, dx, dy, phi_res)?;
            let value = ctx.phi(&x, &y)?;
            let phi_tol = solver_params(problem).tol;
            let out = serde_json::json!({ "phi": value, "phi_resolution": phi_res, "tol": phi_tol });
            (out, if value <= phi_tol { Status::Pass } else { Status::Fail })
        }
        Command::SolvePhi => {
            let phi_res = opts.phi_resolution.unwrap_or(DEFAULT_PHI_RESOLUTION);
            let x0 = match &args.x {
                Some(x) => x.clone(),
                None => vec![0.0; dx.dim()],
            };
            let y0 = match &args.y {
                Some(y) => y.clone(),
                None => vec![0.0; dy.dim()],
            };
            let ctx = PhiContext::new(f.clone(), dx.clone(), dy.clone(), phi_res)?;
            let result = ctx.minimize(&x0, &y0, solver_params(problem))?;
            let _ = writeln!(
                progress,
                "saddlecert: {} iterations, phi = {:e} ({:?})",
                result.iterations, result.phi_value, result.termination
            );
            if let Some(path) = &args.trace {
                write_trajectory(&result, path).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            let cand = verify_saddle(&f, &result.x_star, &result.y_star, &dx, &dy, resolution, tol)?;
            let status = if result.converged && cand.verified { Status::Pass } else { Status::Fail };
            let out = PhiSolveOut {
                x_star: result.x_star,
                y_star: result.y_star,
                phi_value: result.phi_value,
                iterations: result.iterations,
                converged: result.converged,
                termination: format!("{:?}", result.termination),
                phi_resolution: phi_res,
                verification: CandidateOut::new(cand, resolution, tol),
            };
            (to_value(&out), status)
        }
        Command::SolveQuadratic => unreachable!("handled above"),
    };
    if let Some(c) = convexity {
        results["convexity"] = to_value(&c);
    }
    Ok((results, status))
}

fn point(args: &Args) -> Result<(Vec<f64>, Vec<f64>), String> {
    match (&args.x, &args.y) {
        (Some(x), Some(y)) => Ok((x.clone(), y.clone())),
        _ => Err(format!("{:?} needs both --x and --y", args.command)),
    }
}

fn solver_params(problem: &ProblemFile) -> SolverParams {
    let d = SolverParams::default();
    let s = problem.options.solver.clone().unwrap_or_default();
    SolverParams {
        step0: s.step0.unwrap_or(d.step0),
        shrink: s.shrink.unwrap_or(d.shrink),
        max_iters: s.max_iters.unwrap_or(d.max_iters),
        tol: s.tol.unwrap_or(d.tol),
    }
}

fn convexity(problem: &ProblemFile, f: &Objective, dx: &Domain, dy: &Domain) -> Result<Option<ConvexityOut>, Failure> {
    let (Some(samples), Some(seed)) = (problem.options.convexity_samples, problem.options.seed) else {
        return Ok(None);
    };
    let r = check_convex_concave(f, dx, dy, samples, seed)?;
    Ok(Some(ConvexityOut {
        samples,
        seed,
        concavity_in_x_worst: r.concavity_in_x.worst,
        convexity_in_y_worst: r.convexity_in_y.worst,
        summary: r.to_string(),
    }))
}

fn solve_quadratic(
    args: &Args,
    problem: &ProblemFile,
    progress: &mut dyn Write,
) -> Result<(serde_json::Value, Status), Failure> {
    if !problem.is_quadratic() {
        return Err("solve-quadratic needs a quadratic objective".to_string().into());
    }
    let spec = problem.quadratic_spec()?;
    let q = problem.options.quadratic.clone().unwrap_or_default();
    let d = QuadraticParams::default();
    let cross = args.resolution.or(q.cross_check_resolution).unwrap_or(d.cross_check_resolution);
    let params = QuadraticParams {
        sweep_resolution: q.sweep_resolution.unwrap_or(d.sweep_resolution),
        cross_check_resolution: cross,
        max_iters: q.max_iters.unwrap_or(d.max_iters),
        tol: q.chain_tol.unwrap_or(d.tol),
        ..d
    };
    let report = solve_quadratic_game(&spec, params)?;
    let _ = writeln!(
        progress,
        "saddlecert: R = {:e}, {} ascent steps, gap {:e}",
        report.radius,
        report.ascent_iterations,
        report.value_inf_sup - report.value_sup_inf
    );
    let chain = if report.chain_ok { Some(verify_saddle_chain(&spec, &report, cross, params.tol)?) } else { None };
    let pass = report.chain_ok && chain.as_ref().is_some_and(|c| c.holds);
    let out = QuadraticOut {
        x_star: report.x_star,
        y_star: report.y_star,
        value_sup_inf: report.value_sup_inf,
        value_inf_sup: report.value_inf_sup,
        radius: report.radius,
        x0_members_checked: report.x0_members_checked,
        chain_ok: report.chain_ok,
        ascent_iterations: report.ascent_iterations,
        bound_ok: report.bound_ok,
        chain: chain.map(|c| ChainOut {
            min_max: c.min_max,
            max_at_y_star: c.max_at_y_star,
            value: c.value,
            min_at_x_star: c.min_at_x_star,
            max_inf: c.max_inf,
            max_min_x0: c.max_min_x0,
            x0_nodes: c.x0_nodes,
            holds: c.holds,
        }),
    };
    Ok((to_value(&out), if pass { Status::Pass } else { Status::Fail }))
}

/// Writes `iter,x1..,y1..,phi` rows, one per accepted iterate.
pub fn write_trajectory(result: &PhiSolveResult, path: &Path) -> std::io::Result<()> {
    let dx = result.x_star.len();
    let dy = result.y_star.len();
    let mut out = String::from("iter");
    for i in 1..=dx {
        out.push_str(&format!(",x{i}"));
    }
    for j in 1..=dy {
        out.push_str(&format!(",y{j}"));
    }
    out.push_str(",phi\n");
    for p in &result.trajectory {
        out.push_str(&p.iter.to_string());
        for v in p.x.iter().chain(&p.y).chain(std::iter::once(&p.phi)) {
            out.push(',');
            out.push_str(&report::exact(*v));
        }
        out.push('\n');
    }
    fs::write(path, out)
}
