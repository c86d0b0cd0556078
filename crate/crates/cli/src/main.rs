//! `mis-bounds` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 LP solver failure,
//! 3 cutting-plane stall or iteration limit, 4 failed self-check.

mod io;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mis_bounds::grid::GridSet;
use mis_bounds::lower_bound::{build_lp, lower_bound, BindingPair, LowerBoundOptions, LowerBoundResult};
use mis_bounds::lp::{write_lp_format, Backend};
use mis_bounds::mechanism::{
    expected_ratio, monte_carlo_ratio, phi, worst_case_instance, McEstimate, ThresholdSampler, TimeMatrix,
};
use mis_bounds::report::{version, BoundReport};
use mis_bounds::two_task::{
    certify_two_task, cutting_plane, phi_two, refine_grid, require_two_tasks, CountermonotoneSampler,
    CuttingPlaneOptions, IterationRecord, LoopStatus, PiecewiseRationalDoc, TwoTaskCertificate,
};
use mis_bounds::upper_bound::{certify_exact, choose_a, upper_bound, SentinelChoice};
use mis_bounds::Error;

#[derive(Parser)]
#[command(name = "mis-bounds", version, about = "Bounds on the approximation ratio of randomized MIS mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// LP backend: highs or simplex.
    #[arg(long, global = true, env = "SOLVER_BACKEND")]
    solver: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Lower bound from the epigraph LP over a grid.
    Lower(LowerArgs),
    /// Upper bound of the piecewise-constant algorithm built from an LP solution.
    Upper(UpperArgs),
    /// Two-task cutting-plane bracket, grid refinement and refined lower bound.
    TwoTask(TwoTaskArgs),
    /// Monte-Carlo cross-check of analytic expected ratios.
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Number of tasks.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Uniform grid parameter.
    #[arg(long, conflicts_with = "grid")]
    k: Option<usize>,
    /// Grid file: a JSON array of points or a report with a `grid` field.
    #[arg(long)]
    grid: Option<PathBuf>,
}

impl GridArgs {
    fn resolve(&self) -> Result<GridSet<f64>> {
        match (&self.grid, self.k) {
            (Some(path), _) => io::read_grid(path),
            (None, Some(k)) => Ok(GridSet::uniform(k)?),
            (None, None) => bail!("pass --k or --grid"),
        }
    }
}

#[derive(Args)]
struct LowerArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = mis_bounds::lower_bound::DEFAULT_BINDING_TOL)]
    binding_tol: f64,
    /// Also write the LP in CPLEX LP format.
    #[arg(long)]
    export_lp: Option<PathBuf>,
}

#[derive(Args)]
struct UpperArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Read `g` from a `lower` report or grid-CDF file instead of solving.
    #[arg(long)]
    from: Option<PathBuf>,
    /// Sentinel: a number, `default` (twice the largest point) or `auto`.
    #[arg(long, default_value = "default")]
    a: String,
    /// Also certify the bound in exact rational arithmetic.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = mis_bounds::lower_bound::DEFAULT_BINDING_TOL)]
    binding_tol: f64,
}

#[derive(Args)]
struct TwoTaskArgs {
    /// Must be 2; the copula construction exists only for two tasks.
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 5, conflicts_with = "grid")]
    k: usize,
    /// Symmetric grid file instead of the uniform grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = mis_bounds::two_task::DEFAULT_STOP_TOL)]
    stop_tol: f64,
    #[arg(long, default_value_t = mis_bounds::two_task::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = mis_bounds::lower_bound::DEFAULT_BINDING_TOL)]
    binding_tol: f64,
    /// Certify the upper bound in exact rational arithmetic.
    #[arg(long)]
    exact: bool,
    /// Skip grid refinement and the refined lower bound.
    #[arg(long)]
    no_refine: bool,
    /// Write the per-iteration bracket as CSV.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Threshold distribution: `{"atoms": [{"z": [..], "w": ..}]}`.
    #[arg(long, required_unless_present = "two_task", conflicts_with = "two_task")]
    dist: Option<PathBuf>,
    /// Two-task CDF (a `two-task` report or its `cdf` field), sampled
    /// through the countermonotone coupling.
    #[arg(long)]
    two_task: Option<PathBuf>,
    /// Instance CSV: machine-1 times on the first row, machine-2 on the second.
    #[arg(long, conflicts_with = "pairs")]
    instance: Option<PathBuf>,
    /// Number of random adversarial instances `T(x, y)`.
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Size of the padding tasks when the distribution has more than two coordinates.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Flag rows whose estimate is further than this many standard errors away.
    #[arg(long, default_value_t = 3.0)]
    sigma: f64,
    /// Also write the comparison table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Serialize, Default)]
struct RunConfig {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    binding_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
    exact: bool,
}

fn path_string(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

struct RunContext {
    out: Option<PathBuf>,
    backend: Backend,
}

impl RunContext {
    /// JSON goes to `--out` with the summary on stdout, or to stdout with
    /// the summary on stderr.
    fn emit<T: Serialize>(&self, report: &T, summary: &str) -> Result<()> {
        io::write_json(self.out.as_deref(), report)?;
        if self.out.is_some() {
            println!("{summary}");
        } else {
            eprintln!("{summary}");
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct LowerSection {
    n: usize,
    k: Option<usize>,
    bound: f64,
    audit_max: f64,
    min_box_sum: f64,
    num_vars: usize,
    num_rows: usize,
    backend: String,
    binding: Vec<BindingPair>,
}

impl From<&LowerBoundResult> for LowerSection {
    fn from(r: &LowerBoundResult) -> Self {
        Self {
            n: r.n,
            k: r.grid.k(),
            bound: r.bound,
            audit_max: r.audit_max,
            min_box_sum: r.min_box_sum,
            num_vars: r.num_vars,
            num_rows: r.num_rows,
            backend: r.backend.clone(),
            binding: r.binding.clone(),
        }
    }
}

#[derive(Serialize)]
struct LowerReport {
    config: RunConfig,
    version: String,
    duration_seconds: f64,
    status: String,
    grid: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lower: Option<LowerSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<mis_bounds::cdf::FiniteCdfDoc>,
}

fn cmd_lower(args: &LowerArgs, ctx: &RunContext) -> Result<u8> {
    let start = Instant::now();
    let config = RunConfig {
        command: "lower",
        n: Some(args.grid.n),
        k: args.grid.k,
        grid_file: path_string(&args.grid.grid),
        binding_tol: Some(args.binding_tol),
        solver: Some(ctx.backend.to_string()),
        out: path_string(&ctx.out),
        ..Default::default()
    };
    let grid = args.grid.resolve()?;
    if let Some(path) = &args.export_lp {
        let built = build_lp(args.grid.n, &grid)?;
        std::fs::write(path, write_lp_format(&built.lp)).with_context(|| format!("writing {}", path.display()))?;
    }
    let options = LowerBoundOptions { backend: ctx.backend, binding_tol: args.binding_tol };
    let outcome = lower_bound(args.grid.n, &grid, &options);
    let mut report = LowerReport {
        config,
        version: version(),
        duration_seconds: 0.0,
        status: "optimal".into(),
        grid: grid.points().to_vec(),
        lower: None,
        g: None,
    };
    match outcome {
        Ok(result) => {
            report.lower = Some(LowerSection::from(&result));
            report.g = Some(result.g.to_doc(None));
            report.duration_seconds = start.elapsed().as_secs_f64();
            let summary = format!(
                "lower bound n={} |S|={}: {:.10} ({} variables, {} rows, {})",
                result.n,
                grid.len(),
                result.bound,
                result.num_vars,
                result.num_rows,
                result.backend
            );
            ctx.emit(&report, &summary)?;
            Ok(0)
        }
        Err(e) => {
            report.status = e.to_string();
            report.duration_seconds = start.elapsed().as_secs_f64();
            ctx.emit(&report, &format!("lower bound failed: {e}"))?;
            Err(e.into())
        }
    }
}

#[derive(Serialize)]
struct UpperReport {
    config: RunConfig,
    version: String,
    duration_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lower: Option<LowerSection>,
    upper: BoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<BoundReport>,
}

fn parse_sentinel(text: &str) -> Result<SentinelChoice> {
    Ok(match text {
        "default" => SentinelChoice::Default,
        "auto" => SentinelChoice::Auto,
        other => SentinelChoice::Fixed(other.parse().with_context(|| format!("bad --a value {other:?}"))?),
    })
}

fn cmd_upper(args: &UpperArgs, ctx: &RunContext) -> Result<u8> {
    let start = Instant::now();
    let config = RunConfig {
        command: "upper",
        n: Some(args.grid.n),
        k: args.grid.k,
        grid_file: path_string(&args.from).or_else(|| path_string(&args.grid.grid)),
        a: Some(args.a.clone()),
        binding_tol: Some(args.binding_tol),
        solver: Some(ctx.backend.to_string()),
        out: path_string(&ctx.out),
        exact: args.exact,
        ..Default::default()
    };
    let choice = parse_sentinel(&args.a)?;
    let (g, lower) = match &args.from {
        Some(path) => (io::read_finite_cdf(path)?, None),
        None => {
            let grid = args.grid.resolve()?;
            let options = LowerBoundOptions { backend: ctx.backend, binding_tol: args.binding_tol };
            let result = lower_bound(args.grid.n, &grid, &options)?;
            let section = LowerSection::from(&result);
            (result.g, Some(section))
        }
    };
    let a = choose_a(&g, choice)?;
    let upper = upper_bound(&g, a)?;
    let exact = if args.exact { Some(certify_exact(&g, a)?.0) } else { None };
    if let Some(l) = &lower {
        if l.bound > upper.bound_float + 1e-8 {
            return Err(Error::Invariant(format!("lower bound {} exceeds upper bound {}", l.bound, upper.bound_float)).into());
        }
    }
    let mut summary = format!("upper bound n={} a={a}: {:.10}", g.n(), upper.bound_float);
    if let Some(l) = &lower {
        summary = format!("lower bound: {:.10}\n{summary}", l.bound);
    }
    if let Some(e) = &exact {
        summary += &format!(
            "\nexact: {} (rounded up {})",
            e.bound_rational.as_deref().unwrap_or("?"),
            e.bound_decimal
        );
    }
    let report = UpperReport {
        config,
        version: version(),
        duration_seconds: start.elapsed().as_secs_f64(),
        lower,
        upper,
        exact,
    };
    ctx.emit(&report, &summary)?;
    Ok(0)
}

#[derive(Serialize)]
struct TwoTaskReport {
    config: RunConfig,
    version: String,
    duration_seconds: f64,
    k: usize,
    status: LoopStatus,
    iterations: usize,
    t_lower: f64,
    t_upper: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<TwoTaskCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refined_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refined_lower: Option<LowerSection>,
    /// Upper bound minus the refined lower bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
    cdf: PiecewiseRationalDoc,
    trace: Vec<IterationRecord>,
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    t_lower: f64,
    t_upper: f64,
    gap: f64,
    cell_i: usize,
    cell_j: usize,
}

fn cmd_two_task(args: &TwoTaskArgs, ctx: &RunContext) -> Result<u8> {
    let start = Instant::now();
    require_two_tasks(args.n)?;
    let config = RunConfig {
        command: "two-task",
        n: Some(2),
        k: args.grid.is_none().then_some(args.k),
        grid_file: path_string(&args.grid),
        stop_tol: Some(args.stop_tol),
        binding_tol: Some(args.binding_tol),
        solver: Some(ctx.backend.to_string()),
        out: path_string(&ctx.out),
        exact: args.exact,
        ..Default::default()
    };
    let grid = match &args.grid {
        Some(path) => io::read_grid(path)?,
        None => GridSet::uniform(args.k)?,
    };
    let options = CuttingPlaneOptions {
        stop_tol: args.stop_tol,
        max_iter: args.max_iter,
        binding_tol: args.binding_tol,
        backend: ctx.backend,
    };
    let result = cutting_plane(&grid, &options)?;
    if let Some(path) = &args.trace_csv {
        let rows: Vec<TraceRow> = result
            .trace
            .iter()
            .map(|r| TraceRow {
                iteration: r.iteration,
                t_lower: r.t_lower,
                t_upper: r.t_upper,
                gap: r.t_upper - r.t_lower,
                cell_i: r.cell[0],
                cell_j: r.cell[1],
            })
            .collect();
        io::write_csv(path, &rows)?;
    }
    let converged = result.status == LoopStatus::Converged;
    let certificate = if args.exact { Some(certify_two_task(&result)?.0) } else { None };
    let (refined_grid, refined_lower) = if converged && !args.no_refine {
        let refined = refine_grid(&result, args.binding_tol)?;
        let lower = lower_bound(2, &refined, &LowerBoundOptions { backend: ctx.backend, binding_tol: args.binding_tol })?;
        (Some(refined.points().to_vec()), Some(LowerSection::from(&lower)))
    } else {
        (None, None)
    };
    let upper = certificate.as_ref().map_or(result.t_upper, |c| c.bound_float);
    let gap = refined_lower.as_ref().map(|l| upper - l.bound);
    let mut summary = format!(
        "two-task k={}: bracket [{:.10}, {:.10}] after {} iterations ({:?})",
        result.k(),
        result.t_lower,
        result.t_upper,
        result.iterations,
        result.status
    );
    if let Some(c) = &certificate {
        summary += &format!("\nexact upper bound: {} (rounded up {})", c.bound_rational, c.bound_decimal);
    }
    if let (Some(l), Some(g), Some(points)) = (&refined_lower, gap, &refined_grid) {
        summary += &format!("\nrefined grid |S|={}: lower bound {:.10}, gap {:.3e}", points.len(), l.bound, g);
    }
    let report = TwoTaskReport {
        config,
        version: version(),
        duration_seconds: start.elapsed().as_secs_f64(),
        k: result.k(),
        status: result.status,
        iterations: result.iterations,
        t_lower: result.t_lower,
        t_upper: result.t_upper,
        certificate,
        refined_grid,
        refined_lower,
        gap,
        cdf: result.cdf.to_doc(),
        trace: result.trace.clone(),
    };
    ctx.emit(&report, &summary)?;
    match result.failure() {
        Some(e) => Err(e.into()),
        None => Ok(0),
    }
}

#[derive(Serialize)]
struct SimRow {
    x: Option<f64>,
    y: Option<f64>,
    analytic: f64,
    /// `phi` at `(x, y)` when it is defined there.
    phi: Option<f64>,
    mc_mean: f64,
    mc_stderr: f64,
    within: bool,
}

#[derive(Serialize)]
struct SimulateReport {
    config: RunConfig,
    version: String,
    trials: u64,
    sigma: f64,
    rows: Vec<SimRow>,
    violations: usize,
}

enum Source {
    Atoms(mis_bounds::mechanism::DiscreteThresholdDistribution),
    TwoTask(mis_bounds::two_task::PiecewiseRationalCDF),
}

fn compare(est: McEstimate, analytic: f64, sigma: f64) -> bool {
    (est.mean - analytic).abs() <= sigma * est.stderr + 1e-12
}

fn cmd_simulate(args: &SimulateArgs, ctx: &RunContext) -> Result<u8> {
    let config = RunConfig {
        command: "simulate",
        grid_file: path_string(&args.dist).or_else(|| path_string(&args.two_task)),
        seed: Some(args.seed),
        out: path_string(&ctx.out),
        ..Default::default()
    };
    let source = match (&args.dist, &args.two_task) {
        (Some(p), _) => Source::Atoms(io::read_distribution(p)?),
        (None, Some(p)) => Source::TwoTask(io::read_two_task_cdf(p)?),
        (None, None) => bail!("pass --dist or --two-task"),
    };
    let n = match &source {
        Source::Atoms(d) => d.n(),
        Source::TwoTask(_) => 2,
    };
    let instances: Vec<(Option<(f64, f64)>, TimeMatrix)> = match &args.instance {
        Some(path) => vec![(None, io::read_time_matrix(path)?)],
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let mut out = Vec::with_capacity(args.pairs);
            while out.len() < args.pairs {
                let x = 8f64.powf(rng.random_range(-1.0..1.0));
                let y = 8f64.powf(rng.random_range(-1.0..1.0));
                // phi is the expected ratio only where the optimum is 1; the
                // two-task form additionally needs xy >= 1.
                let admissible = y.max(1.0 / x) >= 1.0
                    && match source {
                        Source::Atoms(_) => true,
                        Source::TwoTask(_) => x * y >= 1.0,
                    };
                if admissible {
                    out.push((Some((x, y)), worst_case_instance(&x, &y, n, &args.eps)?));
                }
            }
            out
        }
    };
    let mut rows = Vec::with_capacity(instances.len());
    for (idx, (pair, t)) in instances.iter().enumerate() {
        let seed = args.seed.wrapping_add(1 + idx as u64);
        let (analytic, phi_value, est) = match &source {
            Source::Atoms(d) => {
                let analytic = expected_ratio(d, t)?;
                let phi_value = match pair {
                    Some((x, y)) if n == 2 => Some(phi(d, x, y)),
                    _ => None,
                };
                (analytic, phi_value, monte_carlo_ratio(d as &dyn ThresholdSampler, t, args.trials, seed)?)
            }
            Source::TwoTask(f) => {
                let sampler = CountermonotoneSampler { f };
                let est = monte_carlo_ratio(&sampler, t, args.trials, seed)?;
                let (x, y) = pair.context("two-task simulation needs generated pairs")?;
                let value = phi_two(f, &x, &y)?;
                (value, Some(value), est)
            }
        };
        rows.push(SimRow {
            x: pair.map(|p| p.0),
            y: pair.map(|p| p.1),
            analytic,
            phi: phi_value,
            mc_mean: est.mean,
            mc_stderr: est.stderr,
            within: compare(est, analytic, args.sigma),
        });
    }
    if let Some(path) = &args.csv {
        io::write_csv(path, &rows)?;
    }
    let violations = rows.iter().filter(|r| !r.within).count();
    let summary = format!(
        "simulate: {} instance(s), {} trials each, {} outside {} standard errors",
        rows.len(),
        args.trials,
        violations,
        args.sigma
    );
    let report = SimulateReport { config, version: version(), trials: args.trials, sigma: args.sigma, rows, violations };
    ctx.emit(&report, &summary)?;
    Ok(if violations > 0 { 4 } else { 0 })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Solver { .. }) => 2,
        Some(Error::Stall { .. } | Error::IterationLimit { .. }) => 3,
        Some(Error::Invariant(_)) => 4,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<u8> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let backend = match &cli.solver {
        Some(name) if !name.trim().is_empty() => Backend::parse(name)?,
        _ => Backend::default(),
    };
    let ctx = RunContext { out: cli.out.clone(), backend };
    match &cli.command {
        Command::Lower(a) => cmd_lower(a, &ctx),
        Command::Upper(a) => cmd_upper(a, &ctx),
        Command::TwoTask(a) => cmd_two_task(a, &ctx),
        Command::Simulate(a) => cmd_simulate(a, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
