use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rankopt::experiment::{
    gen_problem, missing_percent, preset, read_problem, read_trace_column, rel_errors, run_experiment, write_problem,
    CompletionSpec, PRESET_NAMES, RATE_TAIL_FRACTION,
};
use rankopt::linesearch::ArmijoConfig;
use rankopt::matcore::io::read_factored_dir;
use rankopt::solvers::{rate_fit, SolverConfig, Variant};
use rankopt::Error;
use serde::Deserialize;

const EXIT_FAILURE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "rankopt", version, about = "Line-search descent on bounded-rank matrices: matrix-completion benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a completion problem and report the size of the sampled set.
    Gen {
        #[command(flatten)]
        spec: SpecArgs,
        /// Write dims.csv, mask.csv, values.csv and the hidden factors A/ here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a problem and solve it with one or both algorithms.
    Run {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum, default_value_t = AlgChoice::Both)]
        alg: AlgChoice,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Leave wall_ms empty so that outputs are byte-reproducible.
        #[arg(long)]
        no_timing: bool,
        /// Output directory for traces, summaries and final iterates.
        #[arg(long)]
        out: PathBuf,
    },
    /// Relative errors of a factored iterate against a generated problem.
    Errors {
        /// Directory written by `gen --out`.
        #[arg(long)]
        problem: PathBuf,
        /// Factor directory, e.g. `x_sd/` written by `run`.
        #[arg(long)]
        x: PathBuf,
    },
    /// Fit exponential and power-law decay models to a trace column.
    Ratefit {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "rel_err_full")]
        column: String,
        /// Fraction of the run (from the end) used by the fit.
        #[arg(long, default_value_t = RATE_TAIL_FRACTION)]
        tail: f64,
    },
}

#[derive(Args)]
struct SpecArgs {
    /// One of fig1-small, fig2-small, fig1-k20, fig1-k80.
    #[arg(long)]
    preset: Option<String>,
    /// TOML file with spec fields and an optional [solver] table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Rank of the hidden matrix.
    #[arg(long)]
    rank: Option<usize>,
    /// Rank budget of the solver.
    #[arg(long)]
    budget: Option<usize>,
    /// Oversampling rate.
    #[arg(long)]
    os: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgChoice {
    Sd,
    Rf,
    Both,
}

impl AlgChoice {
    fn variants(self) -> Vec<Variant> {
        match self {
            AlgChoice::Sd => vec![Variant::SteepestDescent],
            AlgChoice::Rf => vec![Variant::RetractionFree],
            AlgChoice::Both => vec![Variant::SteepestDescent, Variant::RetractionFree],
        }
    }
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    n: Option<usize>,
    r: Option<usize>,
    k: Option<usize>,
    os: Option<f64>,
    seed: Option<u64>,
    #[serde(default)]
    solver: SolverSection,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    max_iters: Option<usize>,
    tol_g: Option<f64>,
    tol_f: Option<f64>,
    record_displacement: Option<bool>,
    record_time: Option<bool>,
    armijo: Option<ArmijoConfig>,
}

enum CliError {
    Usage(String),
    Core(Error),
    SolverFailed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_config(path: &Path) -> CliResult<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Preset, then config file, then individual flags.
fn resolve_spec(args: &SpecArgs) -> CliResult<(CompletionSpec, SolverSection)> {
    let base = match &args.preset {
        Some(name) => Some(preset(name).ok_or_else(|| {
            CliError::Usage(format!("unknown preset {name:?}; expected one of {}", PRESET_NAMES.join(", ")))
        })?),
        None => None,
    };
    let cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let missing = |what: &str| CliError::Usage(format!("missing {what}: pass --{what}, --preset or --config"));
    let spec = CompletionSpec {
        n: args.n.or(cfg.n).or(base.as_ref().map(|b| b.n)).ok_or_else(|| missing("n"))?,
        r: args.rank.or(cfg.r).or(base.as_ref().map(|b| b.r)).ok_or_else(|| missing("rank"))?,
        k: args.budget.or(cfg.k).or(base.as_ref().map(|b| b.k)).ok_or_else(|| missing("budget"))?,
        os: args.os.or(cfg.os).or(base.as_ref().map(|b| b.os)).unwrap_or(3.0),
        seed: args.seed.or(cfg.seed).or(base.as_ref().map(|b| b.seed)).unwrap_or(42),
    };
    spec.validate()?;
    Ok((spec, cfg.solver))
}

fn print_sizing(spec: &CompletionSpec) -> CliResult<()> {
    let omega = spec.omega_size()?;
    println!("n={} r={} k={} os={} seed={}", spec.n, spec.r, spec.k, spec.os, spec.seed);
    println!("omega={omega}");
    println!("missing_percent={:.2}", missing_percent(spec.n, omega));
    Ok(())
}

fn cmd_gen(spec: &SpecArgs, out: Option<&Path>) -> CliResult<()> {
    let (spec, _) = resolve_spec(spec)?;
    print_sizing(&spec)?;
    if let Some(dir) = out {
        let p = gen_problem(&spec)?;
        write_problem(dir, &p.objective, Some(&p.truth))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn cmd_run(spec: &SpecArgs, alg: AlgChoice, max_iters: Option<usize>, no_timing: bool, out: &Path) -> CliResult<()> {
    let (spec, solver) = resolve_spec(spec)?;
    print_sizing(&spec)?;
    let mut base = SolverConfig::new(spec.k, Variant::SteepestDescent);
    if let Some(v) = max_iters.or(solver.max_iters) {
        base.max_iters = v;
    }
    if let Some(v) = solver.tol_g {
        base.tol_g = v;
    }
    if let Some(v) = solver.tol_f {
        base.tol_f = v;
    }
    if let Some(v) = solver.record_displacement {
        base.record_displacement = v;
    }
    if let Some(v) = solver.record_time {
        base.record_time = v;
    }
    if no_timing {
        base.record_time = false;
    }
    let keep_armijo = solver.armijo.is_some();
    if let Some(a) = solver.armijo {
        base.armijo = a;
    }
    base.validate()?;

    let problem = gen_problem(&spec)?;
    let report = run_experiment(&problem, &alg.variants(), &base, keep_armijo)?;
    report.write(out)?;
    let mut failed = Vec::new();
    for run in &report.runs {
        println!();
        print!("{}", run.summary(&spec));
        if let Err(e) = &run.result {
            failed.push(format!("{}: {e}", run.variant.short_name()));
        }
    }
    println!("\nwrote {}", out.display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::SolverFailed(failed.join("; ")))
    }
}

fn cmd_errors(problem: &Path, x: &Path) -> CliResult<()> {
    let (p, truth) = read_problem(problem)?;
    let truth = truth.ok_or_else(|| CliError::Usage(format!("{} has no hidden factors A/", problem.display())))?;
    let x = read_factored_dir(x)?;
    let (full, mask) = rel_errors(&x, &truth, &p)?;
    println!("rel_full={full}");
    println!("rel_mask={mask}");
    Ok(())
}

fn cmd_ratefit(trace: &Path, column: &str, tail: f64) -> CliResult<()> {
    let values = read_trace_column(trace, column)?;
    match rate_fit(&values, tail) {
        Some(fit) => {
            println!("rate_model={}", fit.model.as_str());
            println!("rate_param={}", fit.parameter);
            println!("exp_residual={}", fit.exp_residual);
            println!("power_residual={}", fit.power_residual);
            println!("points={}", fit.points);
        }
        None => {
            println!("rate_model=unavailable");
            println!("points={}", values.iter().filter(|v| v.is_finite() && **v > 0.0).count());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Gen { spec, out } => cmd_gen(spec, out.as_deref()),
        Command::Run { spec, alg, max_iters, no_timing, out } => cmd_run(spec, *alg, *max_iters, *no_timing, out),
        Command::Errors { problem, x } => cmd_errors(problem, x),
        Command::Ratefit { trace, column, tail } => cmd_ratefit(trace, column, *tail),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Core(e @ Error::InfeasibleSpec(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(CliError::Core(e @ Error::LineSearch { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SOLVER)
        }
        Err(CliError::SolverFailed(msg)) => {
            eprintln!("error: solver failed: {msg}");
            ExitCode::from(EXIT_SOLVER)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
