//! Random matrix-completion problems, experiment presets and the benchmark
//! harness behind the command-line tool.
//!
//! Randomness comes from ChaCha20 seeded with `seed_from_u64`; normal variates
//! use the ziggurat transform of `rand_distr::StandardNormal`. Both are
//! platform independent, so a fixed seed gives byte-identical outputs.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linesearch::{descent_monitors, MonitorReport};
use crate::matcore::io::{read_factored_dir, read_index_set_csv, read_values_csv, write_factored_dir, write_index_set_csv, write_values_csv};
use crate::matcore::{FactoredMatrix, IndexSet, Truncate};
use crate::objectives::{MatrixCompletion, Objective};
use crate::solvers::{distances_to_final, rate_fit, solve_with, write_trace_csv, RateFit, SolveResult, SolverConfig, TraceRecord, Variant};
use crate::variety::VarietyPoint;

/// Square completion problem `A = UVᵀ` (`U`, `V` n×r) observed on `Ω`, solved
/// with rank budget `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionSpec {
    pub n: usize,
    /// Rank of the hidden matrix.
    pub r: usize,
    /// Rank budget of the solver; also sets `|Ω|`.
    pub k: usize,
    /// Oversampling rate.
    pub os: f64,
    pub seed: u64,
}

impl CompletionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.r == 0 || self.k == 0 || self.r > self.n || self.k > self.n {
            return Err(Error::InvalidInput(format!(
                "need 1 ≤ r, k ≤ n (n = {}, r = {}, k = {})",
                self.n, self.r, self.k
            )));
        }
        if !(self.os >= 1.0) || !self.os.is_finite() {
            return Err(Error::InvalidInput(format!("oversampling rate {} must be ≥ 1", self.os)));
        }
        Ok(())
    }

    /// `|Ω|`; errors when it exceeds `n²`.
    pub fn omega_size(&self) -> Result<usize> {
        self.validate()?;
        let size = omega_size(self.n, self.k, self.os);
        if size > self.n * self.n {
            return Err(Error::InfeasibleSpec(format!(
                "|Ω| = {size} exceeds n² = {}",
                self.n * self.n
            )));
        }
        Ok(size)
    }

    pub fn missing_percent(&self) -> Result<f64> {
        Ok(missing_percent(self.n, self.omega_size()?))
    }
}

/// `round(max(os·(2kn − k²), n·ln n))`.
pub fn omega_size(n: usize, k: usize, os: f64) -> usize {
    let (n, k) = (n as f64, k as f64);
    (os * (2.0 * k * n - k * k)).max(n * n.ln()).round() as usize
}

/// `100·(1 − |Ω|/n²)`.
pub fn missing_percent(n: usize, omega: usize) -> f64 {
    100.0 * (1.0 - omega as f64 / (n as f64 * n as f64))
}

pub const PRESET_NAMES: [&str; 4] = ["fig1-small", "fig2-small", "fig1-k20", "fig1-k80"];

/// Named experiment setups. The `-small` presets run in seconds; the `n = 2000`
/// ones match the full-size completion experiments.
pub fn preset(name: &str) -> Option<CompletionSpec> {
    let (n, r, k) = match name {
        "fig1-small" => (300, 8, 8),
        "fig2-small" => (300, 4, 8),
        "fig1-k20" => (2000, 20, 20),
        "fig1-k80" => (2000, 80, 80),
        _ => return None,
    };
    Some(CompletionSpec { n, r, k, os: 3.0, seed: 42 })
}

/// Uniform sample of `size` distinct cells of the n×n grid.
pub fn sample_mask<R: Rng + ?Sized>(n: usize, size: usize, rng: &mut R) -> Result<IndexSet> {
    if size > n * n {
        return Err(Error::InfeasibleSpec(format!("cannot sample {size} of {} cells", n * n)));
    }
    let pairs = index::sample(rng, n * n, size).into_iter().map(|c| (c / n, c % n)).collect();
    IndexSet::new(n, n, pairs)
}

fn normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

#[derive(Clone, Debug)]
pub struct CompletionProblem {
    pub spec: CompletionSpec,
    pub objective: MatrixCompletion,
    /// Factors of the hidden matrix `A`.
    pub truth: FactoredMatrix,
}

impl CompletionProblem {
    /// `(rel_full, rel_mask)` of `x`.
    pub fn rel_errors(&self, x: &FactoredMatrix) -> Result<(f64, f64)> {
        rel_errors(x, &self.truth, &self.objective)
    }
}

/// Draws `U`, `V` (row by row, `U` first), then `Ω`, all from one stream.
pub fn gen_problem(spec: &CompletionSpec) -> Result<CompletionProblem> {
    let size = spec.omega_size()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let u = normal_matrix(spec.n, spec.r, &mut rng);
    let v = normal_matrix(spec.n, spec.r, &mut rng);
    let mask = Arc::new(sample_mask(spec.n, size, &mut rng)?);
    let values = mask.pairs().iter().map(|&(i, j)| u.row(i).dot(&v.row(j))).collect();
    let objective = MatrixCompletion::from_parts(mask, values)?;
    let truth = FactoredMatrix::from_thin_product(&u, &DMatrix::identity(spec.r, spec.r), &v);
    Ok(CompletionProblem {
        spec: spec.clone(),
        objective,
        truth,
    })
}

/// Best rank-`k` approximation of `P_Ω(A)`, i.e. of the antigradient at 0.
pub fn initial_guess(problem: &MatrixCompletion, k: usize) -> Result<VarietyPoint> {
    VarietyPoint::new(problem.data().to_dense().truncate(k)?, k)
}

/// `rel_full = ‖A − X‖/‖A‖` in factored form and `rel_mask = √(2f(X))/‖P_Ω A‖`.
pub fn rel_errors(x: &FactoredMatrix, truth: &FactoredMatrix, problem: &MatrixCompletion) -> Result<(f64, f64)> {
    let a_norm = truth.frob_norm();
    let data_norm = problem.data().frob_norm();
    if a_norm == 0.0 || data_norm == 0.0 {
        return Err(Error::UndefinedMetric("relative error of a zero matrix".into()));
    }
    let full = x.diff_norm(truth)? / a_norm;
    let mask = (2.0 * problem.value(x)?).sqrt() / data_norm;
    Ok((full, mask))
}

/// Outcome of one algorithm within an experiment.
#[derive(Debug)]
pub struct AlgorithmReport {
    pub variant: Variant,
    pub result: Result<SolveResult>,
    pub monitors: MonitorReport,
    pub rate: Option<RateFit>,
    /// Smallest `σ_k(Xₙ)` over the run.
    pub min_sigma_k: f64,
}

impl AlgorithmReport {
    /// Trace of the run, including a failed one.
    pub fn trace(&self) -> &[TraceRecord] {
        match &self.result {
            Ok(r) => &r.trace,
            Err(Error::LineSearch { trace, .. }) => trace,
            Err(_) => &[],
        }
    }

    /// First iteration whose `rel_err_mask` is at most `level`.
    pub fn first_below_mask_error(&self, level: f64) -> Option<usize> {
        self.trace().iter().find(|r| r.rel_err_mask.is_some_and(|e| e <= level)).map(|r| r.n)
    }

    /// `key=value` lines, one per summary field.
    pub fn summary(&self, spec: &CompletionSpec) -> String {
        let trace = self.trace();
        let last = trace.last().cloned().unwrap_or_default();
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |x| x.to_string());
        let omega = spec.omega_size().unwrap_or(0);
        let mut lines = vec![
            format!("spec.n={}", spec.n),
            format!("spec.r={}", spec.r),
            format!("spec.k={}", spec.k),
            format!("spec.os={}", spec.os),
            format!("spec.seed={}", spec.seed),
            format!("spec.omega={omega}"),
            format!("spec.missing_percent={:.2}", missing_percent(spec.n, omega)),
            format!("alg={}", self.variant.short_name()),
            format!(
                "status={}",
                match &self.result {
                    Ok(r) => r.status.as_str().to_string(),
                    Err(e) => format!("error: {e}"),
                }
            ),
            format!("iters={}", trace.len().saturating_sub(1)),
            format!("final_f={}", last.f),
            format!("final_g_minus={}", last.g_minus),
            format!("final_rel_full={}", opt(last.rel_err_full)),
            format!("final_rel_mask={}", opt(last.rel_err_mask)),
            format!("min_sigma_k={}", self.min_sigma_k),
            format!("a1_min_ratio={}", opt(self.monitors.a1_min)),
        ];
        match &self.rate {
            Some(fit) => {
                lines.push(format!("rate_model={}", fit.model.as_str()));
                lines.push(format!("rate_param={}", fit.parameter));
            }
            None => {
                lines.push("rate_model=unavailable".into());
                lines.push("rate_param=nan".into());
            }
        }
        lines.join("\n") + "\n"
    }
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub spec: CompletionSpec,
    pub omega_size: usize,
    pub runs: Vec<AlgorithmReport>,
}

impl ExperimentReport {
    pub fn run(&self, variant: Variant) -> Option<&AlgorithmReport> {
        self.runs.iter().find(|r| r.variant == variant)
    }

    /// Writes `trace_<alg>.csv`, `summary_<alg>.txt` and, for successful
    /// runs, the factors of the final iterate under `x_<alg>/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for run in &self.runs {
            let alg = run.variant.short_name();
            let file = fs::File::create(dir.join(format!("trace_{alg}.csv")))?;
            write_trace_csv(std::io::BufWriter::new(file), run.trace())?;
            fs::write(dir.join(format!("summary_{alg}.txt")), run.summary(&self.spec))?;
            if let Ok(res) = &run.result {
                write_factored_dir(&dir.join(format!("x_{alg}")), res.x_star.matrix())?;
            }
        }
        Ok(())
    }
}

/// Fraction of the run used by the rate fit.
pub const RATE_TAIL_FRACTION: f64 = 0.5;

/// Budget for keeping all iterates in memory (for the rate fit).
const ITERATE_MEMORY_BUDGET: usize = 1 << 29;

/// Runs each algorithm from the same starting guess on one problem, in
/// parallel. `base` supplies everything but `k` and `variant`; its Armijo
/// configuration is replaced by each variant's default unless `keep_armijo`.
pub fn run_experiment(
    problem: &CompletionProblem,
    algorithms: &[Variant],
    base: &SolverConfig,
    keep_armijo: bool,
) -> Result<ExperimentReport> {
    let spec = &problem.spec;
    let omega_size = spec.omega_size()?;
    let x0 = initial_guess(&problem.objective, spec.k)?;
    let iterate_bytes = 16 * spec.n * spec.k * (base.max_iters + 1);
    let probe = |x: &FactoredMatrix, _f: f64| match problem.rel_errors(x) {
        Ok((full, mask)) => (Some(full), Some(mask)),
        Err(_) => (None, None),
    };

    let runs = std::thread::scope(|s| {
        let handles: Vec<_> = algorithms
            .iter()
            .map(|&variant| {
                let mut cfg = base.clone();
                cfg.k = spec.k;
                cfg.variant = variant;
                if !keep_armijo {
                    cfg.armijo = variant.default_armijo();
                }
                cfg.keep_iterates = iterate_bytes <= ITERATE_MEMORY_BUDGET;
                let x0 = x0.clone();
                let probe = &probe;
                s.spawn(move || {
                    let result = solve_with(&problem.objective, x0, &cfg, Some(probe));
                    summarize(variant, &cfg, result)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    Ok(ExperimentReport {
        spec: spec.clone(),
        omega_size,
        runs,
    })
}

fn summarize(variant: Variant, cfg: &SolverConfig, result: Result<SolveResult>) -> AlgorithmReport {
    let empty: &[TraceRecord] = &[];
    let trace = match &result {
        Ok(r) => &r.trace[..],
        Err(Error::LineSearch { trace, .. }) => &trace[..],
        Err(_) => empty,
    };
    let monitors = descent_monitors(trace, variant.omega(), cfg.armijo.c);
    let min_sigma_k = trace.iter().map(|r| r.sigmak).fold(f64::INFINITY, f64::min);
    // Distances to the final iterate when available, otherwise the full
    // relative error as a proxy.
    let distances = match result.as_ref().ok().and_then(|r| r.iterates.as_deref()) {
        Some(its) => distances_to_final(its).ok(),
        None => Some(trace.iter().map(|r| r.rel_err_full.unwrap_or(f64::NAN)).collect()),
    };
    let rate = distances.and_then(|d| rate_fit(&d, RATE_TAIL_FRACTION));
    AlgorithmReport {
        variant,
        result,
        monitors,
        rate,
        min_sigma_k,
    }
}

/// Writes `dims.csv` (header `rows,cols`), `mask.csv`, `values.csv` and, if
/// given, the factors of the hidden matrix under `A/`.
pub fn write_problem(dir: &Path, problem: &MatrixCompletion, truth: Option<&FactoredMatrix>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (m, n) = problem.dims();
    fs::write(dir.join("dims.csv"), format!("rows,cols\n{m},{n}\n"))?;
    write_index_set_csv(&dir.join("mask.csv"), problem.mask())?;
    write_values_csv(&dir.join("values.csv"), problem.data().values())?;
    if let Some(a) = truth {
        write_factored_dir(&dir.join("A"), a)?;
    }
    Ok(())
}

/// Inverse of [`write_problem`].
pub fn read_problem(dir: &Path) -> Result<(MatrixCompletion, Option<FactoredMatrix>)> {
    let dims = fs::read_to_string(dir.join("dims.csv"))?;
    let parse_err = || Error::Parse(format!("{}: expected `rows,cols` header and one row", dir.join("dims.csv").display()));
    let mut lines = dims.lines();
    if lines.next().map(str::trim) != Some("rows,cols") {
        return Err(parse_err());
    }
    let row: Vec<usize> = lines
        .next()
        .ok_or_else(parse_err)?
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| parse_err()))
        .collect::<Result<_>>()?;
    let [m, n] = row[..] else {
        return Err(parse_err());
    };
    let mask = Arc::new(read_index_set_csv(&dir.join("mask.csv"), m, n)?);
    let values = read_values_csv(&dir.join("values.csv"))?;
    let problem = MatrixCompletion::from_parts(mask, values)?;
    let truth_dir = dir.join("A");
    let truth = if truth_dir.is_dir() { Some(read_factored_dir(&truth_dir)?) } else { None };
    Ok((problem, truth))
}

/// One numeric column of a trace CSV, indexed by row. Empty fields read as NaN.
pub fn read_trace_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::InvalidArgument(format!("no column {column:?} in {}", path.display())))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let field = rec?.get(idx).unwrap_or("").trim().to_string();
        out.push(if field.is_empty() {
            f64::NAN
        } else {
            field.parse().map_err(|_| Error::Parse(format!("bad number {field:?}")))?
        });
    }
    Ok(out)
}
