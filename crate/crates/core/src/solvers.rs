//! Projected steepest descent and the retraction-free descent method, with
//! stopping rules, per-iteration traces and a convergence-rate fit.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linesearch::{armijo, initial_step, ArmijoConfig};
use crate::matcore::{Ambient, FactoredMatrix};
use crate::objectives::{require_dims, Objective};
use crate::variety::{affine_step, choose_flat_direction_of, project_cone, retract, ConeTangentVector, VarietyPoint, FRAC_1_SQRT_2};

/// Relative rounding resolution of objective values, in units of `f`.
pub const STATIONARY_RESOLUTION: f64 = 16.0 * f64::EPSILON;

/// Column order of the trace CSV.
pub const TRACE_HEADER: &str = "n,f,g_minus,alpha,backtracks,rank,sigma1,sigmak,displacement,rel_err_full,rel_err_mask,wall_ms";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Full cone projection followed by the truncated-SVD retraction.
    SteepestDescent,
    /// Rank-preserving partial projection followed by the exact update.
    RetractionFree,
}

impl Variant {
    pub fn short_name(self) -> &'static str {
        match self {
            Variant::SteepestDescent => "sd",
            Variant::RetractionFree => "rf",
        }
    }

    /// Angle-condition constant of the search directions.
    pub fn omega(self) -> f64 {
        match self {
            Variant::SteepestDescent => 1.0,
            Variant::RetractionFree => FRAC_1_SQRT_2,
        }
    }

    pub fn default_armijo(self) -> ArmijoConfig {
        match self {
            Variant::SteepestDescent => ArmijoConfig::steepest_descent(),
            Variant::RetractionFree => ArmijoConfig::retraction_free(),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sd" | "steepest_descent" => Ok(Variant::SteepestDescent),
            "rf" | "retraction_free" => Ok(Variant::RetractionFree),
            _ => Err(Error::InvalidArgument(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Rank budget.
    pub k: usize,
    pub variant: Variant,
    pub armijo: ArmijoConfig,
    pub max_iters: usize,
    /// Stop once `g⁻ₙ ≤ tol_g·g⁻₀`.
    pub tol_g: f64,
    /// Stop once `fₙ − fₙ₊₁ ≤ tol_f·max(1, fₙ)` on 3 consecutive steps.
    pub tol_f: f64,
    pub record_displacement: bool,
    /// Keep every iterate in the result (memory: one factored matrix per step).
    pub keep_iterates: bool,
    /// Record wall-clock time; when off, `wall_ms` is 0 and traces are
    /// byte-reproducible.
    pub record_time: bool,
}

impl SolverConfig {
    pub fn new(k: usize, variant: Variant) -> Self {
        Self {
            k,
            variant,
            armijo: variant.default_armijo(),
            max_iters: 1000,
            tol_g: 1e-12,
            tol_f: 1e-14,
            record_displacement: true,
            keep_iterates: false,
            record_time: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.armijo.validate()?;
        if !(self.tol_g > 0.0) || !(self.tol_f > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "tolerances must be positive and max_iters at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TraceRecord {
    pub n: usize,
    pub f: f64,
    pub g_minus: f64,
    /// Accepted step size; 0 on the final record.
    pub alpha: f64,
    pub backtracks: usize,
    pub rank: usize,
    pub sigma1: f64,
    /// `σ_k(Xₙ)`, zero when the rank is below the budget.
    pub sigmak: f64,
    /// `‖Xₙ₊₁ − Xₙ‖_F`; 0 on the final record, NaN when not recorded.
    pub displacement: f64,
    pub rel_err_full: Option<f64>,
    pub rel_err_mask: Option<f64>,
    pub wall_ms: f64,
    /// `⟨∇f(Xₙ), ξₙ⟩`.
    #[serde(skip)]
    pub slope: f64,
    /// `‖ξₙ‖`.
    #[serde(skip)]
    pub xi_norm: f64,
    /// Initial trial step `β̄ₙ`.
    #[serde(skip)]
    pub bar_beta: f64,
}

impl TraceRecord {
    /// One CSV row in [`TRACE_HEADER`] order. Absent errors are empty fields.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.n,
            self.f,
            self.g_minus,
            self.alpha,
            self.backtracks,
            self.rank,
            self.sigma1,
            self.sigmak,
            self.displacement,
            opt(self.rel_err_full),
            opt(self.rel_err_mask),
            self.wall_ms
        )
    }
}

pub fn write_trace_csv<W: Write>(mut out: W, trace: &[TraceRecord]) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// `g⁻ₙ ≤ tol_g·g⁻₀`.
    ConvergedG,
    /// Objective decrease below `tol_f` three times in a row.
    StalledF,
    MaxIters,
    /// `g⁻ₙ = 0`, or so small that the first-order decrease `½g⁻ₙ²` it
    /// predicts is below the rounding resolution of `fₙ`.
    Stationary,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::ConvergedG => "converged_g",
            Status::StalledF => "stalled_f",
            Status::MaxIters => "max_iters",
            Status::Stationary => "stationary",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x_star: VarietyPoint,
    pub status: Status,
    pub trace: Vec<TraceRecord>,
    /// `X₀, X₁, …` when [`SolverConfig::keep_iterates`] is set.
    pub iterates: Option<Vec<FactoredMatrix>>,
}

impl SolveResult {
    /// Number of accepted steps.
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// How the next iterate is formed from `(X, Ξ, α)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Retractor {
    /// Best rank-`k` approximation of `X + αΞ`.
    TruncatedSvd,
    /// `X + αΞ` itself; the direction must keep the rank within budget.
    Affine,
}

impl Retractor {
    pub fn apply(self, x: &VarietyPoint, xi: &ConeTangentVector, alpha: f64) -> Result<VarietyPoint> {
        match self {
            Retractor::TruncatedSvd => retract(x, xi, alpha),
            Retractor::Affine => affine_step(x, xi, alpha),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepPlan {
    pub direction: ConeTangentVector,
    /// Norm of the full cone projection of `−∇f(X)`.
    pub g_minus: f64,
    pub retractor: Retractor,
}

/// Direction: the full cone projection `G` of `−grad`.
pub fn sd_step(x: &VarietyPoint, grad: &Ambient) -> Result<StepPlan> {
    let (direction, g_minus) = project_cone(x, &grad.scaled(-1.0))?;
    Ok(StepPlan {
        direction,
        g_minus,
        retractor: Retractor::TruncatedSvd,
    })
}

/// Direction: the larger of the two rank-preserving partial projections.
pub fn rf_step(x: &VarietyPoint, grad: &Ambient) -> Result<StepPlan> {
    let (g, g_minus) = project_cone(x, &grad.scaled(-1.0))?;
    Ok(StepPlan {
        direction: choose_flat_direction_of(&g),
        g_minus,
        retractor: Retractor::Affine,
    })
}

/// Error metrics evaluated on each iterate: `(rel_err_full, rel_err_mask)`.
pub type ErrorProbe<'a> = dyn Fn(&FactoredMatrix, f64) -> (Option<f64>, Option<f64>) + Sync + 'a;

pub fn solve(obj: &dyn Objective, x0: VarietyPoint, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_with(obj, x0, cfg, None)
}

pub fn solve_with(
    obj: &dyn Objective,
    x0: VarietyPoint,
    cfg: &SolverConfig,
    probe: Option<&ErrorProbe<'_>>,
) -> Result<SolveResult> {
    cfg.validate()?;
    require_dims(obj, x0.dims())?;
    if x0.budget() != cfg.k {
        return Err(Error::InvalidArgument(format!(
            "starting point has budget {}, config has k = {}",
            x0.budget(),
            cfg.k
        )));
    }
    let step = match cfg.variant {
        Variant::SteepestDescent => sd_step,
        Variant::RetractionFree => rf_step,
    };
    let clock = Instant::now();
    let wall = || if cfg.record_time { clock.elapsed().as_secs_f64() * 1e3 } else { 0.0 };

    let mut x = x0;
    let mut f = obj.value(x.matrix())?;
    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut iterates = cfg.keep_iterates.then(|| vec![x.matrix().clone()]);
    let mut g0 = None;
    let mut stall_run = 0usize;

    let status = loop {
        let n = trace.len();
        let grad = obj.gradient(x.matrix())?;
        let plan = step(&x, &grad)?;
        let g = plan.g_minus;
        let g0 = *g0.get_or_insert(g);
        let (rel_err_full, rel_err_mask) = probe.map_or((None, None), |p| p(x.matrix(), f));
        let sigma = x.sigma();
        let mut rec = TraceRecord {
            n,
            f,
            g_minus: g,
            rank: x.rank(),
            sigma1: sigma.get(0).copied().unwrap_or(0.0),
            sigmak: if cfg.k > 0 { sigma.get(cfg.k - 1).copied().unwrap_or(0.0) } else { 0.0 },
            rel_err_full,
            rel_err_mask,
            ..TraceRecord::default()
        };

        let stop = if g == 0.0 || 0.5 * g * g <= STATIONARY_RESOLUTION * f.abs() {
            Some(Status::Stationary)
        } else if n > 0 && g <= cfg.tol_g * g0 {
            Some(Status::ConvergedG)
        } else if stall_run >= 3 {
            Some(Status::StalledF)
        } else if n >= cfg.max_iters {
            Some(Status::MaxIters)
        } else {
            None
        };
        if let Some(status) = stop {
            rec.wall_ms = wall();
            trace.push(rec);
            break status;
        }

        let xi = &plan.direction;
        let xi_norm = xi.norm();
        let slope = xi.inner_ambient(&grad)?;
        let bar_beta = initial_step(g, xi_norm, cfg.armijo.initial_floor)?;
        let outcome = armijo(f, slope, bar_beta, &cfg.armijo, |alpha| {
            let p = plan.retractor.apply(&x, xi, alpha)?;
            let fv = obj.value(p.matrix())?;
            Ok((p, fv))
        });
        let outcome = match outcome {
            Ok(o) => o,
            Err(Error::LineSearch { tried, .. }) => {
                rec.slope = slope;
                rec.xi_norm = xi_norm;
                rec.bar_beta = bar_beta;
                rec.wall_ms = wall();
                trace.push(rec);
                return Err(Error::LineSearch {
                    iteration: n,
                    tried,
                    trace,
                });
            }
            Err(e) => return Err(e),
        };

        rec.alpha = outcome.alpha;
        rec.backtracks = outcome.backtracks;
        rec.slope = slope;
        rec.xi_norm = xi_norm;
        rec.bar_beta = bar_beta;
        rec.displacement = if cfg.record_displacement {
            outcome.point.matrix().diff_norm(x.matrix())?
        } else {
            f64::NAN
        };
        rec.wall_ms = wall();
        trace.push(rec);

        if f - outcome.f_new <= cfg.tol_f * f.max(1.0) {
            stall_run += 1;
        } else {
            stall_run = 0;
        }
        x = outcome.point;
        f = outcome.f_new;
        if let Some(its) = iterates.as_mut() {
            its.push(x.matrix().clone());
        }
    };

    Ok(SolveResult {
        x_star: x,
        status,
        trace,
        iterates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `dₙ ≈ C·e^{−λn}`; parameter `λ`.
    Exponential,
    /// `dₙ ≈ C·n^{−p}`; parameter `p`.
    Power,
}

impl RateModel {
    pub fn as_str(self) -> &'static str {
        match self {
            RateModel::Exponential => "exp",
            RateModel::Power => "power",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub model: RateModel,
    /// Decay rate (exponential) or exponent (power), positive for decay.
    pub parameter: f64,
    /// RMS residual of the selected model in log space.
    pub residual: f64,
    pub exp_residual: f64,
    pub power_residual: f64,
    pub points: usize,
}

/// Minimum number of tail points [`rate_fit`] needs.
pub const RATE_FIT_MIN_POINTS: usize = 10;

/// Records dropped from the end when distances are measured to the final
/// iterate, which is biased towards zero there.
pub const RATE_FIT_DROP_LAST: usize = 3;

/// Least-squares fit of `log dₙ` against `n` and against `log n` over the last
/// `tail_fraction` of the sequence (index = `n`). Non-positive or non-finite
/// distances and `n = 0` are skipped. Returns `None` when fewer than
/// [`RATE_FIT_MIN_POINTS`] usable points remain.
pub fn rate_fit(distances: &[f64], tail_fraction: f64) -> Option<RateFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return None;
    }
    let start = ((distances.len() as f64) * (1.0 - tail_fraction)).floor() as usize;
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .skip(start.max(1))
        .filter(|(_, d)| d.is_finite() && **d > 0.0)
        .map(|(n, d)| (n as f64, d.ln()))
        .collect();
    if pts.len() < RATE_FIT_MIN_POINTS {
        return None;
    }
    let (exp_slope, exp_residual) = least_squares(pts.iter().copied());
    let (pow_slope, power_residual) = least_squares(pts.iter().map(|&(n, y)| (n.ln(), y)));
    let (model, parameter, residual) = if exp_residual <= power_residual {
        (RateModel::Exponential, -exp_slope, exp_residual)
    } else {
        (RateModel::Power, -pow_slope, power_residual)
    };
    Some(RateFit {
        model,
        parameter,
        residual,
        exp_residual,
        power_residual,
        points: pts.len(),
    })
}

/// `‖Xₙ − X_last‖` for all but the last [`RATE_FIT_DROP_LAST`] iterates.
pub fn distances_to_final(iterates: &[FactoredMatrix]) -> Result<Vec<f64>> {
    let Some(last) = iterates.last() else {
        return Ok(Vec::new());
    };
    let keep = iterates.len().saturating_sub(RATE_FIT_DROP_LAST);
    iterates[..keep].iter().map(|x| x.diff_norm(last)).collect()
}

/// Slope and RMS residual of the least-squares line through `pts`.
fn least_squares(pts: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let len = pts.clone().count() as f64;
    let (sx, sy) = pts.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / len, sy / len);
    let (sxx, sxy) = pts
        .clone()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (x - mx), b + (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss: f64 = pts.map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    (slope, (ss / len).sqrt())
}
