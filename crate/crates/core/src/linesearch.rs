//! Armijo backtracking, initial step sizes, the angle condition and the
//! descent-condition monitors evaluated on solver traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::TraceRecord;
use crate::variety::FRAC_1_SQRT_2;

/// Upper bound `M` in `‖R(X, Ξ) − X‖ ≤ M‖Ξ‖` for the truncated-SVD retraction.
pub const RETRACTION_BOUND: f64 = 1.0 + FRAC_1_SQRT_2;

/// Absolute slack on the primary descent ratio threshold.
pub const A1_SLACK: f64 = 1e-10;

/// Relative slack used by [`angle_check`].
pub const ANGLE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmijoConfig {
    /// Backtracking factor in (0, 1).
    pub beta: f64,
    /// Sufficient-decrease constant in (0, 1).
    pub c: f64,
    pub max_backtracks: usize,
    /// Lower bound for the initial trial step.
    pub initial_floor: f64,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        Self::steepest_descent()
    }
}

impl ArmijoConfig {
    /// `β = ½`, `c = 10⁻⁴`, initial step at least 1.
    pub fn steepest_descent() -> Self {
        Self {
            beta: 0.5,
            c: 1e-4,
            max_backtracks: 60,
            initial_floor: 1.0,
        }
    }

    /// As [`Self::steepest_descent`] but with initial step at least √2.
    pub fn retraction_free() -> Self {
        Self {
            initial_floor: std::f64::consts::SQRT_2,
            ..Self::steepest_descent()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.beta) || !open_unit(self.c) {
            return Err(Error::InvalidArgument(format!(
                "beta = {} and c = {} must lie in (0, 1)",
                self.beta, self.c
            )));
        }
        if self.max_backtracks == 0 || !(self.initial_floor > 0.0) {
            return Err(Error::InvalidArgument(
                "max_backtracks and initial_floor must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one Armijo search.
#[derive(Clone, Debug)]
pub struct StepOutcome<P> {
    /// `βᵐ·β̄`.
    pub alpha: f64,
    /// `m`.
    pub backtracks: usize,
    pub f_new: f64,
    pub point: P,
    /// `f_new − f_old`.
    pub decrease: f64,
}

/// `max(floor, g⁻/‖ξ‖)`. With `floor ≥ 1` for the full cone projection and
/// `floor ≥ √2` for the partial projections this is at least `g⁻/‖ξ‖`.
pub fn initial_step(g_minus: f64, xi_norm: f64, floor: f64) -> Result<f64> {
    if !(xi_norm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "search direction norm {xi_norm} must be positive"
        )));
    }
    Ok(floor.max(g_minus / xi_norm))
}

/// `f_new − f_old ≤ c·α·slope`.
pub fn sufficient_decrease(f_old: f64, f_new: f64, alpha: f64, slope: f64, c: f64) -> bool {
    f_new - f_old <= c * alpha * slope
}

/// Largest `α = βᵐ·β̄` (m = 0, 1, …) passing the sufficient-decrease test.
///
/// `trial(α)` produces the candidate point and its objective value; it
/// encapsulates the retraction (or the exact update for flat directions).
pub fn armijo<P, T>(f_x: f64, slope: f64, bar_beta: f64, cfg: &ArmijoConfig, mut trial: T) -> Result<StepOutcome<P>>
where
    T: FnMut(f64) -> Result<(P, f64)>,
{
    cfg.validate()?;
    if !(slope < 0.0) {
        return Err(Error::InvalidArgument(format!("slope {slope} is not a descent slope")));
    }
    if !(bar_beta > 0.0) {
        return Err(Error::InvalidArgument(format!("initial step {bar_beta} must be positive")));
    }
    let mut tried = Vec::new();
    for m in 0..=cfg.max_backtracks {
        let alpha = bar_beta * cfg.beta.powi(m as i32);
        let (point, f_new) = trial(alpha)?;
        if sufficient_decrease(f_x, f_new, alpha, slope, cfg.c) {
            return Ok(StepOutcome {
                alpha,
                backtracks: m,
                f_new,
                point,
                decrease: f_new - f_x,
            });
        }
        tried.push((alpha, f_new));
    }
    Err(Error::LineSearch {
        iteration: 0,
        tried,
        trace: Vec::new(),
    })
}

/// `slope ≤ −ω·g⁻·‖ξ‖`, up to a relative slack of 1e-12.
pub fn angle_check(slope: f64, g_minus: f64, xi_norm: f64, omega: f64) -> bool {
    let scale = g_minus * xi_norm;
    slope <= -omega * scale + ANGLE_SLACK * scale
}

/// Per-step descent diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepMonitor {
    /// `a1 = (fₙ − fₙ₊₁)/(g⁻ₙ‖Xₙ₊₁ − Xₙ‖)`, `a3 = ‖Xₙ₊₁ − Xₙ‖/g⁻ₙ`.
    Ratios { n: usize, a1: f64, a3: f64 },
    /// `g⁻ₙ = 0` or no displacement.
    Stationary { n: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorReport {
    pub steps: Vec<StepMonitor>,
    /// `ω·c/(1 + 2^{−1/2}) − slack`.
    pub a1_threshold: f64,
    pub a1_min: Option<f64>,
    /// Iterations whose a1 ratio falls below the threshold.
    pub violations: Vec<usize>,
    /// Smallest a3 ratio over the second half of the ratio records.
    pub a3_tail_min: Option<f64>,
}

impl MonitorReport {
    pub fn a1_ratios(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.steps.iter().filter_map(|s| match *s {
            StepMonitor::Ratios { n, a1, .. } => Some((n, a1)),
            StepMonitor::Stationary { .. } => None,
        })
    }
}

/// Evaluates the primary-descent and small-step-safeguard ratios on
/// consecutive trace records.
pub fn descent_monitors(trace: &[TraceRecord], omega: f64, c: f64) -> MonitorReport {
    let a1_threshold = omega * c / RETRACTION_BOUND - A1_SLACK;
    let mut steps = Vec::new();
    for pair in trace.windows(2) {
        let (cur, next) = (&pair[0], &pair[1]);
        if cur.g_minus == 0.0 || cur.displacement == 0.0 {
            steps.push(StepMonitor::Stationary { n: cur.n });
            continue;
        }
        steps.push(StepMonitor::Ratios {
            n: cur.n,
            a1: (cur.f - next.f) / (cur.g_minus * cur.displacement),
            a3: cur.displacement / cur.g_minus,
        });
    }

    let a1: Vec<(usize, f64)> = steps
        .iter()
        .filter_map(|s| match *s {
            StepMonitor::Ratios { n, a1, .. } => Some((n, a1)),
            _ => None,
        })
        .collect();
    let a3: Vec<f64> = steps
        .iter()
        .filter_map(|s| match *s {
            StepMonitor::Ratios { a3, .. } => Some(a3),
            _ => None,
        })
        .collect();
    let a1_min = a1.iter().map(|&(_, r)| r).reduce(f64::min);
    let violations = a1.iter().filter(|&&(_, r)| r < a1_threshold).map(|&(n, _)| n).collect();
    let a3_tail_min = a3[a3.len() / 2..].iter().copied().reduce(f64::min);
    MonitorReport {
        steps,
        a1_threshold,
        a1_min,
        violations,
        a3_tail_min,
    }
}
