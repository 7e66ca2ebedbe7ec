use serde::{Deserialize, Serialize};

use super::{rdp_of_schedule, to_dp, AccountingMode, AlphaGrid, PrivacySpend};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::schedule::{build_schedule, ScheduleTemplate, StepSchedule};

/// Search settings for [`calibrate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Accepted spends lie in `[target * (1 - tol), target]`.
    pub tol: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub max_iters: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            tol: 1e-3,
            sigma_min: 1e-2,
            sigma_max: 1e3,
            max_iters: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration<F> {
    pub sigma: F,
    pub schedule: StepSchedule<F>,
    pub spend: PrivacySpend<F>,
}

/// Solves for the final noise multiplier of a SAD schedule so that its
/// accounted epsilon lands in `[target * (1 - tol), target]`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_sigma<F: Scalar>(
    template: &ScheduleTemplate<F>,
    q: F,
    target_epsilon: F,
    delta: F,
    grid: &AlphaGrid<F>,
    mode: AccountingMode,
    options: &CalibrationOptions,
) -> Result<Calibration<F>> {
    calibrate_with(
        |sigma| build_schedule(&template.with_final_sigma(sigma)),
        q,
        target_epsilon,
        delta,
        grid,
        mode,
        options,
    )
}

/// Bisection on `ln(sigma)` for any schedule family whose epsilon is strictly
/// decreasing in the scale parameter handed to `build`.
pub fn calibrate_with<F, B>(
    build: B,
    q: F,
    target_epsilon: F,
    delta: F,
    grid: &AlphaGrid<F>,
    mode: AccountingMode,
    options: &CalibrationOptions,
) -> Result<Calibration<F>>
where
    F: Scalar,
    B: Fn(F) -> Result<StepSchedule<F>>,
{
    if !(target_epsilon > F::zero()) || !target_epsilon.is_finite() {
        return Err(Error::invalid("target_epsilon", format!("must be positive, got {target_epsilon}")));
    }
    if !(options.tol > 0.0 && options.tol < 1.0) {
        return Err(Error::invalid("tol", format!("must lie in (0, 1), got {}", options.tol)));
    }
    if !(options.sigma_min > 0.0 && options.sigma_min < options.sigma_max) {
        return Err(Error::invalid("sigma bracket", "need 0 < sigma_min < sigma_max"));
    }

    let evaluate = |sigma: F| -> Result<Calibration<F>> {
        let schedule = build(sigma)?;
        let curve = rdp_of_schedule(&schedule, q, grid, mode)?;
        let spend = to_dp(&curve, delta)?;
        Ok(Calibration {
            sigma,
            schedule,
            spend,
        })
    };

    let target = target_epsilon.as_f64();
    let floor = target * (1.0 - options.tol);
    let accept = |eps: f64| eps >= floor && eps <= target;

    let upper = evaluate(F::lit(options.sigma_max))?;
    let upper_eps = upper.spend.epsilon.as_f64();
    if upper_eps > target {
        return Err(Error::Calibration(format!(
            "target epsilon {target} unreachable: sigma = {} still spends {upper_eps}",
            options.sigma_max
        )));
    }
    if accept(upper_eps) {
        return Ok(upper);
    }
    let lower = evaluate(F::lit(options.sigma_min))?;
    let lower_eps = lower.spend.epsilon.as_f64();
    if lower_eps <= target {
        if accept(lower_eps) {
            return Ok(lower);
        }
        return Err(Error::Calibration(format!(
            "target epsilon {target} above the bracket: sigma = {} already spends only {lower_eps}",
            options.sigma_min
        )));
    }

    // Invariant: eps(lo) > target >= eps(hi).
    let mut lo = options.sigma_min.ln();
    let mut hi = options.sigma_max.ln();
    let mut best = upper;
    for _ in 0..options.max_iters {
        let mid = 0.5 * (lo + hi);
        let cand = evaluate(F::lit(mid.exp()))?;
        let eps = cand.spend.epsilon.as_f64();
        if eps > target {
            lo = mid;
        } else {
            hi = mid;
            if accept(eps) {
                return Ok(cand);
            }
            best = cand;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Err(Error::Calibration(format!(
        "no sigma within tolerance after {} bisection steps; closest feasible sigma {} spends {}",
        options.max_iters, best.sigma, best.spend.epsilon
    )))
}
