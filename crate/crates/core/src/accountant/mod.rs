//! Rényi-DP accounting for heterogeneous Gaussian steps.
//!
//! Each iteration of a [`StepSchedule`] is a (possibly Poisson-subsampled)
//! Gaussian mechanism with its own noise multiplier. Per-step RDP values are
//! added order by order, then the composed curve is converted to an
//! `(epsilon, delta)` guarantee by minimizing over the order grid.

mod calibrate;
mod curve;
pub mod oracle;

use serde::{Deserialize, Serialize};

pub use calibrate::{calibrate_sigma, calibrate_with, Calibration, CalibrationOptions};
pub use curve::{AlphaGrid, PrivacySpend, RdpCurve};
pub use oracle::oracle_rdp_subsampled;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::schedule::StepSchedule;

/// Per-step RDP values below this are treated as exactly zero.
pub const RDP_FLOOR: f64 = 1e-15;

/// Whether per-step accounting credits amplification by subsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AccountingMode {
    /// Poisson-subsampled Gaussian with sampling rate `q`.
    #[default]
    Subsampled,
    /// Every step charged as a full Gaussian mechanism, ignoring `q`.
    Unamplified,
}

impl AccountingMode {
    pub fn name(self) -> &'static str {
        match self {
            AccountingMode::Subsampled => "subsampled",
            AccountingMode::Unamplified => "unamplified",
        }
    }
}

/// RDP of the Gaussian mechanism with noise multiplier `sigma`: `alpha / (2 sigma^2)`.
///
/// Sensitivity cancels because the noise standard deviation is `sigma * C` for
/// sensitivity `C`.
pub fn rdp_gaussian<F: Scalar>(alpha: F, sigma: F) -> Result<F> {
    check_alpha(alpha)?;
    check_sigma(sigma)?;
    Ok(alpha / (F::lit(2.0) * sigma * sigma))
}

/// RDP of the Poisson-subsampled Gaussian mechanism at order `alpha`.
///
/// Integer orders use the binomial expansion
/// `A = sum_k C(alpha, k) (1-q)^(alpha-k) q^k exp((k^2 - k) / (2 sigma^2))`
/// evaluated in the log domain; the result is `ln(A) / (alpha - 1)`.
/// Non-integer orders interpolate linearly between adjacent integer orders
/// (orders below 2 use the order-2 value, an upper bound since RDP is
/// nondecreasing in the order).
pub fn rdp_subsampled_gaussian<F: Scalar>(alpha: F, sigma: F, q: F) -> Result<F> {
    check_alpha(alpha)?;
    check_sigma(sigma)?;
    if !(q >= F::zero() && q <= F::one()) {
        return Err(Error::invalid("q", format!("sampling rate must lie in [0, 1], got {q}")));
    }
    if q == F::zero() {
        return Ok(F::zero());
    }
    if q == F::one() {
        return rdp_gaussian(alpha, sigma);
    }

    let raw = if alpha.fract() == F::zero() {
        integer_order_rdp(int_order(alpha)?, sigma, q)
    } else if alpha < F::lit(2.0) {
        integer_order_rdp(2, sigma, q)
    } else {
        let lo = alpha.floor();
        let frac = alpha - lo;
        let lo_rdp = integer_order_rdp(int_order(lo)?, sigma, q);
        let hi_rdp = integer_order_rdp(int_order(lo)? + 1, sigma, q);
        lo_rdp + frac * (hi_rdp - lo_rdp)
    };
    Ok(floor_rdp(raw))
}

fn int_order<F: Scalar>(alpha: F) -> Result<usize> {
    alpha
        .to_usize()
        .ok_or_else(|| Error::invalid("alpha", format!("order {alpha} too large")))
}

fn floor_rdp<F: Scalar>(v: F) -> F {
    if v < F::lit(RDP_FLOOR) {
        F::zero()
    } else {
        v
    }
}

fn integer_order_rdp<F: Scalar>(alpha: usize, sigma: F, q: F) -> F {
    let log_q = q.ln();
    let log_1mq = (-q).ln_1p();
    let two_var = F::lit(2.0) * sigma * sigma;
    let n = F::from_count(alpha);

    let mut log_binom = F::zero();
    let mut terms = Vec::with_capacity(alpha + 1);
    for k in 0..=alpha {
        let kf = F::from_count(k);
        if k > 0 {
            // ln C(n, k) = ln C(n, k-1) + ln(n - k + 1) - ln(k)
            log_binom += (n - kf + F::one()).ln() - kf.ln();
        }
        let term = log_binom + kf * log_q + (n - kf) * log_1mq + (kf * kf - kf) / two_var;
        terms.push(term);
    }
    let log_a = log_sum_exp(&terms);
    (log_a / (n - F::one())).max(F::zero())
}

/// `ln(sum(exp(xs)))`, shifted by the maximum term.
pub(crate) fn log_sum_exp<F: Scalar>(xs: &[F]) -> F {
    let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    let sum: F = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Per-iteration RDP of one step under `mode`.
pub fn step_rdp<F: Scalar>(alpha: F, sigma: F, q: F, mode: AccountingMode) -> Result<F> {
    match mode {
        AccountingMode::Subsampled => rdp_subsampled_gaussian(alpha, sigma, q),
        AccountingMode::Unamplified => rdp_gaussian(alpha, sigma).map(floor_rdp),
    }
}

/// Composes the RDP of every iteration of `schedule`: for each order, the sum
/// over segments of `length * step_rdp(alpha, sigma_segment, q)`.
pub fn rdp_of_schedule<F: Scalar>(
    schedule: &StepSchedule<F>,
    q: F,
    grid: &AlphaGrid<F>,
    mode: AccountingMode,
) -> Result<RdpCurve<F>> {
    let mut curve = RdpCurve::zero(grid.clone());
    for seg in schedule.segments() {
        for (i, &alpha) in grid.orders().iter().enumerate() {
            let per_step = step_rdp(alpha, seg.sigma, q, mode)?;
            curve.add_steps(i, per_step, seg.length);
        }
    }
    Ok(curve)
}

/// Best `(epsilon, delta)` over the grid using the RDP-to-DP conversion
/// `eps = R + ln((alpha - 1) / alpha) - (ln(delta) + ln(alpha)) / (alpha - 1)`.
pub fn to_dp<F: Scalar>(curve: &RdpCurve<F>, delta: F) -> Result<PrivacySpend<F>> {
    if !(delta > F::zero() && delta < F::one()) {
        return Err(Error::invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    let log_delta = delta.ln();
    let mut best: Option<(F, F)> = None;
    for (alpha, rdp) in curve.iter() {
        let am1 = alpha - F::one();
        let eps = rdp + (am1 / alpha).ln() - (log_delta + alpha.ln()) / am1;
        if best.is_none_or(|(b, _)| eps < b) {
            best = Some((eps, alpha));
        }
    }
    let (epsilon, best_alpha) = best.ok_or(Error::Empty("RDP curve"))?;
    Ok(PrivacySpend {
        epsilon: epsilon.max(F::zero()),
        delta,
        best_alpha,
    })
}

/// Bundles the accounting parameters shared by a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Accountant<F> {
    pub q: F,
    pub delta: F,
    pub grid: AlphaGrid<F>,
    pub mode: AccountingMode,
}

impl<F: Scalar> Accountant<F> {
    pub fn new(q: F, delta: F, mode: AccountingMode) -> Self {
        Accountant {
            q,
            delta,
            grid: AlphaGrid::default_orders(),
            mode,
        }
    }

    pub fn curve(&self, schedule: &StepSchedule<F>) -> Result<RdpCurve<F>> {
        rdp_of_schedule(schedule, self.q, &self.grid, self.mode)
    }

    pub fn spend(&self, schedule: &StepSchedule<F>) -> Result<PrivacySpend<F>> {
        to_dp(&self.curve(schedule)?, self.delta)
    }
}

fn check_alpha<F: Scalar>(alpha: F) -> Result<()> {
    if !(alpha > F::one()) || !alpha.is_finite() {
        return Err(Error::invalid("alpha", format!("order must exceed 1, got {alpha}")));
    }
    Ok(())
}

fn check_sigma<F: Scalar>(sigma: F) -> Result<()> {
    if !(sigma > F::zero()) || !sigma.is_finite() {
        return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
    }
    Ok(())
}
