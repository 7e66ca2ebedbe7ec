//! Schedule families compared in experiments.
//!
//! Every family is parameterized by one noise scale so that calibration can
//! solve for it; all noise multipliers are proportional to that scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::schedule::{build_schedule, segment_lengths, ScheduleTemplate, Segment, StepSchedule};

/// How the clipping threshold of each iteration is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClipPolicy<F> {
    /// Use the schedule's per-segment threshold.
    Scheduled,
    /// First segment uses the schedule's threshold; each later segment uses
    /// the exponentially weighted mean (weight `decay` on history) of the
    /// per-sample gradient norms seen during the previous segment.
    NormEma { decay: F },
}

impl<F> ClipPolicy<F> {
    /// Thresholds derived from raw gradients are not covered by the accountant.
    pub fn has_privacy_caveat(&self) -> bool {
        matches!(self, ClipPolicy::NormEma { .. })
    }
}

/// Constant noise and clipping: plain DP-SGD.
pub fn constant_schedule<F: Scalar>(total_iters: usize, sigma: F, clip: F) -> Result<StepSchedule<F>> {
    StepSchedule::constant(total_iters, sigma, clip)
}

/// Per-epoch noise multipliers decreasing linearly from `sigma_start` to `sigma_end`.
pub fn linear_epoch_sigmas<F: Scalar>(sigma_start: F, sigma_end: F, epochs: usize) -> Result<Vec<F>> {
    if epochs == 0 {
        return Err(Error::invalid("epochs", "must be at least 1"));
    }
    if !(sigma_start > F::zero()) || !(sigma_end > F::zero()) {
        return Err(Error::invalid("sigma", "start and end multipliers must be positive"));
    }
    if epochs == 1 {
        return Ok(vec![sigma_end]);
    }
    let step = (sigma_end - sigma_start) / F::from_count(epochs - 1);
    Ok((0..epochs)
        .map(|e| {
            if e == epochs - 1 {
                sigma_end
            } else {
                sigma_start + F::from_count(e) * step
            }
        })
        .collect())
}

/// One segment per epoch with linearly decaying noise and a fixed threshold.
pub fn linear_decay_schedule<F: Scalar>(
    sigma_start: F,
    sigma_end: F,
    clip: F,
    epochs: usize,
    iters_per_epoch: usize,
) -> Result<StepSchedule<F>> {
    if iters_per_epoch == 0 {
        return Err(Error::invalid("iters_per_epoch", "must be at least 1"));
    }
    let sigmas = linear_epoch_sigmas(sigma_start, sigma_end, epochs)?;
    StepSchedule::from_segments(
        sigmas
            .into_iter()
            .map(|s| Segment::new(iters_per_epoch, s, clip))
            .collect(),
    )
}

/// Uniform segments whose noise starts at `sigma_start` and decays by
/// `noise_decay` each segment. Every segment carries `initial_clip`; pair with
/// [`ClipPolicy::NormEma`] for the adaptive threshold.
pub fn step_decay_schedule<F: Scalar>(
    total_iters: usize,
    num_segments: usize,
    sigma_start: F,
    noise_decay: F,
    initial_clip: F,
) -> Result<StepSchedule<F>> {
    if !(noise_decay > F::zero() && noise_decay <= F::one()) {
        return Err(Error::invalid("noise_decay", format!("must lie in (0, 1], got {noise_decay}")));
    }
    let lengths = segment_lengths(total_iters, num_segments, F::one())?;
    let mut sigma = sigma_start;
    let mut segments = Vec::with_capacity(num_segments);
    for len in lengths {
        segments.push(Segment::new(len, sigma, initial_clip));
        sigma *= noise_decay;
    }
    StepSchedule::from_segments(segments)
}

/// Algorithm variant and its schedule parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSource<F> {
    /// Step-adaptive decay; the scale is the final noise multiplier.
    Sad { template: ScheduleTemplate<F> },
    /// Plain DP-SGD; the scale is the noise multiplier.
    Constant { clip: F },
    /// Linear per-epoch decay from `start_ratio * scale` down to `scale`.
    AutoLinear { start_ratio: F, clip: F },
    /// Uniform step decay from `scale` with norm-estimated thresholds.
    AutoStep {
        num_segments: usize,
        noise_decay: F,
        initial_clip: F,
        norm_decay: F,
    },
}

impl<F: Scalar> ScheduleSource<F> {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleSource::Sad { .. } => "sad",
            ScheduleSource::Constant { .. } => "dpsgd",
            ScheduleSource::AutoLinear { .. } => "auto_l",
            ScheduleSource::AutoStep { .. } => "auto_s",
        }
    }

    /// Schedule for a run of `epochs * iters_per_epoch` iterations at noise `scale`.
    pub fn build(&self, scale: F, epochs: usize, iters_per_epoch: usize) -> Result<StepSchedule<F>> {
        let total = epochs * iters_per_epoch;
        match self {
            ScheduleSource::Sad { template } => {
                if template.total_iters != total {
                    return Err(Error::invalid(
                        "total_iters",
                        format!("template covers {} iterations, run has {total}", template.total_iters),
                    ));
                }
                build_schedule(&template.with_final_sigma(scale))
            }
            ScheduleSource::Constant { clip } => constant_schedule(total, scale, *clip),
            ScheduleSource::AutoLinear { start_ratio, clip } => {
                if !(*start_ratio >= F::one()) {
                    return Err(Error::invalid("start_ratio", "linear decay must start at or above its end"));
                }
                linear_decay_schedule(*start_ratio * scale, scale, *clip, epochs, iters_per_epoch)
            }
            ScheduleSource::AutoStep {
                num_segments,
                noise_decay,
                initial_clip,
                ..
            } => step_decay_schedule(total, *num_segments, scale, *noise_decay, *initial_clip),
        }
    }

    pub fn clip_policy(&self) -> ClipPolicy<F> {
        match self {
            ScheduleSource::AutoStep { norm_decay, .. } => ClipPolicy::NormEma { decay: *norm_decay },
            _ => ClipPolicy::Scheduled,
        }
    }
}
