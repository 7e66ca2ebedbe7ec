//! Step-adaptive decay schedule.
//!
//! Training iterations are partitioned into `n` segments whose lengths grow
//! geometrically (`len[i-1] = gamma * len[i]`). Each segment carries its own
//! noise multiplier and clipping threshold:
//!
//! * noise grows towards the final value: `sigma[i] = sigma_final * beta^(n-1-i)`
//! * clipping shrinks towards the final value: `clip[i] = clip_final * a^(n-1-i)`
//!
//! so training starts with little noise and a loose clipping bound.

mod stats;
mod text;

use serde::{Deserialize, Serialize};

pub use stats::{schedule_stats, ScheduleStats};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inputs of the schedule builder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec<F> {
    pub total_iters: usize,
    pub num_segments: usize,
    pub step_decay: F,
    pub noise_decay: F,
    pub clip_decay: F,
    pub final_sigma: F,
    pub final_clip: F,
}

/// A [`ScheduleSpec`] without its final noise multiplier, i.e. the shape that
/// calibration solves `final_sigma` for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTemplate<F> {
    pub total_iters: usize,
    pub num_segments: usize,
    pub step_decay: F,
    pub noise_decay: F,
    pub clip_decay: F,
    pub final_clip: F,
}

impl<F: Scalar> ScheduleTemplate<F> {
    /// Template with the clip decay defaulted to `1 / noise_decay`.
    pub fn with_default_clip_decay(
        total_iters: usize,
        num_segments: usize,
        step_decay: F,
        noise_decay: F,
        final_clip: F,
    ) -> Self {
        ScheduleTemplate {
            total_iters,
            num_segments,
            step_decay,
            noise_decay,
            clip_decay: default_clip_decay(noise_decay),
            final_clip,
        }
    }

    pub fn with_final_sigma(&self, final_sigma: F) -> ScheduleSpec<F> {
        ScheduleSpec {
            total_iters: self.total_iters,
            num_segments: self.num_segments,
            step_decay: self.step_decay,
            noise_decay: self.noise_decay,
            clip_decay: self.clip_decay,
            final_sigma,
            final_clip: self.final_clip,
        }
    }
}

/// Default clip decay `a = 1 / beta`.
pub fn default_clip_decay<F: Scalar>(noise_decay: F) -> F {
    F::one() / noise_decay
}

impl<F: Scalar> ScheduleSpec<F> {
    pub fn validate(&self) -> Result<()> {
        if self.num_segments == 0 {
            return Err(Error::invalid("num_segments", "must be at least 1"));
        }
        if self.total_iters < self.num_segments {
            return Err(Error::invalid(
                "total_iters",
                format!(
                    "{} iterations cannot fill {} segments",
                    self.total_iters, self.num_segments
                ),
            ));
        }
        check_unit_ratio("step_decay", self.step_decay)?;
        check_unit_ratio("noise_decay", self.noise_decay)?;
        check_clip_decay(self.clip_decay)?;
        check_positive("final_sigma", self.final_sigma)?;
        check_positive("final_clip", self.final_clip)?;
        Ok(())
    }

    pub fn template(&self) -> ScheduleTemplate<F> {
        ScheduleTemplate {
            total_iters: self.total_iters,
            num_segments: self.num_segments,
            step_decay: self.step_decay,
            noise_decay: self.noise_decay,
            clip_decay: self.clip_decay,
            final_clip: self.final_clip,
        }
    }
}

/// One constant-parameter stretch of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<F> {
    pub length: usize,
    pub sigma: F,
    pub clip: F,
}

impl<F> Segment<F> {
    pub fn new(length: usize, sigma: F, clip: F) -> Self {
        Segment {
            length,
            sigma,
            clip,
        }
    }
}

/// Piecewise-constant `(sigma, clip)` assignment over `total_iters` iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule<F> {
    segments: Vec<Segment<F>>,
    total_iters: usize,
}

impl<F: Scalar> StepSchedule<F> {
    /// Builds a schedule from arbitrary segments. Segments must be nonempty,
    /// each at least one iteration long, with positive finite sigma and clip.
    ///
    /// Monotonicity is not required here: baseline schedules (decreasing noise)
    /// are valid schedules too. [`build_schedule`] output is always monotone.
    pub fn from_segments(segments: Vec<Segment<F>>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Empty("schedule has no segments"));
        }
        let mut total = 0usize;
        for seg in &segments {
            if seg.length == 0 {
                return Err(Error::invalid("length", "segment with zero iterations"));
            }
            check_positive("sigma", seg.sigma)?;
            check_positive("clip", seg.clip)?;
            total += seg.length;
        }
        Ok(StepSchedule {
            segments,
            total_iters: total,
        })
    }

    /// Single-segment schedule, i.e. plain DP-SGD.
    pub fn constant(total_iters: usize, sigma: F, clip: F) -> Result<Self> {
        Self::from_segments(vec![Segment::new(total_iters, sigma, clip)])
    }

    pub fn segments(&self) -> &[Segment<F>] {
        &self.segments
    }

    pub fn total_iters(&self) -> usize {
        self.total_iters
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    /// `(sigma, clip)` in force at iteration `t`.
    pub fn lookup(&self, t: usize) -> Result<(F, F)> {
        let idx = self.segment_index(t)?;
        let seg = &self.segments[idx];
        Ok((seg.sigma, seg.clip))
    }

    /// Index of the segment containing iteration `t`.
    pub fn segment_index(&self, t: usize) -> Result<usize> {
        if t >= self.total_iters {
            return Err(Error::OutOfRange {
                index: t,
                len: self.total_iters,
            });
        }
        let mut end = 0;
        for (i, seg) in self.segments.iter().enumerate() {
            end += seg.length;
            if t < end {
                return Ok(i);
            }
        }
        unreachable!("segment lengths sum to total_iters")
    }

    /// First iteration of segment `i`.
    pub fn segment_start(&self, i: usize) -> usize {
        self.segments[..i].iter().map(|s| s.length).sum()
    }

    /// The first `iters` iterations of this schedule.
    pub fn prefix(&self, iters: usize) -> Result<Self> {
        if iters == 0 || iters > self.total_iters {
            return Err(Error::OutOfRange {
                index: iters,
                len: self.total_iters,
            });
        }
        let mut out = Vec::new();
        let mut left = iters;
        for seg in &self.segments {
            if left == 0 {
                break;
            }
            let take = seg.length.min(left);
            out.push(Segment::new(take, seg.sigma, seg.clip));
            left -= take;
        }
        Self::from_segments(out)
    }

    /// Schedule running `self` then `other`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        StepSchedule {
            segments,
            total_iters: self.total_iters + other.total_iters,
        }
    }

    /// Same segment lengths, every sigma multiplied by `factor`.
    pub fn scale_sigma(&self, factor: F) -> Result<Self> {
        Self::from_segments(
            self.segments
                .iter()
                .map(|s| Segment::new(s.length, s.sigma * factor, s.clip))
                .collect(),
        )
    }
}

/// Splits `total_iters` into `num_segments` geometric lengths with ratio
/// `len[i-1] / len[i] = step_decay`.
///
/// The first `n - 1` ideal lengths are floored (minimum 1) and the last segment
/// takes the remainder, so the lengths sum to `total_iters` exactly.
pub fn segment_lengths<F: Scalar>(
    total_iters: usize,
    num_segments: usize,
    step_decay: F,
) -> Result<Vec<usize>> {
    if num_segments == 0 {
        return Err(Error::invalid("num_segments", "must be at least 1"));
    }
    if total_iters < num_segments {
        return Err(Error::invalid(
            "total_iters",
            format!("{total_iters} iterations cannot fill {num_segments} segments"),
        ));
    }
    check_unit_ratio("step_decay", step_decay)?;

    let n = num_segments;
    // Relative weights gamma^(n-1-i): the last segment has weight 1.
    let step_decay = step_decay.as_f64();
    let weights: Vec<f64> = (0..n)
        .map(|i| step_decay.powi((n - 1 - i) as i32))
        .collect();
    let weight_sum: f64 = weights.iter().sum();
    let total = total_iters as f64;

    let mut lengths = Vec::with_capacity(n);
    for w in &weights[..n - 1] {
        // Guard against 69.99999 for exact geometric splits.
        let ideal = total * w / weight_sum;
        let floored = (ideal + 1e-9).floor() as usize;
        lengths.push(floored.max(1));
    }
    let used: usize = lengths.iter().sum();
    let mut last = total_iters as isize - used as isize;
    // Minimum-one bumps can overdraw the remainder; take it back from the
    // longest earlier segment.
    while last < 1 {
        let (idx, _) = lengths
            .iter()
            .enumerate()
            .max_by_key(|(i, &l)| (l, *i))
            .expect("n >= 2 when remainder is short");
        lengths[idx] -= 1;
        last += 1;
    }
    lengths.push(last as usize);
    Ok(lengths)
}

/// Per-segment noise multipliers `sigma_final * beta^(n-1-i)`, nondecreasing.
pub fn noise_levels<F: Scalar>(final_sigma: F, noise_decay: F, num_segments: usize) -> Result<Vec<F>> {
    check_positive("final_sigma", final_sigma)?;
    check_unit_ratio("noise_decay", noise_decay)?;
    if num_segments == 0 {
        return Err(Error::invalid("num_segments", "must be at least 1"));
    }
    Ok(geometric_back(final_sigma, noise_decay, num_segments))
}

/// Per-segment clipping thresholds `clip_final * a^(n-1-i)`, nonincreasing.
pub fn clip_levels<F: Scalar>(final_clip: F, clip_decay: F, num_segments: usize) -> Result<Vec<F>> {
    check_positive("final_clip", final_clip)?;
    check_clip_decay(clip_decay)?;
    if num_segments == 0 {
        return Err(Error::invalid("num_segments", "must be at least 1"));
    }
    Ok(geometric_back(final_clip, clip_decay, num_segments))
}

// values[n-1] = last, values[i] = values[i+1] * ratio
fn geometric_back<F: Scalar>(last: F, ratio: F, n: usize) -> Vec<F> {
    let mut values = vec![last; n];
    for i in (0..n - 1).rev() {
        values[i] = values[i + 1] * ratio;
    }
    values
}

pub fn build_schedule<F: Scalar>(spec: &ScheduleSpec<F>) -> Result<StepSchedule<F>> {
    spec.validate()?;
    let lengths = segment_lengths(spec.total_iters, spec.num_segments, spec.step_decay)?;
    let sigmas = noise_levels(spec.final_sigma, spec.noise_decay, spec.num_segments)?;
    let clips = clip_levels(spec.final_clip, spec.clip_decay, spec.num_segments)?;
    let segments = lengths
        .into_iter()
        .zip(sigmas)
        .zip(clips)
        .map(|((length, sigma), clip)| Segment::new(length, sigma, clip))
        .collect();
    StepSchedule::from_segments(segments)
}

fn check_positive<F: Scalar>(name: &'static str, v: F) -> Result<()> {
    if !(v > F::zero()) || !v.is_finite() {
        return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_unit_ratio<F: Scalar>(name: &'static str, v: F) -> Result<()> {
    if !(v > F::zero() && v <= F::one()) {
        return Err(Error::invalid(name, format!("must lie in (0, 1], got {v}")));
    }
    Ok(())
}

fn check_clip_decay<F: Scalar>(v: F) -> Result<()> {
    if !(v >= F::one()) || !v.is_finite() {
        return Err(Error::invalid("clip_decay", format!("must be >= 1, got {v}")));
    }
    Ok(())
}
