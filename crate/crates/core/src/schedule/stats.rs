use serde::{Deserialize, Serialize};

use super::StepSchedule;
use crate::scalar::Scalar;

/// Length-weighted summary of a schedule's noise multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStats<F> {
    pub weighted_mean_sigma: F,
    pub weighted_var_sigma: F,
    pub initial_sigma: F,
    /// Share of all iterations spent in the first segment.
    pub initial_step_fraction: F,
}

/// Weights are `length_i / total_iters`.
pub fn schedule_stats<F: Scalar>(schedule: &StepSchedule<F>) -> ScheduleStats<F> {
    let total = F::from_count(schedule.total_iters());
    let segs = schedule.segments();
    let weight = |len: usize| F::from_count(len) / total;

    let mean: F = segs.iter().map(|s| weight(s.length) * s.sigma).sum();
    let var: F = segs
        .iter()
        .map(|s| {
            let d = s.sigma - mean;
            weight(s.length) * d * d
        })
        .sum();
    // A constant schedule has var exactly 0 only if mean reproduces sigma
    // bit-for-bit, which the weighted sum does not guarantee.
    let all_equal = segs.iter().all(|s| s.sigma == segs[0].sigma);
    let (mean, var) = if all_equal {
        (segs[0].sigma, F::zero())
    } else {
        (mean, var.max(F::zero()))
    };

    ScheduleStats {
        weighted_mean_sigma: mean,
        weighted_var_sigma: var,
        initial_sigma: segs[0].sigma,
        initial_step_fraction: weight(segs[0].length),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::Segment;
    use proptest::prelude::*;

    #[test]
    fn constant_sigma_has_zero_variance() {
        let s = StepSchedule::from_segments(vec![Segment::new(5, 1.0, 1.0); 4]).unwrap();
        let st = schedule_stats(&s);
        assert_eq!(st.weighted_mean_sigma, 1.0);
        assert_eq!(st.weighted_var_sigma, 0.0);
        assert_eq!(st.initial_sigma, 1.0);
        assert_eq!(st.initial_step_fraction, 0.25);
    }

    #[test]
    fn geometric_schedule_stats() {
        let s = StepSchedule::from_segments(vec![
            Segment::new(10, 0.5f64, 4.0),
            Segment::new(20, 1.0, 2.0),
            Segment::new(40, 2.0, 1.0),
        ])
        .unwrap();
        let st = schedule_stats(&s);
        // mean = (0.5 + 2 + 8) / 7, var = (1 + 0.5 + 1) / 7
        assert!((st.weighted_mean_sigma - 1.5).abs() < 1e-12);
        assert!((st.weighted_var_sigma - 2.5 / 7.0).abs() < 1e-12);
        assert!((st.weighted_var_sigma - 0.357143).abs() < 1e-6);
        assert_eq!(st.initial_sigma, 0.5);
        assert!((st.initial_step_fraction - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn single_segment() {
        let s = StepSchedule::constant(9, 3.0f32, 1.0).unwrap();
        let st = schedule_stats(&s);
        assert_eq!(st.weighted_mean_sigma, 3.0);
        assert_eq!(st.weighted_var_sigma, 0.0);
        assert_eq!(st.initial_step_fraction, 1.0);
    }

    proptest! {
        #[test]
        fn mean_within_range_and_var_zero_iff_constant(
            segs in prop::collection::vec((1usize..50, 0.1f64..10.0), 1..6)
        ) {
            let s = StepSchedule::from_segments(
                segs.iter().map(|&(l, sg)| Segment::new(l, sg, 1.0)).collect()
            ).unwrap();
            let st = schedule_stats(&s);
            let lo = segs.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            let hi = segs.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(st.weighted_mean_sigma >= lo - 1e-12 && st.weighted_mean_sigma <= hi + 1e-12);
            prop_assert!(st.weighted_var_sigma >= 0.0);
            prop_assert!(st.initial_step_fraction <= 1.0);
            let constant = segs.iter().all(|x| x.1 == segs[0].1);
            prop_assert_eq!(st.weighted_var_sigma == 0.0, constant);
        }
    }
}
