use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::baseline::ClipPolicy;
use super::model::{per_sample_losses_and_gradients, Architecture, ModelParams, PerSampleGrads};
use super::privatize::{clip_per_sample, noisy_aggregate, poisson_sample, NoiseKey};
use crate::accountant::{Accountant, AccountingMode, PrivacySpend};
use crate::data::{group_accuracy, Dataset, EpochRecord, RunMetrics};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<F> {
    /// Hidden units; zero trains softmax regression.
    pub hidden: usize,
    pub learning_rate: F,
    /// Expected batch size `B`; the sampling rate is `B / N`.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub delta: F,
    /// When set, training stops before the first iteration that would push
    /// the accounted epsilon above this value.
    pub target_epsilon: Option<F>,
    pub accounting: AccountingMode,
    pub clip_policy: ClipPolicy<F>,
}

impl<F: Scalar> TrainConfig<F> {
    /// `round(N / B)`, at least one.
    pub fn iters_per_epoch(&self, n: usize) -> usize {
        ((n as f64 / self.batch_size as f64).round() as usize).max(1)
    }

    pub fn total_iters(&self, n: usize) -> usize {
        self.epochs * self.iters_per_epoch(n)
    }

    pub fn sampling_rate(&self, n: usize) -> F {
        F::from_count(self.batch_size) / F::from_count(n)
    }

    pub fn accountant(&self, n: usize) -> Accountant<F> {
        Accountant::new(self.sampling_rate(n), self.delta, self.accounting)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::invalid(
                "batch_size",
                format!("must lie in [1, {n}], got {}", self.batch_size),
            ));
        }
        if !(self.learning_rate >= F::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate", "must be finite and nonnegative"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if !(self.delta > F::zero() && self.delta < F::one()) {
            return Err(Error::invalid("delta", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<F> {
    pub params: ModelParams<F>,
    pub metrics: RunMetrics,
    pub spend: PrivacySpend<F>,
}

/// Trains on `data` and reports metrics on the same data.
pub fn train<F: Scalar>(
    config: &TrainConfig<F>,
    data: &Dataset<F>,
    schedule: &StepSchedule<F>,
) -> Result<TrainOutcome<F>> {
    train_with_eval(config, data, data, schedule)
}

/// Plain DP-SGD at a fixed noise multiplier and threshold.
pub fn train_dpsgd<F: Scalar>(
    config: &TrainConfig<F>,
    data: &Dataset<F>,
    eval: &Dataset<F>,
    sigma: F,
    clip: F,
) -> Result<TrainOutcome<F>> {
    let schedule = StepSchedule::constant(config.total_iters(data.len()), sigma, clip)?;
    train_with_eval(config, data, eval, &schedule)
}

/// The private training loop: per iteration, look up `(sigma, C)`, Poisson
/// sample a batch, compute per-sample gradients, clip them to `C`, add
/// `N(0, sigma^2 C^2)` to their sum, divide by the expected batch size and
/// take an SGD step. Metrics on `eval` are recorded after every epoch.
pub fn train_with_eval<F: Scalar>(
    config: &TrainConfig<F>,
    data: &Dataset<F>,
    eval: &Dataset<F>,
    schedule: &StepSchedule<F>,
) -> Result<TrainOutcome<F>> {
    train_traced(config, data, eval, schedule, |_, _| {})
}

/// [`train_with_eval`], calling `observe(t, params)` after every update.
pub fn train_traced<F: Scalar>(
    config: &TrainConfig<F>,
    data: &Dataset<F>,
    eval: &Dataset<F>,
    schedule: &StepSchedule<F>,
    mut observe: impl FnMut(usize, &ModelParams<F>),
) -> Result<TrainOutcome<F>> {
    let n = data.len();
    config.validate(n)?;
    if eval.dim() != data.dim() || eval.is_empty() {
        return Err(Error::invalid("eval", "evaluation set must be nonempty with matching dimension"));
    }
    let iters_per_epoch = config.iters_per_epoch(n);
    let total = config.epochs * iters_per_epoch;
    if schedule.total_iters() != total {
        return Err(Error::invalid(
            "schedule",
            format!("covers {} iterations but the run has {total}", schedule.total_iters()),
        ));
    }

    let accountant = config.accountant(n);
    let stop_at = match config.target_epsilon {
        Some(target) => first_overspend(&accountant, schedule, target)?,
        None => None,
    };

    let arch = Architecture::mlp(data.dim(), config.hidden, data.num_classes());
    let mut params = ModelParams::init(arch, config.seed)?;
    let num_params = params.len();
    let mut sampler = ChaCha8Rng::seed_from_u64(config.seed);
    sampler.set_stream(1);
    let q = config.sampling_rate(n).as_f64();
    let expected_batch = F::from_count(config.batch_size);

    let mut norm_clip = NormEmaState::new();
    let mut metrics = RunMetrics {
        epochs: Vec::with_capacity(config.epochs),
        privacy_caveat: config.clip_policy.has_privacy_caveat(),
    };
    let mut last_spend = None;

    for t in 0..total {
        if let Some((limit, epsilon)) = stop_at {
            if t == limit {
                return Err(Error::BudgetExhausted {
                    iteration: t,
                    epsilon: epsilon.as_f64(),
                    target: config.target_epsilon.map_or(f64::NAN, |v| v.as_f64()),
                });
            }
        }
        let (sigma, scheduled_clip) = schedule.lookup(t)?;
        let clip = match config.clip_policy {
            ClipPolicy::Scheduled => scheduled_clip,
            ClipPolicy::NormEma { .. } => norm_clip.threshold(schedule.segment_index(t)?, scheduled_clip),
        };

        let batch = poisson_sample(n, q, &mut sampler)?;
        let grads = if batch.is_empty() {
            PerSampleGrads::zeros(0, num_params)
        } else {
            let (features, labels) = data.gather(&batch);
            let (mut grads, losses) = per_sample_losses_and_gradients(&params, &features, &labels)?;
            if losses.iter().any(|l| !l.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    iteration: t,
                    epoch: t / iters_per_epoch,
                });
            }
            if let ClipPolicy::NormEma { decay } = config.clip_policy {
                norm_clip.observe(&grads.row_norms(), decay);
            }
            clip_per_sample(&mut grads, clip)?;
            grads
        };

        let update = noisy_aggregate(
            &grads,
            num_params,
            sigma,
            clip,
            expected_batch,
            NoiseKey::new(config.seed, t as u64),
        )?;
        params.sgd_step(config.learning_rate, &update);
        if !params.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: t,
                epoch: t / iters_per_epoch,
            });
        }
        observe(t, &params);

        if (t + 1) % iters_per_epoch == 0 {
            let spend = accountant.spend(&schedule.prefix(t + 1)?)?;
            let predictions = params.predict_batch(eval.features())?;
            let accuracy = group_accuracy(&predictions, eval.labels(), data.class_counts())?;
            metrics.epochs.push(EpochRecord {
                epoch: (t + 1) / iters_per_epoch,
                accuracy,
                epsilon: spend.epsilon.as_f64(),
            });
            last_spend = Some(spend);
        }
    }

    Ok(TrainOutcome {
        params,
        metrics,
        spend: last_spend.expect("at least one epoch"),
    })
}

/// First iteration index whose inclusion would exceed `target`, with the
/// epsilon it would reach.
fn first_overspend<F: Scalar>(
    accountant: &Accountant<F>,
    schedule: &StepSchedule<F>,
    target: F,
) -> Result<Option<(usize, F)>> {
    let total = schedule.total_iters();
    let full = accountant.spend(schedule)?.epsilon;
    if full <= target {
        return Ok(None);
    }
    // eps(prefix(k)) is nondecreasing in k; find the smallest k with eps > target.
    let (mut lo, mut hi) = (0usize, total);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if accountant.spend(&schedule.prefix(mid)?)?.epsilon > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let eps = accountant.spend(&schedule.prefix(hi)?)?.epsilon;
    Ok(Some((hi - 1, eps)))
}

struct NormEmaState<F> {
    segment: usize,
    current: Option<F>,
    ema: Option<F>,
}

impl<F: Scalar> NormEmaState<F> {
    fn new() -> Self {
        NormEmaState {
            segment: 0,
            current: None,
            ema: None,
        }
    }

    fn threshold(&mut self, segment: usize, initial: F) -> F {
        if segment != self.segment {
            if let Some(e) = self.ema.take() {
                if e > F::zero() {
                    self.current = Some(e);
                }
            }
            self.segment = segment;
        }
        self.current.unwrap_or(initial)
    }

    fn observe(&mut self, norms: &[F], decay: F) {
        for &norm in norms {
            self.ema = Some(match self.ema {
                None => norm,
                Some(e) => decay * e + (F::one() - decay) * norm,
            });
        }
    }
}
