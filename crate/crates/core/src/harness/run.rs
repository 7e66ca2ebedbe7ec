use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, DataSource, ExperimentConfig, PrivacyTarget};
use crate::accountant::{calibrate_with, AlphaGrid, CalibrationOptions, PrivacySpend};
use crate::data::{load_csv, stratified_split, synth_imbalanced, Dataset, GroupAccuracy, RunMetrics};
use crate::engine::{save_checkpoint, train_with_eval, ModelParams, ScheduleSource, TrainConfig};
use crate::error::Result;
use crate::schedule::StepSchedule;

/// Train/test split described by the config's data section.
pub fn load_split(config: &ExperimentConfig) -> Result<(Dataset<f64>, Dataset<f64>)> {
    let data = match &config.data {
        DataSource::Synthetic(s) => synth_imbalanced(s)?,
        DataSource::Csv { path } => load_csv(path)?,
    };
    stratified_split(&data, config.test_fraction, config.split_seed)
}

/// A schedule fixed for every seed of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSchedule {
    pub source: ScheduleSource<f64>,
    /// Calibrated or configured noise scale.
    pub sigma: f64,
    pub schedule: StepSchedule<f64>,
    pub spend: PrivacySpend<f64>,
    pub train_config: TrainConfig<f64>,
}

/// Builds the schedule for a training set of `n_train` rows, calibrating the
/// noise scale when the config names a target epsilon.
pub fn prepare_schedule(config: &ExperimentConfig, n_train: usize) -> Result<PreparedSchedule> {
    config.validate()?;
    let train_config = TrainConfig {
        hidden: config.hidden,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        epochs: config.epochs,
        seed: 0,
        delta: config.delta,
        target_epsilon: match config.privacy {
            PrivacyTarget::Epsilon(e) => Some(e),
            PrivacyTarget::Sigma(_) => None,
        },
        accounting: config.accounting,
        clip_policy: config.schedule_source(0).clip_policy(),
    };
    let iters_per_epoch = train_config.iters_per_epoch(n_train);
    let source = config.schedule_source(train_config.total_iters(n_train));
    let build = |sigma: f64| source.build(sigma, config.epochs, iters_per_epoch);
    let accountant = train_config.accountant(n_train);

    let (sigma, schedule, spend) = match config.privacy {
        PrivacyTarget::Epsilon(target) => {
            let c = calibrate_with(
                build,
                accountant.q,
                target,
                config.delta,
                &AlphaGrid::default_orders(),
                config.accounting,
                &CalibrationOptions::default(),
            )?;
            (c.sigma, c.schedule, c.spend)
        }
        PrivacyTarget::Sigma(sigma) => {
            let schedule = build(sigma)?;
            let spend = accountant.spend(&schedule)?;
            (sigma, schedule, spend)
        }
    };
    Ok(PreparedSchedule {
        source,
        sigma,
        schedule,
        spend,
        train_config,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    /// Test accuracy after the last epoch.
    pub accuracy: Option<GroupAccuracy>,
    pub epsilon: Option<f64>,
    #[serde(skip)]
    pub metrics: Option<RunMetrics>,
    #[serde(skip)]
    pub params: Option<ModelParams<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(MeanStd {
            mean,
            std,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub accounting: String,
    pub privacy_caveat: bool,
    pub target_epsilon: Option<f64>,
    pub delta: f64,
    /// Calibrated (or configured) noise scale; the final multiplier for SAD.
    pub sigma: Option<f64>,
    pub realized_epsilon: Option<f64>,
    pub overall: Option<MeanStd>,
    pub majority: Option<MeanStd>,
    pub minority: Option<MeanStd>,
    pub seeds: Vec<SeedResult>,
}

impl RunSummary {
    pub fn all_ok(&self) -> bool {
        self.seeds.iter().all(|s| s.ok)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Calibrates once, then trains every seed; per-seed failures are recorded
/// rather than propagated. Writes outputs when `config.out` is set.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let (train_data, test_data) = load_split(config)?;
    let summary = run_on(config, &train_data, &test_data);
    if let Some(dir) = &config.out {
        write_outputs(&summary, dir)?;
    }
    Ok(summary)
}

/// [`run`] on an already split dataset, without writing files.
pub fn run_on(config: &ExperimentConfig, train_data: &Dataset<f64>, test_data: &Dataset<f64>) -> RunSummary {
    let prepared = prepare_schedule(config, train_data.len());
    let seeds: Vec<SeedResult> = match &prepared {
        Err(e) => config
            .seeds
            .iter()
            .map(|&seed| failed(seed, format!("calibration: {e}")))
            .collect(),
        Ok(p) => config
            .seeds
            .par_iter()
            .map(|&seed| {
                let tc = TrainConfig {
                    seed,
                    ..p.train_config.clone()
                };
                match train_with_eval(&tc, train_data, test_data, &p.schedule) {
                    Ok(out) => {
                        let last = out.metrics.last().cloned();
                        SeedResult {
                            seed,
                            ok: true,
                            error: None,
                            accuracy: last.as_ref().map(|r| r.accuracy.clone()),
                            epsilon: last.map(|r| r.epsilon),
                            metrics: Some(out.metrics),
                            params: Some(out.params),
                        }
                    }
                    Err(e) => failed(seed, e.to_string()),
                }
            })
            .collect(),
    };

    let collect = |f: fn(&GroupAccuracy) -> f64| -> Option<MeanStd> {
        let v: Vec<f64> = seeds.iter().filter_map(|s| s.accuracy.as_ref().map(f)).collect();
        MeanStd::of(&v)
    };
    RunSummary {
        algorithm: config.algorithm,
        accounting: config.accounting.name().to_string(),
        privacy_caveat: config.schedule_source(0).clip_policy().has_privacy_caveat(),
        target_epsilon: match config.privacy {
            PrivacyTarget::Epsilon(e) => Some(e),
            PrivacyTarget::Sigma(_) => None,
        },
        delta: config.delta,
        sigma: prepared.as_ref().ok().map(|p| p.sigma),
        realized_epsilon: prepared.as_ref().ok().map(|p| p.spend.epsilon),
        overall: collect(|a| a.overall),
        majority: collect(|a| a.majority),
        minority: collect(|a| a.minority),
        seeds,
    }
}

fn failed(seed: u64, error: String) -> SeedResult {
    SeedResult {
        seed,
        ok: false,
        error: Some(error),
        accuracy: None,
        epsilon: None,
        metrics: None,
        params: None,
    }
}

/// `summary.json`, plus `metrics_seed<k>.csv` and `model_seed<k>.bin` for
/// every successful seed.
pub fn write_outputs(summary: &RunSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.json"), summary.to_json()?)?;
    for s in &summary.seeds {
        if let Some(m) = &s.metrics {
            fs::write(dir.join(format!("metrics_seed{}.csv", s.seed)), m.to_csv())?;
        }
        if let Some(p) = &s.params {
            save_checkpoint(p, dir.join(format!("model_seed{}.bin", s.seed)))?;
        }
    }
    Ok(())
}
