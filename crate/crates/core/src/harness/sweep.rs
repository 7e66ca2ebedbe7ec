use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{is_config_key, ExperimentConfig, PrivacyTarget};
use super::run::{load_split, run, run_on, RunSummary};
use crate::error::{Error, Result};

/// One swept parameter and the values it takes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl GridAxis {
    /// Parses `key=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| Error::invalid("grid", format!("expected `key=v1,v2,...`, got `{spec}`")))?;
        Ok(GridAxis {
            key: key.trim().to_string(),
            values: values
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(String::from)
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<String>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub keys: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.summary.all_ok())
    }

    /// `keys...,mean_acc,std_acc,mean_min_acc,eps,status,mode,privacy_caveat`.
    /// Failed rows leave the numeric cells empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for k in &self.keys {
            out.push_str(k);
            out.push(',');
        }
        out.push_str("mean_acc,std_acc,mean_min_acc,eps,status,mode,privacy_caveat\n");
        for row in &self.rows {
            for v in &row.values {
                out.push_str(v);
                out.push(',');
            }
            let s = &row.summary;
            match (s.all_ok(), s.overall, s.minority, s.realized_epsilon) {
                (true, Some(all), Some(min), Some(eps)) => {
                    let _ = write!(out, "{},{},{},{},ok", all.mean, all.std, min.mean, eps);
                }
                _ => out.push_str(",,,,failed"),
            }
            let _ = writeln!(out, ",{},{}", s.accounting, s.privacy_caveat);
        }
        out
    }
}

/// Cartesian product of the axes, first axis varying slowest.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<String>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    })
}

/// One [`run`] per grid point. Keys and values are all checked before the
/// first run starts.
pub fn sweep(base: &ExperimentConfig, axes: &[GridAxis]) -> Result<SweepTable> {
    if axes.is_empty() {
        return Err(Error::invalid("grid", "no parameters to sweep"));
    }
    for (i, axis) in axes.iter().enumerate() {
        if !is_config_key(&axis.key) || axis.key == "out" {
            return Err(Error::invalid("grid", format!("unknown parameter `{}`", axis.key)));
        }
        if axes[..i].iter().any(|a| a.key == axis.key) {
            return Err(Error::invalid("grid", format!("parameter `{}` listed twice", axis.key)));
        }
        if axis.values.is_empty() {
            return Err(Error::invalid("grid", format!("no values for `{}`", axis.key)));
        }
    }
    let configs = grid_points(axes)
        .into_iter()
        .map(|values| {
            let mut config = ExperimentConfig { out: None, ..base.clone() };
            config.apply(axes.iter().map(|a| a.key.as_str()).zip(values.iter().map(String::as_str)))?;
            config.validate()?;
            Ok((values, config))
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = configs
        .into_par_iter()
        .map(|(values, config)| {
            let summary = run(&config).unwrap_or_else(|e| failed_summary(&config, e));
            SweepRow { values, summary }
        })
        .collect();
    Ok(SweepTable {
        keys: axes.iter().map(|a| a.key.clone()).collect(),
        rows,
    })
}

fn failed_summary(config: &ExperimentConfig, error: Error) -> RunSummary {
    let mut s = empty_summary(config);
    for seed in &mut s.seeds {
        seed.error = Some(error.to_string());
    }
    s
}

fn empty_summary(config: &ExperimentConfig) -> RunSummary {
    RunSummary {
        algorithm: config.algorithm,
        accounting: config.accounting.name().to_string(),
        privacy_caveat: config.schedule_source(0).clip_policy().has_privacy_caveat(),
        target_epsilon: match config.privacy {
            PrivacyTarget::Epsilon(e) => Some(e),
            PrivacyTarget::Sigma(_) => None,
        },
        delta: config.delta,
        sigma: None,
        realized_epsilon: None,
        overall: None,
        majority: None,
        minority: None,
        seeds: config
            .seeds
            .iter()
            .map(|&seed| super::run::SeedResult {
                seed,
                ok: false,
                error: None,
                accuracy: None,
                epsilon: None,
                metrics: None,
                params: None,
            })
            .collect(),
    }
}

/// Rows are epsilon targets in input order, columns are configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub epsilons: Vec<f64>,
    pub labels: Vec<String>,
    /// `cells[row][col]`.
    pub cells: Vec<Vec<RunSummary>>,
}

impl CompareTable {
    pub fn all_ok(&self) -> bool {
        self.cells.iter().flatten().all(RunSummary::all_ok)
    }

    /// Mean final overall accuracy per cell.
    pub fn overall_csv(&self) -> String {
        self.csv(|s| s.overall.map(|m| m.mean))
    }

    /// Mean final minority-group accuracy per cell.
    pub fn minority_csv(&self) -> String {
        self.csv(|s| s.minority.map(|m| m.mean))
    }

    fn csv(&self, cell: impl Fn(&RunSummary) -> Option<f64>) -> String {
        let mut out = String::from("eps");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push_str(",mode,privacy_caveat\n");
        for (eps, row) in self.epsilons.iter().zip(&self.cells) {
            let _ = write!(out, "{eps}");
            for s in row {
                match cell(s).filter(|_| s.all_ok()) {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push_str(",failed"),
                }
            }
            let mut modes: Vec<&str> = row.iter().map(|s| s.accounting.as_str()).collect();
            modes.dedup();
            let caveats: Vec<&str> = row
                .iter()
                .zip(&self.labels)
                .filter(|(s, _)| s.privacy_caveat)
                .map(|(_, l)| l.as_str())
                .collect();
            let caveat = if caveats.is_empty() {
                "none".to_string()
            } else {
                caveats.join(";")
            };
            let _ = writeln!(out, ",{},{}", modes.join(";"), caveat);
        }
        out
    }
}

/// Runs every configuration at every epsilon on one shared split.
///
/// All configurations must share the data source, split and seeds.
pub fn compare(configs: &[ExperimentConfig], epsilons: &[f64]) -> Result<CompareTable> {
    let first = configs.first().ok_or(Error::Empty("no configurations to compare"))?;
    if epsilons.is_empty() {
        return Err(Error::Empty("no epsilon values to compare"));
    }
    for c in configs {
        c.validate()?;
        if c.data != first.data || c.seeds != first.seeds || c.test_fraction != first.test_fraction || c.split_seed != first.split_seed
        {
            return Err(Error::invalid("configs", "compared configurations must share data, split and seeds"));
        }
    }
    for &e in epsilons {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::invalid("eps", format!("must be positive, got {e}")));
        }
    }
    let (train_data, test_data) = load_split(first)?;

    let mut labels: Vec<String> = Vec::with_capacity(configs.len());
    for c in configs {
        let base = c.algorithm.name();
        let n = labels.iter().filter(|l| l.split('#').next() == Some(base)).count();
        labels.push(if n == 0 { base.to_string() } else { format!("{base}#{}", n + 1) });
    }

    let jobs: Vec<(usize, usize)> = (0..epsilons.len())
        .flat_map(|r| (0..configs.len()).map(move |c| (r, c)))
        .collect();
    let results: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(r, c)| {
            let config = ExperimentConfig {
                privacy: PrivacyTarget::Epsilon(epsilons[r]),
                out: None,
                ..configs[c].clone()
            };
            run_on(&config, &train_data, &test_data)
        })
        .collect();
    let mut it = results.into_iter();
    let cells = (0..epsilons.len())
        .map(|_| it.by_ref().take(configs.len()).collect())
        .collect();
    Ok(CompareTable {
        epsilons: epsilons.to_vec(),
        labels,
        cells,
    })
}
