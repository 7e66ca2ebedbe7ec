use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::accountant::AccountingMode;
use crate::data::SynthConfig;
use crate::engine::ScheduleSource;
use crate::error::{Error, Result};
use crate::schedule::{default_clip_decay, ScheduleTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dpsgd,
    AutoL,
    AutoS,
    Sad,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Sad, Algorithm::Dpsgd, Algorithm::AutoL, Algorithm::AutoS];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dpsgd => "dpsgd",
            Algorithm::AutoL => "auto_l",
            Algorithm::AutoS => "auto_s",
            Algorithm::Sad => "sad",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "dpsgd" => Ok(Algorithm::Dpsgd),
            "auto_l" => Ok(Algorithm::AutoL),
            "auto_s" => Ok(Algorithm::AutoS),
            "sad" | "sad_dpsgd" => Ok(Algorithm::Sad),
            other => Err(Error::invalid(
                "algorithm",
                format!("unknown algorithm `{other}` (expected dpsgd, auto_l, auto_s or sad)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SynthConfig),
    Csv { path: PathBuf },
}

/// Either a target epsilon to calibrate for, or a fixed noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyTarget {
    Epsilon(f64),
    Sigma(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub data: DataSource,
    pub test_fraction: f64,
    pub split_seed: u64,

    /// Noise decay `beta`.
    pub beta: f64,
    /// Step decay `gamma`.
    pub gamma: f64,
    /// Clip decay `a`; `None` means `1 / beta`.
    pub clip_decay: Option<f64>,
    pub num_segments: usize,
    /// Final (SAD), fixed (dpsgd, auto_l) or initial (auto_s) threshold.
    pub clip: f64,
    pub start_ratio: f64,
    pub norm_decay: f64,

    pub privacy: PrivacyTarget,
    pub delta: f64,
    pub accounting: AccountingMode,

    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden: usize,

    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::Sad,
            data: DataSource::Synthetic(SynthConfig::default()),
            test_fraction: 0.2,
            split_seed: 0,
            beta: 0.8,
            gamma: 0.9,
            clip_decay: None,
            num_segments: 3,
            clip: 1.0,
            start_ratio: 2.0,
            norm_decay: 0.9,
            privacy: PrivacyTarget::Epsilon(3.0),
            delta: 1e-3,
            accounting: AccountingMode::Subsampled,
            learning_rate: 0.5,
            batch_size: 250,
            epochs: 30,
            hidden: 0,
            seeds: (0..5).collect(),
            out: None,
        }
    }
}

/// Recognized keys and the config-file section each belongs to.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("experiment", "algo"),
    ("experiment", "seeds"),
    ("experiment", "out"),
    ("data", "csv"),
    ("data", "n"),
    ("data", "dim"),
    ("data", "separation"),
    ("data", "weights"),
    ("data", "data_seed"),
    ("data", "test_fraction"),
    ("data", "split_seed"),
    ("schedule", "beta"),
    ("schedule", "gamma"),
    ("schedule", "a"),
    ("schedule", "steps"),
    ("schedule", "clip"),
    ("schedule", "start_ratio"),
    ("schedule", "norm_decay"),
    ("privacy", "eps"),
    ("privacy", "sigma"),
    ("privacy", "delta"),
    ("privacy", "amplification"),
    ("train", "lr"),
    ("train", "batch"),
    ("train", "epochs"),
    ("train", "hidden"),
];

pub fn is_config_key(key: &str) -> bool {
    CONFIG_KEYS.iter().any(|&(_, k)| k == key)
}

fn num<T: FromStr>(key: &'static str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse `{value}`")))
}

fn list<T: FromStr>(key: &'static str, value: &str) -> Result<Vec<T>> {
    value
        .split([',', ' '])
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn static_key(key: &str) -> Result<&'static str> {
    CONFIG_KEYS
        .iter()
        .find(|&&(_, k)| k == key)
        .map(|&(_, k)| k)
        .ok_or_else(|| Error::invalid("key", format!("unknown configuration key `{key}`")))
}

/// `"0..5"` or `"1,2,7"`.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let seeds = if let Some((lo, hi)) = value.split_once("..") {
        let lo: u64 = num("seeds", lo)?;
        let hi: u64 = num("seeds", hi)?;
        (lo..hi).collect()
    } else {
        list("seeds", value)?
    };
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "seed list is empty"));
    }
    Ok(seeds)
}

fn parse_bool(key: &'static str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(Error::invalid(key, format!("expected a boolean, got `{other}`"))),
    }
}

impl ExperimentConfig {
    fn synth_mut(&mut self, key: &'static str) -> Result<&mut SynthConfig> {
        match &mut self.data {
            DataSource::Synthetic(s) => Ok(s),
            DataSource::Csv { .. } => Err(Error::invalid(key, "only applies to synthetic data")),
        }
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = static_key(key.trim())?;
        let value = value.trim();
        match key {
            "algo" => self.algorithm = value.parse()?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "csv" => self.data = DataSource::Csv { path: value.into() },
            "n" => self.synth_mut(key)?.n = num(key, value)?,
            "dim" => self.synth_mut(key)?.dim = num(key, value)?,
            "separation" => self.synth_mut(key)?.separation = num(key, value)?,
            "weights" => self.synth_mut(key)?.class_weights = list(key, value)?,
            "data_seed" => self.synth_mut(key)?.seed = num(key, value)?,
            "test_fraction" => self.test_fraction = num(key, value)?,
            "split_seed" => self.split_seed = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "a" => self.clip_decay = Some(num(key, value)?),
            "steps" => self.num_segments = num(key, value)?,
            "clip" => self.clip = num(key, value)?,
            "start_ratio" => self.start_ratio = num(key, value)?,
            "norm_decay" => self.norm_decay = num(key, value)?,
            "eps" => self.privacy = PrivacyTarget::Epsilon(num(key, value)?),
            "sigma" => self.privacy = PrivacyTarget::Sigma(num(key, value)?),
            "delta" => self.delta = num(key, value)?,
            "amplification" => {
                self.accounting = if parse_bool(key, value)? {
                    AccountingMode::Subsampled
                } else {
                    AccountingMode::Unamplified
                }
            }
            "lr" => self.learning_rate = num(key, value)?,
            "batch" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            _ => unreachable!("key table and setter disagree on `{key}`"),
        }
        Ok(())
    }

    /// Applies settings in order. Setting both `eps` and `sigma` in one batch
    /// is rejected; across batches the later one wins.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        let pairs: Vec<_> = pairs.into_iter().collect();
        let has = |k: &str| pairs.iter().any(|(key, _)| key.trim() == k);
        if has("eps") && has("sigma") {
            return Err(Error::invalid("privacy", "set either `eps` or `sigma`, not both"));
        }
        // `csv` replaces the data source, so apply it before synthetic keys.
        let (first, rest): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|(k, _)| k.trim() == "csv");
        for (k, v) in first.into_iter().chain(rest) {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        config.apply(parse_config_text(text)?.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        Ok(config)
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config_text(&std::fs::read_to_string(path)?)
    }

    pub fn clip_decay(&self) -> f64 {
        self.clip_decay.unwrap_or_else(|| default_clip_decay(self.beta))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "seed list is empty"));
        }
        match self.privacy {
            PrivacyTarget::Epsilon(e) if !(e > 0.0 && e.is_finite()) => {
                return Err(Error::invalid("eps", format!("must be positive, got {e}")))
            }
            PrivacyTarget::Sigma(s) if !(s > 0.0 && s.is_finite()) => {
                return Err(Error::invalid("sigma", format!("must be positive, got {s}")))
            }
            _ => {}
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta", "must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("lr", "must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch/epochs", "must be at least 1"));
        }
        if !(self.clip > 0.0) {
            return Err(Error::invalid("clip", "must be positive"));
        }
        if !(self.norm_decay >= 0.0 && self.norm_decay < 1.0) {
            return Err(Error::invalid("norm_decay", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// The schedule family for a run of `total_iters` iterations.
    pub fn schedule_source(&self, total_iters: usize) -> ScheduleSource<f64> {
        match self.algorithm {
            Algorithm::Sad => ScheduleSource::Sad {
                template: ScheduleTemplate {
                    total_iters,
                    num_segments: self.num_segments,
                    step_decay: self.gamma,
                    noise_decay: self.beta,
                    clip_decay: self.clip_decay(),
                    final_clip: self.clip,
                },
            },
            Algorithm::Dpsgd => ScheduleSource::Constant { clip: self.clip },
            Algorithm::AutoL => ScheduleSource::AutoLinear {
                start_ratio: self.start_ratio,
                clip: self.clip,
            },
            Algorithm::AutoS => ScheduleSource::AutoStep {
                num_segments: self.num_segments,
                noise_decay: self.beta,
                initial_clip: self.clip,
                norm_decay: self.norm_decay,
            },
        }
    }
}

/// Parses `key = value` lines grouped under `[section]` headers.
///
/// Blank lines and lines starting with `#` or `;` are skipped. Keys before the
/// first header, or under a section they do not belong to, are rejected.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !CONFIG_KEYS.iter().any(|&(s, _)| s == name) {
                return Err(Error::parse(line_no, format!("unknown section `[{name}]`")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let Some(current) = &section else {
            return Err(Error::parse(line_no, format!("`{key}` appears before any section header")));
        };
        match CONFIG_KEYS.iter().find(|&&(_, k)| k == key) {
            None => return Err(Error::parse(line_no, format!("unknown key `{key}`"))),
            Some(&(s, _)) if s != current => {
                return Err(Error::parse(line_no, format!("`{key}` belongs in `[{s}]`, not `[{current}]`")))
            }
            Some(_) => out.push((key.to_string(), value.trim().to_string())),
        }
    }
    Ok(out)
}
