use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use saddp_core::accountant::Accountant;
use saddp_core::data::{synth_imbalanced, write_csv};
use saddp_core::harness::{
    compare, load_split, prepare_schedule, run, sweep, Algorithm, DataSource, ExperimentConfig, GridAxis,
};
use saddp_core::StepSchedule;

#[derive(Parser)]
#[command(name = "saddp", version, about = "Step-adaptive decay DP-SGD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate or account a noise schedule and print its privacy spend.
    Account {
        /// Account this schedule file instead of building one from the config.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Sampling rate for `--schedule`.
        #[arg(long)]
        q: Option<f64>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Train every seed of one configuration.
    Train(Opts),
    /// Run the Cartesian product of parameter grids.
    Sweep {
        /// `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "grid", required = true)]
        grid: Vec<String>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Compare algorithms across privacy budgets.
    Compare(Opts),
    /// Write a synthetic imbalanced dataset as CSV.
    GenData(Opts),
}

/// Shared settings. A config file is applied first, then `--set`, then flags.
#[derive(Args, Clone, Default)]
struct Opts {
    /// Config file of `key = value` lines under `[section]` headers.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings.
    #[arg(long = "set")]
    set: Vec<String>,
    /// Target epsilon; `compare` takes a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Fixed noise scale instead of a target epsilon.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Noise decay.
    #[arg(long)]
    beta: Option<f64>,
    /// Step decay.
    #[arg(long)]
    gamma: Option<f64>,
    /// Clip decay (default 1/beta).
    #[arg(long)]
    a: Option<f64>,
    /// Number of schedule segments.
    #[arg(long)]
    steps: Option<usize>,
    /// dpsgd, auto_l, auto_s or sad; `compare` takes a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    algo: Vec<String>,
    /// `0..5` or `1,2,3`.
    #[arg(long)]
    seeds: Option<String>,
    /// Charge every step as a full Gaussian mechanism.
    #[arg(long)]
    no_amplification: bool,
    /// Output directory (a file path for `gen-data`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    clip: Option<f64>,
    /// Dataset CSV instead of synthetic data.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    data_seed: Option<u64>,
}

impl Opts {
    /// Builds the config; list-valued flags are left for the caller when `lists` is set.
    fn config(&self, lists: bool) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_config_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let set: Vec<(&str, &str)> = self
            .set
            .iter()
            .map(|kv| kv.split_once('=').with_context(|| format!("`--set {kv}` is not key=value")))
            .collect::<Result<_>>()?;
        config.apply(set)?;

        let mut flags: Vec<(&str, String)> = Vec::new();
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k, v));
            }
        };
        if !lists {
            if self.eps.len() > 1 || self.algo.len() > 1 {
                bail!("--eps and --algo take a single value here");
            }
            push("eps", self.eps.first().map(f64::to_string));
            push("algo", self.algo.first().cloned());
        }
        push("csv", self.csv.as_ref().map(|p| p.display().to_string()));
        push("sigma", self.sigma.map(|v| v.to_string()));
        push("delta", self.delta.map(|v| v.to_string()));
        push("beta", self.beta.map(|v| v.to_string()));
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("a", self.a.map(|v| v.to_string()));
        push("steps", self.steps.map(|v| v.to_string()));
        push("seeds", self.seeds.clone());
        push("amplification", self.no_amplification.then(|| "false".to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("batch", self.batch.map(|v| v.to_string()));
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("hidden", self.hidden.map(|v| v.to_string()));
        push("clip", self.clip.map(|v| v.to_string()));
        push("n", self.n.map(|v| v.to_string()));
        push("dim", self.dim.map(|v| v.to_string()));
        push("separation", self.separation.map(|v| v.to_string()));
        push("weights", self.weights.clone());
        push("data_seed", self.data_seed.map(|v| v.to_string()));
        config.apply(flags.iter().map(|(k, v)| (*k, v.as_str())))?;
        Ok(config)
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn account(schedule: Option<PathBuf>, q: Option<f64>, opts: &Opts) -> Result<bool> {
    let config = opts.config(false)?;
    let (schedule, q, sigma) = match schedule {
        Some(path) => {
            let q = q.context("--schedule needs --q")?;
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            (StepSchedule::from_text(&text)?, q, None)
        }
        None => {
            let (train, _) = load_split(&config)?;
            let p = prepare_schedule(&config, train.len())?;
            let q = p.train_config.sampling_rate(train.len());
            (p.schedule, q, Some(p.sigma))
        }
    };
    let accountant = Accountant::new(q, config.delta, config.accounting);
    let curve = accountant.curve(&schedule)?;
    let spend = accountant.spend(&schedule)?;
    if let Some(s) = sigma {
        println!("sigma={s}");
    }
    println!(
        "epsilon={} delta={} alpha={} q={q} mode={}",
        spend.epsilon,
        spend.delta,
        spend.best_alpha,
        config.accounting.name()
    );
    print!("{}", schedule.to_text());
    if let Some(dir) = &config.out {
        write_file(dir, "schedule.txt", &schedule.to_text())?;
        write_file(dir, "rdp.csv", &curve.to_csv())?;
    }
    Ok(true)
}

fn train(opts: &Opts) -> Result<bool> {
    let config = opts.config(false)?;
    let summary = run(&config)?;
    println!("{}", summary.to_json()?);
    for s in summary.seeds.iter().filter(|s| !s.ok) {
        eprintln!("seed {} failed: {}", s.seed, s.error.as_deref().unwrap_or("unknown"));
    }
    Ok(summary.all_ok())
}

fn sweep_cmd(grid: &[String], opts: &Opts) -> Result<bool> {
    let config = opts.config(false)?;
    let axes: Vec<GridAxis> = grid.iter().map(|g| GridAxis::parse(g)).collect::<Result<_, _>>()?;
    let table = sweep(&config, &axes)?;
    let csv = table.to_csv();
    print!("{csv}");
    if let Some(dir) = &config.out {
        write_file(dir, "sweep.csv", &csv)?;
    }
    Ok(table.all_ok())
}

fn compare_cmd(opts: &Opts) -> Result<bool> {
    let base = opts.config(true)?;
    let algos: Vec<Algorithm> = if opts.algo.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        opts.algo.iter().map(|a| a.parse()).collect::<Result<_, _>>()?
    };
    let epsilons = if opts.eps.is_empty() { vec![3.0, 8.0, 16.0] } else { opts.eps.clone() };
    let configs: Vec<ExperimentConfig> = algos
        .into_iter()
        .map(|algorithm| ExperimentConfig {
            algorithm,
            ..base.clone()
        })
        .collect();
    let table = compare(&configs, &epsilons)?;
    let (overall, minority) = (table.overall_csv(), table.minority_csv());
    println!("# overall accuracy\n{overall}\n# minority accuracy\n{minority}");
    if let Some(dir) = &base.out {
        write_file(dir, "compare_overall.csv", &overall)?;
        write_file(dir, "compare_minority.csv", &minority)?;
    }
    Ok(table.all_ok())
}

fn gen_data(opts: &Opts) -> Result<bool> {
    let config = opts.config(false)?;
    let DataSource::Synthetic(synth) = &config.data else {
        bail!("gen-data builds synthetic data; drop --csv");
    };
    let out = config.out.as_ref().context("gen-data needs --out <file.csv>")?;
    let data = synth_imbalanced::<f64>(synth)?;
    write_csv(&data, out)?;
    println!("wrote {} rows, class counts {:?}", data.len(), data.class_counts());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Account { schedule, q, opts } => account(schedule.clone(), *q, opts),
        Command::Train(opts) => train(opts),
        Command::Sweep { grid, opts } => sweep_cmd(grid, opts),
        Command::Compare(opts) => compare_cmd(opts),
        Command::GenData(opts) => gen_data(opts),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
