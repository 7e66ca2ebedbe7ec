//! Experiment configs, multi-seed runs, parameter sweeps and algorithm comparisons.

mod config;
mod run;
mod sweep;

pub use config::{
    is_config_key, parse_config_text, parse_seeds, Algorithm, DataSource, ExperimentConfig, PrivacyTarget,
    CONFIG_KEYS,
};
pub use run::{load_split, prepare_schedule, run, run_on, write_outputs, MeanStd, PreparedSchedule, RunSummary, SeedResult};
pub use sweep::{compare, grid_points, sweep, CompareTable, GridAxis, SweepRow, SweepTable};
