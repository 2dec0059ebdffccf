//! Configuration loading and the experiment commands behind the CLI.
//!
//! Every result is written as CSV (plus JSON checkpoints) under
//! `<out>/<experiment name>/`.

mod config;
mod report;
mod run;

pub use config::{
    default_out_root, load_config, parse_config, CliOverrides, ExperimentSettings, ExperimentSpec, Profile, OUT_ENV,
};
pub use report::{convergence, curve_trend, moving_average, Convergence, CurveTrend};
pub use run::{
    axis_values, cmd_compare, cmd_eval, cmd_resume, cmd_smoke, cmd_sweep_epsilon, cmd_train, compare_rows,
    experiment_dir, load_checkpoint, min_max, read_metrics, seed_dir, CompareRow, RunInfo, SmokeReport, SweepRow,
    TrainRun, CHECKPOINT_FILE, COMPARE_AXES, METRICS_FILE,
};
