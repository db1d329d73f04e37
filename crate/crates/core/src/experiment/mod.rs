//! Experiment runner: config files, training runs, retain-probability
//! sweeps and metrics CSVs.

pub mod config;
pub mod run;

pub use config::{parse_test_modes, DatasetKind, ExperimentConfig};
pub use run::{
    csv_header, load_datasets, read_metrics_csv, run, run_with, sweep_with, write_metrics_csv, write_sweep_csv,
    MetricsRecord, SweepRow, SWEEP_MODES,
};
