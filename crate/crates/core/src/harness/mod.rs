//! Experiment configuration, the end-to-end trial pipeline and result files.

mod config;
mod modem;
mod pipeline;
mod run;

pub use config::{preset, validate_config, ExperimentConfig, PRESETS};
pub use modem::Modem;
pub use pipeline::{derive_seed, record_len, run_trial, BandTally, LevelTally, NoiseLevel, Purpose, TrialOutput};
pub use run::{
    read_results, run_experiment, simulate, write_outputs, PsdRow, ResultRow, RunOptions, RunOutput, SubcarrierRow,
    RESULT_FILES, VERSION,
};
