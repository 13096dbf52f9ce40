//! Experiment orchestration, configuration, calibration and output.

pub mod calibrate;
pub mod config;
pub mod output;
pub mod runs;

pub use calibrate::{calibrate_noise, fidelity_config_for, CalibrationReport};
pub use config::{ExperimentConfig, ExperimentKind, FreeParam, Provenance};
pub use output::{write_run, MANIFEST_NAME};
pub use runs::{
    run_coherence_evolution, run_experiment, run_fidelity, run_relaxation, run_scaling,
    run_steps_sweep, preset_circuits, RunOutput,
};
