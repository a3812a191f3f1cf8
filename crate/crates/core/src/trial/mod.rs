//! Paired accuracy trials: the external-trainer protocol and the built-in
//! simulator.

mod simulate;
mod trainer;

pub use simulate::{simulate, simulate_records, GenerativeTruth, Simulation};
pub use trainer::{
    run_experiment, run_splits, run_trial, Condition, ExperimentOutcome, TrainerContract, TrialFailureLog, TrialOutcome,
};
