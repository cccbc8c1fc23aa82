//! Hardening: retraining without the manipulable features, and adversarial
//! training with periodically refreshed adversarial samples.

mod advtrain;
mod reduce;

pub use advtrain::{
    adversarial_training, select_held_out, write_trajectory_csv, AdvTrainConfig, AdvTrainOutcome,
    CycleRecord,
};
pub use reduce::{reduce_features, train_reduced, ReduceMode};
