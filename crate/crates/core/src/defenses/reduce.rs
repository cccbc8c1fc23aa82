use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{train, Model, TrainConfig};
use crate::error::{Error, Result};
use crate::flowdata::{Dataset, FeatureSchema, Reduction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReduceMode {
    BothDirections,
    AttackerDirectionOnly,
}

impl ReduceMode {
    pub fn name(self) -> &'static str {
        match self {
            ReduceMode::BothDirections => "both_directions",
            ReduceMode::AttackerDirectionOnly => "attacker_direction_only",
        }
    }
}

impl fmt::Display for ReduceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReduceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both_directions" => Ok(ReduceMode::BothDirections),
            "attacker_direction_only" => Ok(ReduceMode::AttackerDirectionOnly),
            other => Err(Error::InvalidArgument(format!(
                "unknown reduction mode `{other}`; expected both_directions or attacker_direction_only"
            ))),
        }
    }
}

/// Withholds the manipulable features from the model.
///
/// `BothDirections` deactivates them on every packet. `AttackerDirectionOnly`
/// keeps the input width and zeroes them on forward packets only.
pub fn reduce_features(schema: &FeatureSchema, mode: ReduceMode) -> Result<FeatureSchema> {
    schema.validate()?;
    if schema.reduction != Reduction::None || schema.active_mask.iter().any(|a| !a) {
        return Err(Error::InvalidArgument(
            "feature reduction needs an unreduced schema".into(),
        ));
    }
    let mut out = schema.clone();
    match mode {
        ReduceMode::BothDirections => {
            for (a, &m) in out.active_mask.iter_mut().zip(&schema.manipulable_mask) {
                if m {
                    *a = false;
                }
            }
            out.reduction = Reduction::BothDirections;
        }
        ReduceMode::AttackerDirectionOnly => out.reduction = Reduction::AttackerDirectionOnly,
    }
    Ok(out)
}

/// Trains a fresh classifier on `train` with its schema reduced.
pub fn train_reduced(train_set: &Dataset, mode: ReduceMode, config: &TrainConfig) -> Result<Model> {
    let schema = reduce_features(&train_set.schema, mode)?;
    let reduced = Dataset {
        schema,
        ..train_set.clone()
    };
    train(&reduced, config)
}
