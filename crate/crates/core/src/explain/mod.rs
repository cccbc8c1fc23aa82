//! Global explanations: feature importance, mutual-information sensitivity,
//! partial dependence and per-step profiles.

mod importance;
mod mi;
mod pdp;
mod profile;

use serde::{Deserialize, Serialize};

use crate::flowdata::{Dataset, Flow};

pub use importance::{
    importance_dropout, importance_perturbation, importance_weights, shared_info_from_accuracies,
    shared_info_score, ImportanceEntry, ImportanceMethod, ImportanceTable, SharedInfo,
    SHARED_INFO_TOLERANCE,
};
pub use mi::{
    mutual_information, mutual_information_from_counts, quantile_edges, sensitivity_mutual_information,
    MiConfig, MIN_MI_PAIRS,
};
pub use pdp::{conditional_pdp, default_grid, sequential_pdp, PdpCurve, PDP_GRID_POINTS};
pub use profile::{
    confidence_per_step, feature_sequence_profile, FeatureProfile, ProfilePoint, StepConfidence,
    StepConfidencePoint,
};

/// Which flows an explanation is conditioned on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassFilter {
    All,
    Benign,
    Attack,
    /// One attack type, or `"benign"`.
    Category(String),
}

impl ClassFilter {
    pub fn matches(&self, flow: &Flow) -> bool {
        match self {
            ClassFilter::All => true,
            ClassFilter::Benign => !flow.label.is_attack(),
            ClassFilter::Attack => flow.label.is_attack(),
            ClassFilter::Category(c) => flow.category() == c,
        }
    }

    pub fn select<'a>(&self, dataset: &'a Dataset) -> Vec<&'a Flow> {
        dataset.flows.iter().filter(|f| self.matches(f)).collect()
    }

    pub fn name(&self) -> String {
        match self {
            ClassFilter::All => "all".into(),
            ClassFilter::Benign => "benign".into(),
            ClassFilter::Attack => "attack".into(),
            ClassFilter::Category(c) => c.clone(),
        }
    }

    /// Parses `all`, `benign`, `attack`, or an attack type.
    pub fn parse(s: &str) -> ClassFilter {
        match s {
            "all" => ClassFilter::All,
            "benign" => ClassFilter::Benign,
            "attack" => ClassFilter::Attack,
            other => ClassFilter::Category(other.to_string()),
        }
    }
}
