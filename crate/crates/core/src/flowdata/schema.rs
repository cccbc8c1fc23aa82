use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 15;

pub const SRC_PORT: usize = 0;
pub const DST_PORT: usize = 1;
pub const PROTOCOL: usize = 2;
pub const PACKET_LENGTH: usize = 3;
pub const IAT: usize = 4;
pub const DIRECTION: usize = 5;
pub const FIN: usize = 6;
pub const SYN: usize = 7;
pub const RST: usize = 8;
pub const PSH: usize = 9;
pub const ACK: usize = 10;
pub const URG: usize = 11;
pub const ECE: usize = 12;
pub const CWR: usize = 13;
pub const NS: usize = 14;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "src_port",
    "dst_port",
    "protocol",
    "packet_length",
    "iat",
    "direction",
    "fin",
    "syn",
    "rst",
    "psh",
    "ack",
    "urg",
    "ece",
    "cwr",
    "ns",
];

/// How the manipulable features are withheld from the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    None,
    /// Packet length and IAT removed from every packet.
    BothDirections,
    /// Packet length and IAT zeroed on forward (attacker to victim) packets only.
    AttackerDirectionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
    pub flow_constant_mask: Vec<bool>,
    pub manipulable_mask: Vec<bool>,
    pub active_mask: Vec<bool>,
    #[serde(default)]
    pub reduction: Reduction,
}

impl FeatureSchema {
    pub fn canonical() -> Self {
        let flow_constant_mask = (0..NUM_FEATURES)
            .map(|i| matches!(i, SRC_PORT | DST_PORT | PROTOCOL))
            .collect();
        let manipulable_mask = (0..NUM_FEATURES)
            .map(|i| matches!(i, PACKET_LENGTH | IAT))
            .collect();
        FeatureSchema {
            names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            flow_constant_mask,
            manipulable_mask,
            active_mask: vec![true; NUM_FEATURES],
            reduction: Reduction::None,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn is_flow_constant(&self, feature: usize) -> bool {
        self.flow_constant_mask[feature]
    }

    pub fn is_manipulable(&self, feature: usize) -> bool {
        self.manipulable_mask[feature]
    }

    /// Whether the model sees `feature` on a packet travelling in `direction`.
    pub fn is_active_at(&self, feature: usize, direction: super::Direction) -> bool {
        if !self.active_mask[feature] {
            return false;
        }
        match self.reduction {
            Reduction::AttackerDirectionOnly => {
                !(self.manipulable_mask[feature] && direction == super::Direction::Forward)
            }
            _ => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.names.len();
        for (what, len) in [
            ("flow_constant_mask", self.flow_constant_mask.len()),
            ("manipulable_mask", self.manipulable_mask.len()),
            ("active_mask", self.active_mask.len()),
        ] {
            if len != n {
                return Err(Error::InvalidArgument(format!(
                    "schema {what} has {len} entries for {n} features"
                )));
            }
        }
        if self
            .flow_constant_mask
            .iter()
            .zip(&self.manipulable_mask)
            .any(|(&c, &m)| c && m)
        {
            return Err(Error::InvalidArgument(
                "a feature cannot be both flow-constant and manipulable".into(),
            ));
        }
        Ok(())
    }
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self::canonical()
    }
}
