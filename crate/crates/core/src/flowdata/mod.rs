//! Packet records, flows and datasets.
//!
//! A flow is the classification unit: the ordered packets sharing a
//! bidirectional 5-tuple. Every packet is described by the 15 features of
//! [`FeatureSchema::canonical`]; ports and protocol are constant over a flow,
//! packet length and IAT are the features an attacker can manipulate.

mod assemble;
mod cache;
mod csv;
mod normalize;
pub mod schema;
mod split;
pub mod synth;

use std::fmt;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

pub use assemble::assemble_flows;
pub use cache::{load_dataset, read_dataset, save_dataset, write_dataset, DATASET_FORMAT_VERSION};
pub use self::csv::{parse_packet_csv, PacketRecord, CSV_COLUMNS};
pub use normalize::{fit_normalizer, FlowTensor, NormalizationStats};
pub use schema::{FeatureSchema, Reduction, FEATURE_NAMES, NUM_FEATURES};
pub use split::split_dataset;
pub use synth::{synth_generate, SynthConfig};

pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

pub const FLAG_NAMES: [&str; 9] = ["fin", "syn", "rst", "psh", "ack", "urg", "ece", "cwr", "ns"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn as_f64(self) -> f64 {
        match self {
            Direction::Forward => 0.0,
            Direction::Reverse => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Benign,
    Attack,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Benign => 0.0,
            Label::Attack => 1.0,
        }
    }

    pub fn is_attack(self) -> bool {
        self == Label::Attack
    }
}

/// TCP flags in feature order: FIN, SYN, RST, PSH, ACK, URG, ECE, CWR, NS.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TcpFlags(pub [bool; 9]);

impl TcpFlags {
    pub const FIN: usize = 0;
    pub const SYN: usize = 1;
    pub const RST: usize = 2;
    pub const PSH: usize = 3;
    pub const ACK: usize = 4;

    pub fn with(bits: &[usize]) -> Self {
        let mut f = [false; 9];
        for &b in bits {
            f[b] = true;
        }
        TcpFlags(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketFeatureVector {
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
    /// Bytes. Real-valued because adversarial edits need not be integral.
    pub packet_length: f64,
    /// Seconds since the previous packet of the flow; 0 for the first packet.
    pub iat: f64,
    pub direction: Direction,
    pub flags: TcpFlags,
}

impl PacketFeatureVector {
    pub fn to_features(&self) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        out[schema::SRC_PORT] = f64::from(self.src_port);
        out[schema::DST_PORT] = f64::from(self.dst_port);
        out[schema::PROTOCOL] = f64::from(self.protocol);
        out[schema::PACKET_LENGTH] = self.packet_length;
        out[schema::IAT] = self.iat;
        out[schema::DIRECTION] = self.direction.as_f64();
        for (k, &set) in self.flags.0.iter().enumerate() {
            out[schema::FIN + k] = if set { 1.0 } else { 0.0 };
        }
        out
    }

    /// Inverse of [`to_features`](Self::to_features). Discrete features are
    /// rounded to their nearest valid value.
    pub fn from_features(v: &[f64]) -> Result<Self, crate::Error> {
        if v.len() != NUM_FEATURES {
            return Err(crate::Error::Dimension {
                expected: NUM_FEATURES,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(crate::Error::NonFinite("packet features"));
        }
        let round_to = |x: f64, max: f64| x.round().clamp(0.0, max);
        let mut flags = [false; 9];
        for (k, f) in flags.iter_mut().enumerate() {
            *f = v[schema::FIN + k] >= 0.5;
        }
        Ok(PacketFeatureVector {
            src_port: round_to(v[schema::SRC_PORT], 65535.0) as u16,
            dst_port: round_to(v[schema::DST_PORT], 65535.0) as u16,
            protocol: round_to(v[schema::PROTOCOL], 255.0) as u8,
            packet_length: v[schema::PACKET_LENGTH].max(0.0),
            iat: v[schema::IAT].max(0.0),
            direction: if v[schema::DIRECTION] >= 0.5 {
                Direction::Reverse
            } else {
                Direction::Forward
            },
            flags: TcpFlags(flags),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub src_ip: IpAddr,
    pub dst_ip: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
}

impl FlowKey {
    pub fn reversed(&self) -> FlowKey {
        FlowKey {
            src_ip: self.dst_ip,
            dst_ip: self.src_ip,
            src_port: self.dst_port,
            dst_port: self.src_port,
            protocol: self.protocol,
        }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}->{}:{}/{}",
            self.src_ip, self.src_port, self.dst_ip, self.dst_port, self.protocol
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: String,
    pub key: FlowKey,
    pub packets: Vec<PacketFeatureVector>,
    pub label: Label,
    pub attack_type: Option<String>,
    /// Botnet/backdoor traffic: the adversary controls both directions.
    pub fully_controlled: bool,
}

impl Flow {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Attack type, or `"benign"` for benign flows.
    pub fn category(&self) -> &str {
        match (&self.label, &self.attack_type) {
            (Label::Benign, _) => "benign",
            (Label::Attack, Some(t)) => t,
            (Label::Attack, None) => "attack",
        }
    }

    pub fn step_labels(&self) -> Vec<f64> {
        vec![self.label.as_f64(); self.packets.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Test,
    #[default]
    Unsplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub flows: Vec<Flow>,
    pub schema: FeatureSchema,
    pub split: SplitTag,
}

impl Dataset {
    pub fn new(flows: Vec<Flow>) -> Self {
        Dataset {
            flows,
            schema: FeatureSchema::canonical(),
            split: SplitTag::Unsplit,
        }
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn packet_count(&self) -> usize {
        self.flows.iter().map(Flow::len).sum()
    }

    pub fn attack_flows(&self) -> impl Iterator<Item = &Flow> {
        self.flows.iter().filter(|f| f.label.is_attack())
    }

    /// Distinct categories in first-seen order.
    pub fn categories(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for f in &self.flows {
            if !out.iter().any(|c| c == f.category()) {
                out.push(f.category().to_string());
            }
        }
        out
    }

    pub fn with_flows(&self, flows: Vec<Flow>) -> Dataset {
        Dataset {
            flows,
            schema: self.schema.clone(),
            split: self.split,
        }
    }
}
