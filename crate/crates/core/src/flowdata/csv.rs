use std::io::Read;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use super::{Label, TcpFlags};
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 20] = [
    "flow_hint",
    "timestamp",
    "src_ip",
    "dst_ip",
    "src_port",
    "dst_port",
    "protocol",
    "packet_length",
    "fin",
    "syn",
    "rst",
    "psh",
    "ack",
    "urg",
    "ece",
    "cwr",
    "ns",
    "label",
    "attack_type",
    "fully_controlled",
];

/// Columns that may be left out of the header entirely.
const OPTIONAL_COLUMNS: [&str; 3] = ["flow_hint", "attack_type", "fully_controlled"];

/// One data row of the packet CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub line: u64,
    pub flow_hint: Option<String>,
    pub timestamp: f64,
    pub src_ip: IpAddr,
    pub dst_ip: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
    pub packet_length: f64,
    pub flags: TcpFlags,
    pub label: Label,
    pub attack_type: Option<String>,
    pub fully_controlled: bool,
}

pub fn parse_packet_csv<R: Read>(reader: R) -> Result<Vec<PacketRecord>> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(::csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let mut index = [usize::MAX; CSV_COLUMNS.len()];
    for (pos, name) in headers.iter().enumerate() {
        match CSV_COLUMNS.iter().position(|c| *c == name) {
            Some(k) => index[k] = pos,
            None => return Err(Error::UnknownColumn(name.to_string())),
        }
    }
    for (k, col) in CSV_COLUMNS.iter().enumerate() {
        if index[k] == usize::MAX && !OPTIONAL_COLUMNS.contains(col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |name: &str| -> &str {
            let k = CSV_COLUMNS.iter().position(|c| *c == name).unwrap();
            match index[k] {
                usize::MAX => "",
                pos => row.get(pos).unwrap_or(""),
            }
        };
        let bad = |message: String| Error::Csv { line, message };

        let parse_f64 = |name: &str| -> Result<f64> {
            let raw = field(name);
            let v: f64 = raw
                .parse()
                .map_err(|_| bad(format!("{name}: `{raw}` is not a number")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(bad(format!("{name}: must be finite and >= 0, got {raw}")));
            }
            Ok(v)
        };
        let parse_int = |name: &str, max: u64| -> Result<u64> {
            let raw = field(name);
            let v: u64 = raw
                .parse()
                .map_err(|_| bad(format!("{name}: `{raw}` is not a non-negative integer")))?;
            if v > max {
                return Err(bad(format!("{name}: {v} exceeds {max}")));
            }
            Ok(v)
        };
        let parse_bit = |name: &str| -> Result<bool> {
            match field(name) {
                "0" => Ok(false),
                "1" => Ok(true),
                raw => Err(bad(format!("{name}: expected 0 or 1, got `{raw}`"))),
            }
        };
        let parse_ip = |name: &str| -> Result<IpAddr> {
            let raw = field(name);
            raw.parse()
                .map_err(|_| bad(format!("{name}: `{raw}` is not an IP address")))
        };

        let mut flags = [false; 9];
        for (k, name) in super::FLAG_NAMES.iter().enumerate() {
            flags[k] = parse_bit(name)?;
        }
        let hint = field("flow_hint");
        let attack_type = field("attack_type");
        let fully_controlled = match field("fully_controlled") {
            "" => false,
            _ => parse_bit("fully_controlled")?,
        };

        out.push(PacketRecord {
            line,
            flow_hint: (!hint.is_empty()).then(|| hint.to_string()),
            timestamp: parse_f64("timestamp")?,
            src_ip: parse_ip("src_ip")?,
            dst_ip: parse_ip("dst_ip")?,
            src_port: parse_int("src_port", 65535)? as u16,
            dst_port: parse_int("dst_port", 65535)? as u16,
            protocol: parse_int("protocol", 255)? as u8,
            packet_length: parse_f64("packet_length")?,
            flags: TcpFlags(flags),
            label: if parse_bit("label")? {
                Label::Attack
            } else {
                Label::Benign
            },
            attack_type: (!attack_type.is_empty()).then(|| attack_type.to_string()),
            fully_controlled,
        });
    }
    Ok(out)
}
