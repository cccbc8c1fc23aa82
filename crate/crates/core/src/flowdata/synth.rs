//! Deterministic desk-scale traffic generator.
//!
//! Planted signatures (IATs in seconds, lengths in bytes):
//!
//! | type     | label  | signature |
//! |----------|--------|-----------|
//! | benign   | 0 | TCP to a well-known port (< 1024) with handshake, random direction and lengths (fwd 60-600, rev 60-1500), IAT 0.05-0.6; an unanswered 60-byte SYN to port 21-25 (15% of TCP flows); or UDP/53 with alternating 60-300 byte packets, IAT 0.01-0.2 |
//! | `dos`    | 1 | TCP/80 handshake, then strict fwd/rev alternation with fixed lengths 74/66 and IAT 0.0018-0.0022; at least 3 packets |
//! | `scan`   | 1 | single forward SYN of 60 bytes to a high port (>= 1024); identical to an unanswered benign SYN except for `dst_port` |
//! | `slow`   | 1 | TCP/80 or 443 handshake, then forward-only PSH packets of 80-100 bytes with IAT 1.5-3.0; at least 3 packets |
//! | `botnet` | 1 | fully controlled; TCP/443, strict fwd/rev alternation, fixed lengths 120/90, periodic IAT 0.0105-0.0115, PSH+ACK on every packet |
//!
//! `src_port` is drawn uniformly from the ephemeral range for every type and
//! carries no class information.

use std::net::{IpAddr, Ipv4Addr};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Dataset, Direction, Flow, FlowKey, Label, PacketFeatureVector, TcpFlags, PROTO_TCP, PROTO_UDP,
};
use crate::error::{Error, Result};

pub const BENIGN_TCP_PORTS: [u16; 7] = [80, 443, 22, 25, 110, 143, 993];
/// Destinations of unanswered benign SYNs, all below every attack port.
pub const UNANSWERED_SYN_PORTS: [u16; 4] = [21, 22, 23, 25];
pub const SCAN_MIN_PORT: u16 = 1024;
pub const BOTNET_FWD_LEN: f64 = 120.0;
pub const BOTNET_REV_LEN: f64 = 90.0;
/// Share of benign TCP flows that are a single unanswered SYN.
pub const UNANSWERED_SYN_SHARE: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub benign: usize,
    pub dos: usize,
    pub scan: usize,
    pub slow: usize,
    pub botnet: usize,
    /// Packet count range for multi-packet types. Scans and unanswered SYNs
    /// are 1 packet; dos and slow flows have at least 3.
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            benign: 600,
            dos: 200,
            scan: 150,
            slow: 150,
            botnet: 150,
            min_len: 3,
            max_len: 10,
        }
    }
}

impl SynthConfig {
    /// All counts zero, default length range.
    pub fn empty() -> Self {
        SynthConfig {
            benign: 0,
            dos: 0,
            scan: 0,
            slow: 0,
            botnet: 0,
            ..Default::default()
        }
    }

    pub fn total(&self) -> usize {
        self.benign + self.dos + self.scan + self.slow + self.botnet
    }

    pub fn validate(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::InvalidArgument("zero flows requested".into()));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::InvalidArgument(format!(
                "invalid flow length range {}..={}",
                self.min_len, self.max_len
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Benign,
    Dos,
    Scan,
    Slow,
    Botnet,
}

pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kinds = Vec::with_capacity(config.total());
    for (kind, n) in [
        (Kind::Benign, config.benign),
        (Kind::Dos, config.dos),
        (Kind::Scan, config.scan),
        (Kind::Slow, config.slow),
        (Kind::Botnet, config.botnet),
    ] {
        kinds.extend(std::iter::repeat_n(kind, n));
    }
    kinds.shuffle(&mut rng);
    let flows = kinds
        .into_iter()
        .enumerate()
        .map(|(i, kind)| generate_flow(i, kind, config, &mut rng))
        .collect();
    Ok(Dataset::new(flows))
}

struct Builder {
    packets: Vec<PacketFeatureVector>,
    src_port: u16,
    dst_port: u16,
    protocol: u8,
}

impl Builder {
    fn push(&mut self, dir: Direction, len: f64, iat: f64, flags: &[usize]) {
        let iat = if self.packets.is_empty() { 0.0 } else { iat };
        let flags = if self.protocol == PROTO_TCP {
            TcpFlags::with(flags)
        } else {
            TcpFlags::default()
        };
        self.packets.push(PacketFeatureVector {
            src_port: self.src_port,
            dst_port: self.dst_port,
            protocol: self.protocol,
            packet_length: len,
            iat,
            direction: dir,
            flags,
        });
    }
}

fn ip(rng: &mut ChaCha8Rng, a: u8, b: u8) -> IpAddr {
    IpAddr::V4(Ipv4Addr::new(a, b, rng.random(), rng.random_range(1..255)))
}

fn generate_flow(index: usize, kind: Kind, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Flow {
    use Direction::{Forward as F, Reverse as R};
    use TcpFlags as T;

    let len = rng.random_range(cfg.min_len..=cfg.max_len);
    let len = match kind {
        Kind::Dos | Kind::Slow => len.max(3),
        _ => len,
    };
    let src_port: u16 = rng.random_range(32768..=60999);
    let mut unanswered = false;
    let (protocol, dst_port) = match kind {
        Kind::Benign if rng.random_bool(0.2) => (PROTO_UDP, 53),
        Kind::Benign if rng.random_bool(UNANSWERED_SYN_SHARE) => {
            unanswered = true;
            (
                PROTO_TCP,
                UNANSWERED_SYN_PORTS[rng.random_range(0..UNANSWERED_SYN_PORTS.len())],
            )
        }
        Kind::Benign => (
            PROTO_TCP,
            BENIGN_TCP_PORTS[rng.random_range(0..BENIGN_TCP_PORTS.len())],
        ),
        Kind::Dos => (PROTO_TCP, 80),
        Kind::Scan => (PROTO_TCP, rng.random_range(SCAN_MIN_PORT..=u16::MAX)),
        Kind::Slow => (PROTO_TCP, if rng.random_bool(0.5) { 80 } else { 443 }),
        Kind::Botnet => (PROTO_TCP, 443),
    };
    let mut b = Builder {
        packets: Vec::with_capacity(len),
        src_port,
        dst_port,
        protocol,
    };
    let int_len = |rng: &mut ChaCha8Rng, lo: u32, hi: u32| f64::from(rng.random_range(lo..=hi));
    let handshake = |b: &mut Builder, rng: &mut ChaCha8Rng, n: usize| {
        b.push(F, 60.0, 0.0, &[T::SYN]);
        if n > 1 {
            b.push(R, 60.0, rng.random_range(0.05..0.6), &[T::SYN, T::ACK]);
        }
    };

    match kind {
        Kind::Benign if protocol == PROTO_UDP => {
            for t in 0..len {
                let dir = if t % 2 == 0 { F } else { R };
                let l = int_len(rng, 60, 300);
                b.push(dir, l, rng.random_range(0.01..0.2), &[]);
            }
        }
        Kind::Benign if unanswered => b.push(F, 60.0, 0.0, &[T::SYN]),
        Kind::Benign => {
            handshake(&mut b, rng, len);
            for t in 2..len {
                let dir = if rng.random_bool(0.5) { F } else { R };
                let l = match dir {
                    F => int_len(rng, 60, 600),
                    R => int_len(rng, 60, 1500),
                };
                let iat = rng.random_range(0.05..0.6);
                if t + 1 == len && len >= 3 {
                    b.push(dir, l, iat, &[T::FIN, T::ACK]);
                } else if rng.random_bool(0.5) {
                    b.push(dir, l, iat, &[T::PSH, T::ACK]);
                } else {
                    b.push(dir, l, iat, &[T::ACK]);
                }
            }
        }
        Kind::Dos => {
            handshake(&mut b, rng, len);
            for t in 2..len {
                let iat = rng.random_range(0.0018..0.0022);
                if t % 2 == 0 {
                    b.push(F, 74.0, iat, &[T::PSH, T::ACK]);
                } else {
                    b.push(R, 66.0, iat, &[T::ACK]);
                }
            }
        }
        Kind::Scan => b.push(F, 60.0, 0.0, &[T::SYN]),
        Kind::Slow => {
            handshake(&mut b, rng, len);
            for _ in 2..len {
                let l = int_len(rng, 80, 100);
                b.push(F, l, rng.random_range(1.5..3.0), &[T::PSH, T::ACK]);
            }
        }
        Kind::Botnet => {
            for t in 0..len {
                let iat = rng.random_range(0.0105..0.0115);
                if t % 2 == 0 {
                    b.push(F, BOTNET_FWD_LEN, iat, &[T::PSH, T::ACK]);
                } else {
                    b.push(R, BOTNET_REV_LEN, iat, &[T::PSH, T::ACK]);
                }
            }
        }
    }

    let (label, attack_type, net) = match kind {
        Kind::Benign => (Label::Benign, None, 10),
        Kind::Dos => (Label::Attack, Some("dos"), 172),
        Kind::Scan => (Label::Attack, Some("scan"), 172),
        Kind::Slow => (Label::Attack, Some("slow"), 172),
        Kind::Botnet => (Label::Attack, Some("botnet"), 172),
    };
    let key = FlowKey {
        src_ip: ip(rng, net, 16),
        dst_ip: ip(rng, 192, 168),
        src_port,
        dst_port,
        protocol,
    };
    Flow {
        id: format!("synth-{index}"),
        key,
        packets: b.packets,
        label,
        attack_type: attack_type.map(str::to_string),
        fully_controlled: matches!(kind, Kind::Botnet),
    }
}
