use std::collections::HashMap;

use super::{
    Direction, Flow, FlowKey, PacketFeatureVector, PacketRecord, TcpFlags, PROTO_TCP,
};
use crate::error::{Error, Result};

#[derive(Hash, PartialEq, Eq)]
enum GroupKey {
    Hint(String),
    /// Endpoint pair in canonical (sorted) order so both directions coincide.
    Tuple(FlowKey),
}

fn canonical(key: FlowKey) -> FlowKey {
    let rev = key.reversed();
    if (key.src_ip, key.src_port) <= (rev.src_ip, rev.src_port) {
        key
    } else {
        rev
    }
}

fn record_key(r: &PacketRecord) -> FlowKey {
    FlowKey {
        src_ip: r.src_ip,
        dst_ip: r.dst_ip,
        src_port: r.src_port,
        dst_port: r.dst_port,
        protocol: r.protocol,
    }
}

/// Groups packet records into flows.
///
/// Records sharing a `flow_hint`, or otherwise sharing a 5-tuple in either
/// direction, form one flow. Packets are stably sorted by timestamp; the first
/// packet fixes the forward direction and the flow key. Flows come out in
/// order of first appearance.
pub fn assemble_flows(records: &[PacketRecord]) -> Result<Vec<Flow>> {
    let mut groups: Vec<Vec<&PacketRecord>> = Vec::new();
    let mut lookup: HashMap<GroupKey, usize> = HashMap::new();
    for r in records {
        let gk = match &r.flow_hint {
            Some(h) => GroupKey::Hint(h.clone()),
            None => GroupKey::Tuple(canonical(record_key(r))),
        };
        let idx = *lookup.entry(gk).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[idx].push(r);
    }

    groups
        .into_iter()
        .enumerate()
        .map(|(i, mut group)| {
            group.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
            build_flow(i, &group)
        })
        .collect()
}

fn build_flow(index: usize, group: &[&PacketRecord]) -> Result<Flow> {
    let first = group[0];
    let key = record_key(first);
    let conflict = |message: String| Error::FlowConflict {
        key: key.to_string(),
        message,
    };

    let mut packets = Vec::with_capacity(group.len());
    let mut prev_ts = first.timestamp;
    for r in group {
        if r.protocol != key.protocol {
            return Err(conflict(format!(
                "line {}: protocol {} conflicts with {}",
                r.line, r.protocol, key.protocol
            )));
        }
        if r.label != first.label {
            return Err(conflict(format!("line {}: conflicting label", r.line)));
        }
        let rk = record_key(r);
        let direction = if rk == key {
            Direction::Forward
        } else if rk == key.reversed() {
            Direction::Reverse
        } else {
            return Err(conflict(format!(
                "line {}: endpoints {} do not match the flow",
                r.line, rk
            )));
        };
        let flags = if key.protocol == PROTO_TCP {
            r.flags
        } else {
            TcpFlags::default()
        };
        packets.push(PacketFeatureVector {
            src_port: key.src_port,
            dst_port: key.dst_port,
            protocol: key.protocol,
            packet_length: r.packet_length,
            iat: r.timestamp - prev_ts,
            direction,
            flags,
        });
        prev_ts = r.timestamp;
    }

    let id = match &first.flow_hint {
        Some(h) => h.clone(),
        None => format!("{index}:{key}"),
    };
    Ok(Flow {
        id,
        key,
        packets,
        label: first.label,
        attack_type: group.iter().find_map(|r| r.attack_type.clone()),
        fully_controlled: group.iter().any(|r| r.fully_controlled),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowdata::Label;
    use proptest::prelude::*;

    fn rec(ts: f64, src: &str, dst: &str, sp: u16, dp: u16) -> PacketRecord {
        PacketRecord {
            line: 0,
            flow_hint: None,
            timestamp: ts,
            src_ip: src.parse().unwrap(),
            dst_ip: dst.parse().unwrap(),
            src_port: sp,
            dst_port: dp,
            protocol: 6,
            packet_length: 60.0,
            flags: TcpFlags::default(),
            label: Label::Benign,
            attack_type: None,
            fully_controlled: false,
        }
    }

    #[test]
    fn same_key_iats() {
        let recs = vec![
            rec(0.0, "10.0.0.1", "10.0.0.2", 1000, 80),
            rec(0.5, "10.0.0.1", "10.0.0.2", 1000, 80),
            rec(0.5, "10.0.0.1", "10.0.0.2", 1000, 80),
        ];
        let flows = assemble_flows(&recs).unwrap();
        assert_eq!(flows.len(), 1);
        let iats: Vec<f64> = flows[0].packets.iter().map(|p| p.iat).collect();
        assert_eq!(iats, vec![0.0, 0.5, 0.0]);
    }

    #[test]
    fn distinct_tuples_are_distinct_flows() {
        let recs = vec![
            rec(0.0, "10.0.0.1", "10.0.0.2", 1000, 80),
            rec(1.0, "10.0.0.1", "10.0.0.3", 1000, 80),
        ];
        let flows = assemble_flows(&recs).unwrap();
        assert_eq!(flows.len(), 2);
        for f in &flows {
            assert_eq!(f.packets.len(), 1);
            assert_eq!(f.packets[0].iat, 0.0);
        }
    }

    #[test]
    fn reply_joins_flow_as_reverse() {
        let recs = vec![
            rec(0.0, "10.0.0.9", "10.0.0.2", 5000, 80),
            rec(0.1, "10.0.0.2", "10.0.0.9", 80, 5000),
        ];
        let flows = assemble_flows(&recs).unwrap();
        assert_eq!(flows.len(), 1);
        let f = &flows[0];
        assert_eq!(f.packets[0].direction, Direction::Forward);
        assert_eq!(f.packets[1].direction, Direction::Reverse);
        // flow-constant features come from the forward key
        assert_eq!(f.packets[1].src_port, 5000);
        assert_eq!(f.packets[1].dst_port, 80);
    }

    #[test]
    fn hint_with_conflicting_protocol_fails() {
        let mut a = rec(0.0, "10.0.0.1", "10.0.0.2", 1, 2);
        let mut b = rec(0.1, "10.0.0.1", "10.0.0.2", 1, 2);
        a.flow_hint = Some("x".into());
        b.flow_hint = Some("x".into());
        b.protocol = 17;
        assert!(matches!(
            assemble_flows(&[a, b]),
            Err(Error::FlowConflict { .. })
        ));
    }

    #[test]
    fn non_tcp_flags_cleared() {
        let mut a = rec(0.0, "10.0.0.1", "10.0.0.2", 1, 53);
        a.protocol = 17;
        a.flags = TcpFlags::with(&[TcpFlags::SYN]);
        let flows = assemble_flows(&[a]).unwrap();
        assert_eq!(flows[0].packets[0].flags, TcpFlags::default());
    }

    proptest! {
        #[test]
        fn grouping_partitions_packets(
            pkts in prop::collection::vec((0u8..4, 0u8..4, 0u16..3, any::<bool>(), 0.0f64..100.0), 1..60)
        ) {
            let recs: Vec<PacketRecord> = pkts.iter().map(|&(a, b, p, swap, ts)| {
                let (s, d) = (format!("10.0.0.{a}"), format!("10.0.1.{b}"));
                if swap { rec(ts, &d, &s, 80, 1000 + p) } else { rec(ts, &s, &d, 1000 + p, 80) }
            }).collect();
            let flows = assemble_flows(&recs).unwrap();
            let total: usize = flows.iter().map(|f| f.packets.len()).sum();
            prop_assert_eq!(total, recs.len());
            for f in &flows {
                prop_assert_eq!(f.packets[0].iat, 0.0);
                for p in &f.packets {
                    prop_assert!(p.iat >= 0.0);
                    prop_assert_eq!(p.src_port, f.packets[0].src_port);
                    prop_assert_eq!(p.dst_port, f.packets[0].dst_port);
                    prop_assert_eq!(p.protocol, f.packets[0].protocol);
                }
            }
            // a flow key and its reverse never appear as two flows
            for (i, f) in flows.iter().enumerate() {
                for g in &flows[i + 1..] {
                    prop_assert!(g.key != f.key && g.key != f.key.reversed());
                }
            }
        }
    }
}
