//! Tiny one-packet problems with two editable entries, small enough for an
//! exhaustive grid search of the minimal adversarial L1 distance.

use std::net::{IpAddr, Ipv4Addr};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqids::classifier::Model;
use seqids::flowdata::schema::{PACKET_LENGTH, URG};
use seqids::flowdata::{
    Direction, FeatureSchema, Flow, FlowKey, Label, NormalizationStats, PacketFeatureVector, TcpFlags,
    NUM_FEATURES, PROTO_TCP,
};
use seqids::rnn::{step, LstmState, ModelParams, GATE_CELL, GATE_INPUT, GATE_OUTPUT};

pub const GRID_STEP: f64 = 1e-3;
/// Largest L1 distance the grid search covers.
pub const GRID_REACH: f64 = 1.0;
pub const DELTA: f64 = -0.2;
const HIDDEN: usize = 4;

/// Editable entries of every toy flow.
pub const EDITABLE: [usize; 2] = [PACKET_LENGTH, URG];

/// One-layer LSTM with random weights whose logit falls monotonically, and
/// nonlinearly, in both editable entries: they feed only the cell gate, with
/// negative weights, through open input and output gates into positive head
/// weights. The other features add a small random per-flow offset.
pub fn toy_model(seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(1, HIDDEN, NUM_FEATURES).unwrap();
    let bias = params.bias_range(0).start;
    for unit in 0..HIDDEN {
        for col in 0..NUM_FEATURES {
            let i = params.weight_index(0, GATE_CELL, unit, col);
            params.values_mut()[i] = if EDITABLE.contains(&col) {
                rng.random_range(-3.0..-0.5)
            } else {
                rng.random_range(-0.3..0.3)
            };
        }
        params.values_mut()[bias + GATE_INPUT * HIDDEN + unit] = 2.0;
        params.values_mut()[bias + GATE_OUTPUT * HIDDEN + unit] = 2.0;
        params.values_mut()[bias + GATE_CELL * HIDDEN + unit] = rng.random_range(-0.5..2.0);
    }
    let head = params.head_weights_range();
    for v in &mut params.values_mut()[head] {
        *v = rng.random_range(0.5..2.0);
    }
    let hb = params.head_bias_index();
    params.values_mut()[hb] = 1.5;
    let mut schema = FeatureSchema::canonical();
    schema.manipulable_mask = (0..NUM_FEATURES).map(|j| EDITABLE.contains(&j)).collect();
    Model {
        params,
        stats: NormalizationStats::identity(NUM_FEATURES),
        schema,
        feature_dropout: false,
        history: Vec::new(),
    }
}

pub fn toy_flow(rng: &mut ChaCha8Rng, id: usize) -> Flow {
    let mut flags = [false; 9];
    for f in flags.iter_mut() {
        *f = rng.random_bool(0.3);
    }
    let packet = PacketFeatureVector {
        src_port: rng.random_range(0..3),
        dst_port: rng.random_range(0..3),
        protocol: PROTO_TCP,
        packet_length: rng.random_range(0.0..1.0),
        iat: 0.0,
        direction: Direction::Forward,
        flags: TcpFlags(flags),
    };
    Flow {
        id: format!("toy-{id}"),
        key: FlowKey {
            src_ip: IpAddr::V4(Ipv4Addr::new(10, 0, 0, 1)),
            dst_ip: IpAddr::V4(Ipv4Addr::new(10, 0, 0, 2)),
            src_port: packet.src_port,
            dst_port: packet.dst_port,
            protocol: PROTO_TCP,
        },
        packets: vec![packet],
        label: Label::Attack,
        attack_type: Some("toy".into()),
        fully_controlled: false,
    }
}

/// Smallest `s * step` such that the logit at `x + a e1 + b e2` is at or
/// below the margin for some grid point with `a + b = s * step`.
fn scan(model: &Model, flow: &Flow, step_size: f64) -> Option<f64> {
    let x0 = flow.packets[0].to_features();
    let logit = |a: f64, b: f64| {
        let mut x = x0;
        x[EDITABLE[0]] += a;
        x[EDITABLE[1]] += b;
        let mut state = LstmState::new(&model.params);
        step(&model.params, &mut state, &x).unwrap()
    };
    let levels = (GRID_REACH / step_size).round() as usize;
    for s in 0..=levels {
        for i in 0..=s {
            if logit(i as f64 * step_size, (s - i) as f64 * step_size) <= DELTA {
                return Some(s as f64 * step_size);
            }
        }
    }
    None
}

/// Grid-search minimal L1 distance to the margin. A coarse pass whose points
/// are all on the fine grid rules out unreachable flows cheaply.
pub fn grid_min_distance(model: &Model, flow: &Flow) -> Option<f64> {
    scan(model, flow, 20.0 * GRID_STEP)?;
    scan(model, flow, GRID_STEP)
}

/// Toy cases whose grid minimum is positive and within reach.
pub fn toy_cases(model: &Model, count: usize, seed: u64) -> Vec<(Flow, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut id = 0;
    while out.len() < count && id < 100 * count {
        let flow = toy_flow(&mut rng, id);
        id += 1;
        if let Some(d) = grid_min_distance(model, &flow) {
            if d > 0.0 {
                out.push((flow, d));
            }
        }
    }
    out
}
