mod common;

use seqids::classifier::{evaluate, predict_flow, train, Model};
use seqids::flowdata::{
    assemble_flows, fit_normalizer, parse_packet_csv, read_dataset, split_dataset, synth_generate, write_dataset,
    Dataset, Direction, SplitTag, NUM_FEATURES,
};
use seqids::Error;

const PACKETS: &str = "\
timestamp,src_ip,dst_ip,src_port,dst_port,protocol,packet_length,fin,syn,rst,psh,ack,urg,ece,cwr,ns,label,attack_type
0.00,10.0.0.1,10.0.0.2,40000,80,6,60,0,1,0,0,0,0,0,0,0,0,
0.30,10.0.0.9,10.0.0.2,41000,22,6,60,0,1,0,0,0,0,0,0,0,1,scan
0.10,10.0.0.2,10.0.0.1,80,40000,6,60,0,1,0,0,1,0,0,0,0,0,
0.25,10.0.0.1,10.0.0.2,40000,80,6,400,0,0,0,1,1,0,0,0,0,0,
";

#[test]
fn csv_to_cache_and_back() {
    let records = parse_packet_csv(PACKETS.as_bytes()).unwrap();
    let flows = assemble_flows(&records).unwrap();
    assert_eq!(flows.len(), 2);
    let web = &flows[0];
    assert_eq!(web.len(), 3);
    assert_eq!(web.key.dst_port, 80);
    let dirs: Vec<Direction> = web.packets.iter().map(|p| p.direction).collect();
    assert_eq!(dirs, [Direction::Forward, Direction::Reverse, Direction::Forward]);
    let iats: Vec<f64> = web.packets.iter().map(|p| p.iat).collect();
    assert_eq!(iats[0], 0.0);
    assert!((iats[1] - 0.10).abs() < 1e-12 && (iats[2] - 0.15).abs() < 1e-12);
    assert_eq!(flows[1].category(), "scan");

    let ds = Dataset::new(flows);
    let stats = fit_normalizer(&ds).unwrap();
    let mut buf = Vec::new();
    write_dataset(&mut buf, &ds, Some(&stats)).unwrap();
    let (back, back_stats) = read_dataset(buf.as_slice()).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back_stats, Some(stats));
}

#[test]
fn cache_rejects_foreign_json() {
    assert!(matches!(read_dataset(&b"{\"format\":\"x\"}"[..]), Err(Error::Json(_)) | Err(Error::Format(_))));
}

#[test]
fn split_is_deterministic_and_disjoint() {
    let ds = synth_generate(&common::small_config(), 1).unwrap();
    let (a_train, a_test) = split_dataset(&ds, 4).unwrap();
    let (b_train, b_test) = split_dataset(&ds, 4).unwrap();
    assert_eq!((&a_train, &a_test), (&b_train, &b_test));
    assert_eq!(a_train.split, SplitTag::Train);
    assert_eq!(a_test.split, SplitTag::Test);
    assert_eq!(a_train.len() + a_test.len(), ds.len());
    let train_ids: std::collections::HashSet<&str> = a_train.flows.iter().map(|f| f.id.as_str()).collect();
    assert!(a_test.flows.iter().all(|f| !train_ids.contains(f.id.as_str())));
    for c in ds.categories() {
        assert!(a_test.flows.iter().any(|f| f.category() == c), "{c} missing from test");
    }
}

#[test]
fn normalized_training_packets_are_centred() {
    let ds = synth_generate(&common::small_config(), 2).unwrap();
    let stats = fit_normalizer(&ds).unwrap();
    let mut sum = [0.0; NUM_FEATURES];
    let mut n = 0.0;
    for f in &ds.flows {
        let x = stats.apply(f).unwrap();
        for t in 0..x.steps() {
            for (s, v) in sum.iter_mut().zip(x.row(t)) {
                *s += v;
            }
            n += 1.0;
        }
    }
    assert!(sum.iter().all(|s| (s / n).abs() < 1e-9), "{sum:?}");
}

#[test]
fn trained_model_round_trips_through_bytes() {
    let bed = common::bed();
    let report = evaluate(&bed.model, &bed.test).unwrap();
    assert!(report.flow.accuracy >= 0.9, "{}", report.flow.accuracy);

    let bytes = bed.model.to_bytes().unwrap();
    let back = Model::from_bytes(&bytes).unwrap();
    assert_eq!(back, bed.model);
    for f in bed.test.flows.iter().take(20) {
        assert_eq!(predict_flow(&back, f, None).unwrap(), predict_flow(&bed.model, f, None).unwrap());
    }
    assert!(Model::from_bytes(&bytes[..bytes.len() / 2]).is_err());
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(Model::from_bytes(&bad).is_err());
}

#[test]
fn training_is_seed_deterministic() {
    let bed = common::bed();
    let again = train(&bed.train, &common::quick_train()).unwrap();
    assert_eq!(again.to_bytes().unwrap(), bed.model.to_bytes().unwrap());
    let other = train(
        &bed.train,
        &seqids::classifier::TrainConfig {
            seed: 6,
            ..common::quick_train()
        },
    )
    .unwrap();
    assert_ne!(other.params, bed.model.params);
}
