mod common;

use proptest::prelude::*;

use seqids::explain::{
    confidence_per_step, conditional_pdp, feature_sequence_profile, importance_dropout, importance_perturbation,
    importance_weights, mutual_information, sensitivity_mutual_information, sequential_pdp, ClassFilter, MiConfig,
};
use seqids::flowdata::schema::{DST_PORT, PACKET_LENGTH};
use seqids::flowdata::{Dataset, NUM_FEATURES};

#[test]
fn conditional_pdp_brackets_and_rejects_varying_features() {
    let bed = common::bed();
    let curve = conditional_pdp(&bed.model, &bed.test, &ClassFilter::Attack, DST_PORT, None).unwrap();
    assert_eq!(curve.flows, bed.test.attack_flows().count());
    assert!(curve.grid.windows(2).all(|w| w[0] < w[1]));
    for k in 0..curve.grid.len() {
        assert!(curve.min[k] <= curve.mean[k] + 1e-12 && curve.mean[k] <= curve.max[k] + 1e-12);
        assert!((0.0..=1.0).contains(&curve.mean[k]));
    }
    assert!(conditional_pdp(&bed.model, &bed.test, &ClassFilter::Attack, PACKET_LENGTH, None).is_err());
    let none = ClassFilter::Category("no-such-type".into());
    assert!(conditional_pdp(&bed.model, &bed.test, &none, DST_PORT, None).is_err());
}

#[test]
fn sequential_pdp_at_observed_value_reproduces_the_model() {
    let bed = common::bed();
    let flow = bed.test.flows.iter().find(|f| f.len() >= 3).unwrap().clone();
    let conf = bed.model.confidences(&bed.model.normalize(&flow).unwrap(), None).unwrap();
    let single = Dataset::new(vec![flow.clone()]);
    for (t, packet) in flow.packets.iter().take(3).enumerate() {
        let v = packet.to_features()[PACKET_LENGTH];
        let curve = sequential_pdp(&bed.model, &single, &ClassFilter::All, PACKET_LENGTH, t, Some(&[v]), None).unwrap();
        assert!((curve.mean[0] - conf[t]).abs() < 1e-12, "t={t}");
        assert_eq!(curve.step, Some(t));
    }
}

#[test]
fn profiles_count_flows_per_step() {
    let bed = common::bed();
    let conf = confidence_per_step(&bed.model, &bed.test, &ClassFilter::Benign).unwrap();
    let benign = ClassFilter::Benign.select(&bed.test).len();
    assert_eq!(conf.points[0].count, benign);
    assert!(conf.points.windows(2).all(|w| w[1].count <= w[0].count));

    let profile = feature_sequence_profile(&bed.test, &ClassFilter::All, PACKET_LENGTH).unwrap();
    let first: Vec<f64> = bed.test.flows.iter().map(|f| f.packets[0].packet_length).collect();
    let mean = first.iter().sum::<f64>() / first.len() as f64;
    assert!((profile.points[0].mean - mean).abs() < 1e-9);
    assert!(profile.points.iter().all(|p| p.std >= 0.0));
}

#[test]
fn importance_tables_cover_the_features() {
    let bed = common::bed();
    let weights = importance_weights(&bed.model);
    assert_eq!(weights.entries.len(), NUM_FEATURES);
    assert!(weights.entries.iter().all(|e| e.score >= 0.0));

    let a = importance_perturbation(&bed.model, &bed.test, 11).unwrap();
    let b = importance_perturbation(&bed.model, &bed.test, 11).unwrap();
    assert_eq!(a, b);
    assert!(a.entries.iter().all(|e| e.std_error.is_some()));

    let drop = importance_dropout(&bed.model, &bed.test);
    assert!(drop.is_err(), "dropout importance needs a model trained with feature dropout");

    let mi = sensitivity_mutual_information(&bed.model, &bed.test, &MiConfig::default()).unwrap();
    assert!(mi.entries.iter().all(|e| (0.0..=1.0 + 1e-12).contains(&e.score)));
}

proptest! {
    #[test]
    fn mutual_information_is_bounded_and_rank_invariant(
        pairs in proptest::collection::vec((-100.0f64..100.0, any::<bool>()), 100..300),
        bins in 2usize..20,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let mi = mutual_information(&x, &y, bins).unwrap();
        let p = y.iter().filter(|&&b| b).count() as f64 / y.len() as f64;
        let h = if p == 0.0 || p == 1.0 { 0.0 } else { -(p * p.log2() + (1.0 - p) * (1.0 - p).log2()) };
        prop_assert!(mi >= 0.0 && mi <= h + 1e-9);
        let scaled: Vec<f64> = x.iter().map(|v| v * 4.0).collect();
        prop_assert_eq!(mutual_information(&scaled, &y, bins).unwrap(), mi);
        // A perfect predictor is resolved once some quantile cut lands on 1.
        let zeros = y.iter().filter(|&&b| !b).count();
        if (bins - 1) * y.len() / bins >= zeros {
            let perfect: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
            prop_assert!((mutual_information(&perfect, &y, bins).unwrap() - h).abs() < 1e-9);
        }
    }
}
