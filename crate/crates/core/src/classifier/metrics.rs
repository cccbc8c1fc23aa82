use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::Model;
use crate::error::{Error, Result};
use crate::flowdata::{Dataset, Flow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPrediction {
    /// Attack confidence after every packet.
    pub confidences: Vec<f64>,
    /// Final-step confidence above 0.5; a tie is benign.
    pub attack: bool,
}

pub fn decide(confidence: f64) -> bool {
    confidence > 0.5
}

/// Per-step confidences of `flow` (raw features), optionally with features
/// marked missing. Masks need a feature-dropout model.
pub fn predict_flow(model: &Model, flow: &Flow, mask: Option<&[bool]>) -> Result<FlowPrediction> {
    let confidences = model.confidences(&model.normalize(flow)?, mask)?;
    let attack = decide(*confidences.last().unwrap());
    Ok(FlowPrediction {
        confidences,
        attack,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn add(&mut self, actual: bool, predicted: bool) {
        match (actual, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Scores derived from a confusion matrix. A score whose denominator is zero
/// is reported as 0 and named in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub youden_j: f64,
    pub undefined: Vec<String>,
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Metrics {
        let mut undefined = Vec::new();
        let mut ratio = |name: &str, num: u64, den: u64| {
            if den == 0 {
                undefined.push(name.to_string());
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let accuracy = ratio("accuracy", c.tp + c.tn, c.total());
        let precision = ratio("precision", c.tp, c.tp + c.fp);
        let recall = ratio("recall", c.tp, c.tp + c.fn_);
        let specificity = ratio("specificity", c.tn, c.tn + c.fp);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            undefined.push("f1".into());
            0.0
        };
        Metrics {
            confusion: c,
            accuracy,
            precision,
            recall,
            specificity,
            f1,
            youden_j: recall + specificity - 1.0,
            undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub packet: Metrics,
    pub flow: Metrics,
}

pub const METRICS_CSV_HEADER: [&str; 12] = [
    "level",
    "tp",
    "fp",
    "tn",
    "fn",
    "accuracy",
    "precision",
    "recall",
    "specificity",
    "f1",
    "youden_j",
    "undefined",
];

impl MetricsReport {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(METRICS_CSV_HEADER)?;
        for (level, m) in [("packet", &self.packet), ("flow", &self.flow)] {
            let c = m.confusion;
            w.write_record([
                level.to_string(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.tn.to_string(),
                c.fn_.to_string(),
                m.accuracy.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.specificity.to_string(),
                m.f1.to_string(),
                m.youden_j.to_string(),
                m.undefined.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-packet metrics over every step decision, per-flow metrics over the
/// final-step decisions.
pub fn evaluate(model: &Model, dataset: &Dataset) -> Result<MetricsReport> {
    evaluate_masked(model, dataset, None)
}

pub fn evaluate_masked(
    model: &Model,
    dataset: &Dataset,
    mask: Option<&[bool]>,
) -> Result<MetricsReport> {
    if dataset.is_empty() {
        return Err(Error::Empty("evaluation dataset"));
    }
    let predictions: Vec<FlowPrediction> = dataset
        .flows
        .par_iter()
        .map(|f| predict_flow(model, f, mask))
        .collect::<Result<_>>()?;
    Ok(report_from_predictions(dataset, &predictions))
}

pub fn report_from_predictions(dataset: &Dataset, predictions: &[FlowPrediction]) -> MetricsReport {
    let mut packet = Confusion::default();
    let mut flow = Confusion::default();
    for (f, p) in dataset.flows.iter().zip(predictions) {
        let actual = f.label.is_attack();
        for &c in &p.confidences {
            packet.add(actual, decide(c));
        }
        flow.add(actual, p.attack);
    }
    MetricsReport {
        packet: Metrics::from_confusion(packet),
        flow: Metrics::from_confusion(flow),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowdata::{synth_generate, FeatureSchema, NormalizationStats, SynthConfig};
    use crate::rnn::ModelParams;
    use proptest::prelude::*;

    #[test]
    fn confusion_example() {
        let m = Metrics::from_confusion(Confusion {
            tp: 8,
            fn_: 2,
            tn: 9,
            fp: 1,
        });
        assert!((m.recall - 0.8).abs() < 1e-12);
        assert!((m.precision - 8.0 / 9.0).abs() < 1e-12);
        assert!((m.f1 - 0.842_105_263_157_894_7).abs() < 1e-12);
        assert!((m.youden_j - 0.7).abs() < 1e-12);
        assert!((m.accuracy - 0.85).abs() < 1e-12);
        assert!(m.undefined.is_empty());
    }

    #[test]
    fn all_benign_is_degenerate() {
        let m = Metrics::from_confusion(Confusion {
            tn: 5,
            ..Confusion::default()
        });
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.youden_j, 0.0);
        assert_eq!(m.undefined, ["precision", "recall", "f1"]);
    }

    fn zero_model() -> Model {
        Model {
            params: ModelParams::zeros(1, 3, 15).unwrap(),
            stats: NormalizationStats::identity(15),
            schema: FeatureSchema::canonical(),
            feature_dropout: false,
            history: Vec::new(),
        }
    }

    #[test]
    fn zero_model_is_undecided_and_benign() {
        let d = synth_generate(&SynthConfig { benign: 2, dos: 2, ..SynthConfig::empty() }, 3).unwrap();
        for f in &d.flows {
            let p = predict_flow(&zero_model(), f, None).unwrap();
            assert!(p.confidences.iter().all(|&c| c == 0.5));
            assert!(!p.attack);
        }
        let r = evaluate(&zero_model(), &d).unwrap();
        assert_eq!(r.flow.confusion.tp + r.flow.confusion.fp, 0);
        assert_eq!(r.packet.confusion.total(), d.packet_count() as u64);
        assert_eq!(r.flow.confusion.total(), d.len() as u64);
    }

    #[test]
    fn csv_export_has_two_rows() {
        let d = synth_generate(&SynthConfig { benign: 2, dos: 1, ..SynthConfig::empty() }, 3).unwrap();
        let r = evaluate(&zero_model(), &d).unwrap();
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("level,tp,fp,tn,fn,"));
    }

    proptest! {
        #[test]
        fn metrics_recomputable(tp in 0u64..50, fp in 0u64..50, tn in 0u64..50, fn_ in 0u64..50) {
            let c = Confusion { tp, fp, tn, fn_ };
            let m = Metrics::from_confusion(c);
            for v in [m.accuracy, m.precision, m.recall, m.specificity, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((m.youden_j - (m.recall + m.specificity - 1.0)).abs() < 1e-15);
            if tp + fn_ > 0 {
                prop_assert_eq!(m.recall, tp as f64 / (tp + fn_) as f64);
            }
            if tp + fp > 0 && tp + fn_ > 0 && tp > 0 {
                let expected = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
                prop_assert!((m.f1 - expected).abs() < 1e-12);
            }
        }
    }
}
