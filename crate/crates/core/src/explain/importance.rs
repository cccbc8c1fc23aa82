use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{evaluate_masked, report_from_predictions, FlowPrediction, Model};
use crate::error::{Error, Result};
use crate::flowdata::{Dataset, PacketFeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    Weights,
    Perturbation,
    Dropout,
    MutualInformation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub index: usize,
    /// Accuracy drop for drop-based methods, bits for mutual information.
    pub score: f64,
    /// Binomial standard error of the perturbed accuracy, where sampled.
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub method: ImportanceMethod,
    pub baseline_accuracy: Option<f64>,
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceTable {
    pub fn score(&self, feature: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.index == feature).map(|e| e.score)
    }

    /// Entry with the largest score.
    pub fn top(&self) -> Option<&ImportanceEntry> {
        self.entries.iter().max_by(|a, b| a.score.total_cmp(&b.score))
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "index", "method", "score", "std_error"])?;
        let method = serde_json::to_value(self.method)?;
        for e in &self.entries {
            w.write_record([
                e.feature.clone(),
                e.index.to_string(),
                method.as_str().unwrap_or_default().to_string(),
                e.score.to_string(),
                e.std_error.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn active_features(model: &Model) -> Vec<usize> {
    (0..model.num_features())
        .filter(|&j| model.schema.active_mask[j])
        .collect()
}

fn entry(model: &Model, index: usize, score: f64, std_error: Option<f64>) -> ImportanceEntry {
    ImportanceEntry {
        feature: model.schema.names[index].clone(),
        index,
        score,
        std_error,
    }
}

/// Sum over all one-step paths from an input feature to the logit of the
/// product of absolute weights; the four gates of a cell are parallel paths
/// and recurrent weights are ignored.
pub fn importance_weights(model: &Model) -> ImportanceTable {
    let p = &model.params;
    let h = p.hidden();
    let entries = active_features(model)
        .into_iter()
        .map(|j| {
            let mut v: Vec<f64> = (0..h)
                .map(|u| (0..4).map(|g| p.values()[p.weight_index(0, g, u, j)].abs()).sum())
                .collect();
            for l in 1..p.layers() {
                v = (0..h)
                    .map(|u2| {
                        (0..4)
                            .map(|g| {
                                (0..h)
                                    .map(|u| p.values()[p.weight_index(l, g, u2, u)].abs() * v[u])
                                    .sum::<f64>()
                            })
                            .sum()
                    })
                    .collect();
            }
            let score = p.head_weights().iter().zip(&v).map(|(w, x)| w.abs() * x).sum();
            entry(model, j, score, None)
        })
        .collect();
    ImportanceTable {
        method: ImportanceMethod::Weights,
        baseline_accuracy: None,
        entries,
    }
}

fn flow_accuracy(model: &Model, dataset: &Dataset, mask: Option<&[bool]>) -> Result<f64> {
    Ok(evaluate_masked(model, dataset, mask)?.flow.accuracy)
}

/// Accuracy drop when one feature is resampled from its empirical marginal
/// over all packets; flow-constant features get one draw per flow.
pub fn importance_perturbation(model: &Model, dataset: &Dataset, seed: u64) -> Result<ImportanceTable> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let base = flow_accuracy(model, dataset, None)?;
    let rows: Vec<Vec<[f64; crate::flowdata::NUM_FEATURES]>> = dataset
        .flows
        .iter()
        .map(|f| f.packets.iter().map(PacketFeatureVector::to_features).collect())
        .collect();
    let n = dataset.len() as f64;
    let entries = active_features(model)
        .into_par_iter()
        .map(|j| {
            let pool: Vec<f64> = rows.iter().flatten().map(|r| r[j]).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let constant = model.schema.is_flow_constant(j);
            let predictions = dataset
                .flows
                .iter()
                .zip(&rows)
                .map(|(f, r)| {
                    let mut enc = model.normalize(f)?;
                    let mut draw = || model.stats.normalize_value(j, pool[rng.random_range(0..pool.len())]);
                    let shared = constant.then(&mut draw);
                    for t in 0..r.len() {
                        let v = shared.unwrap_or_else(&mut draw);
                        enc.x.set(t, j, v);
                    }
                    let confidences = model.confidences(&enc, None)?;
                    let attack = crate::classifier::decide(*confidences.last().unwrap());
                    Ok(FlowPrediction {
                        confidences,
                        attack,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let acc = report_from_predictions(dataset, &predictions).flow.accuracy;
            let se = (acc * (1.0 - acc) / n).sqrt();
            Ok(entry(model, j, base - acc, Some(se)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImportanceTable {
        method: ImportanceMethod::Perturbation,
        baseline_accuracy: Some(base),
        entries,
    })
}

fn require_dropout(model: &Model) -> Result<()> {
    if !model.feature_dropout {
        return Err(Error::UnsupportedModel(
            "dropout importance needs a model trained with feature dropout".into(),
        ));
    }
    Ok(())
}

fn mask_of(model: &Model, features: &[usize]) -> Vec<bool> {
    let mut m = vec![false; model.num_features()];
    for &j in features {
        m[j] = true;
    }
    m
}

/// Accuracy drop when a feature is marked missing on every packet.
pub fn importance_dropout(model: &Model, dataset: &Dataset) -> Result<ImportanceTable> {
    require_dropout(model)?;
    let base = flow_accuracy(model, dataset, None)?;
    let entries = active_features(model)
        .into_iter()
        .map(|j| {
            let acc = flow_accuracy(model, dataset, Some(&mask_of(model, &[j])))?;
            Ok(entry(model, j, base - acc, None))
        })
        .collect::<Result<_>>()?;
    Ok(ImportanceTable {
        method: ImportanceMethod::Dropout,
        baseline_accuracy: Some(base),
        entries,
    })
}

/// Denominators at or below this are treated as zero.
pub const SHARED_INFO_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedInfo {
    pub feature_i: String,
    pub feature_j: String,
    pub accuracy_base: f64,
    pub accuracy_without_i: f64,
    pub accuracy_without_j: f64,
    pub accuracy_without_both: f64,
    /// `None` when the single drops sum to at most the tolerance.
    pub score: Option<f64>,
}

/// Pair drop divided by the sum of the single drops.
pub fn shared_info_from_accuracies(base: f64, without_i: f64, without_j: f64, without_both: f64) -> Option<f64> {
    let den = (base - without_i) + (base - without_j);
    (den > SHARED_INFO_TOLERANCE).then(|| (base - without_both) / den)
}

pub fn shared_info_score(model: &Model, dataset: &Dataset, i: usize, j: usize) -> Result<SharedInfo> {
    require_dropout(model)?;
    let n = model.num_features();
    if i >= n || j >= n || i == j {
        return Err(Error::InvalidArgument(format!(
            "feature pair ({i}, {j}) must be two distinct indices below {n}"
        )));
    }
    let base = flow_accuracy(model, dataset, None)?;
    let a_i = flow_accuracy(model, dataset, Some(&mask_of(model, &[i])))?;
    let a_j = flow_accuracy(model, dataset, Some(&mask_of(model, &[j])))?;
    let a_ij = flow_accuracy(model, dataset, Some(&mask_of(model, &[i, j])))?;
    Ok(SharedInfo {
        feature_i: model.schema.names[i].clone(),
        feature_j: model.schema.names[j].clone(),
        accuracy_base: base,
        accuracy_without_i: a_i,
        accuracy_without_j: a_j,
        accuracy_without_both: a_ij,
        score: shared_info_from_accuracies(base, a_i, a_j, a_ij),
    })
}
