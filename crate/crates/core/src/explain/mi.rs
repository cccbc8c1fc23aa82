use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::importance::{ImportanceEntry, ImportanceMethod, ImportanceTable};
use crate::classifier::{decide, Model};
use crate::error::{Error, Result};
use crate::flowdata::Dataset;

/// Fewer (feature, prediction) pairs than this are rejected.
pub const MIN_MI_PAIRS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiConfig {
    pub bins: usize,
}

impl Default for MiConfig {
    fn default() -> Self {
        MiConfig { bins: 16 }
    }
}

/// Plug-in mutual information in bits of a joint count table.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn mutual_information_from_counts(table: &[Vec<f64>]) -> Result<f64> {
    let total: f64 = table.iter().flatten().sum();
    if !(total > 0.0) || table.iter().flatten().any(|c| *c < 0.0 || !c.is_finite()) {
        return Err(Error::InvalidArgument("joint table must be non-negative with positive mass".into()));
    }
    let cols = table.first().map_or(0, Vec::len);
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArgument("joint table rows differ in length".into()));
    }
    let row: Vec<f64> = table.iter().map(|r| r.iter().sum::<f64>() / total).collect();
    let col: Vec<f64> = (0..cols)
        .map(|c| table.iter().map(|r| r[c]).sum::<f64>() / total)
        .collect();
    let mut mi = 0.0;
    for (a, r) in table.iter().enumerate() {
        for (b, &c) in r.iter().enumerate() {
            if c > 0.0 {
                let p = c / total;
                mi += p * (p / (row[a] * col[b])).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Distinct interior quantile cut points splitting `values` into at most
/// `bins` groups.
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..bins)
        .map(|k| sorted[(k * n / bins).min(n - 1)])
        .collect();
    edges.dedup();
    edges
}

fn bin_of(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|&e| e <= x)
}

/// Plug-in estimate of I(X; Y) in bits with `x` quantile-binned and `y`
/// binary.
pub fn mutual_information(x: &[f64], y: &[bool], bins: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < MIN_MI_PAIRS {
        return Err(Error::InvalidArgument(format!(
            "{} pairs is too few for a mutual information estimate (need {MIN_MI_PAIRS})",
            x.len()
        )));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument("at least 2 bins are needed".into()));
    }
    let edges = quantile_edges(x, bins);
    let mut table = vec![vec![0.0; 2]; edges.len() + 1];
    for (&v, &b) in x.iter().zip(y) {
        table[bin_of(&edges, v)][usize::from(b)] += 1.0;
    }
    mutual_information_from_counts(&table)
}

/// Mutual information between each feature's value at a step and the
/// binarized prediction at that step, pooled over all steps and flows.
pub fn sensitivity_mutual_information(
    model: &Model,
    dataset: &Dataset,
    config: &MiConfig,
) -> Result<ImportanceTable> {
    let per_flow: Vec<(Vec<[f64; crate::flowdata::NUM_FEATURES]>, Vec<bool>)> = dataset
        .flows
        .par_iter()
        .map(|f| {
            let c = model.confidences(&model.normalize(f)?, None)?;
            let rows = f.packets.iter().map(|p| p.to_features()).collect();
            Ok((rows, c.into_iter().map(decide).collect()))
        })
        .collect::<Result<_>>()?;
    let predictions: Vec<bool> = per_flow.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let entries = (0..model.num_features())
        .filter(|&j| model.schema.active_mask[j])
        .map(|j| {
            let x: Vec<f64> = per_flow.iter().flat_map(|(r, _)| r.iter().map(|v| v[j])).collect();
            Ok(ImportanceEntry {
                feature: model.schema.names[j].clone(),
                index: j,
                score: mutual_information(&x, &predictions, config.bins)?,
                std_error: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ImportanceTable {
        method: ImportanceMethod::MutualInformation,
        baseline_accuracy: None,
        entries,
    })
}
