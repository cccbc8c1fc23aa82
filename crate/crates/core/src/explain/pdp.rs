use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profile::{profile_of, FeatureProfile};
use super::ClassFilter;
use crate::classifier::{EncodedFlow, Model};
use crate::error::{Error, Result};
use crate::flowdata::{Dataset, Flow};
use crate::rnn::{confidence, step, LstmState};

pub const PDP_GRID_POINTS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpCurve {
    pub feature: String,
    pub feature_index: usize,
    pub condition: String,
    /// 0-based packet index for sequential curves.
    pub step: Option<usize>,
    /// Raw feature units, strictly increasing.
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub flows: usize,
    pub trajectory: Option<FeatureProfile>,
    pub adversarial_trajectory: Option<FeatureProfile>,
}

impl PdpCurve {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "condition", "step", "grid_value", "mean", "min", "max", "count"])?;
        let step = self.step.map(|s| s.to_string()).unwrap_or_default();
        for k in 0..self.grid.len() {
            w.write_record([
                self.feature.clone(),
                self.condition.clone(),
                step.clone(),
                self.grid[k].to_string(),
                self.mean[k].to_string(),
                self.min[k].to_string(),
                self.max[k].to_string(),
                self.flows.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Up to [`PDP_GRID_POINTS`] quantile-spaced distinct values of `observed`.
pub fn default_grid(observed: &[f64]) -> Vec<f64> {
    let mut sorted = observed.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return sorted;
    }
    let n = sorted.len();
    let mut grid: Vec<f64> = (0..PDP_GRID_POINTS)
        .map(|k| sorted[k * (n - 1) / (PDP_GRID_POINTS - 1)])
        .collect();
    grid.dedup();
    grid
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("PDP grid"));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("PDP grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn check_feature(model: &Model, feature: usize) -> Result<()> {
    if feature >= model.num_features() {
        return Err(Error::InvalidArgument(format!("no feature with index {feature}")));
    }
    Ok(())
}

/// Aggregates per-flow curves (one value per grid point) into a PDP.
fn aggregate(per_flow: &[Vec<f64>], points: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = per_flow.len() as f64;
    let mut mean = vec![0.0; points];
    let mut min = vec![f64::INFINITY; points];
    let mut max = vec![f64::NEG_INFINITY; points];
    for curve in per_flow {
        for k in 0..points {
            mean[k] += curve[k];
            min[k] = min[k].min(curve[k]);
            max[k] = max[k].max(curve[k]);
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    (mean, min, max)
}

/// Mean final-step prediction over class flows with a flow-constant feature
/// set to each grid value on every packet.
pub fn conditional_pdp(
    model: &Model,
    dataset: &Dataset,
    class: &ClassFilter,
    feature: usize,
    grid: Option<&[f64]>,
) -> Result<PdpCurve> {
    check_feature(model, feature)?;
    if !model.schema.is_flow_constant(feature) {
        return Err(Error::InvalidArgument(format!(
            "{} varies within a flow; use the sequential PDP",
            model.schema.names[feature]
        )));
    }
    let flows = class.select(dataset);
    if flows.is_empty() {
        return Err(Error::Empty("flows matching the class filter"));
    }
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => default_grid(&flows.iter().map(|f| f.packets[0].to_features()[feature]).collect::<Vec<_>>()),
    };
    check_grid(&grid)?;
    let per_flow: Vec<Vec<f64>> = flows
        .par_iter()
        .map(|f| {
            let mut enc = model.normalize(f)?;
            grid.iter()
                .map(|&w| {
                    let z = model.stats.normalize_value(feature, w);
                    for t in 0..enc.len() {
                        enc.x.set(t, feature, z);
                    }
                    Ok(*model.confidences(&enc, None)?.last().unwrap())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let (mean, min, max) = aggregate(&per_flow, grid.len());
    Ok(PdpCurve {
        feature: model.schema.names[feature].clone(),
        feature_index: feature,
        condition: class.name(),
        step: None,
        grid,
        mean,
        min,
        max,
        flows: flows.len(),
        trajectory: None,
        adversarial_trajectory: None,
    })
}

/// Mean step-`t` prediction over class flows longer than `t`, each run
/// unmodified up to `t - 1` and with the feature set to the grid value at
/// step `t` only.
pub fn sequential_pdp(
    model: &Model,
    dataset: &Dataset,
    class: &ClassFilter,
    feature: usize,
    t: usize,
    grid: Option<&[f64]>,
    adversarial: Option<&[Flow]>,
) -> Result<PdpCurve> {
    check_feature(model, feature)?;
    let flows: Vec<&Flow> = class.select(dataset).into_iter().filter(|f| f.len() > t).collect();
    if flows.is_empty() {
        return Err(Error::Empty("class flows long enough for the requested step"));
    }
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => default_grid(&flows.iter().map(|f| f.packets[t].to_features()[feature]).collect::<Vec<_>>()),
    };
    check_grid(&grid)?;
    let params = &model.params;
    let per_flow: Vec<Vec<f64>> = flows
        .par_iter()
        .map(|f| {
            let enc = model.normalize(f)?;
            let input = model.model_input(&enc, None)?;
            let mut state = LstmState::new(params);
            for s in 0..t {
                step(params, &mut state, input.row(s))?;
            }
            let mut last = EncodedFlow {
                x: enc.x.truncated(t + 1),
                directions: enc.directions[..t + 1].to_vec(),
            };
            grid.iter()
                .map(|&w| {
                    last.x.set(t, feature, model.stats.normalize_value(feature, w));
                    let row = model.model_input(&last, None)?;
                    let mut s = state.clone();
                    Ok(confidence(step(params, &mut s, row.row(t))?))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let (mean, min, max) = aggregate(&per_flow, grid.len());
    let name = model.schema.names[feature].clone();
    let adversarial_trajectory = adversarial.map(|adv| {
        let refs: Vec<&Flow> = adv.iter().filter(|f| class.matches(f)).collect();
        profile_of(&refs, feature, &name, format!("{} adversarial", class.name()))
    });
    Ok(PdpCurve {
        trajectory: Some(profile_of(&flows, feature, &name, class.name())),
        feature: name,
        feature_index: feature,
        condition: class.name(),
        step: Some(t),
        grid,
        mean,
        min,
        max,
        flows: flows.len(),
        adversarial_trajectory,
    })
}
