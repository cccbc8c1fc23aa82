use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClassFilter;
use crate::classifier::Model;
use crate::error::{Error, Result};
use crate::flowdata::{Dataset, Flow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfidencePoint {
    /// 0-based packet index.
    pub step: usize,
    pub mean: f64,
    /// Flows with more than `step` packets.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepConfidence {
    pub condition: String,
    pub points: Vec<StepConfidencePoint>,
}

impl StepConfidence {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["condition", "step", "mean", "count"])?;
        for p in &self.points {
            w.write_record([
                self.condition.clone(),
                p.step.to_string(),
                p.mean.to_string(),
                p.count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean attack confidence at every step over the flows long enough to
/// reach it.
pub fn confidence_per_step(model: &Model, dataset: &Dataset, class: &ClassFilter) -> Result<StepConfidence> {
    let flows = class.select(dataset);
    if flows.is_empty() {
        return Err(Error::Empty("flows matching the class filter"));
    }
    let per_flow: Vec<Vec<f64>> = flows
        .par_iter()
        .map(|f| model.confidences(&model.normalize(f)?, None))
        .collect::<Result<_>>()?;
    let longest = per_flow.iter().map(Vec::len).max().unwrap_or(0);
    let points = (0..longest)
        .map(|t| {
            let vals: Vec<f64> = per_flow.iter().filter_map(|c| c.get(t).copied()).collect();
            StepConfidencePoint {
                step: t,
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                count: vals.len(),
            }
        })
        .collect();
    Ok(StepConfidence {
        condition: class.name(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub step: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    pub feature: String,
    pub condition: String,
    pub points: Vec<ProfilePoint>,
}

impl FeatureProfile {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "condition", "step", "mean", "std", "count"])?;
        for p in &self.points {
            w.write_record([
                self.feature.clone(),
                self.condition.clone(),
                p.step.to_string(),
                p.mean.to_string(),
                p.std.to_string(),
                p.count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn profile_of(flows: &[&Flow], feature: usize, name: &str, condition: String) -> FeatureProfile {
    let longest = flows.iter().map(|f| f.len()).max().unwrap_or(0);
    let points = (0..longest)
        .map(|t| {
            let vals: Vec<f64> = flows
                .iter()
                .filter_map(|f| f.packets.get(t).map(|p| p.to_features()[feature]))
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            ProfilePoint {
                step: t,
                mean,
                std: var.sqrt(),
                count: vals.len(),
            }
        })
        .collect();
    FeatureProfile {
        feature: name.to_string(),
        condition,
        points,
    }
}

/// Per-step mean and standard deviation of one raw feature.
pub fn feature_sequence_profile(dataset: &Dataset, class: &ClassFilter, feature: usize) -> Result<FeatureProfile> {
    if feature >= dataset.schema.len() {
        return Err(Error::InvalidArgument(format!("no feature with index {feature}")));
    }
    let flows = class.select(dataset);
    if flows.is_empty() {
        return Err(Error::Empty("flows matching the class filter"));
    }
    Ok(profile_of(&flows, feature, &dataset.schema.names[feature], class.name()))
}
