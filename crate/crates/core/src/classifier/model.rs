use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::EpochRecord;
use crate::error::{Error, Result};
use crate::flowdata::{Direction, FeatureSchema, Flow, FlowTensor, NormalizationStats};
use crate::rnn::{
    backprop, deserialize_model_prefix, forward, objective_seeds, serialize_model, ForwardTrace,
    ModelParams, Objective,
};

pub const MODEL_MAGIC: &[u8; 8] = b"SQIDSMDL";
pub const MODEL_VERSION: u32 = 1;

/// A trained classifier together with everything needed to encode raw flows.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub stats: NormalizationStats,
    pub schema: FeatureSchema,
    /// Input carries one missing-indicator per feature after the feature slots.
    pub feature_dropout: bool,
    pub history: Vec<EpochRecord>,
}

/// Normalized packet features of one flow plus the per-packet directions
/// needed to apply a directional reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFlow {
    pub x: FlowTensor,
    pub directions: Vec<Direction>,
}

impl EncodedFlow {
    pub fn len(&self) -> usize {
        self.x.steps()
    }

    pub fn is_empty(&self) -> bool {
        self.x.steps() == 0
    }
}

#[derive(Serialize, Deserialize)]
struct ModelSidecar {
    stats: NormalizationStats,
    schema: FeatureSchema,
    feature_dropout: bool,
    history: Vec<EpochRecord>,
}

impl Model {
    pub fn num_features(&self) -> usize {
        self.schema.len()
    }

    pub fn input_width(&self) -> usize {
        if self.feature_dropout {
            2 * self.num_features()
        } else {
            self.num_features()
        }
    }

    pub fn normalize(&self, flow: &Flow) -> Result<EncodedFlow> {
        if flow.is_empty() {
            return Err(Error::Empty("flow"));
        }
        Ok(EncodedFlow {
            x: self.stats.apply(flow)?,
            directions: flow.packets.iter().map(|p| p.direction).collect(),
        })
    }

    fn check_mask(&self, mask: Option<&[bool]>) -> Result<()> {
        match mask {
            Some(_) if !self.feature_dropout => Err(Error::UnsupportedModel(
                "feature masks need a feature-dropout model".into(),
            )),
            Some(m) if m.len() != self.num_features() => Err(Error::Dimension {
                expected: self.num_features(),
                got: m.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Model input for normalized features: entries the schema hides are
    /// zeroed, and for dropout models masked features are zeroed with their
    /// indicator set.
    pub fn model_input(&self, flow: &EncodedFlow, mask: Option<&[bool]>) -> Result<FlowTensor> {
        self.check_mask(mask)?;
        let n = self.num_features();
        if flow.x.width() != n || flow.directions.len() != flow.x.steps() {
            return Err(Error::Dimension {
                expected: n,
                got: flow.x.width(),
            });
        }
        let mut out = FlowTensor::zeros(flow.x.steps(), self.input_width());
        for t in 0..flow.x.steps() {
            let dir = flow.directions[t];
            let src = flow.x.row(t);
            let row = out.row_mut(t);
            for j in 0..n {
                let masked = mask.is_some_and(|m| m[j]);
                if masked {
                    row[n + j] = 1.0;
                } else if self.schema.is_active_at(j, dir) {
                    row[j] = src[j];
                }
            }
        }
        Ok(out)
    }

    pub fn trace(&self, flow: &EncodedFlow, mask: Option<&[bool]>) -> Result<ForwardTrace> {
        forward(&self.params, &self.model_input(flow, mask)?)
    }

    pub fn confidences(&self, flow: &EncodedFlow, mask: Option<&[bool]>) -> Result<Vec<f64>> {
        Ok(self.trace(flow, mask)?.confidences)
    }

    pub fn final_logit(&self, flow: &EncodedFlow) -> Result<f64> {
        Ok(self.trace(flow, None)?.final_logit())
    }

    /// Final logit and its gradient w.r.t. the normalized features. Hidden
    /// entries get a zero gradient.
    pub fn final_logit_grad(&self, flow: &EncodedFlow) -> Result<(f64, FlowTensor)> {
        self.objective_grad(flow, Objective::FinalLogit)
    }

    pub fn objective_grad(
        &self,
        flow: &EncodedFlow,
        objective: Objective<'_>,
    ) -> Result<(f64, FlowTensor)> {
        let trace = self.trace(flow, None)?;
        let seeds = objective_seeds(&trace, objective)?;
        let full = backprop(&self.params, &trace, &seeds, None)?;
        let n = self.num_features();
        let mut g = FlowTensor::zeros(flow.len(), n);
        for t in 0..flow.len() {
            g.row_mut(t).copy_from_slice(&full.row(t)[..n]);
        }
        Ok((trace.final_logit(), g))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let block = serialize_model(&self.params);
        let sidecar = serde_json::to_vec(&ModelSidecar {
            stats: self.stats.clone(),
            schema: self.schema.clone(),
            feature_dropout: self.feature_dropout,
            history: self.history.clone(),
        })?;
        let mut out = Vec::with_capacity(16 + block.len() + sidecar.len());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&block);
        out.extend_from_slice(&sidecar);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        if bytes.len() < 12 || &bytes[..8] != MODEL_MAGIC {
            return Err(Error::Format("not a model file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "model file version {version}, expected {MODEL_VERSION}"
            )));
        }
        let (params, used) = deserialize_model_prefix(&bytes[12..])?;
        let sidecar: ModelSidecar = serde_json::from_slice(&bytes[12 + used..])?;
        sidecar.schema.validate()?;
        let model = Model {
            params,
            stats: sidecar.stats,
            schema: sidecar.schema,
            feature_dropout: sidecar.feature_dropout,
            history: sidecar.history,
        };
        if model.params.input_width() != model.input_width()
            || model.stats.width() != model.num_features()
        {
            return Err(Error::Dimension {
                expected: model.input_width(),
                got: model.params.input_width(),
            });
        }
        Ok(model)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Model> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Model::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Model> {
        Model::from_bytes(&std::fs::read(path)?)
    }
}
