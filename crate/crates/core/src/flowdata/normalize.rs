use serde::{Deserialize, Serialize};

use super::{Dataset, Flow, PacketFeatureVector, NUM_FEATURES};
use crate::error::{Error, Result};

/// Row-major `steps x width` matrix holding one flow, one packet per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTensor {
    steps: usize,
    width: usize,
    data: Vec<f64>,
}

impl FlowTensor {
    pub fn zeros(steps: usize, width: usize) -> Self {
        FlowTensor {
            steps,
            width,
            data: vec![0.0; steps * width],
        }
    }

    pub fn from_vec(steps: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != steps * width {
            return Err(Error::Dimension {
                expected: steps * width,
                got: data.len(),
            });
        }
        Ok(FlowTensor { steps, width, data })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.data[t * self.width + j]
    }

    pub fn set(&mut self, t: usize, j: usize, v: f64) {
        self.data[t * self.width + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn truncated(&self, steps: usize) -> FlowTensor {
        let steps = steps.min(self.steps);
        FlowTensor {
            steps,
            width: self.width,
            data: self.data[..steps * self.width].to_vec(),
        }
    }

    pub fn raw(flow: &Flow) -> FlowTensor {
        let mut data = Vec::with_capacity(flow.len() * NUM_FEATURES);
        for p in &flow.packets {
            data.extend_from_slice(&p.to_features());
        }
        FlowTensor {
            steps: flow.len(),
            width: NUM_FEATURES,
            data,
        }
    }
}

/// Per-feature Z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Population mean and standard deviation of every feature over all packets
/// of `train`. A zero standard deviation is replaced by 1.
pub fn fit_normalizer(train: &Dataset) -> Result<NormalizationStats> {
    let n = train.packet_count();
    if n == 0 {
        return Err(Error::Empty("training dataset"));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "normalizer needs at least 2 packets".into(),
        ));
    }
    let rows = || {
        train
            .flows
            .iter()
            .flat_map(|f| f.packets.iter().map(PacketFeatureVector::to_features))
    };
    let mut mean = vec![0.0; NUM_FEATURES];
    for r in rows() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; NUM_FEATURES];
    for r in rows() {
        for j in 0..NUM_FEATURES {
            let d = r[j] - mean[j];
            var[j] += d * d;
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / n as f64).sqrt();
            if s > 0.0 && s.is_finite() {
                s
            } else {
                1.0
            }
        })
        .collect();
    Ok(NormalizationStats { mean, std })
}

impl NormalizationStats {
    pub fn identity(width: usize) -> Self {
        NormalizationStats {
            mean: vec![0.0; width],
            std: vec![1.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize_value(&self, feature: usize, x: f64) -> f64 {
        (x - self.mean[feature]) / self.std[feature]
    }

    pub fn denormalize_value(&self, feature: usize, z: f64) -> f64 {
        z * self.std[feature] + self.mean[feature]
    }

    pub fn apply(&self, flow: &Flow) -> Result<FlowTensor> {
        self.apply_tensor(&FlowTensor::raw(flow))
    }

    pub fn apply_tensor(&self, raw: &FlowTensor) -> Result<FlowTensor> {
        self.check_width(raw.width())?;
        let mut out = raw.clone();
        for t in 0..out.steps() {
            for (j, v) in out.row_mut(t).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        Ok(out)
    }

    pub fn invert_tensor(&self, normalized: &FlowTensor) -> Result<FlowTensor> {
        self.check_width(normalized.width())?;
        let mut out = normalized.clone();
        for t in 0..out.steps() {
            for (j, v) in out.row_mut(t).iter_mut().enumerate() {
                *v = *v * self.std[j] + self.mean[j];
            }
        }
        Ok(out)
    }

    /// Rebuilds packets from a normalized tensor, keeping `template`'s key,
    /// label and metadata.
    pub fn invert(&self, template: &Flow, normalized: &FlowTensor) -> Result<Flow> {
        if normalized.steps() != template.len() {
            return Err(Error::Dimension {
                expected: template.len(),
                got: normalized.steps(),
            });
        }
        let raw = self.invert_tensor(normalized)?;
        let packets = (0..raw.steps())
            .map(|t| PacketFeatureVector::from_features(raw.row(t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Flow {
            packets,
            ..template.clone()
        })
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.width() {
            return Err(Error::Dimension {
                expected: self.width(),
                got: width,
            });
        }
        Ok(())
    }
}
