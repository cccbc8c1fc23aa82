use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate blocks inside a layer's stacked weight matrix, in storage order.
pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_CELL: usize = 2;
pub const GATE_OUTPUT: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: u32,
    pub feature_dropout: bool,
    pub adversarially_trained: bool,
}

/// Stacked LSTM with a scalar logit head, all parameters in one flat buffer.
///
/// Layer `l` stores `W_l` (`4H x (in_l + H)`, row-major, rows grouped by gate
/// in the order input, forget, cell, output; columns are the layer input
/// followed by the previous hidden state) and then `b_l` (`4H`). The head
/// weights (`H`) and head bias follow the last layer. `in_0` is the model
/// input width, `in_l = H` above.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layers: usize,
    hidden: usize,
    input: usize,
    pub meta: TrainingMeta,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn count_for(layers: usize, hidden: usize, input: usize) -> usize {
        (0..layers)
            .map(|l| {
                let in_l = if l == 0 { input } else { hidden };
                4 * hidden * (in_l + hidden + 1)
            })
            .sum::<usize>()
            + hidden
            + 1
    }

    pub fn zeros(layers: usize, hidden: usize, input: usize) -> Result<Self> {
        if layers == 0 || hidden == 0 || input == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be >= 1 (layers {layers}, hidden {hidden}, input {input})"
            )));
        }
        Ok(ModelParams {
            layers,
            hidden,
            input,
            meta: TrainingMeta::default(),
            values: vec![0.0; Self::count_for(layers, hidden, input)],
        })
    }

    pub fn from_values(
        layers: usize,
        hidden: usize,
        input: usize,
        meta: TrainingMeta,
        values: Vec<f64>,
    ) -> Result<Self> {
        let mut p = Self::zeros(layers, hidden, input)?;
        if values.len() != p.values.len() {
            return Err(Error::Dimension {
                expected: p.values.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        p.values = values;
        p.meta = meta;
        Ok(p)
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_width(&self) -> usize {
        self.input
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.input
        } else {
            self.hidden
        }
    }

    /// Column count of layer `l`'s weight matrix.
    pub fn layer_cols(&self, l: usize) -> usize {
        self.layer_input(l) + self.hidden
    }

    pub fn layer_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|k| 4 * self.hidden * (self.layer_cols(k) + 1))
            .sum()
    }

    pub fn weights_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.layer_offset(l);
        start..start + 4 * self.hidden * self.layer_cols(l)
    }

    pub fn bias_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.weights_range(l).end;
        start..start + 4 * self.hidden
    }

    pub fn head_weights_range(&self) -> std::ops::Range<usize> {
        let start = self.layer_offset(self.layers);
        start..start + self.hidden
    }

    pub fn head_bias_index(&self) -> usize {
        self.values.len() - 1
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        &self.values[self.weights_range(l)]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.values[self.bias_range(l)]
    }

    pub fn head_weights(&self) -> &[f64] {
        &self.values[self.head_weights_range()]
    }

    pub fn head_bias(&self) -> f64 {
        self.values[self.head_bias_index()]
    }

    /// Flat index of `W_l[gate * H + unit, col]`.
    pub fn weight_index(&self, l: usize, gate: usize, unit: usize, col: usize) -> usize {
        self.weights_range(l).start + (gate * self.hidden + unit) * self.layer_cols(l) + col
    }
}

/// Uniform initialization in `±1/sqrt(H)` with forget-gate biases set to +1.
pub fn init_params(layers: usize, hidden: usize, input: usize, seed: u64) -> Result<ModelParams> {
    let mut p = ModelParams::zeros(layers, hidden, input)?;
    let bound = 1.0 / (hidden as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in p.values.iter_mut() {
        *v = rng.random_range(-bound..=bound);
    }
    for l in 0..layers {
        let r = p.bias_range(l);
        let forget = r.start + GATE_FORGET * hidden..r.start + (GATE_FORGET + 1) * hidden;
        for v in &mut p.values[forget] {
            *v = 1.0;
        }
    }
    p.meta.seed = seed;
    Ok(p)
}
