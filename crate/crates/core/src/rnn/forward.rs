use super::params::{ModelParams, GATE_CELL, GATE_FORGET, GATE_INPUT, GATE_OUTPUT};
use crate::error::{Error, Result};
use crate::flowdata::FlowTensor;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probabilities are kept inside `[PROB_EPS, 1 - PROB_EPS]`.
pub const PROB_EPS: f64 = 1e-7;

/// Attack probability of a logit, clamped away from 0 and 1.
pub fn confidence(z: f64) -> f64 {
    sigmoid(z).clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Recurrent state of every layer between two time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn new(params: &ModelParams) -> Self {
        LstmState {
            h: vec![vec![0.0; params.hidden()]; params.layers()],
            c: vec![vec![0.0; params.hidden()]; params.layers()],
        }
    }
}

/// Everything the backward pass needs from one forward run.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub inputs: FlowTensor,
    /// `[layer][t * 4H ..]`: post-activation gates i, f, g, o.
    pub gates: Vec<Vec<f64>>,
    /// `[layer][t * H ..]`
    pub cells: Vec<Vec<f64>>,
    /// `[layer][t * H ..]`
    pub hidden: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub confidences: Vec<f64>,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn final_logit(&self) -> f64 {
        *self.logits.last().expect("non-empty trace")
    }

    pub fn final_confidence(&self) -> f64 {
        *self.confidences.last().expect("non-empty trace")
    }

    /// Top-layer hidden state after step `t`.
    pub fn top_hidden(&self, t: usize, h: usize) -> &[f64] {
        &self.hidden[self.hidden.len() - 1][t * h..(t + 1) * h]
    }
}

/// One LSTM cell update. Writes gates, new cell and new hidden state.
#[inline]
#[allow(clippy::too_many_arguments)]
fn cell_step(
    w: &[f64],
    b: &[f64],
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    gates: &mut [f64],
    c_out: &mut [f64],
    h_out: &mut [f64],
) {
    let hidden = h_prev.len();
    let n_in = x.len();
    let cols = n_in + hidden;
    for (r, gate) in gates.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = b[r];
        for (wv, xv) in row[..n_in].iter().zip(x) {
            acc += wv * xv;
        }
        for (wv, hv) in row[n_in..].iter().zip(h_prev) {
            acc += wv * hv;
        }
        *gate = acc;
    }
    for u in 0..hidden {
        let i = sigmoid(gates[GATE_INPUT * hidden + u]);
        let f = sigmoid(gates[GATE_FORGET * hidden + u]);
        let g = gates[GATE_CELL * hidden + u].tanh();
        let o = sigmoid(gates[GATE_OUTPUT * hidden + u]);
        gates[GATE_INPUT * hidden + u] = i;
        gates[GATE_FORGET * hidden + u] = f;
        gates[GATE_CELL * hidden + u] = g;
        gates[GATE_OUTPUT * hidden + u] = o;
        let c = f * c_prev[u] + i * g;
        c_out[u] = c;
        h_out[u] = o * c.tanh();
    }
}

fn head(params: &ModelParams, h_top: &[f64]) -> f64 {
    let mut z = params.head_bias();
    for (w, h) in params.head_weights().iter().zip(h_top) {
        z += w * h;
    }
    z
}

fn check_input(params: &ModelParams, inputs: &FlowTensor) -> Result<()> {
    if inputs.width() != params.input_width() {
        return Err(Error::Dimension {
            expected: params.input_width(),
            got: inputs.width(),
        });
    }
    if inputs.steps() == 0 {
        return Err(Error::Empty("flow"));
    }
    if inputs.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("model input"));
    }
    Ok(())
}

/// Advances `state` by one input row and returns the logit at that step.
pub fn step(params: &ModelParams, state: &mut LstmState, x: &[f64]) -> Result<f64> {
    if x.len() != params.input_width() {
        return Err(Error::Dimension {
            expected: params.input_width(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("model input"));
    }
    let hdim = params.hidden();
    let mut gates = vec![0.0; 4 * hdim];
    let mut below = x.to_vec();
    for l in 0..params.layers() {
        let mut c = vec![0.0; hdim];
        let mut h = vec![0.0; hdim];
        cell_step(
            params.weights(l),
            params.bias(l),
            &below,
            &state.h[l],
            &state.c[l],
            &mut gates,
            &mut c,
            &mut h,
        );
        state.c[l] = c;
        state.h[l] = h.clone();
        below = h;
    }
    Ok(head(params, &below))
}

/// Runs the stacked LSTM over all steps, recording every intermediate.
pub fn forward(params: &ModelParams, inputs: &FlowTensor) -> Result<ForwardTrace> {
    check_input(params, inputs)?;
    let steps = inputs.steps();
    let hdim = params.hidden();
    let layers = params.layers();
    let mut gates = vec![vec![0.0; steps * 4 * hdim]; layers];
    let mut cells = vec![vec![0.0; steps * hdim]; layers];
    let mut hidden = vec![vec![0.0; steps * hdim]; layers];
    let zeros = vec![0.0; hdim];
    let mut logits = Vec::with_capacity(steps);

    for t in 0..steps {
        for l in 0..layers {
            let (lower, upper) = hidden.split_at_mut(l);
            let (h_done, h_cur) = upper[0].split_at_mut(t * hdim);
            let (c_done, c_cur) = cells[l].split_at_mut(t * hdim);
            let (h_prev, c_prev) = if t == 0 {
                (&zeros[..], &zeros[..])
            } else {
                (&h_done[(t - 1) * hdim..], &c_done[(t - 1) * hdim..])
            };
            let x: &[f64] = if l == 0 {
                inputs.row(t)
            } else {
                &lower[l - 1][t * hdim..(t + 1) * hdim]
            };
            cell_step(
                params.weights(l),
                params.bias(l),
                x,
                h_prev,
                c_prev,
                &mut gates[l][t * 4 * hdim..(t + 1) * 4 * hdim],
                &mut c_cur[..hdim],
                &mut h_cur[..hdim],
            );
        }
        logits.push(head(params, &hidden[layers - 1][t * hdim..(t + 1) * hdim]));
    }
    let confidences = logits.iter().map(|&z| confidence(z)).collect();
    Ok(ForwardTrace {
        inputs: inputs.clone(),
        gates,
        cells,
        hidden,
        logits,
        confidences,
    })
}

/// Logits only; cheaper than [`forward`] when no trace is needed.
pub fn logits(params: &ModelParams, inputs: &FlowTensor) -> Result<Vec<f64>> {
    check_input(params, inputs)?;
    let mut state = LstmState::new(params);
    (0..inputs.steps())
        .map(|t| step(params, &mut state, inputs.row(t)))
        .collect()
}
