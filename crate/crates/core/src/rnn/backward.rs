use serde::{Deserialize, Serialize};

use super::forward::ForwardTrace;
use super::loss::loss_logit_grads;
use super::params::{ModelParams, GATE_CELL, GATE_FORGET, GATE_INPUT, GATE_OUTPUT};
use crate::error::{Error, Result};
use crate::flowdata::FlowTensor;

/// Scalar that a gradient is taken of.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// Mean per-step cross-entropy against these per-step labels.
    Loss(&'a [f64]),
    /// Logit of the last step.
    FinalLogit,
    /// Logit of step `t` (0-based).
    StepLogit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveTag {
    Loss,
    Logit,
}

impl Objective<'_> {
    pub fn tag(&self) -> ObjectiveTag {
        match self {
            Objective::Loss(_) => ObjectiveTag::Loss,
            _ => ObjectiveTag::Logit,
        }
    }
}

/// Gradient w.r.t. all parameters, laid out like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub objective: ObjectiveTag,
    pub values: Vec<f64>,
}

/// Gradient w.r.t. every input entry (all steps, all features).
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradients {
    pub objective: ObjectiveTag,
    pub values: FlowTensor,
}

/// d objective / d z_t for every step.
pub fn objective_seeds(trace: &ForwardTrace, objective: Objective<'_>) -> Result<Vec<f64>> {
    let n = trace.len();
    match objective {
        Objective::Loss(labels) => loss_logit_grads(trace, labels),
        Objective::FinalLogit => {
            let mut s = vec![0.0; n];
            s[n - 1] = 1.0;
            Ok(s)
        }
        Objective::StepLogit(t) if t < n => {
            let mut s = vec![0.0; n];
            s[t] = 1.0;
            Ok(s)
        }
        Objective::StepLogit(t) => Err(Error::InvalidArgument(format!(
            "objective step {t} outside a trace of {n} steps"
        ))),
    }
}

/// Reverse-mode pass through time given `dz_t` seeds. Adds parameter
/// gradients into `param_grads` when given; always returns input gradients.
pub fn backprop(
    params: &ModelParams,
    trace: &ForwardTrace,
    seeds: &[f64],
    mut param_grads: Option<&mut [f64]>,
) -> Result<FlowTensor> {
    let steps = trace.len();
    if seeds.len() != steps {
        return Err(Error::Dimension {
            expected: steps,
            got: seeds.len(),
        });
    }
    if let Some(g) = param_grads.as_deref() {
        if g.len() != params.len() {
            return Err(Error::Dimension {
                expected: params.len(),
                got: g.len(),
            });
        }
    }
    let hd = params.hidden();
    let layers = params.layers();
    let head_w = params.head_weights();
    let head_range = params.head_weights_range();
    let head_b = params.head_bias_index();

    let mut dh_next = vec![vec![0.0; hd]; layers];
    let mut dc_next = vec![vec![0.0; hd]; layers];
    let mut d_inputs = FlowTensor::zeros(steps, trace.inputs.width());
    let mut dh_above = vec![0.0; hd];
    let mut dh = vec![0.0; hd];
    let mut da = vec![0.0; 4 * hd];
    let zeros = vec![0.0; hd];

    for t in (0..steps).rev() {
        let dz = seeds[t];
        for (d, w) in dh_above.iter_mut().zip(head_w) {
            *d = dz * w;
        }
        if let Some(g) = param_grads.as_deref_mut() {
            if dz != 0.0 {
                let h_top = trace.top_hidden(t, hd);
                for (gv, h) in g[head_range.clone()].iter_mut().zip(h_top) {
                    *gv += dz * h;
                }
                g[head_b] += dz;
            }
        }

        for l in (0..layers).rev() {
            let gates = &trace.gates[l][t * 4 * hd..(t + 1) * 4 * hd];
            let c = &trace.cells[l][t * hd..(t + 1) * hd];
            let c_prev = if t == 0 {
                &zeros[..]
            } else {
                &trace.cells[l][(t - 1) * hd..t * hd]
            };
            for u in 0..hd {
                dh[u] = dh_above[u] + dh_next[l][u];
                let i = gates[GATE_INPUT * hd + u];
                let f = gates[GATE_FORGET * hd + u];
                let g = gates[GATE_CELL * hd + u];
                let o = gates[GATE_OUTPUT * hd + u];
                let tc = c[u].tanh();
                let dc = dc_next[l][u] + dh[u] * o * (1.0 - tc * tc);
                da[GATE_INPUT * hd + u] = dc * g * i * (1.0 - i);
                da[GATE_FORGET * hd + u] = dc * c_prev[u] * f * (1.0 - f);
                da[GATE_CELL * hd + u] = dc * i * (1.0 - g * g);
                da[GATE_OUTPUT * hd + u] = dh[u] * tc * o * (1.0 - o);
                dc_next[l][u] = dc * f;
            }

            let x: &[f64] = if l == 0 {
                trace.inputs.row(t)
            } else {
                &trace.hidden[l - 1][t * hd..(t + 1) * hd]
            };
            let h_prev = if t == 0 {
                &zeros[..]
            } else {
                &trace.hidden[l][(t - 1) * hd..t * hd]
            };
            let n_in = x.len();
            let cols = n_in + hd;
            let w = params.weights(l);

            if let Some(g) = param_grads.as_deref_mut() {
                let wr = params.weights_range(l);
                let gw = &mut g[wr];
                for (r, &dar) in da.iter().enumerate() {
                    if dar == 0.0 {
                        continue;
                    }
                    let row = &mut gw[r * cols..(r + 1) * cols];
                    for (gv, xv) in row[..n_in].iter_mut().zip(x) {
                        *gv += dar * xv;
                    }
                    for (gv, hv) in row[n_in..].iter_mut().zip(h_prev) {
                        *gv += dar * hv;
                    }
                }
                let br = params.bias_range(l);
                for (gv, dar) in g[br].iter_mut().zip(&da) {
                    *gv += dar;
                }
            }

            let dx: &mut [f64] = if l == 0 {
                d_inputs.row_mut(t)
            } else {
                dh_above.fill(0.0);
                &mut dh_above[..]
            };
            let dhp = &mut dh_next[l];
            dhp.fill(0.0);
            for (r, &dar) in da.iter().enumerate() {
                if dar == 0.0 {
                    continue;
                }
                let row = &w[r * cols..(r + 1) * cols];
                for (d, wv) in dx.iter_mut().zip(&row[..n_in]) {
                    *d += wv * dar;
                }
                for (d, wv) in dhp.iter_mut().zip(&row[n_in..]) {
                    *d += wv * dar;
                }
            }
        }
    }
    Ok(d_inputs)
}

/// Exact gradient of the mean per-step loss w.r.t. every parameter.
pub fn backward_params(
    params: &ModelParams,
    trace: &ForwardTrace,
    labels: &[f64],
) -> Result<ParamGradients> {
    let seeds = objective_seeds(trace, Objective::Loss(labels))?;
    let mut values = vec![0.0; params.len()];
    backprop(params, trace, &seeds, Some(&mut values))?;
    Ok(ParamGradients {
        objective: ObjectiveTag::Loss,
        values,
    })
}

/// Exact gradient of `objective` w.r.t. every input entry.
pub fn backward_inputs(
    params: &ModelParams,
    trace: &ForwardTrace,
    objective: Objective<'_>,
) -> Result<InputGradients> {
    let seeds = objective_seeds(trace, objective)?;
    let values = backprop(params, trace, &seeds, None)?;
    Ok(InputGradients {
        objective: objective.tag(),
        values,
    })
}
