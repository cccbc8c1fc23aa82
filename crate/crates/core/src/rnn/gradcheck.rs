use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backward::{backward_inputs, backward_params, Objective};
use super::forward::{forward, logits};
use super::loss::loss;
use super::params::{init_params, ModelParams};
use crate::error::Result;
use crate::flowdata::FlowTensor;

/// Denominator floor of the relative error, so that vanishing gradients are
/// compared absolutely.
pub const REL_ERR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub layers: usize,
    pub hidden: usize,
    pub input: usize,
    pub steps: usize,
    pub fd_step: f64,
    /// Initial weights are multiplied by this to leave the linear regime.
    pub weight_scale: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            layers: 2,
            hidden: 4,
            input: 15,
            steps: 5,
            fd_step: 1e-5,
            weight_scale: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub config: GradCheckConfig,
    pub seed: u64,
    pub max_rel_error_params: f64,
    pub max_rel_error_inputs_loss: f64,
    pub max_rel_error_inputs_logit: f64,
    pub params_checked: usize,
    pub inputs_checked: usize,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.max_rel_error_params
            .max(self.max_rel_error_inputs_loss)
            .max(self.max_rel_error_inputs_logit)
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Random model, input and labels for a check.
pub fn random_problem(config: &GradCheckConfig, seed: u64) -> Result<(ModelParams, FlowTensor, Vec<f64>)> {
    let mut params = init_params(config.layers, config.hidden, config.input, seed)?;
    for v in params.values_mut() {
        *v *= config.weight_scale;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let data = (0..config.steps * config.input)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    let inputs = FlowTensor::from_vec(config.steps, config.input, data)?;
    let labels = (0..config.steps)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
        .collect();
    Ok((params, inputs, labels))
}

/// Compares analytic parameter and input gradients with central finite
/// differences on a random model.
pub fn grad_check(config: &GradCheckConfig, seed: u64) -> Result<GradCheckReport> {
    let (params, inputs, labels) = random_problem(config, seed)?;
    let h = config.fd_step;
    let loss_at = |p: &ModelParams, x: &FlowTensor| -> Result<f64> { loss(&forward(p, x)?, &labels) };
    let final_logit_at =
        |p: &ModelParams, x: &FlowTensor| -> Result<f64> { Ok(*logits(p, x)?.last().unwrap()) };

    let trace = forward(&params, &inputs)?;
    let gp = backward_params(&params, &trace, &labels)?;
    let mut max_p: f64 = 0.0;
    let mut probe = params.clone();
    for i in 0..params.len() {
        let orig = probe.values()[i];
        probe.values_mut()[i] = orig + h;
        let up = loss_at(&probe, &inputs)?;
        probe.values_mut()[i] = orig - h;
        let down = loss_at(&probe, &inputs)?;
        probe.values_mut()[i] = orig;
        max_p = max_p.max(rel_error(gp.values[i], (up - down) / (2.0 * h)));
    }

    let gl = backward_inputs(&params, &trace, Objective::Loss(&labels))?;
    let gz = backward_inputs(&params, &trace, Objective::FinalLogit)?;
    let (mut max_l, mut max_z): (f64, f64) = (0.0, 0.0);
    let mut x = inputs.clone();
    let n = inputs.as_slice().len();
    for i in 0..n {
        let orig = x.as_slice()[i];
        x.as_mut_slice()[i] = orig + h;
        let (lu, zu) = (loss_at(&params, &x)?, final_logit_at(&params, &x)?);
        x.as_mut_slice()[i] = orig - h;
        let (ld, zd) = (loss_at(&params, &x)?, final_logit_at(&params, &x)?);
        x.as_mut_slice()[i] = orig;
        max_l = max_l.max(rel_error(gl.values.as_slice()[i], (lu - ld) / (2.0 * h)));
        max_z = max_z.max(rel_error(gz.values.as_slice()[i], (zu - zd) / (2.0 * h)));
    }

    Ok(GradCheckReport {
        config: *config,
        seed,
        max_rel_error_params: max_p,
        max_rel_error_inputs_loss: max_l,
        max_rel_error_inputs_logit: max_z,
        params_checked: params.len(),
        inputs_checked: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_passes() {
        let r = grad_check(&GradCheckConfig::default(), 1).unwrap();
        assert!(r.max_rel_error() < 1e-4, "{r:?}");
    }

    #[test]
    fn report_is_deterministic() {
        let c = GradCheckConfig::default();
        assert_eq!(grad_check(&c, 4).unwrap(), grad_check(&c, 4).unwrap());
    }

    #[test]
    fn degenerate_model_passes() {
        let c = GradCheckConfig {
            layers: 1,
            hidden: 1,
            ..Default::default()
        };
        let r = grad_check(&c, 2).unwrap();
        assert!(r.max_rel_error() < 1e-4, "{r:?}");
    }
}
