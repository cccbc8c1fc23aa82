use serde::{Deserialize, Serialize};

use super::cw::DEFAULT_DELTA;
use super::result::{AdversarialResult, AttackKind, Setup};
use crate::classifier::Model;
use crate::error::{Error, Result};
use crate::flowdata::Flow;
use crate::rnn::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgdConfig {
    pub epsilon: f64,
    pub iterations: usize,
    /// Step size; `None` means a tenth of epsilon.
    pub step: Option<f64>,
    pub delta: f64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        PgdConfig {
            epsilon: 1.0,
            iterations: 100,
            step: None,
            delta: DEFAULT_DELTA,
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} must be finite and non-negative"
        )));
    }
    Ok(())
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sign-gradient ascent on the attack-label loss inside an L-infinity ball,
/// stopping at the first iterate past the margin.
impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        check_epsilon(self.step())?;
        if !self.delta.is_finite() {
            return Err(Error::NonFinite("delta"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.step.unwrap_or(self.epsilon / 10.0)
    }
}

pub fn pgd_linf_attack(model: &Model, flow: &Flow, config: &PgdConfig) -> Result<AdversarialResult> {
    config.validate()?;
    let step = config.step();
    let setup = Setup::new(model, flow)?;
    let x0 = setup.constraints.original().clone();
    let labels = vec![1.0; flow.len()];
    let mut x = x0.clone();
    let mut initial = None;
    let mut z = 0.0;
    let mut used = 0;
    for it in 0..=config.iterations {
        let (zi, g) = model.objective_grad(&setup.with(&x), Objective::Loss(&labels))?;
        z = zi;
        initial.get_or_insert(zi);
        if z < config.delta || it == config.iterations || config.epsilon == 0.0 {
            break;
        }
        used += 1;
        for (i, v) in x.as_mut_slice().iter_mut().enumerate() {
            let lo = x0.as_slice()[i];
            *v = (*v + step * sign(g.as_slice()[i])).clamp(lo - config.epsilon, lo + config.epsilon);
        }
        setup.constraints.project(&mut x)?;
    }
    let initial = initial.unwrap_or(z);
    setup.finish(model, flow, AttackKind::PgdLinf, config.delta, x, initial, z, used)
}

/// One signed step of size `epsilon` up the attack-label loss, projected.
pub fn fgsm_attack(model: &Model, flow: &Flow, epsilon: f64, delta: f64) -> Result<AdversarialResult> {
    check_epsilon(epsilon)?;
    let setup = Setup::new(model, flow)?;
    let x0 = setup.constraints.original().clone();
    let labels = vec![1.0; flow.len()];
    let (initial, g) = model.objective_grad(&setup.with(&x0), Objective::Loss(&labels))?;
    let mut x = x0.clone();
    for (v, &gi) in x.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *v += epsilon * sign(gi);
    }
    setup.constraints.project(&mut x)?;
    let z = setup.logit(model, &x)?;
    setup.finish(model, flow, AttackKind::Fgsm, delta, x, initial, z, 1)
}
