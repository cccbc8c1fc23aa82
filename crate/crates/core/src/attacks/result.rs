use serde::{Deserialize, Serialize};

use super::constraints::AttackConstraints;
use crate::classifier::{EncodedFlow, Model};
use crate::error::{Error, Result};
use crate::flowdata::{Flow, FlowTensor, PacketFeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Cw,
    PgdLinf,
    Fgsm,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Cw => "cw",
            AttackKind::PgdLinf => "pgd_linf",
            AttackKind::Fgsm => "fgsm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialResult {
    pub flow_id: String,
    pub category: String,
    pub method: AttackKind,
    /// Final-step logit below the margin.
    pub success: bool,
    /// L1 distance in normalized space; infinite when unsuccessful.
    pub distance: f64,
    /// L-infinity distance in normalized space; infinite when unsuccessful.
    pub linf: f64,
    /// L1 distance of the returned iterate, finite even on failure.
    pub attempt_distance: f64,
    pub initial_logit: f64,
    pub final_logit: f64,
    pub iterations: usize,
    /// Returned iterate, normalized.
    pub adversarial: FlowTensor,
    /// Returned iterate in raw units.
    pub adversarial_flow: Flow,
}

impl AdversarialResult {
    pub fn detected_before(&self) -> bool {
        crate::rnn::confidence(self.initial_logit) > 0.5
    }

    pub fn detected_after(&self) -> bool {
        crate::rnn::confidence(self.final_logit) > 0.5
    }
}

/// Per-attack state shared by all methods.
pub(crate) struct Setup {
    pub encoded: EncodedFlow,
    pub constraints: AttackConstraints,
}

impl Setup {
    pub fn new(model: &Model, flow: &Flow) -> Result<Setup> {
        if !flow.label.is_attack() {
            return Err(Error::InvalidArgument(format!(
                "flow {} is benign; only attack flows are attacked",
                flow.id
            )));
        }
        let encoded = model.normalize(flow)?;
        let constraints = AttackConstraints::new(flow, &encoded.x, &model.schema)?;
        Ok(Setup {
            encoded,
            constraints,
        })
    }

    pub fn logit(&self, model: &Model, x: &FlowTensor) -> Result<f64> {
        model.final_logit(&self.with(x))
    }

    pub fn with(&self, x: &FlowTensor) -> EncodedFlow {
        EncodedFlow {
            x: x.clone(),
            directions: self.encoded.directions.clone(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        &self,
        model: &Model,
        flow: &Flow,
        method: AttackKind,
        delta: f64,
        x: FlowTensor,
        initial_logit: f64,
        final_logit: f64,
        iterations: usize,
    ) -> Result<AdversarialResult> {
        let success = final_logit < delta;
        let attempt = self.constraints.l1(&x);
        let (distance, linf) = if success {
            (attempt, self.constraints.linf(&x))
        } else {
            (f64::INFINITY, f64::INFINITY)
        };
        let adversarial_flow = denormalize_edits(model, flow, &self.constraints, &x)?;
        Ok(AdversarialResult {
            flow_id: flow.id.clone(),
            category: flow.category().to_string(),
            method,
            success,
            distance,
            linf,
            attempt_distance: attempt,
            initial_logit,
            final_logit,
            iterations,
            adversarial: x,
            adversarial_flow,
        })
    }
}

/// Raw flow with only the editable entries replaced, never below the
/// original raw value.
fn denormalize_edits(
    model: &Model,
    flow: &Flow,
    constraints: &AttackConstraints,
    x: &FlowTensor,
) -> Result<Flow> {
    let mut out = flow.clone();
    for (t, packet) in out.packets.iter_mut().enumerate() {
        let mut raw = packet.to_features();
        let mut changed = false;
        for (j, v) in raw.iter_mut().enumerate() {
            if constraints.is_editable(t, j) {
                let edited = model.stats.denormalize_value(j, x.get(t, j));
                if edited > *v {
                    *v = edited;
                    changed = true;
                }
            }
        }
        if changed {
            *packet = PacketFeatureVector::from_features(&raw)?;
        }
    }
    Ok(out)
}
