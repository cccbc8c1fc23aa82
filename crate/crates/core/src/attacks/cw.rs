use serde::{Deserialize, Serialize};

use super::constraints::AttackConstraints;
use super::result::{AdversarialResult, AttackKind, Setup};
use crate::classifier::{EncodedFlow, Model};
use crate::error::{Error, Result};
use crate::flowdata::{Flow, FlowTensor};

pub const DEFAULT_DELTA: f64 = -0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CwConfig {
    pub kappa: f64,
    /// Logit margin the final step must fall below.
    pub delta: f64,
    pub base_lr: f64,
    pub base_iterations: usize,
    /// Above this kappa the learning rate shrinks and the iteration count
    /// grows proportionally.
    pub base_kappa: f64,
    pub max_iterations: usize,
    /// Bisection steps along the ray to the best iterate.
    pub refine_steps: usize,
}

impl Default for CwConfig {
    fn default() -> Self {
        CwConfig {
            kappa: 1.0,
            delta: DEFAULT_DELTA,
            base_lr: 0.01,
            base_iterations: 1000,
            base_kappa: 1.0,
            max_iterations: 16_000,
            refine_steps: 30,
        }
    }
}

impl CwConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.kappa) || !positive(self.base_kappa) || !positive(self.base_lr) {
            return Err(Error::InvalidArgument(
                "kappa, base kappa and learning rate must be positive".into(),
            ));
        }
        if self.base_iterations == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be at least 1".into()));
        }
        if !self.delta.is_finite() {
            return Err(Error::NonFinite("delta"));
        }
        Ok(())
    }

    /// Learning rate and iteration count for this kappa.
    pub fn schedule(&self) -> (f64, usize) {
        if self.kappa <= self.base_kappa {
            return (self.base_lr, self.base_iterations.min(self.max_iterations));
        }
        let ratio = self.kappa / self.base_kappa;
        let iters = (self.base_iterations as f64 * ratio).ceil();
        let iters = if iters >= self.max_iterations as f64 {
            self.max_iterations
        } else {
            iters as usize
        };
        (self.base_lr / ratio, iters)
    }
}

/// Projected subgradient descent on `L1(x, x0) + kappa * max(Z(x), delta)`.
/// Returns the closest iterate whose final logit is below `delta`, or the
/// last iterate when none is.
pub fn cw_attack(model: &Model, flow: &Flow, config: &CwConfig) -> Result<AdversarialResult> {
    config.validate()?;
    let setup = Setup::new(model, flow)?;
    let x0 = setup.constraints.original().clone();
    let initial = setup.logit(model, &x0)?;
    if initial < config.delta || setup.constraints.editable_count() == 0 {
        return setup.finish(model, flow, AttackKind::Cw, config.delta, x0, initial, initial, 0);
    }

    let (lr, iterations) = config.schedule();
    let mut cur = setup.with(&x0);
    let mut best: Option<(f64, FlowTensor, f64)> = None;
    let mut used = 0;
    for _ in 0..iterations {
        let (z, g) = model.final_logit_grad(&cur)?;
        used += 1;
        if z < config.delta {
            let d = setup.constraints.l1(&cur.x);
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, cur.x.clone(), z));
            }
        }
        let push = if z > config.delta { config.kappa } else { 0.0 };
        if !apply_step(&mut cur.x, g.as_slice(), &setup.constraints, push, lr) {
            break;
        }
    }
    let x = cur.x;
    let last = setup.logit(model, &x)?;
    if last < config.delta {
        let d = setup.constraints.l1(&x);
        if best.as_ref().is_none_or(|b| d < b.0) {
            best = Some((d, x.clone(), last));
        }
    }

    match best {
        Some((_, xb, zb)) => {
            let (xr, zr) = refine(model, &setup, &x0, xb, zb, config)?;
            setup.finish(model, flow, AttackKind::Cw, config.delta, xr, initial, zr, used)
        }
        None => setup.finish(model, flow, AttackKind::Cw, config.delta, x, initial, last, used),
    }
}

/// One projected subgradient step on `flow.x` in place. Returns the final
/// logit before the step and whether any entry moved.
pub fn cw_descent_step(
    model: &Model,
    flow: &mut EncodedFlow,
    constraints: &AttackConstraints,
    kappa: f64,
    delta: f64,
    lr: f64,
) -> Result<(f64, bool)> {
    let (z, g) = model.final_logit_grad(flow)?;
    let push = if z > delta { kappa } else { 0.0 };
    Ok((z, apply_step(&mut flow.x, g.as_slice(), constraints, push, lr)))
}

fn apply_step(
    x: &mut FlowTensor,
    g: &[f64],
    constraints: &AttackConstraints,
    push: f64,
    lr: f64,
) -> bool {
    let mut moved = false;
    let editable = constraints.editable_mask();
    for (i, (v, &lo)) in x
        .as_mut_slice()
        .iter_mut()
        .zip(constraints.original().as_slice())
        .enumerate()
    {
        if !editable[i] {
            continue;
        }
        let next = (*v - lr * (1.0 + push * g[i])).max(lo);
        moved |= next != *v;
        *v = next;
    }
    moved
}

/// Bisects for the smallest step along `x0 -> best` that still succeeds.
fn refine(
    model: &Model,
    setup: &Setup,
    x0: &FlowTensor,
    best: FlowTensor,
    best_logit: f64,
    config: &CwConfig,
) -> Result<(FlowTensor, f64)> {
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut xb, mut zb) = (best.clone(), best_logit);
    let mut probe = best.clone();
    for _ in 0..config.refine_steps {
        let mid = 0.5 * (lo + hi);
        for ((p, &a), &b) in probe
            .as_mut_slice()
            .iter_mut()
            .zip(x0.as_slice())
            .zip(best.as_slice())
        {
            *p = a + mid * (b - a);
        }
        setup.constraints.project(&mut probe)?;
        let z = setup.logit(model, &probe)?;
        if z < config.delta {
            hi = mid;
            xb.as_mut_slice().copy_from_slice(probe.as_slice());
            zb = z;
        } else {
            lo = mid;
        }
    }
    Ok((xb, zb))
}
