use crate::error::{Error, Result};
use crate::flowdata::{schema, Direction, FeatureSchema, Flow, FlowTensor};

/// Which entries of a flow an attacker may change, and their lower bounds.
///
/// An entry is editable when its feature is manipulable, visible to the model
/// on that packet, and the packet is sent by the attacker (forward) or the
/// flow is fully controlled. The first packet's IAT is fixed at 0. Editable
/// entries may only grow.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConstraints {
    steps: usize,
    width: usize,
    editable: Vec<bool>,
    lower: FlowTensor,
}

impl AttackConstraints {
    /// `original` is the flow's normalized feature tensor.
    pub fn new(flow: &Flow, original: &FlowTensor, schema: &FeatureSchema) -> Result<Self> {
        let (steps, width) = (original.steps(), original.width());
        if steps != flow.len() || width != schema.len() {
            return Err(Error::Dimension {
                expected: flow.len() * schema.len(),
                got: steps * width,
            });
        }
        let mut editable = vec![false; steps * width];
        for (t, p) in flow.packets.iter().enumerate() {
            let sent_by_attacker = p.direction == Direction::Forward || flow.fully_controlled;
            for j in 0..width {
                editable[t * width + j] = sent_by_attacker
                    && schema.is_manipulable(j)
                    && schema.is_active_at(j, p.direction)
                    && !(t == 0 && j == schema::IAT);
            }
        }
        Ok(AttackConstraints {
            steps,
            width,
            editable,
            lower: original.clone(),
        })
    }

    pub fn original(&self) -> &FlowTensor {
        &self.lower
    }

    pub fn is_editable(&self, t: usize, j: usize) -> bool {
        self.editable[t * self.width + j]
    }

    pub fn editable_mask(&self) -> &[bool] {
        &self.editable
    }

    pub fn editable_count(&self) -> usize {
        self.editable.iter().filter(|&&e| e).count()
    }

    fn check(&self, x: &FlowTensor) -> Result<()> {
        if x.steps() != self.steps || x.width() != self.width {
            return Err(Error::Dimension {
                expected: self.steps * self.width,
                got: x.steps() * x.width(),
            });
        }
        Ok(())
    }

    /// Resets non-editable entries and lifts editable ones to their bound.
    pub fn project(&self, candidate: &mut FlowTensor) -> Result<()> {
        self.check(candidate)?;
        for ((c, &lo), &e) in candidate
            .as_mut_slice()
            .iter_mut()
            .zip(self.lower.as_slice())
            .zip(&self.editable)
        {
            *c = if e { c.max(lo) } else { lo };
        }
        Ok(())
    }

    pub fn is_feasible(&self, x: &FlowTensor) -> bool {
        self.check(x).is_ok()
            && x.as_slice()
                .iter()
                .zip(self.lower.as_slice())
                .zip(&self.editable)
                .all(|((&v, &lo), &e)| if e { v >= lo } else { v == lo })
    }

    /// L1 distance over editable entries.
    pub fn l1(&self, x: &FlowTensor) -> f64 {
        self.deltas(x).sum()
    }

    /// L-infinity distance over editable entries.
    pub fn linf(&self, x: &FlowTensor) -> f64 {
        self.deltas(x).fold(0.0, f64::max)
    }

    fn deltas<'a>(&'a self, x: &'a FlowTensor) -> impl Iterator<Item = f64> + 'a {
        x.as_slice()
            .iter()
            .zip(self.lower.as_slice())
            .zip(&self.editable)
            .filter(|(_, &e)| e)
            .map(|((&v, &lo), _)| (v - lo).abs())
    }
}

/// Free-function form of [`AttackConstraints::project`].
pub fn project_constraints(
    constraints: &AttackConstraints,
    candidate: &FlowTensor,
) -> Result<FlowTensor> {
    let mut out = candidate.clone();
    constraints.project(&mut out)?;
    Ok(out)
}
