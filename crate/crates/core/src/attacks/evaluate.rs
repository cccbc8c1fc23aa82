use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cw::{cw_attack, CwConfig};
use super::gradient::{fgsm_attack, pgd_linf_attack, PgdConfig};
use super::result::{AdversarialResult, AttackKind};
use crate::classifier::Model;
use crate::error::{Error, Result};
use crate::flowdata::Flow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum AttackMethod {
    Cw(CwConfig),
    PgdLinf(PgdConfig),
    Fgsm { epsilon: f64, delta: f64 },
}

impl AttackMethod {
    pub fn kind(&self) -> AttackKind {
        match self {
            AttackMethod::Cw(_) => AttackKind::Cw,
            AttackMethod::PgdLinf(_) => AttackKind::PgdLinf,
            AttackMethod::Fgsm { .. } => AttackKind::Fgsm,
        }
    }
}

pub fn run_attack(model: &Model, flow: &Flow, method: &AttackMethod) -> Result<AdversarialResult> {
    match method {
        AttackMethod::Cw(c) => cw_attack(model, flow, c),
        AttackMethod::PgdLinf(c) => pgd_linf_attack(model, flow, c),
        AttackMethod::Fgsm { epsilon, delta } => fgsm_attack(model, flow, *epsilon, *delta),
    }
}

/// Attacks every flow independently; results keep the input order.
pub fn attack_all(model: &Model, flows: &[&Flow], method: &AttackMethod) -> Result<Vec<AdversarialResult>> {
    flows
        .par_iter()
        .map(|f| run_attack(model, f, method))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub flows: usize,
    pub detected_before: usize,
    pub detected_after: usize,
    pub detection_accuracy_before: f64,
    pub detection_accuracy_after: f64,
    /// Flows past the margin after the attack, over all flows.
    pub adversarial_ratio: f64,
    /// Flows detected before the attack and past the margin after it, over
    /// the flows detected before. 0 when nothing was detected.
    pub success_ratio: f64,
    pub successes: usize,
    pub mean_l1: Option<f64>,
    pub median_l1: Option<f64>,
    pub mean_linf: Option<f64>,
    pub median_linf: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len().is_multiple_of(2) {
        0.5 * (s[m - 1] + s[m])
    } else {
        s[m]
    })
}

impl AttackSummary {
    pub fn from_results<'a>(results: impl IntoIterator<Item = &'a AdversarialResult>) -> Self {
        let results: Vec<&AdversarialResult> = results.into_iter().collect();
        let n = results.len();
        let before = results.iter().filter(|r| r.detected_before()).count();
        let after = results.iter().filter(|r| r.detected_after()).count();
        let flipped = results
            .iter()
            .filter(|r| r.detected_before() && r.success)
            .count();
        let ok: Vec<&&AdversarialResult> = results.iter().filter(|r| r.success).collect();
        let l1: Vec<f64> = ok.iter().map(|r| r.distance).collect();
        let linf: Vec<f64> = ok.iter().map(|r| r.linf).collect();
        let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        AttackSummary {
            flows: n,
            detected_before: before,
            detected_after: after,
            detection_accuracy_before: frac(before, n),
            detection_accuracy_after: frac(after, n),
            adversarial_ratio: frac(ok.len(), n),
            success_ratio: frac(flipped, before),
            successes: ok.len(),
            mean_l1: mean(&l1),
            median_l1: median(&l1),
            mean_linf: mean(&linf),
            median_linf: median(&linf),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub method: AttackMethod,
    pub results: Vec<AdversarialResult>,
    pub overall: AttackSummary,
    pub per_type: BTreeMap<String, AttackSummary>,
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    method: &'a AttackMethod,
    overall: &'a AttackSummary,
    per_type: &'a BTreeMap<String, AttackSummary>,
}

pub const ATTACK_CSV_HEADER: [&str; 9] = [
    "flow_id",
    "attack_type",
    "method",
    "success",
    "l1",
    "linf",
    "initial_logit",
    "final_logit",
    "iterations",
];

impl AttackReport {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let s = SummaryJson {
            method: &self.method,
            overall: &self.overall,
            per_type: &self.per_type,
        };
        serde_json::to_writer_pretty(writer, &s)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(ATTACK_CSV_HEADER)?;
        for r in &self.results {
            w.write_record([
                r.flow_id.clone(),
                r.category.clone(),
                r.method.name().to_string(),
                r.success.to_string(),
                r.distance.to_string(),
                r.linf.to_string(),
                r.initial_logit.to_string(),
                r.final_logit.to_string(),
                r.iterations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Attacks every attack-labeled flow and summarizes per attack type.
pub fn evaluate_attack(model: &Model, flows: &[Flow], method: &AttackMethod) -> Result<AttackReport> {
    let targets: Vec<&Flow> = flows.iter().filter(|f| f.label.is_attack()).collect();
    if targets.is_empty() {
        return Err(Error::Empty("attack flows"));
    }
    let results = attack_all(model, &targets, method)?;
    let mut groups: BTreeMap<String, Vec<&AdversarialResult>> = BTreeMap::new();
    for r in &results {
        groups.entry(r.category.clone()).or_default().push(r);
    }
    let per_type = groups
        .into_iter()
        .map(|(k, v)| (k, AttackSummary::from_results(v)))
        .collect();
    Ok(AttackReport {
        method: *method,
        overall: AttackSummary::from_results(&results),
        per_type,
        results,
    })
}
