//! Adversarial Robustness Score: the mean of the smallest half of the
//! per-sample adversarial distances, found by escalating the CW tradeoff.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{cw_attack, AdversarialResult, CwConfig};
use crate::classifier::Model;
use crate::error::{Error, Result};
use crate::flowdata::Flow;

/// Number of samples averaged for `n` samples.
pub fn half_count(n: usize) -> usize {
    n.div_ceil(2)
}

/// Mean of the `ceil(N/2)` smallest distances; infinite if any of them is.
pub fn ars_from_distances(distances: &[f64]) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::Empty("distances"));
    }
    if let Some(d) = distances.iter().find(|d| d.is_nan() || **d < 0.0) {
        return Err(Error::InvalidArgument(format!("distance {d} is not in [0, inf]")));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = half_count(sorted.len());
    let head = &sorted[..k];
    if head.iter().any(|d| d.is_infinite()) {
        return Ok(f64::INFINITY);
    }
    Ok(head.iter().sum::<f64>() / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArsSchedule {
    pub kappa0: f64,
    pub growth: f64,
    pub max_rounds: usize,
    /// Escalation stops after the round that reaches this kappa.
    pub max_kappa: f64,
    /// CW settings; its kappa is replaced every round.
    pub cw: CwConfig,
}

impl Default for ArsSchedule {
    fn default() -> Self {
        ArsSchedule {
            kappa0: 0.25,
            growth: 2.0,
            max_rounds: 100,
            max_kappa: 16.0,
            cw: CwConfig::default(),
        }
    }
}

impl ArsSchedule {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa0 > 0.0 && self.kappa0.is_finite()) || !(self.growth > 1.0) {
            return Err(Error::InvalidArgument(
                "kappa0 must be positive and growth above 1".into(),
            ));
        }
        if !(self.max_kappa >= self.kappa0) {
            return Err(Error::InvalidArgument("max_kappa must be at least kappa0".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidArgument("max_rounds must be at least 1".into()));
        }
        self.cw.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Half the samples are adversarial and no failed sample came closer
    /// than the median successful distance.
    Stable,
    /// Too few samples can still become adversarial.
    Unreachable,
    /// The next kappa would exceed the schedule's ceiling.
    KappaCap,
    MaxRounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub kappa: f64,
    pub attacked: usize,
    pub adversarial: usize,
    pub candidate_ars: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub ars: f64,
    pub n: usize,
    pub adversarial_ratio: f64,
    pub flow_ids: Vec<String>,
    /// Best successful distance per sample; infinite if never successful.
    pub distances: Vec<f64>,
    pub kappas: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
    pub rounds: Vec<RoundRecord>,
}

impl RobustnessReport {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn write_rounds_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["round", "kappa", "attacked", "adversarial", "candidate_ars", "iterations"])?;
        for r in &self.rounds {
            w.write_record([
                r.round.to_string(),
                r.kappa.to_string(),
                r.attacked.to_string(),
                r.adversarial.to_string(),
                r.candidate_ars.to_string(),
                r.iterations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn compute_ars(model: &Model, samples: &[Flow], schedule: &ArsSchedule) -> Result<RobustnessReport> {
    Ok(compute_ars_detailed(model, samples, schedule)?.0)
}

/// [`compute_ars`] plus the best successful attack per sample.
pub fn compute_ars_detailed(
    model: &Model,
    samples: &[Flow],
    schedule: &ArsSchedule,
) -> Result<(RobustnessReport, Vec<Option<AdversarialResult>>)> {
    schedule.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("ARS samples"));
    }
    if let Some(f) = samples.iter().find(|f| !f.label.is_attack()) {
        return Err(Error::InvalidArgument(format!("ARS sample {} is benign", f.id)));
    }
    let n = samples.len();
    let need = half_count(n);
    let mut best = vec![f64::INFINITY; n];
    let mut best_results: Vec<Option<AdversarialResult>> = vec![None; n];
    let mut pending: Vec<usize> = (0..n).collect();
    let mut rounds = Vec::new();
    let mut kappas = Vec::new();
    let mut iterations = 0;
    let mut stop = StopReason::MaxRounds;
    let mut kappa = schedule.kappa0;

    for round in 0..schedule.max_rounds {
        let cfg = CwConfig {
            kappa,
            ..schedule.cw
        };
        let results: Vec<AdversarialResult> = pending
            .par_iter()
            .map(|&i| cw_attack(model, &samples[i], &cfg))
            .collect::<Result<_>>()?;
        let round_iterations: usize = results.iter().map(|r| r.iterations).sum();
        iterations += round_iterations;
        kappas.push(kappa);

        let mut still = Vec::new();
        let mut closest_failure = f64::INFINITY;
        for (&i, r) in pending.iter().zip(results) {
            if r.success {
                if r.distance < best[i] {
                    best[i] = r.distance;
                    best_results[i] = Some(r);
                }
            } else if r.iterations > 0 {
                // no editable entries means the sample can never succeed
                closest_failure = closest_failure.min(r.attempt_distance);
                still.push(i);
            }
        }
        let attacked = pending.len();
        pending = still;
        let adversarial = best.iter().filter(|d| d.is_finite()).count();
        rounds.push(RoundRecord {
            round,
            kappa,
            attacked,
            adversarial,
            candidate_ars: ars_from_distances(&best)?,
            iterations: round_iterations,
        });

        if adversarial + pending.len() < need {
            stop = StopReason::Unreachable;
            break;
        }
        if adversarial >= need {
            let mut finite: Vec<f64> = best.iter().copied().filter(|d| d.is_finite()).collect();
            finite.sort_by(f64::total_cmp);
            if closest_failure >= finite[need - 1] {
                stop = StopReason::Stable;
                break;
            }
        }
        log::debug!(
            "ars round {round}: kappa {kappa}, {adversarial}/{n} adversarial, {} pending",
            pending.len()
        );
        if kappa * schedule.growth > schedule.max_kappa {
            stop = StopReason::KappaCap;
            break;
        }
        kappa *= schedule.growth;
    }

    let adversarial = best.iter().filter(|d| d.is_finite()).count();
    let report = RobustnessReport {
        ars: ars_from_distances(&best)?,
        n,
        adversarial_ratio: adversarial as f64 / n as f64,
        flow_ids: samples.iter().map(|f| f.id.clone()).collect(),
        distances: best,
        kappas,
        iterations,
        stop,
        rounds,
    };
    Ok((report, best_results))
}
