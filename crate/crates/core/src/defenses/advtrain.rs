use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{cw_attack, cw_descent_step, AttackConstraints, CwConfig};
use crate::classifier::{encode_samples, train, EncodedFlow, Model, TrainConfig, Trainer, TrainingSample};
use crate::error::{Error, Result};
use crate::flowdata::{Dataset, Flow};
use crate::robustness::{compute_ars, ArsSchedule, RobustnessReport, StopReason};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdvTrainConfig {
    /// Baseline training and the optimizer used while hardening.
    pub train: TrainConfig,
    /// Adam learning rate while hardening.
    pub learning_rate: f64,
    /// Training epochs after the baseline, a multiple of `cadence`.
    pub epochs: u32,
    /// Training epochs between two refreshes of the adversarial samples.
    pub cadence: u32,
    /// Descent iterations per refresh for every batch of adversarial samples.
    pub refresh_iterations: usize,
    /// CW tradeoff used to create and refresh the adversarial samples.
    pub kappa: f64,
    /// Remaining CW settings; `kappa` above takes precedence.
    pub cw: CwConfig,
    /// Require as many adversarial steps as training steps per cycle.
    pub budget_rule: bool,
    /// Held-out attack flows scored after every cycle.
    pub ars_samples: usize,
    pub ars: ArsSchedule,
}

impl Default for AdvTrainConfig {
    fn default() -> Self {
        AdvTrainConfig {
            train: TrainConfig::default(),
            learning_rate: 0.001,
            epochs: 60,
            cadence: 10,
            refresh_iterations: 10,
            kappa: 1.0,
            cw: CwConfig::default(),
            budget_rule: true,
            ars_samples: 40,
            ars: ArsSchedule::default(),
        }
    }
}

impl AdvTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.generator().validate()?;
        self.ars.validate()?;
        if self.cadence == 0 || self.refresh_iterations == 0 {
            return Err(Error::InvalidArgument(
                "cadence and refresh iterations must be at least 1".into(),
            ));
        }
        if self.epochs == 0 || !self.epochs.is_multiple_of(self.cadence) {
            return Err(Error::InvalidArgument(format!(
                "epochs ({}) must be a positive multiple of the cadence ({})",
                self.epochs, self.cadence
            )));
        }
        if self.budget_rule && self.refresh_iterations != self.cadence as usize {
            return Err(Error::InvalidArgument(format!(
                "budget rule needs refresh iterations ({}) equal to the cadence ({})",
                self.refresh_iterations, self.cadence
            )));
        }
        if self.ars_samples == 0 {
            return Err(Error::InvalidArgument("ars_samples must be at least 1".into()));
        }
        Ok(())
    }

    pub fn cycles(&self) -> u32 {
        self.epochs / self.cadence
    }

    pub fn generator(&self) -> CwConfig {
        CwConfig {
            kappa: self.kappa,
            ..self.cw
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// 0 is the baseline.
    pub cycle: u32,
    /// Largest kappa the ARS escalation used.
    pub kappa_reached: f64,
    pub ars: f64,
    pub adversarial_ratio: f64,
    pub stop: StopReason,
    pub training_steps: usize,
    pub adversarial_steps: usize,
    pub train_accuracy: f64,
    /// Share of adversarial samples below the margin against the model they
    /// were last refreshed on.
    pub sample_success: f64,
}

#[derive(Debug, Clone)]
pub struct AdvTrainOutcome {
    pub baseline: Model,
    pub model: Model,
    pub trajectory: Vec<CycleRecord>,
    pub held_out_ids: Vec<String>,
    pub original_size: usize,
    pub augmented_size: usize,
    /// Adversarial samples after the last refresh, normalized.
    pub samples: Vec<EncodedFlow>,
}

impl AdvTrainOutcome {
    pub fn write_trajectory_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_trajectory_csv(&self.trajectory, writer)
    }
}

pub fn write_trajectory_csv<W: Write>(trajectory: &[CycleRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "cycle",
        "kappa_reached",
        "ars",
        "adversarial_ratio",
        "stop",
        "training_steps",
        "adversarial_steps",
        "train_accuracy",
        "sample_success",
    ])?;
    for r in trajectory {
        w.write_record([
            r.cycle.to_string(),
            r.kappa_reached.to_string(),
            r.ars.to_string(),
            r.adversarial_ratio.to_string(),
            serde_json::to_value(r.stop)?.as_str().unwrap_or_default().to_string(),
            r.training_steps.to_string(),
            r.adversarial_steps.to_string(),
            r.train_accuracy.to_string(),
            r.sample_success.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Up to `n` attack flows taken in turn from each category, categories in
/// name order and flows in input order.
pub fn select_held_out(flows: &[Flow], n: usize) -> Vec<Flow> {
    let mut by_category: BTreeMap<&str, Vec<&Flow>> = BTreeMap::new();
    for f in flows.iter().filter(|f| f.label.is_attack()) {
        by_category.entry(f.category()).or_default().push(f);
    }
    let mut queues: Vec<std::slice::Iter<&Flow>> = by_category.values().map(|v| v.iter()).collect();
    let mut out = Vec::new();
    while out.len() < n {
        let before = out.len();
        for q in &mut queues {
            if out.len() == n {
                break;
            }
            if let Some(f) = q.next() {
                out.push((*f).clone());
            }
        }
        if out.len() == before {
            break;
        }
    }
    out
}

struct Counterpart {
    sample: TrainingSample,
    constraints: AttackConstraints,
}

fn record(
    cycle: u32,
    report: &RobustnessReport,
    training_steps: usize,
    adversarial_steps: usize,
    train_accuracy: f64,
    sample_success: f64,
) -> CycleRecord {
    CycleRecord {
        cycle,
        kappa_reached: report.kappas.last().copied().unwrap_or(0.0),
        ars: report.ars,
        adversarial_ratio: report.adversarial_ratio,
        stop: report.stop,
        training_steps,
        adversarial_steps,
        train_accuracy,
        sample_success,
    }
}

/// Trains a baseline on `train_set`, then alternates training on the set
/// augmented with one adversarial counterpart per attack flow and refreshing
/// those counterparts against the current model. ARS on a fixed subset of
/// `held_out` is recorded for the baseline and after every cycle.
pub fn adversarial_training(
    train_set: &Dataset,
    held_out: &[Flow],
    config: &AdvTrainConfig,
    seed: u64,
) -> Result<AdvTrainOutcome> {
    config.validate()?;
    let attack_flows: Vec<&Flow> = train_set.attack_flows().collect();
    if attack_flows.is_empty() {
        return Err(Error::Empty("attack flows in the training set"));
    }
    let ars_set = select_held_out(held_out, config.ars_samples);
    if ars_set.is_empty() {
        return Err(Error::Empty("held-out attack flows"));
    }
    let train_config = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let baseline = train(train_set, &train_config)?;
    let originals = encode_samples(&baseline, train_set)?;
    let generator = config.generator();
    let (lr, _) = generator.schedule();

    let baseline_report = compute_ars(&baseline, &ars_set, &config.ars)?;
    let baseline_accuracy = baseline.history.last().map_or(0.0, |r| r.accuracy);

    let initial: Vec<_> = attack_flows
        .par_iter()
        .map(|f| cw_attack(&baseline, f, &generator))
        .collect::<Result<_>>()?;
    let mut counterparts: Vec<Counterpart> = attack_flows
        .iter()
        .zip(initial)
        .map(|(f, r)| {
            let encoded = baseline.normalize(f)?;
            let constraints = AttackConstraints::new(f, &encoded.x, &baseline.schema)?;
            Ok(Counterpart {
                sample: TrainingSample {
                    flow: EncodedFlow {
                        x: r.adversarial,
                        directions: encoded.directions,
                    },
                    label: 1.0,
                },
                constraints,
            })
        })
        .collect::<Result<_>>()?;
    let success_share = |c: &[Counterpart], model: &Model| -> Result<f64> {
        let hits: Vec<bool> = c
            .par_iter()
            .map(|c| Ok(model.final_logit(&c.sample.flow)? < generator.delta))
            .collect::<Result<_>>()?;
        Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
    };
    let mut trajectory = vec![record(
        0,
        &baseline_report,
        0,
        0,
        baseline_accuracy,
        success_share(&counterparts, &baseline)?,
    )];

    let hardening = TrainConfig {
        learning_rate: config.learning_rate,
        ..train_config
    };
    let mut trainer = Trainer::new(baseline.clone(), hardening)?;
    let augmented_size = originals.len() + counterparts.len();
    for cycle in 1..=config.cycles() {
        let mut samples = originals.clone();
        samples.extend(counterparts.iter().map(|c| c.sample.clone()));
        let batches = trainer.batches_per_epoch(samples.len());
        let mut accuracy = 0.0;
        for _ in 0..config.cadence {
            accuracy = trainer.epoch(&samples)?.accuracy;
        }
        let training_steps = config.cadence as usize * batches;

        // Counterparts are split into as many batches as one training epoch
        // has; each batch gets the same number of descent iterations.
        let model = &trainer.model;
        counterparts.par_iter_mut().try_for_each(|c| -> Result<()> {
            for _ in 0..config.refresh_iterations {
                let (_, moved) = cw_descent_step(
                    model,
                    &mut c.sample.flow,
                    &c.constraints,
                    generator.kappa,
                    generator.delta,
                    lr,
                )?;
                if !moved {
                    break;
                }
            }
            Ok(())
        })?;
        let adversarial_steps = batches.min(counterparts.len()) * config.refresh_iterations;

        let report = compute_ars(&trainer.model, &ars_set, &config.ars)?;
        let share = success_share(&counterparts, &trainer.model)?;
        let r = record(cycle, &report, training_steps, adversarial_steps, accuracy, share);
        log::info!(
            "adversarial training cycle {cycle}: ars {:.4}, adversarial ratio {:.3}, sample success {:.3}",
            r.ars,
            r.adversarial_ratio,
            r.sample_success
        );
        trajectory.push(r);
    }

    let mut model = trainer.into_model();
    model.params.meta.adversarially_trained = true;
    Ok(AdvTrainOutcome {
        baseline,
        model,
        trajectory,
        held_out_ids: ars_set.iter().map(|f| f.id.clone()).collect(),
        original_size: originals.len(),
        augmented_size,
        samples: counterparts.into_iter().map(|c| c.sample.flow).collect(),
    })
}
