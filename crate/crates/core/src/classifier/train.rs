use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{EncodedFlow, Model};
use crate::error::{Error, Result};
use crate::flowdata::{fit_normalizer, Dataset, NormalizationStats};
use crate::rnn::{
    adam_step, backprop, forward, init_params, loss, objective_seeds, AdamHyper, AdamState,
    Objective, TrainingMeta,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub layers: usize,
    pub hidden: usize,
    pub feature_dropout: bool,
    /// Per-feature drop probability; `None` means one over the feature count.
    pub dropout_probability: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 16,
            learning_rate: 0.01,
            seed: 0,
            layers: 2,
            hidden: 16,
            feature_dropout: false,
            dropout_probability: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.layers == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument(
                "batch size, layers and hidden size must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if let Some(p) = self.dropout_probability {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "dropout probability {p} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }

    pub fn drop_probability(&self, features: usize) -> f64 {
        self.dropout_probability
            .unwrap_or(1.0 / features as f64)
    }
}

/// Training loss and flow accuracy measured after an epoch; epoch 0 is the
/// initial model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub flow: EncodedFlow,
    /// 1 for attack, 0 for benign; applied to every step.
    pub label: f64,
}

pub fn encode_samples(model: &Model, dataset: &Dataset) -> Result<Vec<TrainingSample>> {
    dataset
        .flows
        .iter()
        .map(|f| {
            Ok(TrainingSample {
                flow: model.normalize(f)?,
                label: f.label.as_f64(),
            })
        })
        .collect()
}

/// Mini-batch Adam over whole flows. Owns the model while training.
pub struct Trainer {
    pub model: Model,
    config: TrainConfig,
    adam: AdamState,
    hyper: AdamHyper,
    rng: ChaCha8Rng,
    epoch: u32,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Trainer> {
        config.validate()?;
        let adam = AdamState::new(model.params.len());
        let hyper = AdamHyper {
            lr: config.learning_rate,
            ..AdamHyper::default()
        };
        let rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_7a11_0000_0001);
        Ok(Trainer {
            model,
            config,
            adam,
            hyper,
            rng,
            epoch: 0,
        })
    }

    /// Fresh model on `stats`, with the record of the untrained state.
    pub fn fresh(
        dataset: &Dataset,
        stats: NormalizationStats,
        config: TrainConfig,
    ) -> Result<Trainer> {
        config.validate()?;
        dataset.schema.validate()?;
        let n = dataset.schema.len();
        let width = if config.feature_dropout { 2 * n } else { n };
        let mut params = init_params(config.layers, config.hidden, width, config.seed)?;
        params.meta = TrainingMeta {
            seed: config.seed,
            epochs: 0,
            feature_dropout: config.feature_dropout,
            adversarially_trained: false,
        };
        let model = Model {
            params,
            stats,
            schema: dataset.schema.clone(),
            feature_dropout: config.feature_dropout,
            history: Vec::new(),
        };
        Trainer::new(model, config)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn batches_per_epoch(&self, samples: usize) -> usize {
        samples.div_ceil(self.config.batch_size)
    }

    fn draw_mask(&mut self) -> Option<Vec<bool>> {
        if !self.model.feature_dropout {
            return None;
        }
        let n = self.model.num_features();
        let p = self.config.drop_probability(n);
        Some((0..n).map(|_| self.rng.random_bool(p)).collect())
    }

    /// One Adam step on the summed gradient of `batch`.
    pub fn step_batch(&mut self, batch: &[&TrainingSample]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let masks: Vec<Option<Vec<bool>>> = batch.iter().map(|_| self.draw_mask()).collect();
        let model = &self.model;
        let per_flow: Vec<Vec<f64>> = batch
            .par_iter()
            .zip(masks.par_iter())
            .map(|(s, mask)| {
                let trace = forward(&model.params, &model.model_input(&s.flow, mask.as_deref())?)?;
                let labels = vec![s.label; s.flow.len()];
                let seeds = objective_seeds(&trace, Objective::Loss(&labels))?;
                let mut g = vec![0.0; model.params.len()];
                backprop(&model.params, &trace, &seeds, Some(&mut g))?;
                Ok(g)
            })
            .collect::<Result<_>>()?;
        let mut grads = vec![0.0; self.model.params.len()];
        for g in &per_flow {
            for (a, b) in grads.iter_mut().zip(g) {
                *a += b;
            }
        }
        adam_step(&mut self.model.params, &grads, &mut self.adam, &self.hyper)
    }

    /// One shuffled pass over `samples`, followed by a measurement.
    pub fn epoch(&mut self, samples: &[TrainingSample]) -> Result<EpochRecord> {
        if samples.is_empty() {
            return Err(Error::Empty("training dataset"));
        }
        if self.epoch == 0 && self.model.history.is_empty() {
            let initial = measure(&self.model, samples, 0)?;
            self.model.history.push(initial);
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut self.rng);
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<&TrainingSample> = chunk.iter().map(|&i| &samples[i]).collect();
            self.step_batch(&batch)?;
        }
        self.epoch += 1;
        self.model.params.meta.epochs += 1;
        let record = measure(&self.model, samples, self.model.params.meta.epochs)?;
        self.model.history.push(record);
        Ok(record)
    }

    pub fn into_model(self) -> Model {
        self.model
    }
}

/// Mean per-flow loss and flow accuracy with no features masked.
pub fn measure(model: &Model, samples: &[TrainingSample], epoch: u32) -> Result<EpochRecord> {
    let per: Vec<(f64, bool)> = samples
        .par_iter()
        .map(|s| {
            let trace = model.trace(&s.flow, None)?;
            let l = loss(&trace, &vec![s.label; s.flow.len()])?;
            let predicted = trace.final_confidence() > 0.5;
            Ok((l, predicted == (s.label == 1.0)))
        })
        .collect::<Result<_>>()?;
    let n = per.len() as f64;
    Ok(EpochRecord {
        epoch,
        loss: per.iter().map(|p| p.0).sum::<f64>() / n,
        accuracy: per.iter().filter(|p| p.1).count() as f64 / n,
    })
}

fn train_impl(dataset: &Dataset, config: &TrainConfig) -> Result<Model> {
    if dataset.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let stats = fit_normalizer(dataset)?;
    let mut trainer = Trainer::fresh(dataset, stats, config.clone())?;
    let samples = encode_samples(&trainer.model, dataset)?;
    if config.epochs == 0 {
        let initial = measure(&trainer.model, &samples, 0)?;
        trainer.model.history.push(initial);
    }
    for _ in 0..config.epochs {
        trainer.epoch(&samples)?;
    }
    Ok(trainer.into_model())
}

/// Trains a classifier on `dataset`, fitting the normalizer on it first.
/// `config.feature_dropout` selects the dropout variant.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<Model> {
    train_impl(dataset, config)
}

/// Trains with features independently dropped per flow and a missing
/// indicator per feature.
pub fn train_feature_dropout(dataset: &Dataset, config: &TrainConfig) -> Result<Model> {
    train_impl(
        dataset,
        &TrainConfig {
            feature_dropout: true,
            ..config.clone()
        },
    )
}

pub fn write_history_csv<W: Write>(history: &[EpochRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "loss", "accuracy"])?;
    for r in history {
        w.write_record([r.epoch.to_string(), r.loss.to_string(), r.accuracy.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowdata::{synth_generate, SynthConfig};

    fn small() -> Dataset {
        let cfg = SynthConfig {
            benign: 30,
            dos: 10,
            scan: 10,
            slow: 10,
            botnet: 10,
            ..SynthConfig::default()
        };
        synth_generate(&cfg, 5).unwrap()
    }

    fn quick(epochs: u32) -> TrainConfig {
        TrainConfig {
            epochs,
            hidden: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn one_epoch_does_not_increase_loss() {
        let m = train(&small(), &quick(1)).unwrap();
        assert_eq!(m.history.len(), 2);
        assert!(m.history[1].loss <= m.history[0].loss, "{:?}", m.history);
    }

    #[test]
    fn zero_epochs_records_initial_state() {
        let m = train(&small(), &quick(0)).unwrap();
        assert_eq!(m.history.len(), 1);
        assert_eq!(m.params.meta.epochs, 0);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = train(&small(), &quick(2)).unwrap();
        let b = train(&small(), &quick(2)).unwrap();
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
        let c = train(&small(), &TrainConfig { seed: 1, ..quick(2) }).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn dropout_model_doubles_width() {
        let m = train_feature_dropout(&small(), &quick(1)).unwrap();
        assert!(m.feature_dropout);
        assert_eq!(m.params.input_width(), 2 * m.num_features());
    }

    #[test]
    fn empty_dataset_errors() {
        let d = small().with_flows(Vec::new());
        assert!(matches!(train(&d, &quick(1)), Err(Error::Empty(_))));
    }

    #[test]
    fn bad_probability_rejected() {
        let cfg = TrainConfig {
            dropout_probability: Some(1.0),
            ..quick(1)
        };
        assert!(train_feature_dropout(&small(), &cfg).is_err());
    }

    #[test]
    fn default_probability_drops_one_feature_on_average() {
        let cfg = TrainConfig::default();
        let p = cfg.drop_probability(15);
        assert!((15.0 * p - 1.0).abs() < 1e-12);
        let mut t = Trainer::fresh(&small(), NormalizationStats::identity(15), TrainConfig {
            feature_dropout: true,
            ..cfg
        })
        .unwrap();
        let draws = 4000;
        let total: usize = (0..draws)
            .map(|_| t.draw_mask().unwrap().iter().filter(|&&b| b).count())
            .sum();
        let mean = total as f64 / draws as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn history_csv_layout() {
        let h = [EpochRecord {
            epoch: 0,
            loss: 0.5,
            accuracy: 0.25,
        }];
        let mut out = Vec::new();
        write_history_csv(&h, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "epoch,loss,accuracy\n0,0.5,0.25\n");
    }
}
