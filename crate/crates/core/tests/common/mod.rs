#![allow(dead_code)]

use seqids::classifier::{train, Model, TrainConfig};
use seqids::flowdata::{split_dataset, synth_generate, Dataset, SynthConfig};

pub fn small_config() -> SynthConfig {
    SynthConfig {
        benign: 160,
        dos: 40,
        scan: 40,
        slow: 40,
        botnet: 40,
        ..SynthConfig::default()
    }
}

pub fn quick_train() -> TrainConfig {
    TrainConfig {
        epochs: 15,
        seed: 5,
        ..TrainConfig::default()
    }
}

pub struct Bed {
    pub train: Dataset,
    pub test: Dataset,
    pub model: Model,
}

pub fn bed() -> Bed {
    let ds = synth_generate(&small_config(), 5).unwrap();
    let (train_set, test) = split_dataset(&ds, 5).unwrap();
    let model = train(&train_set, &quick_train()).unwrap();
    Bed {
        train: train_set,
        test,
        model,
    }
}
