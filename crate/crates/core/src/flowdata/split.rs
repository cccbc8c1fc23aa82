use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Label, SplitTag};
use crate::error::{Error, Result};

/// Stratified 2:1 train/test split. Each label group is shuffled with `seed`
/// and two thirds (rounded) of it go to training; both sides keep the
/// original flow order.
pub fn split_dataset(dataset: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    if dataset.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 flows to split, got {}",
            dataset.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; dataset.len()];
    for label in [Label::Benign, Label::Attack] {
        let mut idx: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.flows[i].label == label)
            .collect();
        idx.shuffle(&mut rng);
        let n_train = (2.0 * idx.len() as f64 / 3.0).round() as usize;
        for &i in &idx[..n_train] {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (flow, &tr) in dataset.flows.iter().zip(&in_train) {
        if tr {
            train.push(flow.clone());
        } else {
            test.push(flow.clone());
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "split left {} train / {} test flows",
            train.len(),
            test.len()
        )));
    }
    let mk = |flows, split| Dataset {
        flows,
        schema: dataset.schema.clone(),
        split,
    };
    Ok((mk(train, SplitTag::Train), mk(test, SplitTag::Test)))
}
