use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SPLIT_RECORDS: usize = 10;

/// Disjoint train / validation / test id lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// 70/10/20 sizes, each rounded half-up; test takes the remainder.
pub fn partition_sizes(n: usize) -> (usize, usize, usize) {
    let train = (7 * n + 5) / 10;
    let validation = (n + 5) / 10;
    (train, validation, n - train - validation)
}

/// Seeded shuffle, then 70/10/20 by position.
pub fn split(ids: &[String], seed: u64) -> Result<DatasetSplit> {
    if ids.len() < MIN_SPLIT_RECORDS {
        return Err(Error::Contract(format!(
            "need at least {MIN_SPLIT_RECORDS} records to split, got {}",
            ids.len()
        )));
    }
    let mut order = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, validation, _) = partition_sizes(order.len());
    let test = order.split_off(train + validation);
    let validation = order.split_off(train);
    Ok(DatasetSplit {
        train: order,
        validation,
        test,
        seed,
    })
}

/// Applies the 70/10/20 partition within each label, so every split keeps
/// the corpus class proportions (each class within ±1 record).
pub fn split_stratified(ids: &[String], labels: &[usize], seed: u64) -> Result<DatasetSplit> {
    if ids.len() != labels.len() {
        return Err(Error::Contract("ids and labels differ in length".into()));
    }
    if ids.len() < MIN_SPLIT_RECORDS {
        return Err(Error::Contract(format!(
            "need at least {MIN_SPLIT_RECORDS} records to split, got {}",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_label: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (id, &l) in ids.iter().zip(labels) {
        by_label.entry(l).or_default().push(id.clone());
    }
    let mut out = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for mut group in by_label.into_values() {
        group.shuffle(&mut rng);
        let (train, validation, _) = partition_sizes(group.len());
        out.test.extend(group.split_off(train + validation));
        out.validation.extend(group.split_off(train));
        out.train.extend(group);
    }
    out.train.shuffle(&mut rng);
    out.validation.shuffle(&mut rng);
    out.test.shuffle(&mut rng);
    Ok(out)
}
