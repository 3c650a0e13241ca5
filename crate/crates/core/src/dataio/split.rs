//! Stratified labeled / unlabeled-train / test splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixcore::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// The unlabeled set is the test set.
    Transductive,
    /// Unlabeled-train and test are disjoint.
    Inductive,
}

impl std::str::FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transductive" => Ok(Self::Transductive),
            "inductive" => Ok(Self::Inductive),
            other => Err(Error::Config(format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub labeled_per_class: usize,
    /// Share of each class's unlabeled pool held out for testing (inductive only).
    pub test_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            labeled_per_class: 2,
            test_fraction: 0.5,
        }
    }
}

/// Column indices of each part, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub labeled: Vec<usize>,
    pub unlabeled_train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits the labeled columns of `x` per class with a seeded shuffle.
/// Columns without a label join the unlabeled-train part and are never tested.
pub fn split(x: &FeatureMatrix, protocol: Protocol, spec: &SplitSpec, seed: u64) -> Result<Split> {
    if spec.labeled_per_class == 0 {
        return Err(Error::Config("labeled_per_class must be at least 1".into()));
    }
    let mut by_class = vec![Vec::new(); x.num_classes()];
    let mut extra = Vec::new();
    for (j, l) in x.labels().iter().enumerate() {
        match l {
            Some(c) => by_class[*c].push(j),
            None => extra.push(j),
        }
    }
    let mut labeled = Vec::new();
    let mut pools = Vec::new();
    for (c, mut members) in by_class.into_iter().enumerate() {
        if members.len() <= spec.labeled_per_class {
            return Err(Error::InvalidInput(format!(
                "class {:?} has {} samples, needs more than {} labeled",
                x.classes()[c],
                members.len(),
                spec.labeled_per_class
            )));
        }
        let mut rng = class_rng(seed, c);
        members.shuffle(&mut rng);
        let pool = members.split_off(spec.labeled_per_class);
        labeled.extend(members);
        pools.push((x.classes()[c].clone(), pool));
    }
    let mut out = partition_pools(pools, protocol, spec.test_fraction, seed)?;
    labeled.sort_unstable();
    out.labeled = labeled;
    out.unlabeled_train.extend(extra);
    out.unlabeled_train.sort_unstable();
    Ok(out)
}

/// Divides per-class unlabeled pools into unlabeled-train and test.
/// `labeled` is left empty for the caller.
pub fn partition_pools(
    pools: Vec<(String, Vec<usize>)>,
    protocol: Protocol,
    test_fraction: f64,
    seed: u64,
) -> Result<Split> {
    let mut unlabeled_train = Vec::new();
    let mut test = Vec::new();
    for (c, (name, mut pool)) in pools.into_iter().enumerate() {
        match protocol {
            Protocol::Transductive => {
                unlabeled_train.extend(pool.iter().copied());
                test.extend(pool);
            }
            Protocol::Inductive => {
                if !(0.0..=1.0).contains(&test_fraction) {
                    return Err(Error::Config(format!("test fraction {test_fraction} outside [0, 1]")));
                }
                let n_test = (pool.len() as f64 * test_fraction).round() as usize;
                if n_test == 0 || n_test == pool.len() {
                    return Err(Error::InvalidInput(format!(
                        "class {name:?} has {} unlabeled samples, too few for an inductive split at {test_fraction}",
                        pool.len()
                    )));
                }
                // Separate stream from the labeled/unlabeled shuffle.
                let mut rng = class_rng(seed ^ 0x9e37_79b9_7f4a_7c15, c);
                pool.shuffle(&mut rng);
                let rest = pool.split_off(n_test);
                test.extend(pool);
                unlabeled_train.extend(rest);
            }
        }
    }
    unlabeled_train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        labeled: Vec::new(),
        unlabeled_train,
        test,
    })
}

fn class_rng(seed: u64, class: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class as u64);
    rng
}
