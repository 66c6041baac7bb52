//! Inverse-frequency class weights and the weighted sampler.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifyError, Sample};
use crate::labeling::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub benign: f64,
    pub malicious: f64,
}

impl ClassWeights {
    pub fn uniform() -> Self {
        Self {
            benign: 1.0,
            malicious: 1.0,
        }
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Benign => self.benign,
            Label::Malicious => self.malicious,
        }
    }
}

/// `w_c = N / (k * N_c)` with `k = 2` classes.
pub fn class_weights(samples: &[Sample]) -> Result<ClassWeights, ClassifyError> {
    let n = samples.len() as f64;
    let count = |l: Label| samples.iter().filter(|s| s.label == l).count();
    let (b, m) = (count(Label::Benign), count(Label::Malicious));
    for (label, c) in [(Label::Benign, b), (Label::Malicious, m)] {
        if c == 0 {
            return Err(ClassifyError::MissingClass(label));
        }
    }
    Ok(ClassWeights {
        benign: n / (2.0 * b as f64),
        malicious: n / (2.0 * m as f64),
    })
}

/// `epoch_len` indices into `train`, drawn with replacement with
/// probability proportional to each sample's class weight.
pub fn weighted_sampler(train: &[Sample], weights: &ClassWeights, seed: u64, epoch_len: usize) -> Vec<usize> {
    if train.is_empty() || epoch_len == 0 {
        return Vec::new();
    }
    let dist = match WeightedIndex::new(train.iter().map(|s| weights.get(s.label))) {
        Ok(d) => d,
        Err(_) => return Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..epoch_len).map(|_| dist.sample(&mut rng)).collect()
}
