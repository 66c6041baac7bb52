//! Stratified train/validation/test partitioning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifyError, Sample};
use crate::labeling::Label;

pub const MIN_PER_CLASS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.10,
            test: 0.20,
        }
    }
}

const PARTS_SCALE: f64 = 1_000_000.0;

impl SplitRatios {
    fn parts(&self) -> Result<[u64; 3], ClassifyError> {
        let ok = [self.train, self.validation, self.test]
            .iter()
            .all(|r| r.is_finite() && *r >= 0.0)
            && ((self.train + self.validation + self.test) - 1.0).abs() < 1e-9;
        if !ok {
            return Err(ClassifyError::InvalidRatios(*self));
        }
        Ok([self.train, self.validation, self.test].map(|r| (r * PARTS_SCALE).round() as u64))
    }

    /// Per-class partition sizes: floors of each share, with the remainder
    /// handed out to train, then validation, then test.
    pub fn cut(&self, n: usize) -> Result<[usize; 3], ClassifyError> {
        let parts = self.parts()?;
        let total: u64 = parts.iter().sum();
        let mut sizes = parts.map(|p| ((n as u64 * p) / total) as usize);
        let mut remainder = n - sizes.iter().sum::<usize>();
        for s in sizes.iter_mut() {
            if remainder == 0 {
                break;
            }
            *s += 1;
            remainder -= 1;
        }
        Ok(sizes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

impl DatasetSplit {
    pub fn partitions(&self) -> [(&'static str, &[Sample]); 3] {
        [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ]
    }
}

/// Sort each class by id, shuffle it with `seed`, and cut it by `ratios`.
pub fn stratified_split(samples: &[Sample], ratios: SplitRatios, seed: u64) -> Result<DatasetSplit, ClassifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        ratios,
    };
    for label in [Label::Benign, Label::Malicious] {
        let mut class: Vec<&Sample> = samples.iter().filter(|s| s.label == label).collect();
        if class.len() < MIN_PER_CLASS {
            return Err(ClassifyError::TooFewSamples {
                label,
                found: class.len(),
                needed: MIN_PER_CLASS,
            });
        }
        class.sort_by(|a, b| a.apk_id.cmp(&b.apk_id));
        class.shuffle(&mut rng);
        let [tr, va, _] = ratios.cut(class.len())?;
        split.train.extend(class[..tr].iter().map(|s| (*s).clone()));
        split.validation.extend(class[tr..tr + va].iter().map(|s| (*s).clone()));
        split.test.extend(class[tr + va..].iter().map(|s| (*s).clone()));
    }
    Ok(split)
}
