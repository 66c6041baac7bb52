//! Logistic regression over a signed hashed bag of words.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassWeights, ClassifyError};
use crate::hashing::fnv1a;
use crate::labeling::Label;

pub const HASH_DIM: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_epochs: 50,
            patience: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledText {
    pub apk_id: String,
    pub text: String,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

type SparseVec = Vec<(u32, f64)>;

/// Signed hashed term frequencies, L2-normalized, sorted by index.
pub fn hash_features(text: &str) -> SparseVec {
    let mut v: SparseVec = text
        .split_whitespace()
        .map(|tok| {
            let h = fnv1a(tok.as_bytes());
            let idx = (h & (HASH_DIM as u64 - 1)) as u32;
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            (idx, sign)
        })
        .collect();
    v.sort_by_key(|(i, _)| *i);
    let mut merged: SparseVec = Vec::with_capacity(v.len());
    for (i, x) in v {
        match merged.last_mut() {
            Some((j, y)) if *j == i => *y += x,
            _ => merged.push((i, x)),
        }
    }
    merged.retain(|(_, x)| *x != 0.0);
    let norm = merged.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, x) in &mut merged {
            *x /= norm;
        }
    }
    merged
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn target(label: Label) -> f64 {
    if label.is_positive() {
        1.0
    } else {
        0.0
    }
}

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    weights: Vec<f64>,
    bias: f64,
    pub config: TrainConfig,
    pub class_weights: ClassWeights,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    dim: usize,
    bias: f64,
    weights: Vec<(u32, f64)>,
    config: TrainConfig,
    class_weights: ClassWeights,
    best_epoch: usize,
    history: Vec<EpochRecord>,
}

impl Serialize for BaselineModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StoredModel {
            dim: HASH_DIM,
            bias: self.bias,
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i as u32, *w))
                .collect(),
            config: self.config.clone(),
            class_weights: self.class_weights,
            best_epoch: self.best_epoch,
            history: self.history.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BaselineModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let m = StoredModel::deserialize(d)?;
        if m.dim != HASH_DIM {
            return Err(serde::de::Error::custom(format!(
                "model dimension {} is not {HASH_DIM}",
                m.dim
            )));
        }
        let mut weights = vec![0.0; HASH_DIM];
        for (i, w) in m.weights {
            *weights
                .get_mut(i as usize)
                .ok_or_else(|| serde::de::Error::custom(format!("weight index {i} out of range")))? = w;
        }
        Ok(Self {
            weights,
            bias: m.bias,
            config: m.config,
            class_weights: m.class_weights,
            best_epoch: m.best_epoch,
            history: m.history,
        })
    }
}

impl BaselineModel {
    fn logit(&self, x: &SparseVec) -> f64 {
        self.bias + x.iter().map(|(i, v)| self.weights[*i as usize] * v).sum::<f64>()
    }

    /// Probability of the malicious class.
    pub fn score(&self, text: &str) -> f64 {
        sigmoid(self.logit(&hash_features(text)))
    }

    pub fn predict(&self, text: &str) -> Label {
        if self.score(text) >= 0.5 {
            Label::Malicious
        } else {
            Label::Benign
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn loss(&self, data: &[(SparseVec, Label)], cw: &ClassWeights) -> f64 {
        let (mut total, mut mass) = (0.0, 0.0);
        for (x, label) in data {
            let p = sigmoid(self.logit(x)).clamp(EPS, 1.0 - EPS);
            let y = target(*label);
            let w = cw.get(*label);
            total += -w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            mass += w;
        }
        if mass > 0.0 {
            total / mass
        } else {
            0.0
        }
    }
}

/// Per-sample SGD on class-weighted log loss, shuffling the training set
/// with `cfg.seed` each epoch. Training stops once validation loss has not
/// improved for `max(patience, 1)` consecutive epochs, and the best
/// epoch's parameters are returned.
pub fn train_baseline(
    train: &[LabeledText],
    val: &[LabeledText],
    weights: &ClassWeights,
    cfg: &TrainConfig,
) -> Result<BaselineModel, ClassifyError> {
    if train.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    let featurize = |d: &[LabeledText]| -> Vec<(SparseVec, Label)> {
        d.iter().map(|t| (hash_features(&t.text), t.label)).collect()
    };
    let train_x = featurize(train);
    let val_x = featurize(val);
    let monitor = if val_x.is_empty() { &train_x } else { &val_x };

    let mut model = BaselineModel {
        weights: vec![0.0; HASH_DIM],
        bias: 0.0,
        config: cfg.clone(),
        class_weights: *weights,
        best_epoch: 0,
        history: Vec::new(),
    };
    let mut best: Option<(f64, Vec<f64>, f64, usize)> = None;
    let mut since_best = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_x.len()).collect();

    for epoch in 1..=cfg.max_epochs.max(1) {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, label) = &train_x[i];
            let g = weights.get(*label) * (sigmoid(model.logit(x)) - target(*label)) * cfg.learning_rate;
            for (j, v) in x {
                model.weights[*j as usize] -= g * v;
            }
            model.bias -= g;
        }
        let train_loss = model.loss(&train_x, weights);
        let val_loss = model.loss(monitor, weights);
        model.history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        tracing::debug!(stage = "train", epoch, train_loss, val_loss);
        if best.as_ref().is_none_or(|(b, ..)| val_loss < *b) {
            best = Some((val_loss, model.weights.clone(), model.bias, epoch));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience.max(1) {
                break;
            }
        }
    }
    let (_, w, b, epoch) = best.expect("at least one epoch ran");
    model.weights = w;
    model.bias = b;
    model.best_epoch = epoch;
    Ok(model)
}
