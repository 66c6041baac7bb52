//! Dataset splitting, class weighting, the baseline classifier, the
//! external classifier protocol and evaluation metrics.

pub mod baseline;
pub mod external;
pub mod metrics;
pub mod split;
pub mod weights;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeling::{Label, LabeledSample};

pub use baseline::{hash_features, train_baseline, BaselineModel, EpochRecord, LabeledText, TrainConfig, HASH_DIM};
pub use external::{classify_external, ExternalEndpoint, Prediction};
pub use metrics::{
    compare_reports, compute_metrics, partition_digest, ConfusionMatrix, MetricsReport, ReportComparison,
};
pub use split::{stratified_split, DatasetSplit, SplitRatios};
pub use weights::{class_weights, weighted_sampler, ClassWeights};

#[derive(Error, Debug)]
pub enum ClassifyError {
    #[error("class {label} has {found} samples, need at least {needed}")]
    TooFewSamples { label: Label, found: usize, needed: usize },
    #[error("split ratios must be non-negative and sum to 1: {0:?}")]
    InvalidRatios(SplitRatios),
    #[error("no samples of class {0}")]
    MissingClass(Label),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("no predictions to evaluate")]
    NoPredictions,
    #[error("reports were computed on different test partitions")]
    PartitionMismatch,
    #[error("external classifier protocol: {0}")]
    ProtocolError(String),
    #[error("external classifier: {missing} responses missing after {after:?}")]
    Timeout { missing: usize, after: Duration },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub apk_id: String,
    pub label: Label,
}

impl Sample {
    pub fn new(apk_id: impl Into<String>, label: Label) -> Self {
        Self {
            apk_id: apk_id.into(),
            label,
        }
    }
}

impl From<&LabeledSample> for Sample {
    fn from(s: &LabeledSample) -> Self {
        Self::new(s.apk_id.clone(), s.label)
    }
}
