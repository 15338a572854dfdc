//! The word-level CNN with context concatenation, the linear baseline,
//! training loops, threshold tuning, and the 3-way cascade predictor.

mod checkpoint;
mod cnn;
mod linear;
mod thresholds;
mod train;

use crate::corpus::{EncodedTweet, Label};
use crate::{Error, Result};

pub use checkpoint::{Checkpoint, ModelKind, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use cnn::{CnnConfig, CnnParams, DENSE_DIM, N_FILTERS};
pub use linear::{linear_features, train_linear, LinearConfig, LinearModel, LINEAR_FEATURE_DIM};
pub use thresholds::{cascade_predict, tune_thresholds, Thresholds};
pub use train::{train_cnn, Optimizer, StopMetric, TrainConfig, TrainLog};

/// One training example: an encoded tweet, its optional flattened
/// context features, and the gold label.
#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub encoded: EncodedTweet,
    pub context: Option<Vec<f64>>,
    pub label: Label,
}

/// A dataset with consistent context presence across examples.
#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    examples: Vec<LabeledExample>,
}

impl LabeledDataset {
    pub fn new(examples: Vec<LabeledExample>) -> Result<LabeledDataset> {
        let ctx_dim = match examples.first() {
            None => 0,
            Some(e) => e.context.as_ref().map_or(0, |c| c.len()),
        };
        for (i, e) in examples.iter().enumerate() {
            let dim = e.context.as_ref().map_or(0, |c| c.len());
            if dim != ctx_dim {
                return Err(Error::DimensionMismatch(format!(
                    "example {i} has context dim {dim}, expected {ctx_dim}"
                )));
            }
        }
        Ok(LabeledDataset { examples })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// 0 when the dataset carries no context features.
    pub fn context_dim(&self) -> usize {
        self.examples
            .first()
            .and_then(|e| e.context.as_ref())
            .map_or(0, |c| c.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SEQ_LEN;

    #[test]
    fn dataset_rejects_mixed_context_presence() {
        let enc = EncodedTweet([0; SEQ_LEN]);
        let with = LabeledExample {
            encoded: enc.clone(),
            context: Some(vec![0.0; 4]),
            label: Label::Other,
        };
        let without = LabeledExample {
            encoded: enc,
            context: None,
            label: Label::Other,
        };
        assert!(LabeledDataset::new(vec![with.clone(), without]).is_err());
        let ds = LabeledDataset::new(vec![with.clone(), with]).unwrap();
        assert_eq!(ds.context_dim(), 4);
    }
}
