//! Cascade thresholds: grid-tuned on validation probabilities to
//! maximize per-class F1, then applied as Aggression -> Loss -> Other.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t_aggression: f64,
    pub t_loss: f64,
}

/// Aggression if p_A > t_A; else Loss if p_L > t_L; else Other.
pub fn cascade_predict(p_aggression: f64, p_loss: f64, th: &Thresholds) -> Label {
    if p_aggression > th.t_aggression {
        Label::Aggression
    } else if p_loss > th.t_loss {
        Label::Loss
    } else {
        Label::Other
    }
}

/// Grid-searches t in {0.00, 0.01, ..., 1.00}. t_A maximizes Aggression
/// F1 under the cascade; given t_A, t_L maximizes Loss F1. Ties resolve
/// to the smallest threshold. A class with no gold positives gets
/// threshold 1.0.
pub fn tune_thresholds(
    val_probs_aggression: &[f64],
    val_probs_loss: &[f64],
    gold: &[Label],
) -> Result<Thresholds> {
    let n = gold.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty validation set".into()));
    }
    if val_probs_aggression.len() != n || val_probs_loss.len() != n {
        return Err(Error::DimensionMismatch(
            "probability lists must align with gold labels".into(),
        ));
    }

    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();

    let t_aggression = if gold.iter().any(|&g| g == Label::Aggression) {
        let mut best = (f64::NEG_INFINITY, 1.0);
        for &t in &grid {
            let f1 = class_f1(gold, Label::Aggression, |i| {
                val_probs_aggression[i] > t
            });
            if f1 > best.0 {
                best = (f1, t);
            }
        }
        best.1
    } else {
        log::warn!("no aggression examples in the validation set; t_A = 1.0");
        1.0
    };

    let t_loss = if gold.iter().any(|&g| g == Label::Loss) {
        let mut best = (f64::NEG_INFINITY, 1.0);
        for &t in &grid {
            let f1 = class_f1(gold, Label::Loss, |i| {
                val_probs_aggression[i] <= t_aggression && val_probs_loss[i] > t
            });
            if f1 > best.0 {
                best = (f1, t);
            }
        }
        best.1
    } else {
        log::warn!("no loss examples in the validation set; t_L = 1.0");
        1.0
    };

    Ok(Thresholds {
        t_aggression,
        t_loss,
    })
}

fn class_f1(gold: &[Label], class: Label, predicted: impl Fn(usize) -> bool) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (i, &g) in gold.iter().enumerate() {
        match (predicted(i), g == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}
