//! Stratified cross-validation splits, per-class metrics, majority-vote
//! run aggregation, and approximate-randomization significance testing
//! with Bonferroni correction.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::{Error, Result};

/// One cross-validation fold: 64% train, 16% validation, 20% test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class shuffling, round-robin test assignment, and a validation
/// carve-out that keeps every split within one example of the exact
/// 64/16/20 per-class proportions. Deterministic under `seed`.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<FoldPlan>> {
    if k < 2 {
        return Err(Error::InvalidInput("need at least 2 folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); Label::ALL.len()];
    for (i, &label) in labels.iter().enumerate() {
        let c = Label::ALL.iter().position(|&l| l == label).unwrap();
        by_class[c].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::InvalidInput(format!(
                "class {} has {} examples, fewer than k = {k}",
                Label::ALL[c],
                members.len()
            )));
        }
    }
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
    }

    let mut folds: Vec<FoldPlan> = (0..k)
        .map(|_| FoldPlan {
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
        })
        .collect();

    for members in &by_class {
        let n_c = members.len();
        for (fold, plan) in folds.iter_mut().enumerate() {
            // Round-robin test membership for this fold.
            let test_c: Vec<usize> = members
                .iter()
                .enumerate()
                .filter(|(j, _)| j % k == fold)
                .map(|(_, &i)| i)
                .collect();
            let rest: Vec<usize> = members
                .iter()
                .enumerate()
                .filter(|(j, _)| j % k != fold)
                .map(|(_, &i)| i)
                .collect();

            // Validation size: floor or ceil of 0.16 n_c, whichever
            // keeps the training split closest to 0.64 n_c.
            let target_val = 0.16 * n_c as f64;
            let target_train = 0.64 * n_c as f64;
            let v_floor = target_val.floor() as usize;
            let v_ceil = (target_val.ceil() as usize).min(rest.len());
            let err = |v: usize| ((rest.len() - v) as f64 - target_train).abs();
            let v_c = if err(v_floor) <= err(v_ceil) {
                v_floor
            } else {
                v_ceil
            };

            plan.validation.extend_from_slice(&rest[..v_c]);
            plan.train.extend_from_slice(&rest[v_c..]);
            plan.test.extend(test_c);
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class precision/recall/F1 (0/0 convention = 0) and macro-F1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: [ClassMetrics; 3],
    pub macro_f1: f64,
}

pub fn metrics(pred: &[Label], gold: &[Label]) -> Result<MetricsReport> {
    if pred.len() != gold.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("empty prediction list".into()));
    }
    let mut per_class = [ClassMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    }; 3];
    for (c, &class) in Label::ALL.iter().enumerate() {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (&p, &g) in pred.iter().zip(gold) {
            match (p == class, g == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if 2 * tp + fp + fn_ == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        };
        per_class[c] = ClassMetrics {
            precision,
            recall,
            f1,
        };
    }
    let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / 3.0;
    Ok(MetricsReport {
        per_class,
        macro_f1,
    })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-position modal label over multiple runs; ties resolve in
/// (Aggression, Loss, Other) order.
pub fn majority_vote(runs: &[Vec<Label>]) -> Result<Vec<Label>> {
    let Some(first) = runs.first() else {
        return Err(Error::InvalidInput("no prediction runs".into()));
    };
    let n = first.len();
    if runs.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(
            "prediction runs differ in length".into(),
        ));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut counts = [0usize; 3];
        for run in runs {
            let c = Label::ALL.iter().position(|&l| l == run[i]).unwrap();
            counts[c] += 1;
        }
        let mut best = 0;
        for c in 1..3 {
            if counts[c] > counts[best] {
                best = c;
            }
        }
        out.push(Label::ALL[best]);
    }
    Ok(out)
}

/// F1 of `class` for `pred` against `gold`; the test statistic selector.
pub fn class_f1(pred: &[Label], gold: &[Label], class: Label) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &g) in pred.iter().zip(gold) {
        match (p == class, g == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if 2 * tp + fp + fn_ == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Approximate randomization test on the absolute difference in class
/// F1. Each shuffle swaps the two systems' predictions per position
/// with probability 1/2; the p-value uses +1/+1 smoothing. Shards are
/// seeded independently, so results are reproducible for a fixed
/// thread count.
pub fn approx_randomization_test(
    preds_a: &[Label],
    preds_b: &[Label],
    gold: &[Label],
    class: Label,
    shuffles: usize,
    seed: u64,
    threads: usize,
) -> Result<f64> {
    let n = gold.len();
    if preds_a.len() != n || preds_b.len() != n {
        return Err(Error::DimensionMismatch(
            "prediction lists must align with gold".into(),
        ));
    }
    if shuffles == 0 {
        return Err(Error::InvalidInput("shuffles must be at least 1".into()));
    }
    let observed = (class_f1(preds_a, gold, class) - class_f1(preds_b, gold, class)).abs();

    let shard_count = threads.max(1).min(shuffles);
    let per_shard = shuffles / shard_count;
    let remainder = shuffles % shard_count;

    let run_shard = |shard: usize| -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shard as u64 + 1);
        let quota = per_shard + usize::from(shard < remainder);
        let mut a = vec![Label::Other; n];
        let mut b = vec![Label::Other; n];
        let mut exceed = 0usize;
        for _ in 0..quota {
            for i in 0..n {
                if rng.gen_bool(0.5) {
                    a[i] = preds_b[i];
                    b[i] = preds_a[i];
                } else {
                    a[i] = preds_a[i];
                    b[i] = preds_b[i];
                }
            }
            let stat = (class_f1(&a, gold, class) - class_f1(&b, gold, class)).abs();
            if stat >= observed {
                exceed += 1;
            }
        }
        exceed
    };

    let exceed: usize = if shard_count == 1 {
        run_shard(0)
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..shard_count)
                .map(|s| scope.spawn(move || run_shard(s)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).sum()
        })
    };

    Ok((exceed as f64 + 1.0) / (shuffles as f64 + 1.0))
}

/// Bonferroni adjustment: min(1, p * m).
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < 1 {
        return Err(Error::InvalidInput("comparison count must be >= 1".into()));
    }
    if m < p_values.len() {
        return Err(Error::InvalidInput(format!(
            "comparison count {m} smaller than {} p-values",
            p_values.len()
        )));
    }
    Ok(p_values.iter().map(|&p| (p * m as f64).min(1.0)).collect())
}

/// One significance comparison between two systems on one class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub candidate: String,
    pub class: Label,
    pub p_raw: f64,
    pub p_adjusted: f64,
}

/// Full evaluation output: per-model metrics plus pairwise comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: [ClassMetrics; 3],
    pub macro_f1: f64,
    pub comparisons: Vec<Comparison>,
}
