//! One-vs-rest CNN training: mini-batch adaptive-moment SGD with early
//! stopping on the validation set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Label;
use crate::embeddings::EmbeddingMatrix;
use crate::{Error, Result};

use super::cnn::{cnn_backward, cnn_forward_cached, nll, CnnConfig, CnnGrads, CnnParams};
use super::LabeledDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
    Nadam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMetric {
    /// Mean validation NLL (lower is better). The main criterion.
    ValLoss,
    /// Validation F1 of the target class at p > 0.5 (higher is better).
    ValF1,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated before stopping.
    pub patience: usize,
    pub optimizer: Optimizer,
    pub stop_metric: StopMetric,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.002,
            batch_size: 32,
            max_epochs: 30,
            patience: 5,
            optimizer: Optimizer::Adam,
            stop_metric: StopMetric::ValLoss,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainLog {
    pub train_loss: Vec<f64>,
    /// Per-epoch validation metric in "lower is better" orientation.
    pub val_metric: Vec<f64>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub epochs_run: usize,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct AdamState {
    m: CnnGrads,
    v: CnnGrads,
    t: u64,
}

/// Trains a binary one-vs-rest CNN for `target` vs the rest, returning
/// the best-validation parameters. Deterministic for a fixed seed.
pub fn train_cnn(
    train: &LabeledDataset,
    val: &LabeledDataset,
    target: Label,
    init_emb: &EmbeddingMatrix,
    cnn_cfg: &CnnConfig,
    cfg: &TrainConfig,
) -> Result<(CnnParams, TrainLog)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidInput("empty train or validation split".into()));
    }
    if !train.examples().iter().any(|e| e.label == target) {
        return Err(Error::InvalidInput(format!(
            "target class {target} absent from the training split"
        )));
    }
    let ctx_dim = train.context_dim();
    if val.context_dim() != ctx_dim {
        return Err(Error::DimensionMismatch(
            "train and validation context dims differ".into(),
        ));
    }
    let cnn_cfg = CnnConfig {
        context_dim: ctx_dim,
        ..cnn_cfg.clone()
    };

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = CnnParams::init(init_emb, &cnn_cfg, &mut init_rng);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(2);

    let mut grads = CnnGrads::zeros_like(&params);
    let mut adam = AdamState {
        m: CnnGrads::zeros_like(&params),
        v: CnnGrads::zeros_like(&params),
        t: 0,
    };

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best_params = params.clone();
    let mut best_metric = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut bad_epochs = 0usize;
    let mut log = TrainLog {
        train_loss: Vec::new(),
        val_metric: Vec::new(),
        best_epoch: 0,
        epochs_run: 0,
    };

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.reset(&params);
            for &i in batch {
                let ex = &train.examples()[i];
                let y = if ex.label == target { 1.0 } else { 0.0 };
                let cache = cnn_forward_cached(
                    &params,
                    &ex.encoded,
                    ex.context.as_deref(),
                    true,
                    &mut dropout_rng,
                )?;
                epoch_loss += nll(cache.z, y);
                cnn_backward(&params, &ex.encoded, ex.context.as_deref(), y, &cache, &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            adam.t += 1;
            apply_update(&mut params, &grads, &mut adam, scale, cfg);
        }
        log.train_loss.push(epoch_loss / train.len() as f64);

        let metric = validation_metric(&params, val, target, cfg.stop_metric)?;
        log.val_metric.push(metric);
        log.epochs_run = epoch;

        if metric < best_metric {
            best_metric = metric;
            best_params = params.clone();
            best_epoch = epoch;
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs > cfg.patience {
                break;
            }
        }
    }
    log.best_epoch = best_epoch;
    Ok((best_params, log))
}

/// Validation metric in lower-is-better orientation.
fn validation_metric(
    params: &CnnParams,
    val: &LabeledDataset,
    target: Label,
    metric: StopMetric,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0); // unused in eval mode
    match metric {
        StopMetric::ValLoss => {
            let mut loss = 0.0;
            for ex in val.examples() {
                let y = if ex.label == target { 1.0 } else { 0.0 };
                let cache =
                    cnn_forward_cached(params, &ex.encoded, ex.context.as_deref(), false, &mut rng)?;
                loss += nll(cache.z, y);
            }
            Ok(loss / val.len() as f64)
        }
        StopMetric::ValF1 => {
            let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
            for ex in val.examples() {
                let gold = ex.label == target;
                let cache =
                    cnn_forward_cached(params, &ex.encoded, ex.context.as_deref(), false, &mut rng)?;
                let pred = cache.p > 0.5;
                match (pred, gold) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            let denom = 2 * tp + fp + fn_;
            let f1 = if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            };
            Ok(-f1)
        }
    }
}

fn apply_update(
    params: &mut CnnParams,
    grads: &CnnGrads,
    adam: &mut AdamState,
    scale: f64,
    cfg: &TrainConfig,
) {
    let t = adam.t;
    let mut step = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        adam_tensor(p, g, m, v, scale, t, cfg);
    };
    step(&mut params.conv1_w, &grads.conv1_w, &mut adam.m.conv1_w, &mut adam.v.conv1_w);
    step(&mut params.conv1_b, &grads.conv1_b, &mut adam.m.conv1_b, &mut adam.v.conv1_b);
    step(&mut params.conv2_w, &grads.conv2_w, &mut adam.m.conv2_w, &mut adam.v.conv2_w);
    step(&mut params.conv2_b, &grads.conv2_b, &mut adam.m.conv2_b, &mut adam.v.conv2_b);
    step(&mut params.dense_w, &grads.dense_w, &mut adam.m.dense_w, &mut adam.v.dense_w);
    step(&mut params.dense_b, &grads.dense_b, &mut adam.m.dense_b, &mut adam.v.dense_b);
    step(&mut params.out_w, &grads.out_w, &mut adam.m.out_w, &mut adam.v.out_w);

    let mut out_b = [params.out_b];
    let mut m_b = [adam.m.out_b];
    let mut v_b = [adam.v.out_b];
    adam_tensor(&mut out_b, &[grads.out_b], &mut m_b, &mut v_b, scale, t, cfg);
    params.out_b = out_b[0];
    adam.m.out_b = m_b[0];
    adam.v.out_b = v_b[0];

    // Embedding table; the PAD row stays frozen at zero.
    let d = params.emb_dim;
    adam_tensor(
        &mut params.emb[d..],
        &grads.emb[d..],
        &mut adam.m.emb[d..],
        &mut adam.v.emb[d..],
        scale,
        t,
        cfg,
    );
}

fn adam_tensor(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    scale: f64,
    t: u64,
    cfg: &TrainConfig,
) {
    let lr = cfg.learning_rate;
    let bc1 = 1.0 - BETA1.powi(t as i32);
    let bc2 = 1.0 - BETA2.powi(t as i32);
    match cfg.optimizer {
        Optimizer::Adam => {
            for i in 0..p.len() {
                let gi = g[i] * scale;
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        Optimizer::Nadam => {
            for i in 0..p.len() {
                let gi = g[i] * scale;
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                let m_nesterov = BETA1 * m_hat + (1.0 - BETA1) * gi / bc1;
                p[i] -= lr * m_nesterov / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}
