//! Word-level CNN: trainable embedding table, 1-D convolutions of
//! widths 1 and 2 with 200 filters each, global max pooling, a 256-unit
//! dense layer, optional context concatenation, and a sigmoid output.
//!
//! Dropout (inverted convention) follows the embedding and the pooled
//! convolution outputs during training only. Padding rows stay zero: the
//! PAD embedding row is frozen, and positions past the tweet length
//! reduce to the convolution biases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{EncodedTweet, PAD_INDEX, SEQ_LEN};
use crate::embeddings::EmbeddingMatrix;
use crate::vecops::{axpy, dot, sigmoid, softplus};
use crate::{Error, Result};

pub const N_FILTERS: usize = 200;
pub const DENSE_DIM: usize = 256;

#[derive(Debug, Clone)]
pub struct CnnConfig {
    pub emb_dim: usize,
    pub n_filters: usize,
    pub dense_dim: usize,
    /// 0 for the plain model, 602 with the full context bundle.
    pub context_dim: usize,
    pub dropout: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            emb_dim: 300,
            n_filters: N_FILTERS,
            dense_dim: DENSE_DIM,
            context_dim: 0,
            dropout: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub n_filters: usize,
    pub dense_dim: usize,
    pub context_dim: usize,
    pub dropout: f64,
    /// vocab_size x emb_dim; the PAD row is frozen at zero.
    pub emb: Vec<f64>,
    /// n_filters x emb_dim
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    /// n_filters x 2*emb_dim
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    /// dense_dim x 2*n_filters
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
    /// dense_dim + context_dim
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

impl CnnParams {
    /// Initializes weights Glorot-uniform and the embedding table from a
    /// pretrained matrix (PAD row zeroed).
    pub fn init(init_emb: &EmbeddingMatrix, cfg: &CnnConfig, rng: &mut ChaCha8Rng) -> CnnParams {
        let vocab_size = init_emb.n_rows();
        let d = cfg.emb_dim;
        assert_eq!(init_emb.dim(), d, "embedding dim mismatch");

        let mut emb = vec![0.0; vocab_size * d];
        for i in 0..vocab_size {
            emb[i * d..(i + 1) * d].copy_from_slice(init_emb.row(i as u32));
        }
        emb[..d].fill(0.0); // PAD row

        let glorot = |rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, n: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-limit..limit)).collect::<Vec<f64>>()
        };

        let f = cfg.n_filters;
        let h = cfg.dense_dim;
        CnnParams {
            vocab_size,
            emb_dim: d,
            n_filters: f,
            dense_dim: h,
            context_dim: cfg.context_dim,
            dropout: cfg.dropout,
            emb,
            conv1_w: glorot(rng, d, f, f * d),
            conv1_b: vec![0.0; f],
            conv2_w: glorot(rng, 2 * d, f, f * 2 * d),
            conv2_b: vec![0.0; f],
            dense_w: glorot(rng, 2 * f, h, h * 2 * f),
            dense_b: vec![0.0; h],
            out_w: glorot(rng, h + cfg.context_dim, 1, h + cfg.context_dim),
            out_b: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.emb.iter().all(|v| v.is_finite())
            && self.conv1_w.iter().all(|v| v.is_finite())
            && self.conv2_w.iter().all(|v| v.is_finite())
            && self.dense_w.iter().all(|v| v.is_finite())
            && self.out_w.iter().all(|v| v.is_finite())
            && self.out_b.is_finite()
    }
}

/// Max-pool winner per filter: a real position or the all-padding
/// "virtual" position whose pre-activation is the bias alone.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Winner {
    pub pos: Option<usize>,
    pub pre_relu: f64,
}

#[derive(Debug)]
pub(crate) struct CnnCache {
    pub len: usize,
    /// len x emb_dim rows after embedding dropout.
    pub x: Vec<f64>,
    /// Dropout multipliers for x (empty in eval mode).
    pub emb_mask: Vec<f64>,
    pub win1: Vec<Winner>,
    pub win2: Vec<Winner>,
    /// 2*n_filters, after ReLU and pooled dropout.
    pub pooled: Vec<f64>,
    /// Dropout multipliers for pooled (empty in eval mode).
    pub pool_mask: Vec<f64>,
    pub h_pre: Vec<f64>,
    pub h: Vec<f64>,
    pub z: f64,
    pub p: f64,
}

/// Forward pass; returns the positive-class probability and the
/// activations needed for backprop. In eval mode dropout is identity and
/// the RNG is never consulted.
pub(crate) fn cnn_forward_cached(
    params: &CnnParams,
    encoded: &EncodedTweet,
    ctx: Option<&[f64]>,
    train_mode: bool,
    rng: &mut ChaCha8Rng,
) -> Result<CnnCache> {
    let ctx_len = ctx.map_or(0, |c| c.len());
    if ctx_len != params.context_dim {
        return Err(Error::DimensionMismatch(format!(
            "params expect context_dim {}, got {ctx_len}",
            params.context_dim
        )));
    }
    let d = params.emb_dim;
    let nf = params.n_filters;
    let indices = &encoded.0;
    let len = indices.iter().take_while(|&&i| i != PAD_INDEX).count();
    debug_assert!(indices[len..].iter().all(|&i| i == PAD_INDEX));

    // Embedding lookup with inverted dropout.
    let keep = 1.0 - params.dropout;
    let mut x = vec![0.0; len * d];
    let mut emb_mask = Vec::new();
    if train_mode && params.dropout > 0.0 {
        emb_mask = vec![0.0; len * d];
        for m in emb_mask.iter_mut() {
            if rng.gen::<f64>() < keep {
                *m = 1.0 / keep;
            }
        }
    }
    for t in 0..len {
        let row = &params.emb[indices[t] as usize * d..(indices[t] as usize + 1) * d];
        let dst = &mut x[t * d..(t + 1) * d];
        dst.copy_from_slice(row);
        if !emb_mask.is_empty() {
            for (v, m) in dst.iter_mut().zip(&emb_mask[t * d..(t + 1) * d]) {
                *v *= m;
            }
        }
    }

    // Width-1 convolution + global max pool.
    let mut win1 = Vec::with_capacity(nf);
    for f in 0..nf {
        let w = &params.conv1_w[f * d..(f + 1) * d];
        let b = params.conv1_b[f];
        let mut best = if len < SEQ_LEN {
            Winner { pos: None, pre_relu: b }
        } else {
            Winner { pos: Some(0), pre_relu: dot(&x[..d], w) + b }
        };
        let start = if best.pos.is_some() { 1 } else { 0 };
        for t in start..len {
            let v = dot(&x[t * d..(t + 1) * d], w) + b;
            if v > best.pre_relu {
                best = Winner { pos: Some(t), pre_relu: v };
            }
        }
        win1.push(best);
    }

    // Width-2 convolution (valid padding, 49 positions).
    let n_pos2 = SEQ_LEN - 1;
    let real2 = len.min(n_pos2);
    let mut win2 = Vec::with_capacity(nf);
    let zero_row = vec![0.0; d];
    for f in 0..nf {
        let w = &params.conv2_w[f * 2 * d..(f + 1) * 2 * d];
        let b = params.conv2_b[f];
        let mut best = if len < n_pos2 {
            Winner { pos: None, pre_relu: b }
        } else {
            Winner { pos: None, pre_relu: f64::NEG_INFINITY }
        };
        for t in 0..real2 {
            let left = &x[t * d..(t + 1) * d];
            let right = if t + 1 < len {
                &x[(t + 1) * d..(t + 2) * d]
            } else {
                &zero_row
            };
            let v = dot(left, &w[..d]) + dot(right, &w[d..]) + b;
            if v > best.pre_relu {
                best = Winner { pos: Some(t), pre_relu: v };
            }
        }
        win2.push(best);
    }

    // ReLU, pooled dropout, concatenate.
    let mut pooled = vec![0.0; 2 * nf];
    for f in 0..nf {
        pooled[f] = win1[f].pre_relu.max(0.0);
        pooled[nf + f] = win2[f].pre_relu.max(0.0);
    }
    let mut pool_mask = Vec::new();
    if train_mode && params.dropout > 0.0 {
        pool_mask = vec![0.0; 2 * nf];
        for m in pool_mask.iter_mut() {
            if rng.gen::<f64>() < keep {
                *m = 1.0 / keep;
            }
        }
        for (v, m) in pooled.iter_mut().zip(&pool_mask) {
            *v *= m;
        }
    }

    // Dense layer with ReLU.
    let hd = params.dense_dim;
    let mut h_pre = vec![0.0; hd];
    for j in 0..hd {
        h_pre[j] = dot(&pooled, &params.dense_w[j * 2 * nf..(j + 1) * 2 * nf]) + params.dense_b[j];
    }
    let h: Vec<f64> = h_pre.iter().map(|&v| v.max(0.0)).collect();

    // Output with optional context concatenation.
    let mut z = dot(&h, &params.out_w[..hd]) + params.out_b;
    if let Some(ctx) = ctx {
        z += dot(ctx, &params.out_w[hd..]);
    }
    let p = sigmoid(z);

    Ok(CnnCache {
        len,
        x,
        emb_mask,
        win1,
        win2,
        pooled,
        pool_mask,
        h_pre,
        h,
        z,
        p,
    })
}

/// Output probability only.
pub fn cnn_forward(
    params: &CnnParams,
    encoded: &EncodedTweet,
    ctx: Option<&[f64]>,
    train_mode: bool,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    Ok(cnn_forward_cached(params, encoded, ctx, train_mode, rng)?.p)
}

/// Negative log likelihood of the gold binary label.
pub(crate) fn nll(z: f64, y: f64) -> f64 {
    if y > 0.5 {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// Gradient accumulator matching the parameter layout. The embedding
/// gradient is dense but only rows listed in `touched` are nonzero.
#[derive(Debug, Clone)]
pub struct CnnGrads {
    pub emb: Vec<f64>,
    pub touched: Vec<u32>,
    seen: Vec<bool>,
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

impl CnnGrads {
    pub fn zeros_like(params: &CnnParams) -> CnnGrads {
        CnnGrads {
            emb: vec![0.0; params.emb.len()],
            touched: Vec::new(),
            seen: vec![false; params.vocab_size],
            conv1_w: vec![0.0; params.conv1_w.len()],
            conv1_b: vec![0.0; params.conv1_b.len()],
            conv2_w: vec![0.0; params.conv2_w.len()],
            conv2_b: vec![0.0; params.conv2_b.len()],
            dense_w: vec![0.0; params.dense_w.len()],
            dense_b: vec![0.0; params.dense_b.len()],
            out_w: vec![0.0; params.out_w.len()],
            out_b: 0.0,
        }
    }

    pub fn reset(&mut self, params: &CnnParams) {
        let d = params.emb_dim;
        for &row in &self.touched {
            self.emb[row as usize * d..(row as usize + 1) * d].fill(0.0);
            self.seen[row as usize] = false;
        }
        self.touched.clear();
        self.conv1_w.fill(0.0);
        self.conv1_b.fill(0.0);
        self.conv2_w.fill(0.0);
        self.conv2_b.fill(0.0);
        self.dense_w.fill(0.0);
        self.dense_b.fill(0.0);
        self.out_w.fill(0.0);
        self.out_b = 0.0;
    }
}

/// Accumulates dLoss/dParams for one example into `grads`.
pub(crate) fn cnn_backward(
    params: &CnnParams,
    encoded: &EncodedTweet,
    ctx: Option<&[f64]>,
    y: f64,
    cache: &CnnCache,
    grads: &mut CnnGrads,
) {
    let d = params.emb_dim;
    let nf = params.n_filters;
    let hd = params.dense_dim;
    let indices = &encoded.0;
    let len = cache.len;

    let dz = cache.p - y;

    // Output layer.
    grads.out_b += dz;
    axpy(&mut grads.out_w[..hd], dz, &cache.h);
    if let Some(ctx) = ctx {
        axpy(&mut grads.out_w[hd..], dz, ctx);
    }

    // Dense layer.
    let mut d_pooled = vec![0.0; 2 * nf];
    for j in 0..hd {
        if cache.h_pre[j] <= 0.0 {
            continue;
        }
        let dh = dz * params.out_w[j];
        grads.dense_b[j] += dh;
        axpy(
            &mut grads.dense_w[j * 2 * nf..(j + 1) * 2 * nf],
            dh,
            &cache.pooled,
        );
        axpy(
            &mut d_pooled,
            dh,
            &params.dense_w[j * 2 * nf..(j + 1) * 2 * nf],
        );
    }

    // Pooled dropout.
    if !cache.pool_mask.is_empty() {
        for (g, m) in d_pooled.iter_mut().zip(&cache.pool_mask) {
            *g *= m;
        }
    }

    // Max-pool winners back through ReLU into the convolutions.
    let mut d_x = vec![0.0; len * d];
    for f in 0..nf {
        let w1 = &cache.win1[f];
        if w1.pre_relu > 0.0 {
            let g = d_pooled[f];
            if g != 0.0 {
                grads.conv1_b[f] += g;
                if let Some(t) = w1.pos {
                    axpy(
                        &mut grads.conv1_w[f * d..(f + 1) * d],
                        g,
                        &cache.x[t * d..(t + 1) * d],
                    );
                    axpy(
                        &mut d_x[t * d..(t + 1) * d],
                        g,
                        &params.conv1_w[f * d..(f + 1) * d],
                    );
                }
            }
        }
        let w2 = &cache.win2[f];
        if w2.pre_relu > 0.0 {
            let g = d_pooled[nf + f];
            if g != 0.0 {
                grads.conv2_b[f] += g;
                if let Some(t) = w2.pos {
                    let wrow = &params.conv2_w[f * 2 * d..(f + 1) * 2 * d];
                    axpy(
                        &mut grads.conv2_w[f * 2 * d..f * 2 * d + d],
                        g,
                        &cache.x[t * d..(t + 1) * d],
                    );
                    axpy(&mut d_x[t * d..(t + 1) * d], g, &wrow[..d]);
                    if t + 1 < len {
                        axpy(
                            &mut grads.conv2_w[f * 2 * d + d..(f + 1) * 2 * d],
                            g,
                            &cache.x[(t + 1) * d..(t + 2) * d],
                        );
                        axpy(&mut d_x[(t + 1) * d..(t + 2) * d], g, &wrow[d..]);
                    }
                }
            }
        }
    }

    // Embedding rows through the embedding dropout; PAD is frozen.
    for t in 0..len {
        let tok = indices[t];
        let dst = &mut grads.emb[tok as usize * d..(tok as usize + 1) * d];
        let src = &d_x[t * d..(t + 1) * d];
        if cache.emb_mask.is_empty() {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += b;
            }
        } else {
            let mask = &cache.emb_mask[t * d..(t + 1) * d];
            for ((a, b), m) in dst.iter_mut().zip(src).zip(mask) {
                *a += b * m;
            }
        }
        if !grads.seen[tok as usize] {
            grads.seen[tok as usize] = true;
            grads.touched.push(tok);
        }
    }
}
