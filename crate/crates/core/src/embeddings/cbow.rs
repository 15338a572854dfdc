//! CBOW embeddings with negative sampling, trained by SGD with a
//! linearly decaying learning rate. Single-thread mode is
//! bit-reproducible for a fixed seed; the optional lock-free parallel
//! mode trades determinism for speed.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::vecops::{axpy, dot, sigmoid, softplus};
use crate::{Error, Result};

use super::{EmbeddingKind, EmbeddingMatrix};

#[derive(Debug, Clone)]
pub struct CbowConfig {
    pub dim: usize,
    pub window: usize,
    pub min_count: u64,
    pub epochs: usize,
    /// Negative samples per center token, drawn from the unigram^0.75
    /// distribution.
    pub negative: usize,
    pub initial_lr: f64,
    pub seed: u64,
    /// 1 = deterministic; >= 2 enables the lock-free parallel mode.
    pub threads: usize,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dim: 300,
            window: 5,
            min_count: 5,
            epochs: 20,
            negative: 5,
            initial_lr: 0.025,
            seed: 1,
            threads: 1,
        }
    }
}

#[derive(Debug)]
pub struct CbowOutput {
    pub embeddings: EmbeddingMatrix,
    /// Mean per-center loss for each epoch.
    pub epoch_losses: Vec<f64>,
    /// Tokens that met the min-count threshold and were trained.
    pub trained_tokens: usize,
}

/// Trains CBOW input embeddings over encoded (unpadded) token sequences.
/// Rows of the output matrix for tokens below `min_count` are zero.
pub fn train_cbow(corpus: &[Vec<u32>], vocab_size: usize, cfg: &CbowConfig) -> Result<CbowOutput> {
    let mut token_counts = vec![0u64; vocab_size];
    for seq in corpus {
        for &t in seq {
            token_counts[t as usize] += 1;
        }
    }

    // Compact the trainable vocabulary.
    let mut compact_of = vec![u32::MAX; vocab_size];
    let mut tokens_of = Vec::new();
    for (vid, &c) in token_counts.iter().enumerate() {
        if c >= cfg.min_count && c > 0 {
            compact_of[vid] = tokens_of.len() as u32;
            tokens_of.push(vid as u32);
        }
    }
    let n = tokens_of.len();
    if n == 0 {
        return Err(Error::NoTrainableVocab);
    }

    let sentences: Vec<Vec<u32>> = corpus
        .iter()
        .map(|seq| {
            seq.iter()
                .filter_map(|&t| {
                    let c = compact_of[t as usize];
                    (c != u32::MAX).then_some(c)
                })
                .collect()
        })
        .filter(|s: &Vec<u32>| !s.is_empty())
        .collect();
    let total_words: u64 = sentences.iter().map(|s| s.len() as u64).sum();

    // Cumulative unigram^0.75 noise distribution over compact ids.
    let mut noise_cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &vid in &tokens_of {
        acc += (token_counts[vid as usize] as f64).powf(0.75);
        noise_cum.push(acc);
    }

    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut syn0 = vec![0.0f64; n * dim];
    for v in syn0.iter_mut() {
        *v = (rng.gen::<f64>() - 0.5) / dim as f64;
    }
    let mut syn1 = vec![0.0f64; n * dim];

    let epoch_losses = if cfg.threads <= 1 {
        run_epochs(
            &mut syn0,
            &mut syn1,
            dim,
            &noise_cum,
            &sentences,
            total_words,
            cfg,
            &mut rng,
        )
    } else {
        train_parallel(&mut syn0, syn1, dim, &sentences, total_words, &noise_cum, cfg)
    };

    // Scatter compact rows into the vocabulary-aligned matrix.
    let mut matrix = EmbeddingMatrix::zeros(EmbeddingKind::Cbow, vocab_size, dim);
    for (cid, &vid) in tokens_of.iter().enumerate() {
        matrix
            .row_mut(vid)
            .copy_from_slice(&syn0[cid * dim..(cid + 1) * dim]);
    }
    Ok(CbowOutput {
        embeddings: matrix,
        epoch_losses,
        trained_tokens: n,
    })
}

/// One center position: averages the context rows into `h`, scores the
/// positive target and the negatives, and fills `dh` (= -dL/dh) and the
/// per-target signed errors in `gs`. Pure; the caller applies updates.
#[inline]
pub(crate) fn forward_backward(
    syn0: &[f64],
    syn1: &[f64],
    dim: usize,
    center: u32,
    ctx: &[u32],
    negatives: &[u32],
    h: &mut [f64],
    dh: &mut [f64],
    gs: &mut Vec<(u32, f64)>,
) -> f64 {
    h.fill(0.0);
    for &c in ctx {
        axpy(h, 1.0, &syn0[c as usize * dim..(c as usize + 1) * dim]);
    }
    let inv = 1.0 / ctx.len() as f64;
    for v in h.iter_mut() {
        *v *= inv;
    }

    dh.fill(0.0);
    gs.clear();
    let mut loss = 0.0;
    for (i, &target) in std::iter::once(&center).chain(negatives).enumerate() {
        let row = &syn1[target as usize * dim..(target as usize + 1) * dim];
        let f = dot(h, row);
        let (label, sample_loss) = if i == 0 {
            (1.0, softplus(-f))
        } else {
            (0.0, softplus(f))
        };
        loss += sample_loss;
        let g = label - sigmoid(f);
        axpy(dh, g, row);
        gs.push((target, g));
    }
    loss
}

#[allow(clippy::too_many_arguments)]
fn run_epochs(
    syn0: &mut [f64],
    syn1: &mut [f64],
    dim: usize,
    noise_cum: &[f64],
    sentences: &[Vec<u32>],
    total_words: u64,
    cfg: &CbowConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut h = vec![0.0; dim];
    let mut dh = vec![0.0; dim];
    let mut gs = Vec::with_capacity(cfg.negative + 1);
    let mut ctx = Vec::with_capacity(2 * cfg.window);
    let mut negs = Vec::with_capacity(cfg.negative);
    let mut processed = 0u64;
    let schedule_total = (cfg.epochs as u64 * total_words + 1) as f64;

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut centers = 0u64;
        for sent in sentences {
            for t in 0..sent.len() {
                processed += 1;
                gather_context(sent, t, cfg.window, &mut ctx);
                if ctx.is_empty() {
                    continue;
                }
                let alpha =
                    cfg.initial_lr * (1.0 - processed as f64 / schedule_total).max(1e-4);
                negs.clear();
                for _ in 0..cfg.negative {
                    let s = sample_noise(noise_cum, rng);
                    if s != sent[t] {
                        negs.push(s);
                    }
                }
                let loss = forward_backward(
                    syn0, syn1, dim, sent[t], &ctx, &negs, &mut h, &mut dh, &mut gs,
                );
                for &(target, g) in gs.iter() {
                    let row = &mut syn1[target as usize * dim..(target as usize + 1) * dim];
                    axpy(row, alpha * g, &h);
                }
                let step = alpha / ctx.len() as f64;
                for &c in &ctx {
                    let row = &mut syn0[c as usize * dim..(c as usize + 1) * dim];
                    axpy(row, step, &dh);
                }
                loss_sum += loss;
                centers += 1;
            }
        }
        epoch_losses.push(if centers > 0 {
            loss_sum / centers as f64
        } else {
            0.0
        });
    }
    epoch_losses
}

#[inline]
fn gather_context(sent: &[u32], t: usize, window: usize, ctx: &mut Vec<u32>) {
    ctx.clear();
    let lo = t.saturating_sub(window);
    let hi = (t + window).min(sent.len() - 1);
    for (pos, &tok) in sent[lo..=hi].iter().enumerate() {
        if lo + pos != t {
            ctx.push(tok);
        }
    }
}

#[inline]
fn sample_noise(noise_cum: &[f64], rng: &mut ChaCha8Rng) -> u32 {
    let total = *noise_cum.last().unwrap();
    let u = rng.gen::<f64>() * total;
    noise_cum.partition_point(|&c| c <= u) as u32
}

/// Hogwild-style parallel training: parameters live in relaxed atomics,
/// sentence chunks are trained concurrently, and racing updates are
/// accepted. Not deterministic; excluded from the test contract.
fn train_parallel(
    syn0_out: &mut Vec<f64>,
    syn1_init: Vec<f64>,
    dim: usize,
    sentences: &[Vec<u32>],
    total_words: u64,
    noise_cum: &[f64],
    cfg: &CbowConfig,
) -> Vec<f64> {
    let syn0: Vec<AtomicU64> = syn0_out.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let syn1: Vec<AtomicU64> = syn1_init.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let processed = AtomicU64::new(0);
    let schedule_total = (cfg.epochs as u64 * total_words + 1) as f64;

    let n_threads = cfg.threads.min(sentences.len().max(1));
    let chunk = sentences.len().div_ceil(n_threads);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _epoch in 0..cfg.epochs {
        let sums: Vec<(f64, u64)> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..n_threads)
                .map(|tid| {
                    let syn0 = &syn0;
                    let syn1 = &syn1;
                    let processed = &processed;
                    let slice = &sentences[tid * chunk..((tid + 1) * chunk).min(sentences.len())];
                    scope.spawn(move || {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                        rng.set_stream(tid as u64 + 1);
                        let mut h = vec![0.0; dim];
                        let mut dh = vec![0.0; dim];
                        let mut ctx: Vec<u32> = Vec::new();
                        let mut loss_sum = 0.0;
                        let mut centers = 0u64;
                        for sent in slice {
                            let p = processed.fetch_add(sent.len() as u64, Ordering::Relaxed);
                            let alpha = cfg.initial_lr
                                * (1.0 - p as f64 / schedule_total).max(1e-4);
                            for t in 0..sent.len() {
                                gather_context(sent, t, cfg.window, &mut ctx);
                                if ctx.is_empty() {
                                    continue;
                                }
                                h.fill(0.0);
                                for &c in &ctx {
                                    for d in 0..dim {
                                        h[d] += load(syn0, c as usize * dim + d);
                                    }
                                }
                                let inv = 1.0 / ctx.len() as f64;
                                for v in h.iter_mut() {
                                    *v *= inv;
                                }
                                dh.fill(0.0);
                                for i in 0..=cfg.negative {
                                    let (target, label) = if i == 0 {
                                        (sent[t], 1.0)
                                    } else {
                                        let s = sample_noise(noise_cum, &mut rng);
                                        if s == sent[t] {
                                            continue;
                                        }
                                        (s, 0.0)
                                    };
                                    let base = target as usize * dim;
                                    let mut f = 0.0;
                                    for d in 0..dim {
                                        f += h[d] * load(syn1, base + d);
                                    }
                                    loss_sum += if label > 0.5 { softplus(-f) } else { softplus(f) };
                                    let graw = label - sigmoid(f);
                                    let g = graw * alpha;
                                    for d in 0..dim {
                                        let w = load(syn1, base + d);
                                        dh[d] += graw * w;
                                        store(syn1, base + d, w + g * h[d]);
                                    }
                                }
                                let step = alpha / ctx.len() as f64;
                                for &c in &ctx {
                                    let base = c as usize * dim;
                                    for d in 0..dim {
                                        store(syn0, base + d, load(syn0, base + d) + step * dh[d]);
                                    }
                                }
                                centers += 1;
                            }
                        }
                        (loss_sum, centers)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let (loss, centers) = sums
            .iter()
            .fold((0.0, 0u64), |(l, c), &(sl, sc)| (l + sl, c + sc));
        epoch_losses.push(if centers > 0 { loss / centers as f64 } else { 0.0 });
    }

    for (dst, src) in syn0_out.iter_mut().zip(&syn0) {
        *dst = f64::from_bits(src.load(Ordering::Relaxed));
    }
    epoch_losses
}

#[inline]
fn load(v: &[AtomicU64], i: usize) -> f64 {
    f64::from_bits(v[i].load(Ordering::Relaxed))
}

#[inline]
fn store(v: &[AtomicU64], i: usize, x: f64) {
    v[i].store(x.to_bits(), Ordering::Relaxed);
}
