//! Symmetric co-occurrence counting and the positive PMI matrix.

use std::collections::HashMap;

use crate::{Error, Result};

/// Sparse symmetric token-pair counts with per-token and grand totals.
#[derive(Debug, Clone)]
pub struct CooccurrenceCounts {
    n: usize,
    pairs: HashMap<(u32, u32), u64>,
    row_totals: Vec<u64>,
    grand_total: u64,
}

impl CooccurrenceCounts {
    pub fn new(n: usize) -> CooccurrenceCounts {
        CooccurrenceCounts {
            n,
            pairs: HashMap::new(),
            row_totals: vec![0; n],
            grand_total: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grand_total(&self) -> u64 {
        self.grand_total
    }

    pub fn row_total(&self, i: u32) -> u64 {
        self.row_totals[i as usize]
    }

    pub fn count(&self, i: u32, j: u32) -> u64 {
        self.pairs.get(&(i, j)).copied().unwrap_or(0)
    }

    /// Adds `count` to entry (i, j) and, when i != j, to (j, i).
    pub fn add(&mut self, i: u32, j: u32, count: u64) {
        *self.pairs.entry((i, j)).or_insert(0) += count;
        self.row_totals[i as usize] += count;
        self.grand_total += count;
        if i != j {
            *self.pairs.entry((j, i)).or_insert(0) += count;
            self.row_totals[j as usize] += count;
            self.grand_total += count;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), u64)> + '_ {
        self.pairs.iter().map(|(&k, &v)| (k, v))
    }
}

/// Counts symmetric co-occurrences within `window` positions. Tokens
/// occurring fewer than `min_count` times are dropped first and the
/// remaining tokens close ranks before windowing.
pub fn build_cooccurrence(
    corpus: &[Vec<u32>],
    vocab_size: usize,
    window: usize,
    min_count: u64,
) -> CooccurrenceCounts {
    let mut token_counts = vec![0u64; vocab_size];
    for seq in corpus {
        for &t in seq {
            token_counts[t as usize] += 1;
        }
    }

    let mut counts = CooccurrenceCounts::new(vocab_size);
    let mut kept = Vec::new();
    for seq in corpus {
        kept.clear();
        kept.extend(
            seq.iter()
                .copied()
                .filter(|&t| token_counts[t as usize] >= min_count),
        );
        for i in 0..kept.len() {
            let hi = (i + window).min(kept.len().saturating_sub(1));
            for j in (i + 1)..=hi {
                counts.add(kept[i], kept[j], 1);
            }
        }
    }
    counts
}

/// Sparse nonnegative symmetric matrix in CSR form; entries that clamp
/// to zero are not stored.
#[derive(Debug, Clone)]
pub struct PpmiMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl PpmiMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: u32, j: u32) -> f64 {
        let lo = self.indptr[i as usize];
        let hi = self.indptr[i as usize + 1];
        match self.indices[lo..hi].binary_search(&j) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: u32) -> (&[u32], &[f64]) {
        let lo = self.indptr[i as usize];
        let hi = self.indptr[i as usize + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    /// y = M x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for i in 0..self.n {
            let (cols, vals) = self.row(i as u32);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j as usize];
            }
            y[i] = acc;
        }
    }

    pub(crate) fn from_entries(n: usize, mut entries: Vec<(u32, u32, f64)>) -> PpmiMatrix {
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            indptr[i as usize + 1] += 1;
            indices.push(j);
            values.push(v);
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        PpmiMatrix { n, indptr, indices, values }
    }

    #[cfg(any(test, feature = "oracles"))]
    pub fn from_dense(n: usize, dense: &[f64]) -> PpmiMatrix {
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = dense[i * n + j];
                if v != 0.0 {
                    entries.push((i as u32, j as u32, v));
                }
            }
        }
        PpmiMatrix::from_entries(n, entries)
    }
}

/// entry(i, j) = max(0, log(p(i,j) / (p(i) p(j)))) with probabilities
/// taken from the co-occurrence counts; zero counts stay zero.
pub fn compute_ppmi(counts: &CooccurrenceCounts) -> Result<PpmiMatrix> {
    let total = counts.grand_total();
    if total == 0 {
        return Err(Error::InvalidInput(
            "co-occurrence grand total is zero".into(),
        ));
    }
    let total = total as f64;
    let mut entries = Vec::new();
    for ((i, j), c) in counts.iter() {
        let ri = counts.row_total(i) as f64;
        let rj = counts.row_total(j) as f64;
        let pmi = ((c as f64) * total / (ri * rj)).ln();
        if pmi > 0.0 {
            entries.push((i, j, pmi));
        }
    }
    Ok(PpmiMatrix::from_entries(counts.n(), entries))
}

/// Dense PPMI reference used by tests and the acceptance suite; computes
/// the formula directly from the counts with no sparsity shortcuts.
#[cfg(any(test, feature = "oracles"))]
pub fn ppmi_dense_oracle(counts: &CooccurrenceCounts) -> Vec<f64> {
    let n = counts.n();
    let total = counts.grand_total() as f64;
    let mut out = vec![0.0; n * n];
    for i in 0..n as u32 {
        for j in 0..n as u32 {
            let c = counts.count(i, j);
            if c == 0 {
                continue;
            }
            let pij = c as f64 / total;
            let pi = counts.row_total(i) as f64 / total;
            let pj = counts.row_total(j) as f64 / total;
            out[i as usize * n + j as usize] = (pij / (pi * pj)).ln().max(0.0);
        }
    }
    out
}
