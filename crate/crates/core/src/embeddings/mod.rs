//! Domain-specific embedding families: CBOW prediction embeddings for
//! the classifier and context features, and PPMI+SVD count embeddings
//! for lexicon induction.

mod cbow;
mod cooccur;
mod svd;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::Vocab;
use crate::{Error, Result};

pub use cbow::{train_cbow, CbowConfig, CbowOutput};
pub use cooccur::{build_cooccurrence, compute_ppmi, CooccurrenceCounts, PpmiMatrix};
pub use svd::{svd_embed, truncated_svd, SvdConfig, TruncatedSvd};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Cbow,
    Svd,
    External,
}

/// Vocabulary-indexed dense vectors. Rows for tokens that never received
/// training data are all-zero.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    kind: EmbeddingKind,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(kind: EmbeddingKind, rows: usize, dim: usize) -> EmbeddingMatrix {
        EmbeddingMatrix {
            kind,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub(crate) fn from_data(kind: EmbeddingKind, dim: usize, data: Vec<f64>) -> EmbeddingMatrix {
        debug_assert_eq!(data.len() % dim, 0);
        EmbeddingMatrix { kind, dim, data }
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: u32) -> &[f64] {
        let i = i as usize;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn row_mut(&mut self, i: u32) -> &mut [f64] {
        let i = i as usize;
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Writes the classic word-vectors text format: a `<rows> <dim>`
    /// header, then one line per token.
    pub fn save(&self, path: &Path, vocab: &Vocab) -> Result<()> {
        if vocab.len() != self.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "vocab has {} tokens but matrix has {} rows",
                vocab.len(),
                self.n_rows()
            )));
        }
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{} {}", self.n_rows(), self.dim)?;
        for i in 0..self.n_rows() {
            write!(w, "{}", vocab.token(i as u32))?;
            for v in self.row(i as u32) {
                write!(w, " {v:.6}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads word vectors into a vocabulary-aligned matrix. Tokens absent
    /// from the file keep zero rows; file tokens outside the vocabulary
    /// are ignored.
    pub fn load(path: &Path, vocab: &Vocab, kind: EmbeddingKind) -> Result<EmbeddingMatrix> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let mut parts = header.split_whitespace();
        let _rows: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad embedding header".into()))?;
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad embedding header".into()))?;

        let mut matrix = EmbeddingMatrix::zeros(kind, vocab.len(), dim);
        for line in reader.lines() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts
                .next()
                .ok_or_else(|| Error::Parse("empty embedding line".into()))?;
            let Some(idx) = vocab.index_of(token) else {
                continue;
            };
            let row = matrix.row_mut(idx);
            for (j, slot) in row.iter_mut().enumerate() {
                let field = parts.next().ok_or_else(|| {
                    Error::Parse(format!("token {token:?}: expected {dim} values, got {j}"))
                })?;
                *slot = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad float {field:?}")))?;
            }
        }
        Ok(matrix)
    }
}
