//! SPLex induction: a lexical k-NN graph over SVD embeddings, seeded
//! random-walk label propagation per class, and per-class
//! standardization of the landing probabilities.

mod graph;
mod seeds;
mod walk;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::Vocab;
use crate::embeddings::EmbeddingMatrix;
use crate::{Error, Result};

pub use graph::{build_knn_graph, LexicalGraph};
pub use seeds::{
    default_seed_file_contents, default_seed_sets, load_seed_file, parse_seed_file, SeedClass,
    SeedSet,
};
pub use walk::random_walk_scores;

#[derive(Debug, Clone)]
pub struct SentpropConfig {
    /// Nearest neighbors per token in the lexical graph.
    pub knn: usize,
    /// Random-walk restart weight.
    pub beta: f64,
    /// L1 convergence tolerance of the walk.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SentpropConfig {
    fn default() -> Self {
        SentpropConfig {
            knn: 25,
            beta: 0.9,
            tol: 1e-6,
            max_iter: 5000,
        }
    }
}

/// Per-token standardized (aggression, loss) score pair, aligned to the
/// vocabulary.
#[derive(Debug, Clone)]
pub struct SPLexLexicon {
    tokens: Vec<String>,
    scores: Vec<[f64; 2]>,
}

impl SPLexLexicon {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Scores by vocabulary index.
    pub fn scores(&self, index: u32) -> [f64; 2] {
        self.scores[index as usize]
    }

    pub fn lookup(&self, token: &str) -> Option<[f64; 2]> {
        self.tokens
            .iter()
            .position(|t| t == token)
            .map(|i| self.scores[i])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// TSV: token, aggression score, loss score at 9 decimal places.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (tok, s) in self.tokens.iter().zip(&self.scores) {
            writeln!(w, "{tok}\t{:.9}\t{:.9}", s[0], s[1])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path, vocab: &Vocab) -> Result<SPLexLexicon> {
        let reader = BufReader::new(File::open(path)?);
        let mut tokens = Vec::new();
        let mut scores = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let mut fields = line.split('\t');
            let tok = fields
                .next()
                .ok_or_else(|| Error::Parse("empty lexicon line".into()))?;
            let a: f64 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad lexicon line {line:?}")))?;
            let l: f64 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad lexicon line {line:?}")))?;
            tokens.push(tok.to_string());
            scores.push([a, l]);
        }
        if tokens.len() != vocab.len()
            || tokens
                .iter()
                .enumerate()
                .any(|(i, t)| vocab.token(i as u32) != t)
        {
            return Err(Error::Parse(
                "lexicon tokens do not match the vocabulary".into(),
            ));
        }
        Ok(SPLexLexicon { tokens, scores })
    }
}

/// Runs the per-class random walks over a shared lexical graph and
/// standardizes each class's scores to mean 0, variance 1 across the
/// whole vocabulary.
pub fn induce_lexicon(
    svd_emb: &EmbeddingMatrix,
    vocab: &Vocab,
    aggression_seeds: &SeedSet,
    loss_seeds: &SeedSet,
    cfg: &SentpropConfig,
    threads: usize,
) -> Result<SPLexLexicon> {
    if vocab.len() != svd_emb.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "vocab has {} tokens, embeddings {} rows",
            vocab.len(),
            svd_emb.n_rows()
        )));
    }
    let graph = build_knn_graph(svd_emb, cfg.knn, threads)?;

    let mut per_class = Vec::with_capacity(2);
    for seeds in [aggression_seeds, loss_seeds] {
        let ids = effective_seed_ids(seeds, vocab)?;
        let scores = random_walk_scores(&graph, &ids, cfg.beta, cfg.tol, cfg.max_iter)?;
        per_class.push(standardize(scores)?);
    }

    let scores = per_class[0]
        .iter()
        .zip(&per_class[1])
        .map(|(&a, &l)| [a, l])
        .collect();
    Ok(SPLexLexicon {
        tokens: vocab.tokens().to_vec(),
        scores,
    })
}

/// Seed words present in the vocabulary; missing words are dropped with
/// a warning. At least one must survive.
fn effective_seed_ids(seeds: &SeedSet, vocab: &Vocab) -> Result<Vec<usize>> {
    let mut ids = Vec::new();
    let mut missing = 0usize;
    for word in &seeds.words {
        match vocab.index_of(word) {
            Some(i) => ids.push(i as usize),
            None => missing += 1,
        }
    }
    if missing > 0 {
        log::warn!(
            "{missing} of {} {} seed words are not in the vocabulary",
            seeds.words.len(),
            seeds.class
        );
    }
    if ids.is_empty() {
        return Err(Error::EmptySeedSet);
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

fn standardize(mut scores: Vec<f64>) -> Result<Vec<f64>> {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(Error::InvalidInput(
            "degenerate random-walk scores: zero variance".into(),
        ));
    }
    let inv_sd = 1.0 / var.sqrt();
    for s in scores.iter_mut() {
        *s = (*s - mean) * inv_sd;
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingKind;

    fn vocab_of(words: &[&str]) -> Vocab {
        let seqs = [words.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        Vocab::build(seqs.iter().map(|s| s.as_slice()), 40_000).unwrap()
    }

    /// Two tight clusters plus reserved-token zero rows: seeds sit inside
    /// their own cluster.
    fn clustered_embeddings(vocab: &Vocab, cluster_a: &[&str], cluster_b: &[&str]) -> EmbeddingMatrix {
        let mut emb = EmbeddingMatrix::zeros(EmbeddingKind::Svd, vocab.len(), 4);
        for (i, tok) in cluster_a.iter().enumerate() {
            let id = vocab.index_of(tok).unwrap();
            let row = emb.row_mut(id);
            row[0] = 1.0;
            row[1] = 0.05 * i as f64;
        }
        for (i, tok) in cluster_b.iter().enumerate() {
            let id = vocab.index_of(tok).unwrap();
            let row = emb.row_mut(id);
            row[2] = 1.0;
            row[3] = 0.05 * i as f64;
        }
        emb
    }

    #[test]
    fn lexicon_standardized_and_clustered() {
        let a_words = ["opps", "glock", "smoke", "bang", "killa"];
        let b_words = ["rip", "miss", "fly", "heaven", "gone"];
        let all: Vec<&str> = a_words.iter().chain(&b_words).copied().collect();
        let vocab = vocab_of(&all);
        let emb = clustered_embeddings(&vocab, &a_words, &b_words);

        let aggr = SeedSet {
            class: SeedClass::Aggression,
            words: vec!["opps".into(), "glock".into(), "ghostword".into()],
        };
        let loss = SeedSet {
            class: SeedClass::Loss,
            words: vec!["rip".into(), "miss".into()],
        };
        let cfg = SentpropConfig {
            knn: 3,
            ..SentpropConfig::default()
        };
        let lex = induce_lexicon(&emb, &vocab, &aggr, &loss, &cfg, 1).unwrap();

        // Standardization: mean 0, variance 1 within 1e-9 per class.
        for class in 0..2 {
            let vals: Vec<f64> = (0..vocab.len()).map(|i| lex.scores(i as u32)[class]).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "class {class} mean {mean}");
            assert!((var - 1.0).abs() < 1e-9, "class {class} var {var}");
        }

        // Cluster members outscore the other cluster on their own class.
        let s_smoke = lex.lookup("smoke").unwrap();
        let s_gone = lex.lookup("gone").unwrap();
        assert!(s_smoke[0] > s_gone[0]);
        assert!(s_gone[1] > s_smoke[1]);
    }

    #[test]
    fn no_effective_seeds_errors() {
        let vocab = vocab_of(&["x", "y", "z", "w"]);
        let mut emb = EmbeddingMatrix::zeros(EmbeddingKind::Svd, vocab.len(), 2);
        for i in 0..vocab.len() {
            emb.row_mut(i as u32)[0] = 1.0 + i as f64;
        }
        let aggr = SeedSet {
            class: SeedClass::Aggression,
            words: vec!["missing".into()],
        };
        let loss = SeedSet {
            class: SeedClass::Loss,
            words: vec!["x".into()],
        };
        let cfg = SentpropConfig {
            knn: 2,
            ..SentpropConfig::default()
        };
        assert!(matches!(
            induce_lexicon(&emb, &vocab, &aggr, &loss, &cfg, 1),
            Err(Error::EmptySeedSet)
        ));
    }

    #[test]
    fn standardization_preserves_order() {
        let raw = vec![0.5, 0.1, 0.9, 0.2];
        let std = standardize(raw.clone()).unwrap();
        let mut order_raw: Vec<usize> = (0..raw.len()).collect();
        order_raw.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap());
        let mut order_std: Vec<usize> = (0..std.len()).collect();
        order_std.sort_by(|&a, &b| std[a].partial_cmp(&std[b]).unwrap());
        assert_eq!(order_raw, order_std);
    }

    #[test]
    fn lexicon_save_load_round_trip() {
        let vocab = vocab_of(&["a", "b"]);
        let lex = SPLexLexicon {
            tokens: vocab.tokens().to_vec(),
            scores: (0..vocab.len()).map(|i| [i as f64, -(i as f64)]).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("splex.tsv");
        lex.save(&path).unwrap();
        let loaded = SPLexLexicon::load(&path, &vocab).unwrap();
        for i in 0..vocab.len() as u32 {
            assert_eq!(loaded.scores(i), lex.scores(i));
        }
    }
}
