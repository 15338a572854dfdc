//! One-vs-rest linear classifiers with hinge loss, L2 regularization,
//! and per-class example weighting, trained by subgradient descent. The
//! feature space is the averaged domain-specific embedding concatenated
//! with summed SPLex scores (302 dims), optionally extended with the
//! context bundle.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::context::{tweet_repr, Combine, ContextBundle, ReprSource};
use crate::corpus::Label;
use crate::embeddings::EmbeddingMatrix;
use crate::splex::SPLexLexicon;
use crate::vecops::{axpy, dot, scale};
use crate::{Error, Result};

/// 300 averaged embedding dims + 2 summed SPLex dims.
pub const LINEAR_FEATURE_DIM: usize = 302;

/// Averaged embeddings concatenated with summed SPLex scores; an
/// optional context bundle appends its flattened vector.
pub fn linear_features(
    tokens: &[u32],
    emb: &EmbeddingMatrix,
    lexicon: &SPLexLexicon,
    context: Option<&ContextBundle>,
) -> Vec<f64> {
    let mut out = tweet_repr(tokens, ReprSource::Embedding(emb), Combine::Avg);
    out.extend(tweet_repr(tokens, ReprSource::Splex(lexicon), Combine::Sum));
    if let Some(ctx) = context {
        out.extend(ctx.to_flat());
    }
    out
}

#[derive(Debug, Clone)]
pub struct LinearConfig {
    /// L2 regularization strength.
    pub lambda: f64,
    pub epochs: usize,
    /// Per-class example weights in label order (Aggression, Loss, Other).
    pub class_weights: [f64; 3],
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            lambda: 1e-4,
            epochs: 60,
            class_weights: [2.0, 1.0, 0.12],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub dim: usize,
    /// 3 x dim weight rows in label order.
    pub weights: Vec<f64>,
    pub biases: [f64; 3],
}

impl LinearModel {
    pub fn decision_values(&self, features: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (c, slot) in out.iter_mut().enumerate() {
            *slot = dot(&self.weights[c * self.dim..(c + 1) * self.dim], features)
                + self.biases[c];
        }
        out
    }

    /// Argmax of the decision values; ties go to the earlier class in
    /// (Aggression, Loss, Other) order.
    pub fn predict(&self, features: &[f64]) -> Label {
        let scores = self.decision_values(features);
        let mut best = 0;
        for c in 1..3 {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        Label::ALL[best]
    }
}

fn class_index(label: Label) -> usize {
    match label {
        Label::Aggression => 0,
        Label::Loss => 1,
        Label::Other => 2,
    }
}

/// Pegasos-style training of the three one-vs-rest hinge classifiers.
/// Each example's loss is weighted by its gold class's weight in every
/// binary subproblem.
pub fn train_linear(
    features: &[Vec<f64>],
    gold: &[Label],
    cfg: &LinearConfig,
) -> Result<LinearModel> {
    if features.len() != gold.len() {
        return Err(Error::DimensionMismatch(
            "features and labels differ in length".into(),
        ));
    }
    if features.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let distinct = {
        let mut seen = [false; 3];
        for &g in gold {
            seen[class_index(g)] = true;
        }
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::InvalidInput(
            "training set must contain at least two classes".into(),
        ));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch("ragged feature rows".into()));
    }

    let mut weights = vec![0.0; 3 * dim];
    let mut biases = [0.0; 3];
    let mut order: Vec<usize> = (0..features.len()).collect();

    for (c, class) in Label::ALL.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(c as u64);
        let w = &mut weights[c * dim..(c + 1) * dim];
        let b = &mut biases[c];
        // Offsetting the step counter caps the first step at eta <= 1,
        // which the raw 1/(lambda t) schedule does not.
        let t0 = (1.0 / cfg.lambda).ceil() as u64;
        let mut t = t0;
        for _epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (cfg.lambda * t as f64);
                let y = if gold[i] == *class { 1.0 } else { -1.0 };
                let cw = cfg.class_weights[class_index(gold[i])];
                let margin = y * (dot(w, &features[i]) + *b);
                scale(w, 1.0 - eta * cfg.lambda);
                if margin < 1.0 && cw > 0.0 {
                    axpy(w, eta * cw * y, &features[i]);
                    *b += eta * cw * y;
                }
            }
        }
    }

    Ok(LinearModel {
        dim,
        weights,
        biases,
    })
}
