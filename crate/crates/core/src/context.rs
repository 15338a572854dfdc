//! Per-tweet context features: embedding and SPLex user-history vectors
//! over a sliding time window with optional half-life decay, pairwise
//! user-interaction vectors, and the static user-profile baseline.
//!
//! No context feature for a tweet at time `t` ever reads a tweet with
//! timestamp >= `t`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{extract_references, normalize_tweet, Tweet, UserRegistry, Vocab};
use crate::corpus::{PAD_INDEX, UNKNOWN_INDEX};
use crate::embeddings::EmbeddingMatrix;
use crate::splex::SPLexLexicon;
use crate::{Error, Result};

pub const EMB_HISTORY_DIM: usize = 300;
pub const SPLEX_HISTORY_DIM: usize = 2;
pub const INTERACTION_DIM: usize = 300;
pub const CONTEXT_DIM: usize = EMB_HISTORY_DIM + SPLEX_HISTORY_DIM + INTERACTION_DIM;

const SECONDS_PER_DAY: f64 = 86_400.0;

/// How a user can be involved in a tweet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Involvement {
    /// The user authored the tweet.
    #[serde(rename = "self")]
    SelfPost,
    /// The user is the retweet source.
    #[serde(rename = "retweet")]
    Retweet,
    /// The user is mentioned.
    #[serde(rename = "mention")]
    Mention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    Sum,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Embedding,
    Splex,
}

#[derive(Debug, Clone)]
pub struct HistoryConfig {
    /// Sliding window size in (real-valued) days.
    pub window_days: f64,
    /// Half-life as a proportion of the window size; `None` disables
    /// decay.
    pub half_life_ratio: Option<f64>,
    pub combine_word: Combine,
    pub combine_tweet: Combine,
    pub include: Vec<Involvement>,
    pub representation: Representation,
}

impl HistoryConfig {
    /// Best embedding-history settings: averaged at both levels, 90-day
    /// window, SELF posts only, half-life ratio 0.25.
    pub fn embedding_default() -> HistoryConfig {
        HistoryConfig {
            window_days: 90.0,
            half_life_ratio: Some(0.25),
            combine_word: Combine::Avg,
            combine_tweet: Combine::Avg,
            include: vec![Involvement::SelfPost],
            representation: Representation::Embedding,
        }
    }

    /// Best SPLex-history settings: summed at both levels, 2-day window,
    /// SELF and RETWEET posts, no decay.
    pub fn splex_default() -> HistoryConfig {
        HistoryConfig {
            window_days: 2.0,
            half_life_ratio: None,
            combine_word: Combine::Sum,
            combine_tweet: Combine::Sum,
            include: vec![Involvement::SelfPost, Involvement::Retweet],
            representation: Representation::Splex,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_days > 0.0) {
            return Err(Error::InvalidInput(format!(
                "window_days must be positive, got {}",
                self.window_days
            )));
        }
        if let Some(r) = self.half_life_ratio {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "half_life_ratio must be in (0, 1], got {r}"
                )));
            }
        }
        if self.include.is_empty() {
            return Err(Error::InvalidInput("include set is empty".into()));
        }
        Ok(())
    }
}

/// Weight 2^(-dt/f) with half-life f = d * r; 1 when decay is disabled.
pub fn half_life_weight(delta_days: f64, cfg: &HistoryConfig) -> Result<f64> {
    if delta_days < 0.0 {
        return Err(Error::InvalidInput(
            "context tweet newer than target".into(),
        ));
    }
    Ok(match cfg.half_life_ratio {
        None => 1.0,
        Some(r) => {
            let half_life = cfg.window_days * r;
            (-delta_days / half_life).exp2()
        }
    })
}

/// The combined labeled + unlabeled corpus with cached token indices and
/// registry-resolved references.
#[derive(Debug)]
pub struct TweetStore {
    tweets: Vec<Tweet>,
    tokens: Vec<Vec<u32>>,
    authors: Vec<Option<u32>>,
    refs: Vec<(Option<u32>, Vec<u32>)>,
    by_id: HashMap<String, usize>,
}

impl TweetStore {
    pub fn build(
        labeled: &[Tweet],
        unlabeled: &[Tweet],
        vocab: &Vocab,
        registry: &UserRegistry,
    ) -> TweetStore {
        let tweets: Vec<Tweet> = labeled.iter().chain(unlabeled).cloned().collect();
        let tokens = tweets
            .iter()
            .map(|t| vocab.encode_sequence(&normalize_tweet(&t.text)))
            .collect();
        let authors = tweets.iter().map(|t| registry.id_of(&t.author)).collect();
        let refs = tweets
            .iter()
            .map(|t| extract_references(t, registry))
            .collect();
        let by_id = tweets
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.clone(), i))
            .collect();
        TweetStore {
            tweets,
            tokens,
            authors,
            refs,
            by_id,
        }
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn tweet(&self, idx: usize) -> &Tweet {
        &self.tweets[idx]
    }

    pub fn tokens(&self, idx: usize) -> &[u32] {
        &self.tokens[idx]
    }

    pub fn author_id(&self, idx: usize) -> Option<u32> {
        self.authors[idx]
    }

    /// Registered (retweet source, mentions) of the tweet.
    pub fn references(&self, idx: usize) -> (Option<u32>, &[u32]) {
        let (src, mentions) = &self.refs[idx];
        (*src, mentions)
    }

    pub fn index_of_id(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TimelineEvent {
    pub store_idx: usize,
    pub timestamp: i64,
    pub kind: Involvement,
}

/// Per-user chronological involvement lists.
#[derive(Debug)]
pub struct Timelines {
    per_user: Vec<Vec<TimelineEvent>>,
}

impl Timelines {
    pub fn build(store: &TweetStore, registry: &UserRegistry) -> Timelines {
        let mut per_user: Vec<Vec<TimelineEvent>> = vec![Vec::new(); registry.len()];
        for idx in 0..store.len() {
            let ts = store.tweet(idx).timestamp;
            let mut push = |user: u32, kind: Involvement| {
                per_user[user as usize].push(TimelineEvent {
                    store_idx: idx,
                    timestamp: ts,
                    kind,
                });
            };
            if let Some(author) = store.author_id(idx) {
                push(author, Involvement::SelfPost);
            }
            let (src, mentions) = store.references(idx);
            if let Some(src) = src {
                push(src, Involvement::Retweet);
            }
            let mut seen = Vec::new();
            for &m in mentions {
                if !seen.contains(&m) {
                    seen.push(m);
                    push(m, Involvement::Mention);
                }
            }
        }
        for events in per_user.iter_mut() {
            events.sort_by_key(|e| (e.timestamp, e.store_idx));
        }
        Timelines { per_user }
    }

    pub fn events(&self, user: u32) -> &[TimelineEvent] {
        &self.per_user[user as usize]
    }
}

/// Tweets involving `user` strictly before `t` and within the window,
/// restricted to the configured involvement kinds. Duplicate events for
/// the same tweet collapse to one entry.
pub fn user_history_window(
    user: u32,
    t: i64,
    timelines: &Timelines,
    cfg: &HistoryConfig,
) -> Vec<TimelineEvent> {
    let mut out: Vec<TimelineEvent> = Vec::new();
    for e in timelines.events(user) {
        if e.timestamp >= t {
            break; // events are chronological
        }
        let delta_days = (t - e.timestamp) as f64 / SECONDS_PER_DAY;
        if delta_days >= cfg.window_days {
            continue;
        }
        if !cfg.include.contains(&e.kind) {
            continue;
        }
        if out.iter().any(|prev| prev.store_idx == e.store_idx) {
            continue;
        }
        out.push(*e);
    }
    out
}

/// Word-level source for tweet representations.
#[derive(Clone, Copy)]
pub enum ReprSource<'a> {
    Embedding(&'a EmbeddingMatrix),
    Splex(&'a SPLexLexicon),
}

impl ReprSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            ReprSource::Embedding(m) => m.dim(),
            ReprSource::Splex(_) => SPLEX_HISTORY_DIM,
        }
    }
}

/// Sum or mean of per-token vectors; PAD and UNKNOWN contribute nothing,
/// and a tweet with no contributing token maps to zero.
pub fn tweet_repr(tokens: &[u32], source: ReprSource<'_>, mode: Combine) -> Vec<f64> {
    let mut out = vec![0.0; source.dim()];
    let mut used = 0usize;
    for &tok in tokens {
        if tok == PAD_INDEX || tok == UNKNOWN_INDEX {
            continue;
        }
        match source {
            ReprSource::Embedding(m) => {
                for (dst, src) in out.iter_mut().zip(m.row(tok)) {
                    *dst += src;
                }
            }
            ReprSource::Splex(lex) => {
                let s = lex.scores(tok);
                out[0] += s[0];
                out[1] += s[1];
            }
        }
        used += 1;
    }
    if mode == Combine::Avg && used > 0 {
        let inv = 1.0 / used as f64;
        for v in out.iter_mut() {
            *v *= inv;
        }
    }
    out
}

/// Combines half-life-weighted tweet representations into a context
/// vector. `Avg` normalizes by the sum of weights.
pub fn history_vector(
    history: &[TimelineEvent],
    t: i64,
    store: &TweetStore,
    source: ReprSource<'_>,
    cfg: &HistoryConfig,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; source.dim()];
    let mut weight_sum = 0.0;
    for e in history {
        let delta_days = (t - e.timestamp) as f64 / SECONDS_PER_DAY;
        let w = half_life_weight(delta_days, cfg)?;
        let repr = tweet_repr(store.tokens(e.store_idx), source, cfg.combine_word);
        for (dst, src) in out.iter_mut().zip(&repr) {
            *dst += w * src;
        }
        weight_sum += w;
    }
    if cfg.combine_tweet == Combine::Avg && weight_sum > 0.0 {
        let inv = 1.0 / weight_sum;
        for v in out.iter_mut() {
            *v *= inv;
        }
    }
    Ok(out)
}

/// Index of pairwise mutual involvement: for each unordered user pair,
/// the tweets in which both are involved.
#[derive(Debug)]
pub struct InteractionIndex {
    pairs: HashMap<(u32, u32), Vec<usize>>,
}

impl InteractionIndex {
    pub fn build(store: &TweetStore) -> InteractionIndex {
        let mut pairs: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        let mut involved = Vec::new();
        for idx in 0..store.len() {
            involved.clear();
            if let Some(a) = store.author_id(idx) {
                involved.push(a);
            }
            let (src, mentions) = store.references(idx);
            if let Some(s) = src {
                if !involved.contains(&s) {
                    involved.push(s);
                }
            }
            for &m in mentions {
                if !involved.contains(&m) {
                    involved.push(m);
                }
            }
            for i in 0..involved.len() {
                for j in (i + 1)..involved.len() {
                    let key = pair_key(involved[i], involved[j]);
                    pairs.entry(key).or_default().push(idx);
                }
            }
        }
        InteractionIndex { pairs }
    }

    /// Mean embedding of all tokens across the mutual-involvement
    /// document of the two users. Tweets at or after `before` and the
    /// excluded tweet are skipped; zero when nothing remains.
    pub fn vector(
        &self,
        a: u32,
        b: u32,
        store: &TweetStore,
        emb: &EmbeddingMatrix,
        before: Option<i64>,
        exclude_idx: Option<usize>,
    ) -> Vec<f64> {
        let mut out = vec![0.0; emb.dim()];
        let Some(tweet_idxs) = self.pairs.get(&pair_key(a, b)) else {
            return out;
        };
        let mut used = 0usize;
        for &idx in tweet_idxs {
            if Some(idx) == exclude_idx {
                continue;
            }
            if let Some(t) = before {
                if store.tweet(idx).timestamp >= t {
                    continue;
                }
            }
            for &tok in store.tokens(idx) {
                if tok == PAD_INDEX || tok == UNKNOWN_INDEX {
                    continue;
                }
                for (dst, src) in out.iter_mut().zip(emb.row(tok)) {
                    *dst += src;
                }
                used += 1;
            }
        }
        if used > 0 {
            let inv = 1.0 / used as f64;
            for v in out.iter_mut() {
                *v *= inv;
            }
        }
        out
    }
}

fn pair_key(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Mean embedding over all tokens of all tweets authored by the user;
/// the static comparison baseline to the dynamic context features.
pub fn user_profile_vector(user: u32, store: &TweetStore, emb: &EmbeddingMatrix) -> Vec<f64> {
    let mut out = vec![0.0; emb.dim()];
    let mut used = 0usize;
    for idx in 0..store.len() {
        if store.author_id(idx) != Some(user) {
            continue;
        }
        for &tok in store.tokens(idx) {
            if tok == PAD_INDEX || tok == UNKNOWN_INDEX {
                continue;
            }
            for (dst, src) in out.iter_mut().zip(emb.row(tok)) {
                *dst += src;
            }
            used += 1;
        }
    }
    if used > 0 {
        let inv = 1.0 / used as f64;
        for v in out.iter_mut() {
            *v *= inv;
        }
    }
    out
}

/// Per-tweet context features; all-zero sections encode "no context
/// available".
#[derive(Debug, Clone, PartialEq)]
pub struct ContextBundle {
    pub emb_history: Vec<f64>,
    pub splex_history: [f64; 2],
    pub interaction: Vec<f64>,
}

impl ContextBundle {
    pub fn zero() -> ContextBundle {
        ContextBundle::zero_with(EMB_HISTORY_DIM, INTERACTION_DIM)
    }

    pub fn zero_with(emb_dim: usize, interaction_dim: usize) -> ContextBundle {
        ContextBundle {
            emb_history: vec![0.0; emb_dim],
            splex_history: [0.0; 2],
            interaction: vec![0.0; interaction_dim],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.emb_history.iter().all(|&v| v == 0.0)
            && self.splex_history == [0.0; 2]
            && self.interaction.iter().all(|&v| v == 0.0)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(CONTEXT_DIM);
        out.extend_from_slice(&self.emb_history);
        out.extend_from_slice(&self.splex_history);
        out.extend_from_slice(&self.interaction);
        out
    }
}

/// Bundles the resources needed to compute [`ContextBundle`]s.
pub struct ContextBuilder<'a> {
    pub store: &'a TweetStore,
    pub timelines: &'a Timelines,
    pub interactions: &'a InteractionIndex,
    pub registry: &'a UserRegistry,
    pub embeddings: &'a EmbeddingMatrix,
    pub lexicon: &'a SPLexLexicon,
    pub emb_cfg: HistoryConfig,
    pub splex_cfg: HistoryConfig,
}

impl ContextBuilder<'_> {
    /// Computes the context bundle for a tweet. Only strictly earlier
    /// tweets contribute; the tweet itself is always excluded.
    pub fn bundle(&self, tweet: &Tweet) -> Result<ContextBundle> {
        let t = tweet.timestamp;
        let exclude_idx = self.store.index_of_id(&tweet.id);
        let author = self.registry.id_of(&tweet.author);

        let dim = self.embeddings.dim();
        let mut bundle = ContextBundle::zero_with(dim, dim);
        let Some(author) = author else {
            return Ok(bundle);
        };

        let events = user_history_window(author, t, self.timelines, &self.emb_cfg);
        bundle.emb_history = history_vector(
            &events,
            t,
            self.store,
            ReprSource::Embedding(self.embeddings),
            &self.emb_cfg,
        )?;
        let events = user_history_window(author, t, self.timelines, &self.splex_cfg);
        let splex = history_vector(
            &events,
            t,
            self.store,
            ReprSource::Splex(self.lexicon),
            &self.splex_cfg,
        )?;
        bundle.splex_history = [splex[0], splex[1]];

        let (src, mentions) = extract_references(tweet, self.registry);
        let mut referenced: Vec<u32> = Vec::new();
        if let Some(s) = src {
            referenced.push(s);
        }
        for m in mentions {
            if !referenced.contains(&m) {
                referenced.push(m);
            }
        }
        referenced.retain(|&u| u != author);
        if !referenced.is_empty() {
            let mut acc = vec![0.0; dim];
            for &u in &referenced {
                let v = self.interactions.vector(
                    author,
                    u,
                    self.store,
                    self.embeddings,
                    Some(t),
                    exclude_idx,
                );
                for (dst, src) in acc.iter_mut().zip(&v) {
                    *dst += src;
                }
            }
            let inv = 1.0 / referenced.len() as f64;
            for v in acc.iter_mut() {
                *v *= inv;
            }
            bundle.interaction = acc;
        }
        Ok(bundle)
    }
}
