//! Tweet ingestion, normalization, vocabulary construction, and the user
//! registry.
//!
//! Raw tweets arrive as JSON lines (`{"id", "user", "ts", "text",
//! "label"?, "rt_of"?}`). Text is normalized into lowercase tokens with
//! mentions and URLs replaced by the special tokens `user` / `url`,
//! emoji split into individual tokens, and emoji modifiers stripped.

mod tokenize;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use tokenize::{extract_references, normalize_tweet, raw_references, RawRefs};

/// Fixed input length for the CNN: tweets are padded or trimmed to this
/// many token indices.
pub const SEQ_LEN: usize = 50;

/// Default cap on content tokens kept in the vocabulary.
pub const DEFAULT_MAX_TOKENS: usize = 40_000;

/// The three tweet classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Aggression,
    Loss,
    Other,
}

impl Label {
    /// All labels in tie-break order (Aggression > Loss > Other).
    pub const ALL: [Label; 3] = [Label::Aggression, Label::Loss, Label::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Aggression => "aggression",
            Label::Loss => "loss",
            Label::Other => "other",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aggression" => Ok(Label::Aggression),
            "loss" => Ok(Label::Loss),
            "other" => Ok(Label::Other),
            other => Err(Error::Parse(format!("unknown label {other:?}"))),
        }
    }
}

/// One post. `mentions` and `retweet_source` hold raw display names
/// extracted from the text/metadata; [`extract_references`] filters them
/// against a [`UserRegistry`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub author: String,
    pub timestamp: i64,
    pub text: String,
    pub label: Option<Label>,
    pub retweet_source: Option<String>,
    pub mentions: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: String,
    user: String,
    ts: i64,
    text: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    rt_of: Option<String>,
}

/// Counters from [`ingest`].
#[derive(Debug, Default, Clone)]
pub struct IngestStats {
    pub total_lines: usize,
    pub malformed_lines: usize,
    pub invalid_utf8_lines: usize,
}

/// Reads a JSON-lines tweet file. Malformed lines are skipped and
/// counted; more than 10% malformed is a hard error. Lines with invalid
/// UTF-8 have the offending bytes dropped and are counted separately.
pub fn ingest(path: &Path) -> Result<(Vec<Tweet>, IngestStats)> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut stats = IngestStats::default();
    let mut tweets = Vec::new();
    let mut buf = Vec::new();

    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        let mut line = String::from_utf8_lossy(&buf).into_owned();
        if line.contains('\u{FFFD}') {
            stats.invalid_utf8_lines += 1;
            line = line.replace('\u{FFFD}', "");
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        stats.total_lines += 1;
        match parse_record(line) {
            Some(tweet) => tweets.push(tweet),
            None => stats.malformed_lines += 1,
        }
    }

    if stats.total_lines > 0 && stats.malformed_lines * 10 > stats.total_lines {
        return Err(Error::MalformedCorpus {
            malformed: stats.malformed_lines,
            total: stats.total_lines,
        });
    }
    Ok((tweets, stats))
}

fn parse_record(line: &str) -> Option<Tweet> {
    let raw: RawRecord = serde_json::from_str(line).ok()?;
    if raw.ts < 0 {
        return None;
    }
    let label = match raw.label {
        None => None,
        Some(s) => Some(s.parse().ok()?),
    };
    let refs = raw_references(&raw.text);
    let retweet_source = raw
        .rt_of
        .map(|s| s.to_lowercase())
        .or(refs.retweet_source);
    Some(Tweet {
        id: raw.id,
        author: raw.user.to_lowercase(),
        timestamp: raw.ts,
        text: raw.text,
        label,
        retweet_source,
        mentions: refs.mentions,
    })
}

/// Reserved vocabulary slots.
pub const PAD_INDEX: u32 = 0;
pub const UNKNOWN_INDEX: u32 = 1;
pub const USER_INDEX: u32 = 2;
pub const URL_INDEX: u32 = 3;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNKNOWN_TOKEN: &str = "UNKNOWN";
pub const USER_TOKEN: &str = "user";
pub const URL_TOKEN: &str = "url";

const RESERVED: [&str; 4] = [PAD_TOKEN, UNKNOWN_TOKEN, USER_TOKEN, URL_TOKEN];

/// Frequency-cut token vocabulary with four reserved slots.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from token-sequence streams, keeping the
    /// `max_tokens` most frequent tokens. Ties at the cutoff are broken
    /// by first occurrence in the stream.
    pub fn build<'a, I>(streams: I, max_tokens: usize) -> Result<Vocab>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, (u64, usize)> = HashMap::new();
        let mut order = 0usize;
        let mut any = false;
        for seq in streams {
            any = true;
            for tok in seq {
                let entry = counts.entry(tok.as_str()).or_insert_with(|| {
                    let slot = (0, order);
                    order += 1;
                    slot
                });
                entry.0 += 1;
            }
        }
        if !any {
            return Err(Error::EmptyCorpus);
        }

        let mut candidates: Vec<(&str, u64, usize)> = counts
            .into_iter()
            .filter(|(tok, _)| !RESERVED.contains(tok))
            .map(|(tok, (count, first))| (tok, count, first))
            .collect();
        candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        candidates.truncate(max_tokens);

        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(candidates.into_iter().map(|(tok, _, _)| tok.to_string()));
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, tok)| (tok.clone(), i as u32))
            .collect();
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved tokens are always present
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: u32) -> &str {
        &self.tokens[index as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps tokens to indices without padding; unknown tokens become
    /// [`UNKNOWN_INDEX`].
    pub fn encode_sequence(&self, tokens: &[String]) -> Vec<u32> {
        tokens
            .iter()
            .map(|t| self.index_of(t).unwrap_or(UNKNOWN_INDEX))
            .collect()
    }

    /// One token per line, line number = index.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for tok in &self.tokens {
            writeln!(w, "{tok}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocab> {
        let reader = BufReader::new(File::open(path)?);
        let mut tokens = Vec::new();
        for line in reader.lines() {
            tokens.push(line?);
        }
        if tokens.len() < RESERVED.len()
            || RESERVED.iter().zip(&tokens).any(|(r, t)| r != t)
        {
            return Err(Error::Parse(
                "vocab file does not start with the reserved tokens".into(),
            ));
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, tok)| (tok.clone(), i as u32))
            .collect();
        Ok(Vocab { tokens, index })
    }
}

/// A tweet encoded to exactly [`SEQ_LEN`] vocabulary indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTweet(pub [u32; SEQ_LEN]);

/// Encodes a token sequence: unknown tokens map to `UNKNOWN`, short
/// sequences are right-padded with `PAD`, long ones trimmed to the first
/// [`SEQ_LEN`] tokens.
pub fn encode_tweet(tokens: &[String], vocab: &Vocab) -> EncodedTweet {
    let mut out = [PAD_INDEX; SEQ_LEN];
    for (slot, tok) in out.iter_mut().zip(tokens.iter()) {
        *slot = vocab.index_of(tok).unwrap_or(UNKNOWN_INDEX);
    }
    EncodedTweet(out)
}

/// Users involved (as author, retweet source, or mention) in the labeled
/// and unlabeled corpora at least twice. Keys are lowercased display
/// names.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct UserRegistry {
    names: Vec<String>,
    ids: HashMap<String, u32>,
    counts: Vec<u32>,
}

impl UserRegistry {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id_of(&self, display_name: &str) -> Option<u32> {
        self.ids.get(&display_name.to_lowercase()).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn involvement_count(&self, id: u32) -> u32 {
        self.counts[id as usize]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (name, count) in self.names.iter().zip(&self.counts) {
            writeln!(w, "{name}\t{count}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<UserRegistry> {
        let reader = BufReader::new(File::open(path)?);
        let mut names = Vec::new();
        let mut counts = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let (name, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("bad registry line {line:?}")))?;
            names.push(name.to_string());
            counts.push(
                count
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad involvement count {count:?}")))?,
            );
        }
        let ids = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        Ok(UserRegistry { names, ids, counts })
    }
}

/// Counts user involvement across both corpora and keeps users involved
/// at least twice. A user counts once per tweet authored, once per tweet
/// where they are the retweet source, and once per tweet where they are
/// mentioned.
pub fn build_user_registry(labeled: &[Tweet], unlabeled: &[Tweet]) -> UserRegistry {
    let mut counts: HashMap<String, (u32, usize)> = HashMap::new();
    let mut order = 0usize;
    let mut bump = |name: &str, counts: &mut HashMap<String, (u32, usize)>| {
        let entry = counts.entry(name.to_lowercase()).or_insert_with(|| {
            let slot = (0, order);
            order += 1;
            slot
        });
        entry.0 += 1;
    };

    for tweet in labeled.iter().chain(unlabeled) {
        bump(&tweet.author, &mut counts);
        if let Some(src) = &tweet.retweet_source {
            bump(src, &mut counts);
        }
        let mut seen: Vec<&str> = Vec::new();
        for m in &tweet.mentions {
            if !seen.contains(&m.as_str()) {
                seen.push(m);
                bump(m, &mut counts);
            }
        }
    }

    let mut kept: Vec<(String, u32, usize)> = counts
        .into_iter()
        .filter(|(_, (count, _))| *count >= 2)
        .map(|(name, (count, first))| (name, count, first))
        .collect();
    kept.sort_by_key(|(_, _, first)| *first);

    let mut registry = UserRegistry::default();
    for (name, count, _) in kept {
        registry.ids.insert(name.clone(), registry.names.len() as u32);
        registry.names.push(name);
        registry.counts.push(count);
    }
    registry
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write as _;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn tweet(id: &str, author: &str, ts: i64, text: &str) -> Tweet {
        let refs = raw_references(text);
        Tweet {
            id: id.into(),
            author: author.to_lowercase(),
            timestamp: ts,
            text: text.into(),
            label: None,
            retweet_source: refs.retweet_source,
            mentions: refs.mentions,
        }
    }

    #[test]
    fn vocab_keeps_reserved_and_content() {
        let seqs = [toks(&["a", "b", "c", "a"])];
        let vocab = Vocab::build(seqs.iter().map(|s| s.as_slice()), 40_000).unwrap();
        assert_eq!(vocab.len(), 3 + 4);
        assert_eq!(vocab.index_of(PAD_TOKEN), Some(PAD_INDEX));
        assert_eq!(vocab.index_of("a"), Some(4)); // most frequent first
    }

    #[test]
    fn vocab_cutoff_keeps_top_by_frequency() {
        // 50 distinct tokens, keep 10: the ten most frequent survive.
        let mut seqs: Vec<Vec<String>> = Vec::new();
        for i in 0..50 {
            let reps = if i < 10 { 5 } else { 1 };
            for _ in 0..reps {
                seqs.push(toks(&[&format!("t{i}")]));
            }
        }
        let vocab = Vocab::build(seqs.iter().map(|s| s.as_slice()), 10).unwrap();
        assert_eq!(vocab.len(), 10 + 4);
        for i in 0..10 {
            assert!(vocab.index_of(&format!("t{i}")).is_some());
        }
        assert!(vocab.index_of("t20").is_none());
    }

    #[test]
    fn vocab_tie_break_is_first_occurrence() {
        let seqs = [toks(&["late", "early"]), toks(&["early", "late"])];
        // "late" seen first, equal frequency; cap at 1 content token.
        let vocab = Vocab::build(seqs.iter().map(|s| s.as_slice()), 1).unwrap();
        assert!(vocab.index_of("late").is_some());
        assert!(vocab.index_of("early").is_none());
    }

    #[test]
    fn vocab_empty_stream_errors() {
        let seqs: Vec<Vec<String>> = Vec::new();
        assert!(matches!(
            Vocab::build(seqs.iter().map(|s| s.as_slice()), 10),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn encode_pads_trims_and_maps_oov() {
        let seqs = [toks(&["a", "b", "c"])];
        let vocab = Vocab::build(seqs.iter().map(|s| s.as_slice()), 40_000).unwrap();

        let short = encode_tweet(&toks(&["a", "b", "c"]), &vocab);
        assert_eq!(&short.0[..3], &[4, 5, 6]);
        assert!(short.0[3..].iter().all(|&i| i == PAD_INDEX));

        let long: Vec<String> = (0..60).map(|_| "a".to_string()).collect();
        let enc = encode_tweet(&long, &vocab);
        assert!(enc.0.iter().all(|&i| i == 4));

        let oov = encode_tweet(&toks(&["zzz"]), &vocab);
        assert_eq!(oov.0[0], UNKNOWN_INDEX);
    }

    #[test]
    fn registry_counts_and_threshold() {
        let labeled = vec![
            tweet("1", "gk", 10, "yo @ace"),
            tweet("2", "ace", 20, "hi"),
        ];
        let unlabeled = vec![tweet("3", "solo", 30, "alone")];
        let reg = build_user_registry(&labeled, &unlabeled);
        // gk: author once -> excluded; ace: author + mention = 2 -> kept;
        // solo: once -> excluded.
        assert_eq!(reg.len(), 1);
        let ace = reg.id_of("ACE").unwrap();
        assert_eq!(reg.involvement_count(ace), 2);
        assert!(reg.id_of("gk").is_none());
    }

    #[test]
    fn registry_empty_streams() {
        let reg = build_user_registry(&[], &[]);
        assert!(reg.is_empty());
    }

    #[test]
    fn registry_matches_brute_force_recount() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let users: Vec<String> = (0..30).map(|i| format!("u{i}")).collect();
        let mut all = Vec::new();
        for i in 0..500 {
            let author = users[rng.gen_range(0..users.len())].clone();
            let mut text = String::from("hello");
            if rng.gen_bool(0.3) {
                text = format!("RT @{}: {text}", users[rng.gen_range(0..users.len())]);
            }
            if rng.gen_bool(0.4) {
                text.push_str(&format!(" @{}", users[rng.gen_range(0..users.len())]));
            }
            all.push(tweet(&format!("t{i}"), &author, i, &text));
        }
        let (labeled, unlabeled) = all.split_at(250);
        let reg = build_user_registry(labeled, unlabeled);

        let mut expected: HashMap<String, u32> = HashMap::new();
        for t in &all {
            *expected.entry(t.author.clone()).or_default() += 1;
            if let Some(src) = &t.retweet_source {
                *expected.entry(src.clone()).or_default() += 1;
            }
            let mut seen = Vec::new();
            for m in &t.mentions {
                if !seen.contains(m) {
                    seen.push(m.clone());
                    *expected.entry(m.clone()).or_default() += 1;
                }
            }
        }
        expected.retain(|_, c| *c >= 2);
        assert_eq!(reg.len(), expected.len());
        for (name, count) in expected {
            let id = reg.id_of(&name).unwrap();
            assert_eq!(reg.involvement_count(id), count, "user {name}");
        }
    }

    #[test]
    fn ingest_reads_and_skips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tweets.jsonl");
        let mut f = File::create(&path).unwrap();
        writeln!(f, r#"{{"id":"1","user":"gk","ts":5,"text":"yo"}}"#).unwrap();
        writeln!(f, r#"{{"id":"2","user":"gk","ts":6,"text":"hi","label":"loss"}}"#).unwrap();
        for i in 3..20 {
            writeln!(f, r#"{{"id":"{i}","user":"gk","ts":{i},"text":"x"}}"#).unwrap();
        }
        writeln!(f, r#"{{"id":"bad","user":"gk","ts":7}}"#).unwrap();
        drop(f);

        let (tweets, stats) = ingest(&path).unwrap();
        assert_eq!(tweets.len(), 19);
        assert_eq!(stats.malformed_lines, 1);
        assert_eq!(tweets[1].label, Some(Label::Loss));
    }

    #[test]
    fn ingest_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        File::create(&path).unwrap();
        let (tweets, stats) = ingest(&path).unwrap();
        assert!(tweets.is_empty());
        assert_eq!(stats.total_lines, 0);
    }

    #[test]
    fn ingest_hard_fails_on_mostly_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let mut f = File::create(&path).unwrap();
        writeln!(f, r#"{{"id":"1","user":"gk","ts":5,"text":"yo"}}"#).unwrap();
        writeln!(f, "not json").unwrap();
        drop(f);
        assert!(matches!(
            ingest(&path),
            Err(Error::MalformedCorpus { malformed: 1, total: 2 })
        ));
    }

    #[test]
    fn vocab_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let seqs = [toks(&["a", "😡", "#tag"])];
        let vocab = Vocab::build(seqs.iter().map(|s| s.as_slice()), 40_000).unwrap();
        let path = dir.path().join("vocab.txt");
        vocab.save(&path).unwrap();
        let loaded = Vocab::load(&path).unwrap();
        assert_eq!(loaded.tokens(), vocab.tokens());
    }

    proptest! {
        #[test]
        fn encode_always_len_50_in_range(words in proptest::collection::vec("[a-c]{1,3}", 0..80)) {
            let seqs = [toks(&["a", "b", "c"])];
            let vocab = Vocab::build(seqs.iter().map(|s| s.as_slice()), 40_000).unwrap();
            let tokens: Vec<String> = words;
            let enc = encode_tweet(&tokens, &vocab);
            prop_assert_eq!(enc.0.len(), SEQ_LEN);
            prop_assert!(enc.0.iter().all(|&i| (i as usize) < vocab.len()));
        }

        #[test]
        fn vocab_permutation_invariant_without_ties(perm_seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            // Distinct frequencies: no ties at any cutoff.
            let mut seqs: Vec<Vec<String>> = Vec::new();
            for i in 0..8u32 {
                for _ in 0..=i {
                    seqs.push(toks(&[&format!("w{i}")]));
                }
            }
            let vocab_a = Vocab::build(seqs.iter().map(|s| s.as_slice()), 4).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
            seqs.shuffle(&mut rng);
            let vocab_b = Vocab::build(seqs.iter().map(|s| s.as_slice()), 4).unwrap();
            let mut a: Vec<&String> = vocab_a.tokens().iter().collect();
            let mut b: Vec<&String> = vocab_b.tokens().iter().collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}
