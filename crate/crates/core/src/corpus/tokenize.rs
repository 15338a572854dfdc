//! Tweet text normalization and display-name reference extraction.

use once_cell::sync::Lazy;
use regex::Regex;

use super::UserRegistry;

static URL_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap());
static MENTION_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"@\w+").unwrap());
static RETWEET_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^\s*RT\s+@(\w+):").unwrap());

/// Emoji skin-tone modifiers, variation selectors, and the zero-width
/// joiner are dropped entirely.
fn is_emoji_modifier(c: char) -> bool {
    matches!(u32::from(c), 0x1F3FB..=0x1F3FF | 0xFE0E | 0xFE0F | 0x200D)
}

fn is_emoji(c: char) -> bool {
    matches!(
        u32::from(c),
        0x1F000..=0x1FAFF   // pictographs, emoticons, transport, supplemental
        | 0x2600..=0x27BF   // miscellaneous symbols, dingbats
        | 0x2B00..=0x2BFF   // stars, geometric shapes
    ) && !is_emoji_modifier(c)
}

/// ASCII punctuation split off at token edges; '#' is kept so hashtags
/// survive intact.
fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation() && c != '#'
}

/// Normalizes raw tweet text into tokens: mentions become `user`, URLs
/// become `url`, everything is lowercased, each emoji is its own token
/// (modifiers stripped), hashtags stay whole, and leading/trailing ASCII
/// punctuation is split into separate tokens.
///
/// Idempotent on its own output (joined by spaces).
pub fn normalize_tweet(text: &str) -> Vec<String> {
    let stripped: String = text.chars().filter(|&c| !is_emoji_modifier(c)).collect();
    let replaced = URL_RE.replace_all(&stripped, " url ");
    let replaced = MENTION_RE.replace_all(&replaced, " user ");
    let lowered = replaced.to_lowercase();

    let mut tokens = Vec::new();
    for chunk in lowered.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if is_emoji(c) {
                flush_word(&mut word, &mut tokens);
                tokens.push(c.to_string());
            } else {
                word.push(c);
            }
        }
        flush_word(&mut word, &mut tokens);
    }
    tokens
}

/// Emits `word` with edge punctuation split off, clearing the buffer.
fn flush_word(word: &mut String, tokens: &mut Vec<String>) {
    if word.is_empty() {
        return;
    }
    let chars: Vec<char> = word.chars().collect();
    let mut start = 0;
    let mut end = chars.len();
    while start < end && is_edge_punct(chars[start]) {
        start += 1;
    }
    while end > start && is_edge_punct(chars[end - 1]) {
        end -= 1;
    }
    for &c in &chars[..start] {
        tokens.push(c.to_string());
    }
    if start < end {
        tokens.push(chars[start..end].iter().collect());
    }
    for &c in &chars[end..] {
        tokens.push(c.to_string());
    }
    word.clear();
}

/// Unfiltered display-name references found in raw tweet text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawRefs {
    pub retweet_source: Option<String>,
    pub mentions: Vec<String>,
}

/// Extracts the leading `RT @name:` source and all other `@name`
/// mentions from raw text. Names are lowercased; matching elsewhere is
/// case-insensitive exact.
pub fn raw_references(text: &str) -> RawRefs {
    let mut refs = RawRefs::default();
    let mut rt_span = None;
    if let Some(caps) = RETWEET_RE.captures(text) {
        let m = caps.get(1).unwrap();
        refs.retweet_source = Some(m.as_str().to_lowercase());
        rt_span = Some(m.range());
    }
    for m in MENTION_RE.find_iter(text) {
        if let Some(span) = &rt_span {
            if m.start() + 1 == span.start {
                continue; // the retweet source, not a mention
            }
        }
        refs.mentions.push(m.as_str()[1..].to_lowercase());
    }
    refs
}

/// References of a tweet restricted to registered users: the retweet
/// source (metadata if present, else the leading `RT @name:` pattern)
/// and every other mentioned name.
pub fn extract_references(
    tweet: &super::Tweet,
    registry: &UserRegistry,
) -> (Option<u32>, Vec<u32>) {
    let source = tweet
        .retweet_source
        .as_deref()
        .and_then(|name| registry.id_of(name));
    let mentions = tweet
        .mentions
        .iter()
        .filter_map(|name| registry.id_of(name))
        .collect();
    (source, mentions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_user_registry, Tweet};
    use proptest::prelude::*;

    fn t(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn mention_url_emoji() {
        assert_eq!(
            normalize_tweet("@Foo check http://x.co 😡😡"),
            t(&["user", "check", "url", "😡", "😡"])
        );
    }

    #[test]
    fn hashtag_kept_and_lowercased() {
        assert_eq!(normalize_tweet("#FreeDaDom"), t(&["#freedadom"]));
    }

    #[test]
    fn skin_tone_modifier_stripped() {
        assert_eq!(normalize_tweet("👍🏾"), t(&["👍"]));
    }

    #[test]
    fn variation_selector_and_zwj_stripped() {
        assert_eq!(normalize_tweet("☠\u{FE0F}"), t(&["☠"]));
        assert_eq!(normalize_tweet("👨\u{200D}👧"), t(&["👨", "👧"]));
    }

    #[test]
    fn embedded_emoji_splits_word() {
        assert_eq!(normalize_tweet("mad😈face"), t(&["mad", "😈", "face"]));
    }

    #[test]
    fn edge_punctuation_split_off() {
        assert_eq!(normalize_tweet("(yo!)"), t(&["(", "yo", "!", ")"]));
        assert_eq!(normalize_tweet("don't"), t(&["don't"]));
        assert_eq!(normalize_tweet("RT @gk: yo"), t(&["rt", "user", ":", "yo"]));
    }

    #[test]
    fn www_url_and_empty() {
        assert_eq!(normalize_tweet("see www.example.com/x now"), t(&["see", "url", "now"]));
        assert_eq!(normalize_tweet(""), Vec::<String>::new());
        assert_eq!(normalize_tweet("   "), Vec::<String>::new());
    }

    #[test]
    fn raw_refs_patterns() {
        let refs = raw_references("RT @gk: yo @a @b");
        assert_eq!(refs.retweet_source.as_deref(), Some("gk"));
        assert_eq!(refs.mentions, vec!["a", "b"]);

        let refs = raw_references("yo @A @b");
        assert_eq!(refs.retweet_source, None);
        assert_eq!(refs.mentions, vec!["a", "b"]);
    }

    #[test]
    fn extract_filters_by_registry() {
        let mk = |id: &str, text: &str| {
            let refs = raw_references(text);
            Tweet {
                id: id.into(),
                author: "gk".into(),
                timestamp: 0,
                text: text.into(),
                label: None,
                retweet_source: refs.retweet_source,
                mentions: refs.mentions,
            }
        };
        // gk authors 4 tweets; a and b are each mentioned twice; ghost once.
        let corpus = vec![
            mk("1", "RT @gk: yo"),
            mk("2", "yo @a @b"),
            mk("3", "yo @a @b"),
            mk("4", "@ghost hi"),
        ];
        let reg = build_user_registry(&corpus, &[]);

        let (src, mentions) = extract_references(&corpus[0], &reg);
        assert_eq!(src, reg.id_of("gk"));
        assert!(mentions.is_empty());

        let (src, mentions) = extract_references(&corpus[1], &reg);
        assert_eq!(src, None);
        assert_eq!(mentions.len(), 2);

        let (_, mentions) = extract_references(&corpus[3], &reg);
        assert!(mentions.is_empty(), "unregistered mention discarded");
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(text in "[ -~😡👍🏾#@\u{FE0F}]{0,60}") {
            let once = normalize_tweet(&text);
            let again = normalize_tweet(&once.join(" "));
            prop_assert_eq!(once, again);
        }
    }
}
