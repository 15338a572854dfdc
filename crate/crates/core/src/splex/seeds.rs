//! Seed word lists for the two lexicon classes.

use std::fmt;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedClass {
    Aggression,
    Loss,
}

impl fmt::Display for SeedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeedClass::Aggression => "aggression",
            SeedClass::Loss => "loss",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SeedSet {
    pub class: SeedClass,
    pub words: Vec<String>,
}

const AGGRESSION_SEEDS: &[&str] = &[
    "angry", "opps", "opp", "fu", "fuck", "bitch", "smoke", "pipe", "glock", "play", "missin",
    "bang", "smack", "slap", "beat", "blood", "bust", "bussin", "heat", "bdk", "gdk", "snitch",
    "cappin", "killa", "kill", "hitta", "hittas", "shooter", "tf",
];

const LOSS_SEEDS: &[&str] = &[
    "free", "rip", "longlive", "ll", "rest", "up", "restup", "crying", "cry", "fly", "flyhigh",
    "fallin", "bip", "day", "why", "funeral", "sleep", "miss", "king", "hurt", "gone", "cant",
    "believe", "death", "dead", "died", "lost", "killed", "grave", "damn", "soldier", "soldiers",
    "gang", "bro", "man", "hitta", "jail", "blood", "heaven", "home",
];

/// The default annotator seed sets: 29 aggression words, 40 loss words.
pub fn default_seed_sets() -> (SeedSet, SeedSet) {
    (
        SeedSet {
            class: SeedClass::Aggression,
            words: AGGRESSION_SEEDS.iter().map(|s| s.to_string()).collect(),
        },
        SeedSet {
            class: SeedClass::Loss,
            words: LOSS_SEEDS.iter().map(|s| s.to_string()).collect(),
        },
    )
}

/// Parses a seed file with `[aggression]` / `[loss]` section headers and
/// one word per line. Words are lowercased; blank lines and `#` comments
/// are ignored.
pub fn parse_seed_file(content: &str) -> Result<(SeedSet, SeedSet)> {
    let mut aggression = Vec::new();
    let mut loss = Vec::new();
    let mut current: Option<SeedClass> = None;
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line {
            "[aggression]" => current = Some(SeedClass::Aggression),
            "[loss]" => current = Some(SeedClass::Loss),
            word => match current {
                Some(SeedClass::Aggression) => aggression.push(word.to_lowercase()),
                Some(SeedClass::Loss) => loss.push(word.to_lowercase()),
                None => {
                    return Err(Error::Parse(format!(
                        "seed file line {}: word before any section header",
                        lineno + 1
                    )))
                }
            },
        }
    }
    if aggression.is_empty() || loss.is_empty() {
        return Err(Error::Parse(
            "seed file must contain nonempty [aggression] and [loss] sections".into(),
        ));
    }
    Ok((
        SeedSet {
            class: SeedClass::Aggression,
            words: aggression,
        },
        SeedSet {
            class: SeedClass::Loss,
            words: loss,
        },
    ))
}

pub fn load_seed_file(path: &Path) -> Result<(SeedSet, SeedSet)> {
    parse_seed_file(&std::fs::read_to_string(path)?)
}

/// Writes the default seed sets in the loadable file format.
pub fn default_seed_file_contents() -> String {
    let mut out = String::from("[aggression]\n");
    for w in AGGRESSION_SEEDS {
        out.push_str(w);
        out.push('\n');
    }
    out.push_str("\n[loss]\n");
    for w in LOSS_SEEDS {
        out.push_str(w);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts_match() {
        let (a, l) = default_seed_sets();
        assert_eq!(a.words.len(), 29);
        assert_eq!(l.words.len(), 40);
        assert!(a.words.iter().all(|w| w.to_lowercase() == *w));
    }

    #[test]
    fn default_file_round_trips() {
        let (a, l) = parse_seed_file(&default_seed_file_contents()).unwrap();
        let (da, dl) = default_seed_sets();
        assert_eq!(a.words, da.words);
        assert_eq!(l.words, dl.words);
    }

    #[test]
    fn parse_rejects_headerless_words() {
        assert!(parse_seed_file("word\n[aggression]\nx\n[loss]\ny\n").is_err());
    }

    #[test]
    fn parse_lowercases() {
        let (a, _) = parse_seed_file("[aggression]\nBDK\n[loss]\nRIP\n").unwrap();
        assert_eq!(a.words, vec!["bdk"]);
    }
}
