//! Transcript normalization: lowercase, tokenize, drop stopwords, lemmatize.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::media::RawDocument;

const STOPWORDS_V1: &str = include_str!("../../data/stopwords_en_v1.txt");
const LEMMA_EXCEPTIONS_V1: &str = include_str!("../../data/lemma_exceptions_v1.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    pub tokens: Vec<String>,
    pub source_video: String,
}

#[derive(Debug, Clone)]
pub struct StopWords {
    pub version: &'static str,
    words: HashSet<String>,
}

impl StopWords {
    /// The frozen English list shipped with the crate.
    pub fn english_v1() -> StopWords {
        StopWords {
            version: "en-v1",
            words: data_lines(STOPWORDS_V1).map(str::to_string).collect(),
        }
    }

    pub fn from_words<I: IntoIterator<Item = S>, S: Into<String>>(words: I) -> StopWords {
        StopWords {
            version: "custom",
            words: words.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosTag {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Number,
}

const ING_NOUNS: &[&str] = &[
    "anything", "building", "ceiling", "evening", "everything", "king", "meeting", "morning", "nothing",
    "ring", "something", "spring", "string", "thing", "wedding", "wing",
];
const ED_NON_VERBS: &[&str] = &["bed", "hundred", "red", "shed", "sled", "wed"];

/// Suffix-driven part-of-speech guess. Only used to decide which suffix
/// rules a lemmatizer may apply.
pub fn tag_token(token: &str) -> PosTag {
    if token.chars().all(|c| c.is_ascii_digit()) {
        return PosTag::Number;
    }
    if ING_NOUNS.contains(&token) || ED_NON_VERBS.contains(&token) {
        return PosTag::Noun;
    }
    if token.ends_with("ing") || (token.ends_with("ed") && !token.ends_with("eed")) {
        return PosTag::Verb;
    }
    if token.ends_with("ly") {
        return PosTag::Adverb;
    }
    if ["ous", "ful", "ive", "able", "ible", "less"].iter().any(|s| token.ends_with(s)) {
        return PosTag::Adjective;
    }
    PosTag::Noun
}

pub trait Lemmatizer: Send + Sync {
    fn lemma(&self, token: &str, pos: PosTag) -> String;
}

/// Rule-based suffix stripper with an exception lexicon. Rules are applied
/// until the token stops changing, so lemma(lemma(w)) = lemma(w).
#[derive(Debug, Clone)]
pub struct RuleLemmatizer {
    exceptions: HashMap<String, String>,
}

impl Default for RuleLemmatizer {
    fn default() -> Self {
        let exceptions = data_lines(LEMMA_EXCEPTIONS_V1)
            .filter_map(|l| l.split_once('\t'))
            .map(|(w, l)| (w.trim().to_string(), l.trim().to_string()))
            .collect();
        RuleLemmatizer { exceptions }
    }
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn undouble(stem: &str) -> &str {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 3 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z' | b'f') {
        &stem[..n - 1]
    } else {
        stem
    }
}

impl RuleLemmatizer {
    fn step(&self, w: &str) -> String {
        if let Some(l) = self.exceptions.get(w) {
            return l.clone();
        }
        if !w.is_ascii() || w.len() <= 3 {
            return w.to_string();
        }
        if let Some(stem) = w.strip_suffix("'s") {
            return stem.to_string();
        }
        let pos = tag_token(w);
        match pos {
            PosTag::Verb if w.ends_with("ing") && w.len() >= 6 => {
                return undouble(&w[..w.len() - 3]).to_string();
            }
            PosTag::Verb if w.ends_with("ed") && w.len() >= 5 => {
                let stem = &w[..w.len() - 2];
                if let Some(s) = stem.strip_suffix('i') {
                    return format!("{s}y");
                }
                return undouble(stem).to_string();
            }
            PosTag::Noun | PosTag::Verb => {}
            _ => return w.to_string(),
        }
        if w.len() > 4 && w.ends_with("ies") {
            return format!("{}y", &w[..w.len() - 3]);
        }
        if w.ends_with("sses") || ["xes", "ches", "shes", "zzes"].iter().any(|s| w.ends_with(s)) {
            return w[..w.len() - 2].to_string();
        }
        if w.ends_with('s') && !["ss", "us", "is", "'s"].iter().any(|s| w.ends_with(s)) {
            return w[..w.len() - 1].to_string();
        }
        w.to_string()
    }
}

impl Lemmatizer for RuleLemmatizer {
    fn lemma(&self, token: &str, _pos: PosTag) -> String {
        let mut cur = token.to_string();
        loop {
            let next = self.step(&cur);
            if next == cur || next.is_empty() {
                return cur;
            }
            cur = next;
        }
    }
}

/// Lowercase and split on anything that is not alphanumeric; apostrophes
/// inside a word are kept ("didn't"), those at its edges are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase().replace('\u{2019}', "'");
    lower
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Stopwords are removed both before lemmatization and after it, so a
/// lemma that happens to be a stopword never survives.
pub fn normalize_text(doc: &RawDocument, stopwords: &StopWords, lemmatizer: &dyn Lemmatizer) -> TokenizedDocument {
    let tokens = tokenize(&doc.text)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .map(|t| {
            let pos = tag_token(&t);
            lemmatizer.lemma(&t, pos)
        })
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .collect();
    TokenizedDocument {
        tokens,
        source_video: doc.source_video.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(text: &str) -> RawDocument {
        RawDocument {
            text: text.into(),
            source_video: "v".into(),
        }
    }

    fn norm(text: &str) -> Vec<String> {
        normalize_text(&doc(text), &StopWords::english_v1(), &RuleLemmatizer::default()).tokens
    }

    #[test]
    fn stopword_list_is_frozen() {
        let sw = StopWords::english_v1();
        assert_eq!(sw.len(), 127);
        for filler in ["um", "uh", "ah"] {
            assert!(!sw.contains(filler));
        }
    }

    #[test]
    fn worked_examples() {
        assert_eq!(norm("The WITNESS um lied"), vec!["witness", "um", "lie"]);
        assert!(norm("").is_empty());
        assert_eq!(norm("I didn't see the cars... uh, running!"), vec!["didn't", "see", "car", "uh", "run"]);
        assert_eq!(norm("Witnesses' stories"), vec!["witness", "story"]);
    }

    #[test]
    fn lemmatizer_rules() {
        let l = RuleLemmatizer::default();
        let lem = |w: &str| l.lemma(w, tag_token(w));
        assert_eq!(lem("tried"), "try");
        assert_eq!(lem("stopped"), "stop");
        assert_eq!(lem("boxes"), "box");
        assert_eq!(lem("morning"), "morning");
        assert_eq!(lem("quickly"), "quickly");
        assert_eq!(lem("bus"), "bus");
        assert_eq!(lem("told"), "tell");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn normalization_is_idempotent_and_clean(text in "[A-Za-z' .,!?-]{0,80}") {
            let once = norm(&text);
            let twice = norm(&once.join(" "));
            prop_assert_eq!(&once, &twice);
            let sw = StopWords::english_v1();
            for t in &once {
                prop_assert!(!sw.contains(t));
                prop_assert!(!t.chars().any(|c| c.is_uppercase() || c.is_whitespace()));
            }
        }

        #[test]
        fn lemma_is_a_fixed_point(w in "[a-z]{1,14}(ing|ed|es|ies|s)?") {
            let l = RuleLemmatizer::default();
            let once = l.lemma(&w, tag_token(&w));
            prop_assert_eq!(l.lemma(&once, tag_token(&once)), once);
        }
    }
}
