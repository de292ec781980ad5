//! Parsed-corpus data model and cleaning.
//!
//! Input text arrives already tokenized, tagged and dependency-parsed. This
//! module only validates and cleans it.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub pos: String,
    /// Index of the governor, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(
        index: usize,
        surface: impl Into<String>,
        lemma: impl Into<String>,
        pos: impl Into<String>,
        head: usize,
        deprel: impl Into<String>,
    ) -> Self {
        Token {
            index,
            surface: surface.into(),
            lemma: lemma.into(),
            pos: pos.into(),
            head,
            deprel: deprel.into(),
        }
    }

    /// True when the surface form has no alphanumeric character.
    pub fn is_punct(&self) -> bool {
        self.pos == "PUNCT" || !self.surface.chars().any(char::is_alphanumeric)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParsedSentence {
    pub doc_id: String,
    pub sent_index: usize,
    pub tokens: Vec<Token>,
}

impl ParsedSentence {
    pub fn new(doc_id: impl Into<String>, sent_index: usize, tokens: Vec<Token>) -> Self {
        ParsedSentence {
            doc_id: doc_id.into(),
            sent_index,
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by 1-based index.
    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// 0-based positions of the dependents of the token at 1-based `head`.
    pub fn children(&self, head: usize) -> impl Iterator<Item = usize> + '_ {
        self.tokens
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.head == head)
            .map(|(i, _)| i)
    }

    /// Surface forms joined by single spaces.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&t.surface);
        }
        out
    }

    /// Checks token and tree invariants.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidSentence {
            doc_id: self.doc_id.clone(),
            sent_index: self.sent_index,
            reason,
        };
        if self.tokens.is_empty() {
            return Err(fail("no tokens".into()));
        }
        let n = self.tokens.len();
        let mut roots = 0;
        for (pos, t) in self.tokens.iter().enumerate() {
            if t.index != pos + 1 {
                return Err(fail(format!("token index {} at position {}", t.index, pos + 1)));
            }
            if t.head == t.index {
                return Err(fail(format!("token {} governs itself", t.index)));
            }
            if t.head > n {
                return Err(fail(format!("token {} head {} out of bounds", t.index, t.head)));
            }
            if t.deprel.is_empty() {
                return Err(fail(format!("token {} has empty deprel", t.index)));
            }
            if t.head == 0 {
                roots += 1;
            }
        }
        if roots != 1 {
            return Err(fail(format!("{roots} root tokens")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<ParsedSentence>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedCorpus {
    pub documents: Vec<Document>,
    pub source_meta: BTreeMap<String, String>,
}

impl ParsedCorpus {
    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    pub fn token_count(&self) -> usize {
        self.documents
            .iter()
            .flat_map(|d| &d.sentences)
            .map(ParsedSentence::len)
            .sum()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &ParsedSentence> {
        self.documents.iter().flat_map(|d| d.sentences.iter())
    }

    /// Checks unique doc ids and contiguous sentence indices.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for doc in &self.documents {
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(Error::Config(format!("duplicate doc_id `{}`", doc.doc_id)));
            }
            for (i, s) in doc.sentences.iter().enumerate() {
                if s.sent_index != i || s.doc_id != doc.doc_id {
                    return Err(Error::InvalidSentence {
                        doc_id: s.doc_id.clone(),
                        sent_index: s.sent_index,
                        reason: format!("expected sentence {i} of `{}`", doc.doc_id),
                    });
                }
                s.validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CleaningConfig {
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            min_tokens: 2,
            max_tokens: 200,
        }
    }
}

/// Drops consecutive exact duplicates and sentences outside the length
/// bounds. Order is preserved.
pub fn clean_document(raw: Vec<ParsedSentence>, config: &CleaningConfig) -> Vec<ParsedSentence> {
    // Length filter first so that dropping a sentence can never leave two
    // equal neighbours behind.
    let mut out: Vec<ParsedSentence> = Vec::with_capacity(raw.len());
    for s in raw {
        if s.len() < config.min_tokens || s.len() > config.max_tokens {
            continue;
        }
        if out.last().is_some_and(|prev| prev.tokens == s.tokens) {
            continue;
        }
        out.push(s);
    }
    out
}

/// Cleans every document, drops documents whose token content repeats an
/// earlier one, and renumbers sentences so indices stay contiguous.
pub fn clean_corpus(corpus: ParsedCorpus, config: &CleaningConfig) -> ParsedCorpus {
    let mut seen: BTreeSet<u64> = BTreeSet::new();
    let mut documents = Vec::with_capacity(corpus.documents.len());
    for doc in corpus.documents {
        let sentences = clean_document(doc.sentences, config);
        if sentences.is_empty() || !seen.insert(content_hash(&sentences)) {
            continue;
        }
        let sentences = sentences
            .into_iter()
            .enumerate()
            .map(|(i, mut s)| {
                s.sent_index = i;
                s
            })
            .collect();
        documents.push(Document {
            doc_id: doc.doc_id,
            sentences,
        });
    }
    ParsedCorpus {
        documents,
        source_meta: corpus.source_meta,
    }
}

/// FNV-1a over the token surfaces and lemmas of a document.
fn content_hash(sentences: &[ParsedSentence]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for s in sentences {
        for t in &s.tokens {
            feed(t.surface.as_bytes());
            feed(&[0x1f]);
            feed(t.lemma.as_bytes());
            feed(&[0x1e]);
        }
        feed(&[0x1d]);
    }
    h
}


#[cfg(test)]
mod tests {
    use super::fixtures::flat;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_rejects_bad_heads() {
        let mut s = flat("d", 0, &["a", "b", "c"]);
        assert!(s.validate().is_ok());
        s.tokens[2].head = 7;
        assert!(s.validate().is_err());
        s.tokens[2].head = 3;
        assert!(s.validate().is_err());
        s.tokens[2].head = 0;
        assert!(s.validate().is_err(), "two roots");
    }

    #[test]
    fn consecutive_duplicates_are_removed() {
        let s1 = flat("d", 0, &["a", "b"]);
        let s2 = flat("d", 1, &["c", "d"]);
        let cfg = CleaningConfig::default();
        let out = clean_document(alloc::vec![s1.clone(), s1.clone(), s2.clone()], &cfg);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].tokens, s1.tokens);
        assert_eq!(out[1].tokens, s2.tokens);
    }

    #[test]
    fn non_consecutive_duplicates_are_kept() {
        let s1 = flat("d", 0, &["a", "b"]);
        let s2 = flat("d", 1, &["c", "d"]);
        let cfg = CleaningConfig::default();
        let out = clean_document(alloc::vec![s1.clone(), s2, s1], &cfg);
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn short_and_long_sentences_are_removed() {
        let cfg = CleaningConfig {
            min_tokens: 2,
            max_tokens: 3,
        };
        let out = clean_document(alloc::vec![flat("d", 0, &["a"])], &cfg);
        assert!(out.is_empty());
        let out = clean_document(alloc::vec![flat("d", 0, &["a", "b", "c", "d"])], &cfg);
        assert!(out.is_empty());
    }

    #[test]
    fn duplicate_documents_are_dropped() {
        let doc = |id: &str| Document {
            doc_id: id.into(),
            sentences: alloc::vec![flat(id, 0, &["a", "b"])],
        };
        let corpus = ParsedCorpus {
            documents: alloc::vec![doc("x"), doc("y")],
            source_meta: BTreeMap::new(),
        };
        let cleaned = clean_corpus(corpus, &CleaningConfig::default());
        assert_eq!(cleaned.documents.len(), 1);
        assert_eq!(cleaned.documents[0].doc_id, "x");
    }

    fn arb_sentences() -> impl Strategy<Value = Vec<ParsedSentence>> {
        proptest::collection::vec(proptest::collection::vec(0u8..3, 1..4), 0..12).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, ws)| {
                    let words: Vec<String> = ws.iter().map(|w| alloc::format!("w{w}")).collect();
                    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
                    flat("d", i, &refs)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(raw in arb_sentences()) {
            let cfg = CleaningConfig { min_tokens: 2, max_tokens: 3 };
            let once = clean_document(raw, &cfg);
            let twice = clean_document(once.clone(), &cfg);
            prop_assert_eq!(once, twice);
        }
    }
}
