//! Open event extraction from dependency parses.
//!
//! An event is a `(subject, predicate, object)` tuple of lemma lists keyed
//! by a canonical string `S|P|O`. Each verbal predicate head yields at most
//! one occurrence.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use regex::Regex;

use crate::corpus::ParsedSentence;
use crate::error::{Error, Result};

/// Canonical `S|P|O` event key. Slots hold lowercase lemmas joined by `_`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventKey(String);

impl EventKey {
    /// Validates the three-slot shape and a nonempty predicate. Whitespace
    /// and `#` are not allowed.
    pub fn parse(raw: &str) -> Result<Self> {
        let mut parts = raw.split('|');
        let (Some(_), Some(p), Some(_), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::BadEventKey(raw.to_string()));
        };
        if p.is_empty() || raw.chars().any(|c| c.is_whitespace() || c == '#') {
            return Err(Error::BadEventKey(raw.to_string()));
        }
        Ok(EventKey(raw.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn slot(&self, i: usize) -> &str {
        self.0.split('|').nth(i).unwrap_or("")
    }

    pub fn subject(&self) -> &str {
        self.slot(0)
    }

    pub fn predicate(&self) -> &str {
        self.slot(1)
    }

    pub fn object(&self) -> &str {
        self.slot(2)
    }

    /// Every lemma across the three slots.
    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.0.split(['|', '_']).filter(|s| !s.is_empty())
    }

    pub fn tuple(&self) -> EventTuple {
        let slot = |s: &str| -> Option<Vec<String>> {
            if s.is_empty() {
                None
            } else {
                Some(s.split('_').map(String::from).collect())
            }
        };
        EventTuple {
            subject: slot(self.subject()),
            predicate: slot(self.predicate()).unwrap_or_default(),
            object: slot(self.object()),
        }
    }
}

impl fmt::Display for EventKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventTuple {
    pub subject: Option<Vec<String>>,
    pub predicate: Vec<String>,
    pub object: Option<Vec<String>>,
}

impl EventTuple {
    pub fn new(subject: Option<&[&str]>, predicate: &[&str], object: Option<&[&str]>) -> Self {
        let own = |s: &[&str]| s.iter().map(|w| String::from(*w)).collect::<Vec<_>>();
        EventTuple {
            subject: subject.map(own),
            predicate: own(predicate),
            object: object.map(own),
        }
    }

    /// `S` and `O` may both be absent only for multi-lemma triggers.
    pub fn is_complete(&self) -> bool {
        !self.predicate.is_empty()
            && (self.subject.is_some() || self.object.is_some() || self.predicate.len() >= 2)
    }

    pub fn key(&self) -> EventKey {
        let slot = |lemmas: &[String]| -> String {
            let mut out = String::new();
            for (i, l) in lemmas.iter().enumerate() {
                if i > 0 {
                    out.push('_');
                }
                out.extend(l.chars().flat_map(char::to_lowercase).map(|c| match c {
                    // `#` would start a comment in the tabular files
                    '|' | '_' | '#' => '-',
                    c if c.is_whitespace() => '-',
                    c => c,
                }));
            }
            out
        };
        let mut key = String::new();
        key.push_str(&slot(self.subject.as_deref().unwrap_or(&[])));
        key.push('|');
        key.push_str(&slot(&self.predicate));
        key.push('|');
        key.push_str(&slot(self.object.as_deref().unwrap_or(&[])));
        EventKey(key)
    }
}

/// Inclusive range of 0-based token positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        TokenSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.start <= pos && pos <= self.end
    }

    pub fn overlaps(&self, other: &TokenSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventOccurrence {
    pub event: EventKey,
    pub doc_id: String,
    pub sent_index: usize,
    pub token_span: TokenSpan,
    /// 0-based position of the predicate head.
    pub predicate_pos: usize,
    /// Lemmas of the extra `X` slot (adverbials, complements). Not part of
    /// the key.
    pub extra: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionConfig {
    pub verb_tags: BTreeSet<String>,
    pub subject_deprels: BTreeSet<String>,
    pub object_deprels: BTreeSet<String>,
    /// Particles folded into the trigger, e.g. `go to`, `pick up`.
    pub trigger_deprels: BTreeSet<String>,
    /// Multi-word argument modifiers folded into a slot.
    pub slot_deprels: BTreeSet<String>,
    pub conj_deprels: BTreeSet<String>,
    /// Dependents collected into the extra slot.
    pub extra_deprels: BTreeSet<String>,
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| String::from(*s)).collect()
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            verb_tags: set(&["VERB", "v", "VV", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ"]),
            subject_deprels: set(&["nsubj", "subj", "SBV"]),
            object_deprels: set(&["obj", "dobj", "VOB"]),
            trigger_deprels: set(&["compound:prt", "prt"]),
            slot_deprels: set(&["compound", "flat", "fixed"]),
            conj_deprels: set(&["conj", "COO"]),
            extra_deprels: set(&["advmod", "obl", "xcomp", "ADV", "CMP"]),
        }
    }
}

impl ExtractionConfig {
    pub fn is_verb(&self, pos: &str) -> bool {
        self.verb_tags.contains(pos)
    }
}

/// Extracts one occurrence per verbal predicate head, ordered by position.
///
/// A conjoined verb without its own subject inherits the subject of the
/// verb it is conjoined to. Tuples that are not semantically complete are
/// dropped.
pub fn extract_events(sentence: &ParsedSentence, config: &ExtractionConfig) -> Vec<EventOccurrence> {
    let tokens = &sentence.tokens;
    let lemma = |pos: usize| tokens[pos].lemma.to_lowercase();

    // Slot lemmas for an argument head: the head plus its multi-word
    // modifiers, in text order.
    let slot = |head_pos: usize| -> (Vec<String>, Vec<usize>) {
        let mut positions: Vec<usize> = sentence
            .children(head_pos + 1)
            .filter(|&c| config.slot_deprels.contains(tokens[c].deprel.as_str()))
            .collect();
        positions.push(head_pos);
        positions.sort_unstable();
        (positions.iter().map(|&p| lemma(p)).collect(), positions)
    };

    let own_subject = |verb: usize| -> Option<usize> {
        sentence
            .children(verb + 1)
            .find(|&c| config.subject_deprels.contains(tokens[c].deprel.as_str()))
    };

    let mut out = Vec::new();
    for (v, tok) in tokens.iter().enumerate() {
        if !config.is_verb(&tok.pos) {
            continue;
        }
        let mut span_positions: Vec<usize> = Vec::new();

        let mut predicate_positions: Vec<usize> = sentence
            .children(v + 1)
            .filter(|&c| config.trigger_deprels.contains(tokens[c].deprel.as_str()))
            .collect();
        predicate_positions.push(v);
        predicate_positions.sort_unstable();
        span_positions.extend(&predicate_positions);
        let predicate: Vec<String> = predicate_positions.iter().map(|&p| lemma(p)).collect();

        let subject = match own_subject(v) {
            Some(s) => {
                let (lemmas, positions) = slot(s);
                span_positions.extend(positions);
                Some(lemmas)
            }
            None => inherited_subject(sentence, config, v).map(|s| slot(s).0),
        };

        let object = sentence
            .children(v + 1)
            .find(|&c| config.object_deprels.contains(tokens[c].deprel.as_str()))
            .map(|o| {
                let (lemmas, positions) = slot(o);
                span_positions.extend(positions);
                lemmas
            });

        let extra: Vec<String> = sentence
            .children(v + 1)
            .filter(|&c| config.extra_deprels.contains(tokens[c].deprel.as_str()))
            .map(lemma)
            .collect();

        let tuple = EventTuple {
            subject,
            predicate,
            object,
        };
        if !tuple.is_complete() {
            continue;
        }
        let start = span_positions.iter().copied().min().unwrap_or(v);
        let end = span_positions.iter().copied().max().unwrap_or(v);
        out.push(EventOccurrence {
            event: tuple.key(),
            doc_id: sentence.doc_id.clone(),
            sent_index: sentence.sent_index,
            token_span: TokenSpan::new(start, end),
            predicate_pos: v,
            extra,
        });
    }
    out
}

/// Follows conjunction links upward until a verb with its own subject is
/// found. The walk is bounded by the sentence length so malformed cycles
/// cannot loop.
fn inherited_subject(sentence: &ParsedSentence, config: &ExtractionConfig, verb: usize) -> Option<usize> {
    let tokens = &sentence.tokens;
    let mut current = verb;
    for _ in 0..tokens.len() {
        let tok = &tokens[current];
        if !config.conj_deprels.contains(tok.deprel.as_str()) || tok.head == 0 {
            return None;
        }
        let head = tok.head - 1;
        if !config.is_verb(&tokens[head].pos) {
            return None;
        }
        if let Some(s) = sentence
            .children(head + 1)
            .find(|&c| config.subject_deprels.contains(tokens[c].deprel.as_str()))
        {
            return Some(s);
        }
        current = head;
    }
    None
}

/// Event key frequencies over a list of occurrences.
pub fn event_frequencies<'a>(occurrences: impl IntoIterator<Item = &'a EventOccurrence>) -> BTreeMap<EventKey, u64> {
    let mut freq = BTreeMap::new();
    for o in occurrences {
        *freq.entry(o.event.clone()).or_insert(0) += 1;
    }
    freq
}

/// Keeps occurrences whose key appears at least `threshold` times in the
/// input.
pub fn filter_low_frequency(occurrences: Vec<EventOccurrence>, threshold: u64) -> Vec<EventOccurrence> {
    let freq = event_frequencies(&occurrences);
    filter_by_frequency(occurrences, &freq, threshold)
}

/// Second phase of frequency filtering with globally merged counts.
pub fn filter_by_frequency(
    occurrences: Vec<EventOccurrence>,
    freq: &BTreeMap<EventKey, u64>,
    threshold: u64,
) -> Vec<EventOccurrence> {
    occurrences
        .into_iter()
        .filter(|o| freq.get(&o.event).copied().unwrap_or(0) >= threshold)
        .collect()
}

#[derive(Debug, Clone)]
pub enum BlacklistEntry {
    /// Exact event key.
    Key(String),
    /// Any event with this predicate slot.
    Predicate(String),
    /// Regular expression over the key.
    Pattern(Regex),
}

impl BlacklistEntry {
    /// Compiles a regex entry. Malformed patterns fail here, not at match
    /// time.
    pub fn pattern(re: &str) -> Result<Self> {
        Regex::new(re)
            .map(BlacklistEntry::Pattern)
            .map_err(|e| Error::Config(alloc::format!("blacklist regex `{re}`: {e}")))
    }

    pub fn matches(&self, key: &EventKey) -> bool {
        match self {
            BlacklistEntry::Key(k) => key.as_str() == k,
            BlacklistEntry::Predicate(p) => key.predicate() == p,
            BlacklistEntry::Pattern(re) => re.is_match(key.as_str()),
        }
    }
}

/// Dictionary of over-general events such as "do something".
#[derive(Debug, Clone, Default)]
pub struct GeneralityBlacklist {
    pub entries: Vec<BlacklistEntry>,
}

impl GeneralityBlacklist {
    pub fn new(entries: Vec<BlacklistEntry>) -> Self {
        GeneralityBlacklist { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn matches(&self, key: &EventKey) -> bool {
        self.entries.iter().any(|e| e.matches(key))
    }
}

pub fn filter_general(occurrences: Vec<EventOccurrence>, blacklist: &GeneralityBlacklist) -> Vec<EventOccurrence> {
    if blacklist.is_empty() {
        return occurrences;
    }
    occurrences
        .into_iter()
        .filter(|o| !blacklist.matches(&o.event))
        .collect()
}
