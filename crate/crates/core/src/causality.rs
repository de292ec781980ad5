//! Rule-template causal mention extraction, BIO tagging and span scoring.
//!
//! A rule is a regex with `cause` and `effect` groups, a constraint and a
//! priority. Regexes run over the space-joined surface text; captured
//! character ranges are mapped back to tokens.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use regex::Regex;

use crate::corpus::ParsedSentence;
use crate::error::{Error, Result};
use crate::events::{EventKey, EventOccurrence, EventTuple, ExtractionConfig, TokenSpan};
use crate::seqrel::{harmonic, Confusion, EvalMetrics, FoldMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Cause,
    Effect,
}

impl Role {
    fn parse(s: &str) -> Option<Role> {
        match s.trim() {
            "cause" => Some(Role::Cause),
            "effect" => Some(Role::Effect),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Cause => "cause",
            Role::Effect => "effect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    /// POS of the sentence token at a 1-based index; negative counts from
    /// the end (`-1` is the last token).
    Pos { index: i64, tag: String },
    ContainsVerb(Role),
    MaxLen(Role, usize),
}

/// Conjunction of atoms, written `atom & atom & ...`; `-` is the empty
/// constraint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Constraint {
    pub atoms: Vec<Atom>,
}

impl Constraint {
    pub fn parse(src: &str) -> core::result::Result<Self, String> {
        let src = src.trim();
        if src.is_empty() || src == "-" {
            return Ok(Constraint::default());
        }
        let atoms = src.split('&').map(parse_atom).collect::<core::result::Result<_, _>>()?;
        Ok(Constraint { atoms })
    }

    pub fn holds(&self, sentence: &ParsedSentence, cause: TokenSpan, effect: TokenSpan, extraction: &ExtractionConfig) -> bool {
        let span = |r: Role| if r == Role::Cause { cause } else { effect };
        self.atoms.iter().all(|atom| match atom {
            Atom::Pos { index, tag } => {
                let n = sentence.len() as i64;
                let pos = if *index > 0 { index - 1 } else { n + index };
                (0..n).contains(&pos) && sentence.tokens[pos as usize].pos == *tag
            }
            Atom::ContainsVerb(r) => {
                let s = span(*r);
                sentence.tokens[s.start..=s.end].iter().any(|t| extraction.is_verb(&t.pos))
            }
            Atom::MaxLen(r, k) => span(*r).len() <= *k,
        })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("-");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            match a {
                Atom::Pos { index, tag } => write!(f, "pos({index})={tag}")?,
                Atom::ContainsVerb(r) => write!(f, "contains_verb({})", r.name())?,
                Atom::MaxLen(r, k) => write!(f, "len({})<={k}", r.name())?,
            }
        }
        Ok(())
    }
}

fn parse_atom(raw: &str) -> core::result::Result<Atom, String> {
    let a = raw.trim();
    let call = |name: &str| -> Option<(&str, &str)> {
        let rest = a.strip_prefix(name)?.strip_prefix('(')?;
        let close = rest.find(')')?;
        Some((&rest[..close], rest[close + 1..].trim()))
    };
    if let Some((arg, rest)) = call("pos") {
        let index: i64 = arg.trim().parse().map_err(|_| format!("bad token index in `{a}`"))?;
        let tag = rest.strip_prefix('=').map(str::trim).filter(|t| !t.is_empty());
        return match (index, tag) {
            (0, _) => Err(format!("token index 0 in `{a}` (indices are 1-based)")),
            (_, Some(tag)) => Ok(Atom::Pos { index, tag: tag.into() }),
            _ => Err(format!("expected `pos(i)=TAG`, got `{a}`")),
        };
    }
    if let Some((arg, rest)) = call("contains_verb") {
        let role = Role::parse(arg).ok_or_else(|| format!("unknown role in `{a}`"))?;
        return if rest.is_empty() { Ok(Atom::ContainsVerb(role)) } else { Err(format!("trailing text in `{a}`")) };
    }
    if let Some((arg, rest)) = call("len") {
        let role = Role::parse(arg).ok_or_else(|| format!("unknown role in `{a}`"))?;
        let bound = rest.strip_prefix("<=").or_else(|| rest.strip_prefix('≤')).ok_or_else(|| format!("expected `<=` in `{a}`"))?;
        let k = bound.trim().parse().map_err(|_| format!("bad length bound in `{a}`"))?;
        return Ok(Atom::MaxLen(role, k));
    }
    Err(format!("unknown constraint atom `{a}`"))
}

#[derive(Debug, Clone)]
pub struct CausalRule {
    pub id: String,
    pub priority: i64,
    pattern: Regex,
    pub constraint: Constraint,
}

impl CausalRule {
    pub fn new(id: &str, priority: i64, pattern: &str, constraint: &str) -> Result<Self> {
        let err = |reason: String| Error::Rule { rule: id.into(), reason };
        let pattern = Regex::new(pattern).map_err(|e| err(e.to_string()))?;
        for group in ["cause", "effect"] {
            if !pattern.capture_names().flatten().any(|n| n == group) {
                return Err(err(format!("pattern has no `{group}` group")));
            }
        }
        let constraint = Constraint::parse(constraint).map_err(err)?;
        Ok(CausalRule {
            id: id.into(),
            priority,
            pattern,
            constraint,
        })
    }

    pub fn pattern(&self) -> &str {
        self.pattern.as_str()
    }
}

impl PartialEq for CausalRule {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.priority == other.priority && self.pattern() == other.pattern() && self.constraint == other.constraint
    }
}

/// Orders rules by descending priority. Priorities must be unique.
pub fn load_rules(mut rules: Vec<CausalRule>) -> Result<Vec<CausalRule>> {
    if rules.is_empty() {
        log::warn!("empty causal rule set");
    }
    rules.sort_by(|a, b| b.priority.cmp(&a.priority).then_with(|| a.id.cmp(&b.id)));
    if let Some(w) = rules.windows(2).find(|w| w[0].priority == w[1].priority) {
        return Err(Error::Rule {
            rule: w[1].id.clone(),
            reason: format!("priority {} already used by rule `{}`", w[1].priority, w[0].id),
        });
    }
    Ok(rules)
}

/// The shipped connective rules.
pub fn default_rules() -> Vec<CausalRule> {
    let specs: [(&str, i64, &str); 6] = [
        ("because-initial", 70, r"(?i)^because (?:of )?(?<cause>.+?) , (?<effect>.+)$"),
        ("because", 60, r"(?i)(?<effect>.+) because (?:of )?(?<cause>.+)"),
        ("due-to", 55, r"(?i)(?<effect>.+?) (?:(?:is|was|are|were) )?due to (?<cause>.+)"),
        ("leads-to", 50, r"(?i)(?<cause>.+) (?:leads?|led|leading) to (?<effect>.+)"),
        ("results-in", 40, r"(?i)(?<cause>.+) (?:results?|resulted|resulting) in (?<effect>.+)"),
        ("causes", 30, r"(?i)(?<cause>.+) (?:causes|caused) (?<effect>.+)"),
    ];
    let rules = specs.iter().map(|(id, p, pat)| CausalRule::new(id, *p, pat, "-").expect("built-in rule")).collect();
    load_rules(rules).expect("built-in priorities are unique")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CausalMention {
    pub doc_id: String,
    pub sent_index: usize,
    pub cause: TokenSpan,
    pub effect: TokenSpan,
    pub rule_id: String,
    pub cause_event: Option<EventKey>,
    pub effect_event: Option<EventKey>,
}

impl CausalMention {
    /// Smallest span covering both cause and effect.
    pub fn region(&self) -> TokenSpan {
        TokenSpan::new(self.cause.start.min(self.effect.start), self.cause.end.max(self.effect.end))
    }
}

/// Byte offsets of each token inside `sentence.text()`.
fn token_offsets(sentence: &ParsedSentence) -> Vec<(usize, usize)> {
    let mut at = 0;
    sentence
        .tokens
        .iter()
        .map(|t| {
            let range = (at, at + t.surface.len());
            at = range.1 + 1;
            range
        })
        .collect()
}

/// Tokens overlapping a byte range, with punctuation trimmed off both ends.
fn tokens_for(sentence: &ParsedSentence, offsets: &[(usize, usize)], from: usize, to: usize) -> Option<TokenSpan> {
    let inside: Vec<usize> = (0..offsets.len()).filter(|&i| offsets[i].0 < to && offsets[i].1 > from).collect();
    let first = *inside.iter().find(|&&i| !sentence.tokens[i].is_punct())?;
    let last = *inside.iter().rev().find(|&&i| !sentence.tokens[i].is_punct())?;
    Some(TokenSpan::new(first, last))
}

/// Causal mentions in one sentence. Candidates from all rules compete for
/// non-overlapping regions: higher priority first, then leftmost, then
/// longest.
pub fn apply_rules(sentence: &ParsedSentence, rules: &[CausalRule], extraction: &ExtractionConfig) -> Vec<CausalMention> {
    let text = sentence.text();
    let offsets = token_offsets(sentence);
    let mut candidates: Vec<(i64, CausalMention)> = Vec::new();
    for rule in rules {
        for caps in rule.pattern.captures_iter(&text) {
            let (Some(c), Some(e)) = (caps.name("cause"), caps.name("effect")) else {
                continue;
            };
            let (Some(cause), Some(effect)) = (tokens_for(sentence, &offsets, c.start(), c.end()), tokens_for(sentence, &offsets, e.start(), e.end())) else {
                continue;
            };
            if cause.overlaps(&effect) || !rule.constraint.holds(sentence, cause, effect, extraction) {
                continue;
            }
            candidates.push((
                rule.priority,
                CausalMention {
                    doc_id: sentence.doc_id.clone(),
                    sent_index: sentence.sent_index,
                    cause,
                    effect,
                    rule_id: rule.id.clone(),
                    cause_event: None,
                    effect_event: None,
                },
            ));
        }
    }
    candidates.sort_by(|(pa, a), (pb, b)| {
        let (ra, rb) = (a.region(), b.region());
        pb.cmp(pa).then(ra.start.cmp(&rb.start)).then(rb.len().cmp(&ra.len())).then_with(|| a.cmp(b))
    });
    let mut chosen: Vec<CausalMention> = Vec::new();
    for (_, m) in candidates {
        if chosen.iter().all(|k| !k.region().overlaps(&m.region())) {
            chosen.push(m);
        }
    }
    chosen.sort_by_key(|m| m.region().start);
    chosen
}

const NOMINAL_MODIFIERS: [&str; 4] = ["compound", "amod", "nn", "ATT"];

/// Event key for a span: an extracted event whose predicate lies inside it
/// (preferring one headed outside the span), else a nominal event built
/// from the span's head word and its noun modifiers.
pub fn resolve_span_event(sentence: &ParsedSentence, span: TokenSpan, occurrences: &[EventOccurrence]) -> Option<EventKey> {
    let inside = |pos1: usize| pos1 >= span.start + 1 && pos1 <= span.end + 1;
    let is_head = |i: usize| !inside(sentence.tokens[i].head);
    let mut local = occurrences
        .iter()
        .filter(|o| o.doc_id == sentence.doc_id && o.sent_index == sentence.sent_index && span.contains(o.predicate_pos));
    let local_first = local.clone().next();
    if let Some(o) = local.find(|o| is_head(o.predicate_pos)).or(local_first) {
        return Some(o.event.clone());
    }
    let head = (span.start..=span.end).find(|&i| is_head(i) && !sentence.tokens[i].is_punct())?;
    let modifiers: Vec<&str> = sentence
        .children(head + 1)
        .filter(|&c| span.contains(c) && NOMINAL_MODIFIERS.contains(&sentence.tokens[c].deprel.as_str()))
        .map(|c| sentence.tokens[c].lemma.as_str())
        .collect();
    let subject = (!modifiers.is_empty()).then_some(modifiers.as_slice());
    Some(EventTuple::new(subject, &[sentence.tokens[head].lemma.as_str()], None).key())
}

/// Fills `cause_event` and `effect_event` from a sentence's occurrences.
pub fn resolve_events(mention: &mut CausalMention, sentence: &ParsedSentence, occurrences: &[EventOccurrence]) {
    mention.cause_event = resolve_span_event(sentence, mention.cause, occurrences);
    mention.effect_event = resolve_span_event(sentence, mention.effect, occurrences);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BioTag {
    O,
    BCause,
    ICause,
    BEffect,
    IEffect,
}

impl BioTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BioTag::O => "O",
            BioTag::BCause => "B-cause",
            BioTag::ICause => "I-cause",
            BioTag::BEffect => "B-effect",
            BioTag::IEffect => "I-effect",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [BioTag::O, BioTag::BCause, BioTag::ICause, BioTag::BEffect, BioTag::IEffect].into_iter().find(|t| t.as_str() == s)
    }

    fn role(self) -> Option<Role> {
        match self {
            BioTag::O => None,
            BioTag::BCause | BioTag::ICause => Some(Role::Cause),
            BioTag::BEffect | BioTag::IEffect => Some(Role::Effect),
        }
    }

    fn is_inside(self) -> bool {
        matches!(self, BioTag::ICause | BioTag::IEffect)
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioTagging {
    pub tags: Vec<BioTag>,
}

impl BioTagging {
    /// Positions holding an `I-x` tag not preceded by `B-x` or `I-x`.
    pub fn violations(&self) -> Vec<usize> {
        (0..self.tags.len())
            .filter(|&i| self.tags[i].is_inside() && (i == 0 || self.tags[i - 1].role() != self.tags[i].role()))
            .collect()
    }

    pub fn is_well_formed(&self) -> bool {
        self.violations().is_empty()
    }

    /// Maximal spans per role, in order. Stray `I-x` tags start a span.
    pub fn spans(&self) -> Vec<(Role, TokenSpan)> {
        let mut out: Vec<(Role, TokenSpan)> = Vec::new();
        for (i, tag) in self.tags.iter().enumerate() {
            let Some(role) = tag.role() else { continue };
            match out.last_mut() {
                Some((r, s)) if tag.is_inside() && *r == role && s.end + 1 == i => s.end = i,
                _ => out.push((role, TokenSpan::new(i, i))),
            }
        }
        out
    }

    /// Mentions recovered by pairing the k-th cause with the k-th effect.
    /// Unpaired spans are dropped.
    pub fn decode(&self, doc_id: &str, sent_index: usize) -> Vec<CausalMention> {
        let spans = self.spans();
        let of = |role: Role| spans.iter().filter(move |(r, _)| *r == role).map(|(_, s)| *s);
        of(Role::Cause)
            .zip(of(Role::Effect))
            .map(|(cause, effect)| CausalMention {
                doc_id: doc_id.into(),
                sent_index,
                cause,
                effect,
                rule_id: "gold".into(),
                cause_event: None,
                effect_event: None,
            })
            .collect()
    }
}

pub fn to_bio(sentence: &ParsedSentence, mentions: &[CausalMention]) -> Result<BioTagging> {
    let n = sentence.len();
    let mut tags = vec![BioTag::O; n];
    for m in mentions {
        for (span, begin, inside) in [(m.cause, BioTag::BCause, BioTag::ICause), (m.effect, BioTag::BEffect, BioTag::IEffect)] {
            if span.start > span.end || span.end >= n {
                return Err(Error::SpanOutOfBounds {
                    doc_id: sentence.doc_id.clone(),
                    sent_index: sentence.sent_index,
                });
            }
            for i in span.start..=span.end {
                if tags[i] != BioTag::O {
                    return Err(Error::OverlappingMentions {
                        doc_id: sentence.doc_id.clone(),
                        sent_index: sentence.sent_index,
                    });
                }
                tags[i] = if i == span.start { begin } else { inside };
            }
        }
    }
    Ok(BioTagging { tags })
}

/// Span-level exact match on `(sentence, cause, effect)`, counted as
/// multisets. `accuracy` holds token-level BIO accuracy over `universe`.
pub fn evaluate_extraction(pred: &[CausalMention], gold: &[CausalMention], universe: &[ParsedSentence]) -> Result<EvalMetrics> {
    fn key(m: &CausalMention) -> (&str, usize, TokenSpan, TokenSpan) {
        (m.doc_id.as_str(), m.sent_index, m.cause, m.effect)
    }
    let mut remaining: BTreeMap<(&str, usize, TokenSpan, TokenSpan), usize> = BTreeMap::new();
    for m in gold {
        *remaining.entry(key(m)).or_insert(0) += 1;
    }
    let mut tp = 0;
    for m in pred {
        if let Some(c) = remaining.get_mut(&key(m)).filter(|c| **c > 0) {
            *c -= 1;
            tp += 1;
        }
    }
    let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
    let (precision, recall) = if pred.is_empty() && gold.is_empty() { (100.0, 100.0) } else { (pct(tp, pred.len()), pct(tp, gold.len())) };

    let (mut correct, mut total) = (0, 0);
    for s in universe {
        let here = |ms: &[CausalMention]| -> Vec<CausalMention> { ms.iter().filter(|m| m.doc_id == s.doc_id && m.sent_index == s.sent_index).cloned().collect() };
        let p = to_bio(s, &here(pred))?;
        let g = to_bio(s, &here(gold))?;
        correct += p.tags.iter().zip(&g.tags).filter(|(a, b)| a == b).count();
        total += s.len();
    }
    let fold = FoldMetrics {
        accuracy: pct(correct, total),
        precision,
        recall,
        f1: harmonic(precision, recall),
        confusion: Confusion {
            tp,
            fp: pred.len() - tp,
            tn: 0,
            fn_: gold.len() - tp,
        },
    };
    Ok(EvalMetrics::from_folds(vec![fold], 1))
}
