//! Tab-separated intermediate artifacts: occurrences, features, labeled
//! pairs, causal mentions and the evidence sentence sidecar.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use elg_core::causality::CausalMention;
use elg_core::events::TokenSpan;
use elg_core::pairstats::FeatureVector;
use elg_core::seqrel::{Direction, RelationLabel};
use elg_core::{EventKey, EventOccurrence};

use super::{data_lines, escape, fmt_f64, parse_f64, parse_usize, read_text, unescape};
use crate::error::{ElgError, Result};

fn key(path: &Path, line: usize, s: &str) -> Result<EventKey> {
    EventKey::parse(s).map_err(|e| ElgError::parse(path, line, e.to_string()))
}

fn text_field(path: &Path, line: usize, s: &str) -> Result<String> {
    unescape(s).ok_or_else(|| ElgError::parse(path, line, format!("bad escape in `{s}`")))
}

fn columns<'a>(path: &Path, line: usize, l: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let cols: Vec<&str> = l.split('\t').collect();
    if cols.len() != n {
        return Err(ElgError::parse(path, line, format!("expected {n} columns, found {}", cols.len())));
    }
    Ok(cols)
}

// ---- occurrences ----

pub fn write_occurrences(occ: &[EventOccurrence]) -> String {
    let mut out = String::from("#doc_id\tsent\tstart\tend\tpredicate\tkey\textra\n");
    for o in occ {
        let extra = if o.extra.is_empty() {
            "-".to_string()
        } else {
            o.extra.iter().map(|l| l.split_whitespace().collect::<Vec<_>>().join("_")).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            escape(&o.doc_id),
            o.sent_index,
            o.token_span.start,
            o.token_span.end,
            o.predicate_pos,
            o.event,
            extra
        );
    }
    out
}

pub fn parse_occurrences(text: &str, path: &Path) -> Result<Vec<EventOccurrence>> {
    data_lines(text)
        .map(|(line, l)| {
            let c = columns(path, line, l, 7)?;
            let n = |i: usize| parse_usize(path, line, c[i]);
            let (start, end) = (n(2)?, n(3)?);
            if start > end {
                return Err(ElgError::parse(path, line, "span start after end"));
            }
            Ok(EventOccurrence {
                doc_id: text_field(path, line, c[0])?,
                sent_index: n(1)?,
                token_span: TokenSpan::new(start, end),
                predicate_pos: n(4)?,
                event: key(path, line, c[5])?,
                extra: if c[6] == "-" { Vec::new() } else { c[6].split(' ').map(String::from).collect() },
            })
        })
        .collect()
}

pub fn load_occurrences(path: &Path) -> Result<Vec<EventOccurrence>> {
    parse_occurrences(&read_text(path)?, path)
}

// ---- features ----

const N_FREQ: usize = 9;
const N_RATIO: usize = 11;
const N_PMI: usize = 5;

pub fn write_features(rows: &[FeatureVector]) -> String {
    let n_ctx = rows.first().map_or(0, |r| r.context.len());
    let mut out = String::from("#keyA\tkeyB");
    for i in 1..=N_FREQ {
        let _ = write!(out, "\tT{i}");
    }
    for i in 1..=N_RATIO {
        let _ = write!(out, "\tR{i}");
    }
    for i in 1..=n_ctx {
        let _ = write!(out, "\tC{i}");
    }
    for i in 1..=N_PMI {
        let _ = write!(out, "\tA{i}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}\t{}", r.pair.0, r.pair.1);
        for x in r.frequency.iter().chain(&r.ratio).chain(&r.context).chain(&r.pmi) {
            out.push('\t');
            out.push_str(&fmt_f64(*x));
        }
        out.push('\n');
    }
    out
}

pub fn parse_features(text: &str, path: &Path) -> Result<Vec<FeatureVector>> {
    let mut width = None;
    data_lines(text)
        .map(|(line, l)| {
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() < 2 + N_FREQ + N_RATIO + N_PMI || *width.get_or_insert(cols.len()) != cols.len() {
                return Err(ElgError::parse(path, line, "ragged feature row"));
            }
            let v = cols[2..].iter().map(|x| parse_f64(path, line, x)).collect::<Result<Vec<f64>>>()?;
            let ctx_end = v.len() - N_PMI;
            Ok(FeatureVector {
                pair: (key(path, line, cols[0])?, key(path, line, cols[1])?),
                frequency: v[..N_FREQ].try_into().expect("width checked"),
                ratio: v[N_FREQ..N_FREQ + N_RATIO].try_into().expect("width checked"),
                context: v[N_FREQ + N_RATIO..ctx_end].to_vec(),
                pmi: v[ctx_end..].try_into().expect("width checked"),
            })
        })
        .collect()
}

pub fn load_features(path: &Path) -> Result<Vec<FeatureVector>> {
    parse_features(&read_text(path)?, path)
}

// ---- labeled pairs ----

/// A pair with its sequential-relation label and, for positives, the
/// direction. `Forward` means `a` precedes `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairLabel {
    pub a: EventKey,
    pub b: EventKey,
    pub relation: RelationLabel,
    pub direction: Option<Direction>,
}

fn relation_name(r: RelationLabel) -> &'static str {
    match r {
        RelationLabel::Positive => "positive",
        RelationLabel::Negative => "negative",
    }
}

fn direction_name(d: Option<Direction>) -> &'static str {
    match d {
        Some(Direction::Forward) => "forward",
        Some(Direction::Backward) => "backward",
        None => "-",
    }
}

pub fn write_pair_labels(rows: &[PairLabel]) -> String {
    let mut out = String::from("#keyA\tkeyB\trelation\tdirection\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.a, r.b, relation_name(r.relation), direction_name(r.direction));
    }
    out
}

pub fn parse_pair_labels(text: &str, path: &Path) -> Result<Vec<PairLabel>> {
    data_lines(text)
        .map(|(line, l)| {
            let c = columns(path, line, l, 4)?;
            let relation = match c[2].to_ascii_lowercase().as_str() {
                "positive" | "1" | "yes" | "true" => RelationLabel::Positive,
                "negative" | "0" | "no" | "false" => RelationLabel::Negative,
                other => return Err(ElgError::parse(path, line, format!("unknown relation label `{other}`"))),
            };
            let direction = match c[3].to_ascii_lowercase().as_str() {
                "forward" => Some(Direction::Forward),
                "backward" => Some(Direction::Backward),
                "-" | "" | "none" => None,
                other => return Err(ElgError::parse(path, line, format!("unknown direction label `{other}`"))),
            };
            if (relation == RelationLabel::Positive) != direction.is_some() {
                return Err(ElgError::parse(path, line, "a direction is required for positive pairs and only for them"));
            }
            Ok(PairLabel {
                a: key(path, line, c[0])?,
                b: key(path, line, c[1])?,
                relation,
                direction,
            })
        })
        .collect()
}

pub fn load_pair_labels(path: &Path) -> Result<Vec<PairLabel>> {
    parse_pair_labels(&read_text(path)?, path)
}

// ---- causal mentions ----

pub fn write_mentions(rows: &[CausalMention]) -> String {
    let mut out = String::from("#doc_id\tsent\trule\tcause_start\tcause_end\teffect_start\teffect_end\tcause_event\teffect_event\n");
    let ev = |k: &Option<EventKey>| k.as_ref().map_or("-".to_string(), |k| k.to_string());
    for m in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            escape(&m.doc_id),
            m.sent_index,
            m.rule_id,
            m.cause.start,
            m.cause.end,
            m.effect.start,
            m.effect.end,
            ev(&m.cause_event),
            ev(&m.effect_event)
        );
    }
    out
}

pub fn parse_mentions(text: &str, path: &Path) -> Result<Vec<CausalMention>> {
    data_lines(text)
        .map(|(line, l)| {
            let c = columns(path, line, l, 9)?;
            let n = |i: usize| parse_usize(path, line, c[i]);
            let span = |s: usize, e: usize| -> Result<TokenSpan> {
                if s > e {
                    return Err(ElgError::parse(path, line, "span start after end"));
                }
                Ok(TokenSpan::new(s, e))
            };
            let ev = |s: &str| -> Result<Option<EventKey>> { if s == "-" { Ok(None) } else { key(path, line, s).map(Some) } };
            Ok(CausalMention {
                doc_id: text_field(path, line, c[0])?,
                sent_index: n(1)?,
                rule_id: c[2].to_string(),
                cause: span(n(3)?, n(4)?)?,
                effect: span(n(5)?, n(6)?)?,
                cause_event: ev(c[7])?,
                effect_event: ev(c[8])?,
            })
        })
        .collect()
}

pub fn load_mentions(path: &Path) -> Result<Vec<CausalMention>> {
    parse_mentions(&read_text(path)?, path)
}

// ---- evidence sentences ----

pub type SentenceTexts = BTreeMap<(String, usize), String>;

pub fn write_sentences(rows: &SentenceTexts) -> String {
    let mut out = String::from("#doc_id\tsent\ttext\n");
    for ((doc, idx), text) in rows {
        let _ = writeln!(out, "{}\t{idx}\t{}", escape(doc), escape(text));
    }
    out
}

pub fn parse_sentences(text: &str, path: &Path) -> Result<SentenceTexts> {
    data_lines(text)
        .map(|(line, l)| {
            let c = columns(path, line, l, 3)?;
            Ok(((text_field(path, line, c[0])?, parse_usize(path, line, c[1])?), text_field(path, line, c[2])?))
        })
        .collect()
}
