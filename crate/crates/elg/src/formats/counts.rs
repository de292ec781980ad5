//! Sectioned TSV for [`PairCounts`]. Pairs are stored once per unordered
//! pair with `keyA < keyB`; `t2` counts A before B and `t3` the reverse.

use std::fmt::Write as _;
use std::path::Path;

use elg_core::pairstats::PairCounts;
use elg_core::EventKey;

use super::{data_lines, parse_u64, read_text};
use crate::error::{ElgError, Result};

pub fn write_counts(counts: &PairCounts) -> String {
    let mut out = String::from("[EVENTS]\n#key\tt4\tt_verb\tt_obj\n");
    for (k, f) in counts.events() {
        let _ = writeln!(out, "{k}\t{f}\t{}\t{}", counts.verb_freq(k), counts.object_freq(k));
    }
    out.push_str("[PAIRS]\n#keyA\tkeyB\tt1\tt2\tt3\n");
    for (a, b) in counts.unordered_pairs() {
        let _ = writeln!(out, "{a}\t{b}\t{}\t{}\t{}", counts.t1(&a, &b), counts.t2(&a, &b), counts.t3(&a, &b));
    }
    let _ = write!(out, "[TOTALS]\nn_tokens\t{}\n", counts.n_tokens());
    out
}

#[derive(PartialEq)]
enum Section {
    None,
    Events,
    Pairs,
    Totals,
}

/// Parses and cross-checks the redundant columns (t1 = t2 + t3, verb and
/// object totals) so that a hand-edited file cannot go silently
/// inconsistent.
pub fn parse_counts(text: &str, path: &Path) -> Result<PairCounts> {
    let mut counts = PairCounts::default();
    let mut section = Section::None;
    let mut declared: Vec<(usize, EventKey, u64, u64)> = Vec::new();
    let key = |line: usize, s: &str| EventKey::parse(s).map_err(|e| ElgError::parse(path, line, e.to_string()));
    for (line, l) in data_lines(text) {
        match l.trim() {
            "[EVENTS]" => section = Section::Events,
            "[PAIRS]" => section = Section::Pairs,
            "[TOTALS]" => section = Section::Totals,
            _ => {
                let cols: Vec<&str> = l.split('\t').collect();
                let n = |i: usize| parse_u64(path, line, cols[i]);
                match section {
                    Section::Events if cols.len() == 4 => {
                        let k = key(line, cols[0])?;
                        counts.add_event(&k, n(1)?);
                        declared.push((line, k, n(2)?, n(3)?));
                    }
                    Section::Pairs if cols.len() == 5 => {
                        let (a, b) = (key(line, cols[0])?, key(line, cols[1])?);
                        if a >= b {
                            return Err(ElgError::parse(path, line, "pair keys must be in increasing order"));
                        }
                        let (t1, t2, t3) = (n(2)?, n(3)?, n(4)?);
                        if t1 != t2 + t3 || t1 == 0 {
                            return Err(ElgError::parse(path, line, format!("t1 = {t1} but t2 + t3 = {}", t2 + t3)));
                        }
                        if t2 > 0 {
                            counts.add_directed(&a, &b, t2);
                        }
                        if t3 > 0 {
                            counts.add_directed(&b, &a, t3);
                        }
                    }
                    Section::Totals if cols.len() == 2 && cols[0] == "n_tokens" => counts.add_tokens(n(1)?),
                    Section::None => return Err(ElgError::parse(path, line, "data before the first section header")),
                    _ => return Err(ElgError::parse(path, line, format!("unexpected row `{l}`"))),
                }
            }
        }
    }
    for (line, k, verb, obj) in declared {
        if counts.verb_freq(&k) != verb || counts.object_freq(&k) != obj {
            return Err(ElgError::parse(path, line, format!("verb/object totals for {k} disagree with the event rows")));
        }
    }
    Ok(counts)
}

pub fn load_counts(path: &Path) -> Result<PairCounts> {
    parse_counts(&read_text(path)?, path)
}
