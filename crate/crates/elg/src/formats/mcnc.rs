//! Cloze instances (`chain_id`, context keys, candidate keys, answer index)
//! and per-instance scorer logs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use elg_core::predict::McncInstance;
use elg_core::EventKey;

use super::{data_lines, escape, parse_usize, read_text, unescape};
use crate::error::{ElgError, Result};

fn keys(ks: &[EventKey]) -> String {
    ks.iter().map(EventKey::as_str).collect::<Vec<_>>().join(" ")
}

pub fn write_instances(instances: &[McncInstance]) -> String {
    let mut out = String::from("#chain\tcontext\tcandidates\tanswer\n");
    for i in instances {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", escape(&i.chain_id), keys(&i.context), keys(&i.candidates), i.answer);
    }
    out
}

pub fn parse_instances(text: &str, path: &Path) -> Result<Vec<McncInstance>> {
    data_lines(text)
        .map(|(line, l)| {
            let c: Vec<&str> = l.split('\t').collect();
            let [id, ctx, cands, answer] = c[..] else {
                return Err(ElgError::parse(path, line, "expected chain, context, candidates, answer"));
            };
            let split = |s: &str| -> Result<Vec<EventKey>> {
                s.split(' ').filter(|k| !k.is_empty()).map(|k| EventKey::parse(k).map_err(|e| ElgError::parse(path, line, e.to_string()))).collect()
            };
            let candidates = split(cands)?;
            let answer = parse_usize(path, line, answer)?;
            if answer >= candidates.len() {
                return Err(ElgError::parse(path, line, format!("answer {answer} out of range")));
            }
            Ok(McncInstance {
                chain_id: unescape(id).ok_or_else(|| ElgError::parse(path, line, "bad escape"))?,
                context: split(ctx)?,
                candidates,
                answer,
            })
        })
        .collect()
}

pub fn load_instances(path: &Path) -> Result<Vec<McncInstance>> {
    parse_instances(&read_text(path)?, path)
}

/// Chosen candidate per instance, one column per scorer.
pub type ScorerLog = BTreeMap<String, Vec<usize>>;

pub fn write_log(answers: &[usize], log: &ScorerLog) -> String {
    let mut out = String::from("#instance\tanswer");
    for name in log.keys() {
        let _ = write!(out, "\t{name}");
    }
    out.push('\n');
    for (i, a) in answers.iter().enumerate() {
        let _ = write!(out, "{i}\t{a}");
        for chosen in log.values() {
            let _ = write!(out, "\t{}", chosen[i]);
        }
        out.push('\n');
    }
    out
}

/// Returns the answers and the per-scorer choices.
pub fn parse_log(text: &str, path: &Path) -> Result<(Vec<usize>, ScorerLog)> {
    let header = text.lines().next().and_then(|h| h.strip_prefix("#instance\tanswer")).ok_or_else(|| ElgError::parse(path, 1, "missing log header"))?;
    let names: Vec<String> = header.split('\t').filter(|s| !s.is_empty()).map(String::from).collect();
    let mut answers = Vec::new();
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); names.len()];
    for (line, l) in data_lines(text) {
        let c: Vec<&str> = l.split('\t').collect();
        if c.len() != names.len() + 2 {
            return Err(ElgError::parse(path, line, "ragged log row"));
        }
        answers.push(parse_usize(path, line, c[1])?);
        for (j, v) in c[2..].iter().enumerate() {
            cols[j].push(parse_usize(path, line, v)?);
        }
    }
    Ok((answers, names.into_iter().zip(cols).collect()))
}
