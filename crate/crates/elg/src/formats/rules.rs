//! Causal rules, one per line: `id <TAB> priority <TAB> pattern <TAB> constraint`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use elg_core::causality::{load_rules, CausalRule};

use super::{data_lines, read_text};
use crate::error::{ElgError, Result};

pub fn parse_rules(text: &str, path: &Path) -> Result<Vec<CausalRule>> {
    let mut rules = Vec::new();
    let mut ids = BTreeSet::new();
    for (line, l) in data_lines(text) {
        let cols: Vec<&str> = l.split('\t').collect();
        let [id, priority, pattern, constraint] = cols[..] else {
            return Err(ElgError::parse(path, line, format!("expected 4 tab-separated columns, found {}", cols.len())));
        };
        let rule_err = |reason: String| ElgError::Core(elg_core::Error::Rule { rule: id.to_string(), reason });
        let priority: i64 = priority.trim().parse().map_err(|_| rule_err(format!("bad priority `{priority}`")))?;
        if !ids.insert(id.to_string()) {
            return Err(rule_err("duplicate rule id".into()));
        }
        rules.push(CausalRule::new(id, priority, pattern, constraint)?);
    }
    Ok(load_rules(rules)?)
}

pub fn load_rule_file(path: &Path) -> Result<Vec<CausalRule>> {
    parse_rules(&read_text(path)?, path)
}

pub fn write_rules(rules: &[CausalRule]) -> String {
    let mut out = String::from("#id\tpriority\tpattern\tconstraint\n");
    for r in rules {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.id, r.priority, r.pattern(), r.constraint);
    }
    out
}
