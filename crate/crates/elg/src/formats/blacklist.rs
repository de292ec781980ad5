//! `key:`, `pred:` and `re:` lines; `#` starts a comment.

use std::path::Path;

use elg_core::events::{BlacklistEntry, GeneralityBlacklist};

use super::{data_lines, read_text};
use crate::error::{ElgError, Result};

pub fn parse_blacklist(text: &str, path: &Path) -> Result<GeneralityBlacklist> {
    let mut entries = Vec::new();
    for (line, l) in data_lines(text) {
        let l = l.trim();
        let entry = if let Some(k) = l.strip_prefix("key:") {
            BlacklistEntry::Key(k.trim().to_string())
        } else if let Some(p) = l.strip_prefix("pred:") {
            BlacklistEntry::Predicate(p.trim().to_string())
        } else if let Some(re) = l.strip_prefix("re:") {
            BlacklistEntry::pattern(re.trim()).map_err(|e| ElgError::parse(path, line, e.to_string()))?
        } else {
            return Err(ElgError::parse(path, line, format!("expected `key:`, `pred:` or `re:`, got `{l}`")));
        };
        entries.push(entry);
    }
    Ok(GeneralityBlacklist::new(entries))
}

pub fn load_blacklist(path: &Path) -> Result<GeneralityBlacklist> {
    parse_blacklist(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use elg_core::EventKey;

    #[test]
    fn all_three_kinds() {
        let bl = parse_blacklist("# general events\nkey:i|do|thing\npred:be\nre:^\\|say\\|\n", Path::new("b")).unwrap();
        let k = |s: &str| EventKey::parse(s).unwrap();
        assert!(bl.matches(&k("i|do|thing")));
        assert!(bl.matches(&k("it|be|good")));
        assert!(bl.matches(&k("|say|word")));
        assert!(!bl.matches(&k("bank|raise|rate")));
    }

    #[test]
    fn bad_regex_fails_at_load() {
        let err = parse_blacklist("re:(unclosed\n", Path::new("b")).unwrap_err();
        assert!(err.to_string().contains("b:1"));
        assert!(parse_blacklist("what\n", Path::new("b")).is_err());
    }
}
