//! On-disk formats. Every writer is deterministic: maps are ordered, floats
//! use the shortest representation that parses back to the same value.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{ElgError, Result};

pub mod blacklist;
pub mod corpus;
pub mod counts;
pub mod graph;
pub mod mcnc;
pub mod rules;
pub mod tables;
pub mod vectors;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(ElgError::io(path))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(ElgError::io(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(ElgError::io(&tmp))?;
        f.write_all(bytes).map_err(ElgError::io(&tmp))?;
        f.sync_all().map_err(ElgError::io(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(ElgError::io(path))
}

/// Non-blank, non-comment lines with their 1-based line numbers.
pub fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.parse().map_err(|_| ElgError::parse(path, line, format!("bad number `{s}`")))
}

pub fn parse_u64(path: &Path, line: usize, s: &str) -> Result<u64> {
    s.parse().map_err(|_| ElgError::parse(path, line, format!("bad count `{s}`")))
}

pub fn parse_usize(path: &Path, line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| ElgError::parse(path, line, format!("bad index `{s}`")))
}

/// Backslash escapes for tab, newline, backslash and `#` (a row starting
/// with `#` would read as a comment) in free-text fields.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '#' => out.push_str("\\#"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            '#' => '#',
            _ => return None,
        });
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, f64::INFINITY, f64::NEG_INFINITY, 1e21, 0.0] {
            assert_eq!(parse_f64(Path::new("x"), 1, &fmt_f64(x)).unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn escapes_round_trip() {
        for s in ["plain", "tab\there", "back\\slash\nnew", ""] {
            assert_eq!(unescape(&escape(s)).unwrap(), s);
            assert!(!escape(s).contains('\t'));
        }
        assert!(unescape("bad\\q").is_none());
    }
}
