//! Plain text word vectors: a `<count> <dim>` header, then `<word> <floats>`.

use std::fmt::Write as _;
use std::path::Path;

use elg_core::embeddings::EmbeddingTable;

use super::{fmt_f64, parse_f64, read_text};
use crate::error::{ElgError, Result};

pub fn write_vectors(table: &EmbeddingTable) -> String {
    let mut out = format!("{} {}\n", table.len(), table.dim());
    for (i, w) in table.words().iter().enumerate() {
        out.push_str(w);
        for x in table.row(i) {
            let _ = write!(out, " {}", fmt_f64(*x));
        }
        out.push('\n');
    }
    out
}

pub fn parse_vectors(text: &str, path: &Path) -> Result<EmbeddingTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| ElgError::parse(path, 1, "missing `<count> <dim>` header"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    let [count, dim] = head[..] else {
        return Err(ElgError::parse(path, 1, "header must be `<count> <dim>`"));
    };
    let count: usize = count.parse().map_err(|_| ElgError::parse(path, 1, "bad vocabulary size"))?;
    let dim: usize = dim.parse().map_err(|_| ElgError::parse(path, 1, "bad dimension"))?;
    let mut rows = Vec::with_capacity(count);
    for (i, l) in lines {
        let mut parts = l.split_whitespace();
        let word = parts.next().expect("line is not blank").to_string();
        let v = parts.map(|x| parse_f64(path, i + 1, x)).collect::<Result<Vec<f64>>>()?;
        if v.len() != dim {
            return Err(ElgError::parse(path, i + 1, format!("expected {dim} values, found {}", v.len())));
        }
        rows.push((word, v));
    }
    if rows.len() != count {
        return Err(ElgError::parse(path, 1, format!("header says {count} words, file has {}", rows.len())));
    }
    EmbeddingTable::from_rows(dim, rows).map_err(|e| ElgError::parse(path, 1, e.to_string()))
}

pub fn load_vectors(path: &Path) -> Result<EmbeddingTable> {
    parse_vectors(&read_text(path)?, path)
}
