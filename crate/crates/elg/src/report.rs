//! Report tables, printed for people and saved as TSV for machines.

use std::path::Path;

use crate::error::Result;
use crate::formats::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: &str, headers: &[&str]) -> Self {
        Table { title: title.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    /// Left-aligned text columns, numbers right-aligned.
    pub fn render(&self) -> String {
        let mut width: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| -> String {
            let parts: Vec<String> = cells
                .iter()
                .zip(&width)
                .map(|(c, w)| if c.parse::<f64>().is_ok() { format!("{c:>w$}") } else { format!("{c:<w$}") })
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = format!("{}\n", self.title);
        out.push_str(&line(&self.headers));
        out.push('\n');
        out.push_str(&width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.headers.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(|c| c.replace(['\t', '\n'], " ")).collect::<Vec<_>>().join("\t"));
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.tsv` and `<stem>.txt` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        write_atomic(&dir.join(format!("{stem}.tsv")), self.to_tsv().as_bytes())?;
        write_atomic(&dir.join(format!("{stem}.txt")), self.render().as_bytes())
    }

    pub fn parse_tsv(title: &str, text: &str) -> Option<Table> {
        let mut lines = text.lines();
        let headers: Vec<String> = lines.next()?.split('\t').map(String::from).collect();
        let rows = lines.filter(|l| !l.is_empty()).map(|l| l.split('\t').map(String::from).collect()).collect();
        Some(Table { title: title.into(), headers, rows })
    }
}

pub fn pct(x: f64) -> String {
    format!("{x:.2}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_and_tsv() {
        let mut t = Table::new("Methods", &["Method", "Accuracy"]);
        t.push(vec!["random".into(), pct(20.0)]);
        t.push(vec!["graph".into(), pct(57.126)]);
        assert_eq!(t.to_tsv(), "Method\tAccuracy\nrandom\t20.00\ngraph\t57.13\n");
        let r = t.render();
        assert!(r.contains("random     20.00"));
        assert_eq!(Table::parse_tsv("Methods", &t.to_tsv()).unwrap(), t);
    }
}
