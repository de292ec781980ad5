//! Pre-parsed corpora: a CoNLL-U-like token table and JSON lines.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use elg_core::corpus::{Document, ParsedCorpus, ParsedSentence, Token};
use serde::Deserialize;

use super::read_text;
use crate::error::{ElgError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Conllu,
    Jsonl,
}

impl CorpusFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "conllu" | "conllu-like" => Some(CorpusFormat::Conllu),
            "jsonl" => Some(CorpusFormat::Jsonl),
            _ => None,
        }
    }

    /// Guess from the file extension, defaulting to the token table.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Conllu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dropped {
    pub doc_id: String,
    /// Line where the sentence starts.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub documents: usize,
    pub sentences: usize,
    pub dropped: Vec<Dropped>,
}

/// One sentence as read, with any columns past DEPREL.
struct RawSentence {
    line: usize,
    tokens: Vec<Token>,
    extra: Vec<String>,
    error: Option<String>,
}

struct RawDoc {
    doc_id: String,
    sentences: Vec<RawSentence>,
}

fn token_from_columns(cols: &[&str]) -> std::result::Result<(Token, Option<String>), String> {
    // full ten-column CoNLL-U keeps HEAD and DEPREL in columns 7 and 8
    let (head, deprel, extra) = if cols.len() >= 10 { (cols[6], cols[7], None) } else { (cols[4], cols[5], cols.get(6)) };
    let index: usize = cols[0].parse().map_err(|_| format!("bad token id `{}`", cols[0]))?;
    let head: usize = head.parse().map_err(|_| format!("bad head `{head}`"))?;
    Ok((Token::new(index, cols[1], cols[2], cols[3], head, deprel), extra.map(|s| s.to_string())))
}

fn read_token_table(text: &str, path: &Path) -> Result<Vec<RawDoc>> {
    let mut docs: Vec<RawDoc> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut current: Option<RawSentence> = None;
    let flush = |docs: &mut Vec<RawDoc>, current: &mut Option<RawSentence>| {
        if let Some(s) = current.take() {
            if docs.is_empty() {
                docs.push(RawDoc { doc_id: "doc".into(), sentences: Vec::new() });
            }
            docs.last_mut().expect("just ensured").sentences.push(s);
        }
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim_end_matches('\r');
        if l.trim().is_empty() {
            flush(&mut docs, &mut current);
            continue;
        }
        if let Some(c) = l.strip_prefix('#') {
            if let Some(id) = c.trim().strip_prefix("doc_id").map(str::trim_start).and_then(|r| r.strip_prefix('=')) {
                flush(&mut docs, &mut current);
                let id = id.trim().to_string();
                if id.is_empty() {
                    return Err(ElgError::parse(path, line, "empty doc_id"));
                }
                if !seen.insert(id.clone()) {
                    return Err(ElgError::parse(path, line, format!("doc_id `{id}` appears twice")));
                }
                docs.push(RawDoc { doc_id: id, sentences: Vec::new() });
            }
            continue;
        }
        let cols: Vec<&str> = l.split('\t').collect();
        let sent = current.get_or_insert_with(|| RawSentence { line, tokens: Vec::new(), extra: Vec::new(), error: None });
        if cols.first().is_some_and(|id| id.contains(['-', '.'])) {
            continue; // multiword token or empty node
        }
        if cols.len() < 6 {
            sent.error.get_or_insert_with(|| format!("line {line}: expected at least 6 columns, found {}", cols.len()));
            continue;
        }
        match token_from_columns(&cols) {
            Ok((tok, extra)) => {
                sent.tokens.push(tok);
                sent.extra.push(extra.unwrap_or_default());
            }
            Err(e) => {
                sent.error.get_or_insert_with(|| format!("line {line}: {e}"));
            }
        }
    }
    flush(&mut docs, &mut current);
    Ok(docs)
}

/// Validates sentences, dropping and reporting the malformed ones, and
/// renumbers the survivors.
fn assemble(raw: Vec<RawDoc>, source: &Path, format: &str) -> Result<(ParsedCorpus, LoadReport, Vec<Vec<Vec<String>>>)> {
    let mut report = LoadReport::default();
    let mut corpus = ParsedCorpus::default();
    corpus.source_meta.insert("source".into(), source.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default());
    corpus.source_meta.insert("format".into(), format.into());
    let mut extras = Vec::new();
    for doc in raw {
        let mut sentences = Vec::new();
        let mut doc_extra = Vec::new();
        for s in doc.sentences {
            let reason = match s.error {
                Some(e) => Some(e),
                None => {
                    let ps = ParsedSentence::new(doc.doc_id.clone(), sentences.len(), s.tokens);
                    match ps.validate() {
                        Ok(()) => {
                            sentences.push(ps);
                            doc_extra.push(s.extra);
                            None
                        }
                        Err(e) => Some(e.to_string()),
                    }
                }
            };
            if let Some(reason) = reason {
                log::debug!("dropping sentence of {} at line {}: {reason}", doc.doc_id, s.line);
                report.dropped.push(Dropped { doc_id: doc.doc_id.clone(), line: s.line, reason });
            }
        }
        if sentences.is_empty() {
            continue;
        }
        report.sentences += sentences.len();
        report.documents += 1;
        corpus.documents.push(Document { doc_id: doc.doc_id, sentences });
        extras.push(doc_extra);
    }
    if report.sentences == 0 {
        return Err(elg_core::Error::EmptyCorpus.into());
    }
    Ok((corpus, report, extras))
}

pub fn parse_conllu(text: &str, path: &Path) -> Result<(ParsedCorpus, LoadReport)> {
    let (c, r, _) = assemble(read_token_table(text, path)?, path, "conllu")?;
    Ok((c, r))
}

#[derive(Deserialize)]
struct JsonToken {
    #[serde(alias = "id")]
    index: usize,
    #[serde(alias = "form")]
    surface: String,
    lemma: String,
    #[serde(alias = "upos")]
    pos: String,
    head: usize,
    deprel: String,
}

#[derive(Deserialize)]
struct JsonDoc {
    doc_id: String,
    sentences: Vec<Vec<JsonToken>>,
}

pub fn parse_jsonl(text: &str, path: &Path) -> Result<(ParsedCorpus, LoadReport)> {
    let mut raw = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let doc: JsonDoc = serde_json::from_str(l).map_err(|e| ElgError::parse(path, i + 1, e.to_string()))?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(ElgError::parse(path, i + 1, format!("doc_id `{}` appears twice", doc.doc_id)));
        }
        let sentences = doc
            .sentences
            .into_iter()
            .map(|toks| RawSentence {
                line: i + 1,
                extra: vec![String::new(); toks.len()],
                tokens: toks.into_iter().map(|t| Token::new(t.index, t.surface, t.lemma, t.pos, t.head, t.deprel)).collect(),
                error: None,
            })
            .collect();
        raw.push(RawDoc { doc_id: doc.doc_id, sentences });
    }
    let (c, r, _) = assemble(raw, path, "jsonl")?;
    Ok((c, r))
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<(ParsedCorpus, LoadReport)> {
    let text = read_text(path)?;
    match format {
        CorpusFormat::Conllu => parse_conllu(&text, path),
        CorpusFormat::Jsonl => parse_jsonl(&text, path),
    }
}

/// Six-column token table with `# doc_id` headers.
pub fn write_conllu(corpus: &ParsedCorpus) -> String {
    let mut out = String::new();
    for doc in &corpus.documents {
        let _ = writeln!(out, "# doc_id = {}", doc.doc_id);
        for s in &doc.sentences {
            for t in &s.tokens {
                let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", t.index, t.surface, t.lemma, t.pos, t.head, t.deprel);
            }
            out.push('\n');
        }
    }
    out
}

/// Gold causal annotation: token table with a trailing BIO column.
pub fn parse_gold(text: &str, path: &Path) -> Result<Vec<(ParsedSentence, Vec<String>)>> {
    let (corpus, report, extras) = assemble(read_token_table(text, path)?, path, "gold")?;
    if let Some(d) = report.dropped.first() {
        return Err(ElgError::parse(path, d.line, format!("malformed gold sentence: {}", d.reason)));
    }
    Ok(corpus
        .documents
        .into_iter()
        .zip(extras)
        .flat_map(|(d, e)| d.sentences.into_iter().zip(e))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "# doc_id = d1\n1\tPrices\tprice\tNOUN\t2\tnsubj\n2\trise\trise\tVERB\t0\troot\n\n1\tBanks\tbank\tNOUN\t2\tnsubj\n2\tlend\tlend\tVERB\t0\troot\n";

    #[test]
    fn identity_ingestion() {
        let (c, r) = parse_conllu(TWO, Path::new("t")).unwrap();
        assert_eq!(c.documents.len(), 1);
        assert_eq!(c.sentence_count(), 2);
        assert!(r.dropped.is_empty());
    }

    #[test]
    fn bad_head_is_dropped_and_counted() {
        let text = TWO.replace("2\tlend\tlend\tVERB\t0\troot", "2\tlend\tlend\tVERB\t7\troot");
        let (c, r) = parse_conllu(&text, Path::new("t")).unwrap();
        assert_eq!(c.sentence_count(), 1);
        assert_eq!(r.dropped.len(), 1);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(parse_conllu("", Path::new("t")), Err(ElgError::Core(elg_core::Error::EmptyCorpus))));
        assert!(matches!(parse_jsonl("\n", Path::new("t")), Err(ElgError::Core(elg_core::Error::EmptyCorpus))));
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let (c, _) = parse_conllu(TWO, Path::new("t")).unwrap();
        let once = write_conllu(&c);
        let (c2, _) = parse_conllu(&once, Path::new("t")).unwrap();
        assert_eq!(c.documents, c2.documents);
        assert_eq!(write_conllu(&c2), once);
    }

    #[test]
    fn ten_columns_and_multiword_lines() {
        let text = "# doc_id = a\n1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n1\tdo\tdo\tAUX\t_\t_\t2\taux\t_\t_\n2\tgo\tgo\tVERB\t_\t_\t0\troot\t_\t_\n";
        let (c, _) = parse_conllu(text, Path::new("t")).unwrap();
        assert_eq!(c.documents[0].sentences[0].tokens[0].head, 2);
    }

    #[test]
    fn jsonl_matches_conllu() {
        let line = r#"{"doc_id": "d1", "sentences": [[{"id": 1, "form": "Prices", "lemma": "price", "upos": "NOUN", "head": 2, "deprel": "nsubj"}, {"index": 2, "surface": "rise", "lemma": "rise", "pos": "VERB", "head": 0, "deprel": "root"}]]}"#;
        let (j, _) = parse_jsonl(line, Path::new("t")).unwrap();
        let (c, _) = parse_conllu(TWO, Path::new("t")).unwrap();
        assert_eq!(j.documents[0].sentences[0], c.documents[0].sentences[0]);
        assert!(parse_jsonl("{not json", Path::new("t")).is_err());
    }

    #[test]
    fn duplicate_doc_ids_are_rejected() {
        let text = format!("{TWO}\n{TWO}");
        assert!(parse_conllu(&text, Path::new("t")).is_err());
    }

    #[test]
    fn gold_keeps_the_bio_column() {
        let text = "# doc_id = g\n1\tRain\train\tNOUN\t2\tnsubj\tB-cause\n2\tfalls\tfall\tVERB\t0\troot\tO\n";
        let g = parse_gold(text, Path::new("g")).unwrap();
        assert_eq!(g[0].1, vec!["B-cause", "O"]);
    }
}
