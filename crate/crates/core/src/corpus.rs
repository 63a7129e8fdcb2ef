//! Documents, deterministic chunking and JSONL corpus ingestion.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_MAX_CHUNK_SIZE: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    pub version: u64,
}

/// A contiguous slice of a document body; the unit of retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: usize,
    pub title: String,
    pub content: String,
    /// Length of `content` in characters.
    pub content_length: usize,
}

pub fn chunk_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}#{ordinal}")
}

/// Parent document of a chunk id produced by [`chunk_id`].
pub fn doc_of_chunk(chunk_id: &str) -> &str {
    chunk_id.rsplit_once('#').map_or(chunk_id, |(doc, _)| doc)
}

type Span = (usize, usize);

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn trim_span(body: &str, (start, end): Span) -> Option<Span> {
    let slice = &body[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    (lead + trail < slice.len()).then_some((start + lead, end - trail))
}

/// Paragraphs are separated by whitespace runs holding at least two newlines.
fn paragraph_spans(body: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut para_start = 0;
    let mut run_start: Option<usize> = None;
    let mut newlines = 0;
    for (i, c) in body.char_indices() {
        if c.is_whitespace() {
            if run_start.is_none() {
                run_start = Some(i);
                newlines = 0;
            }
            if c == '\n' {
                newlines += 1;
            }
        } else if let Some(rs) = run_start.take() {
            if newlines >= 2 {
                spans.extend(trim_span(body, (para_start, rs)));
                para_start = i;
            }
        }
    }
    spans.extend(trim_span(body, (para_start, body.len())));
    spans
}

/// Sentences end at `.`, `!` or `?` followed by whitespace or the end of the span.
fn sentence_spans(body: &str, (start, end): Span) -> Vec<Span> {
    let slice = &body[start..end];
    let mut spans = Vec::new();
    let mut sent_start = start;
    let mut chars = slice.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
            if at_boundary {
                let stop = start + i + c.len_utf8();
                spans.extend(trim_span(body, (sent_start, stop)));
                sent_start = stop;
            }
        }
    }
    spans.extend(trim_span(body, (sent_start, end)));
    spans
}

fn hard_spans(body: &str, (start, end): Span, max: usize) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut piece_start = start;
    let mut count = 0;
    for (i, _) in body[start..end].char_indices() {
        if count == max {
            spans.extend(trim_span(body, (piece_start, start + i)));
            piece_start = start + i;
            count = 0;
        }
        count += 1;
    }
    spans.extend(trim_span(body, (piece_start, end)));
    spans
}

/// Greedily merges consecutive units while the merged slice stays within `max` chars.
fn pack(body: &str, units: Vec<Span>, max: usize) -> Vec<Span> {
    let mut out: Vec<Span> = Vec::new();
    let mut current: Option<Span> = None;
    for unit in units {
        current = match current {
            None => Some(unit),
            Some(cur) if char_len(&body[cur.0..unit.1]) <= max => Some((cur.0, unit.1)),
            Some(cur) => {
                out.push(cur);
                Some(unit)
            }
        };
    }
    out.extend(current);
    out
}

fn heading_of(content: &str) -> Option<&str> {
    let first = content.lines().next()?.trim();
    let heading = first.strip_prefix('#')?.trim_start_matches('#').trim();
    (!heading.is_empty()).then_some(heading)
}

/// Splits a document into chunks of at most `max_chunk_size` characters.
///
/// Boundaries prefer blank-line paragraph breaks, then sentence ends, then
/// hard character splits. Chunks are trimmed slices of the body in order, so
/// only boundary whitespace is dropped.
pub fn chunk_document(doc: &Document, max_chunk_size: usize) -> Result<Vec<Chunk>> {
    if max_chunk_size == 0 {
        return Err(Error::InvalidConfig("max_chunk_size must be >= 1".into()));
    }
    let body = doc.body.as_str();
    if body.trim().is_empty() {
        return Err(Error::EmptyDocument);
    }

    let mut units = Vec::new();
    for para in paragraph_spans(body) {
        if char_len(&body[para.0..para.1]) <= max_chunk_size {
            units.push(para);
            continue;
        }
        for sent in sentence_spans(body, para) {
            if char_len(&body[sent.0..sent.1]) <= max_chunk_size {
                units.push(sent);
            } else {
                units.extend(hard_spans(body, sent, max_chunk_size));
            }
        }
    }

    let chunks = pack(body, units, max_chunk_size)
        .into_iter()
        .enumerate()
        .map(|(ordinal, (start, end))| {
            let content = body[start..end].to_string();
            let title = match heading_of(&content) {
                Some(h) => format!("{}: {}", doc.title, h),
                None => doc.title.clone(),
            };
            Chunk {
                chunk_id: chunk_id(&doc.doc_id, ordinal),
                doc_id: doc.doc_id.clone(),
                ordinal,
                title,
                content_length: char_len(&content),
                content,
            }
        })
        .collect();
    Ok(chunks)
}

/// Chunks every document in order.
pub fn chunk_corpus(docs: &[Document], max_chunk_size: usize) -> Result<Vec<Chunk>> {
    let mut out = Vec::new();
    for doc in docs {
        out.extend(chunk_document(doc, max_chunk_size)?);
    }
    Ok(out)
}

/// Loads a JSONL corpus, one document per line. Blank lines are ignored.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let raw = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading corpus {}", path.display()), e))?;
    parse_corpus(&raw, path)
}

pub(crate) fn parse_corpus(raw: &str, path: &Path) -> Result<Vec<Document>> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateDocument(doc.doc_id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(doc)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing corpus {}", path.display()), e))
}

/// Current version of every document, keyed by id.
pub fn doc_versions(docs: &[Document]) -> BTreeMap<String, u64> {
    docs.iter()
        .map(|d| (d.doc_id.clone(), d.version))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> Document {
        Document {
            doc_id: "d".into(),
            title: "T".into(),
            body: body.into(),
            version: 1,
        }
    }

    fn contents(chunks: &[Chunk]) -> Vec<&str> {
        chunks.iter().map(|c| c.content.as_str()).collect()
    }

    fn strip_ws(s: &str) -> String {
        s.chars().filter(|c| !c.is_whitespace()).collect()
    }

    #[test]
    fn small_body_is_one_chunk() {
        let chunks = chunk_document(&doc("A.\n\nB."), 100).unwrap();
        assert_eq!(contents(&chunks), vec!["A.\n\nB."]);
        assert_eq!(chunks[0].chunk_id, "d#0");
    }

    #[test]
    fn paragraph_boundary_split() {
        let chunks = chunk_document(&doc("A.\n\nB."), 3).unwrap();
        assert_eq!(contents(&chunks), vec!["A.", "B."]);
        assert_eq!(chunks[1].chunk_id, "d#1");
        assert_eq!(chunks[1].ordinal, 1);
    }

    #[test]
    fn sentence_split_inside_long_paragraph() {
        let chunks = chunk_document(&doc("One two. Three four. Five."), 12).unwrap();
        assert_eq!(contents(&chunks), vec!["One two.", "Three four.", "Five."]);
    }

    #[test]
    fn hard_split_when_no_boundary_fits() {
        let chunks = chunk_document(&doc("abcdefghij"), 4).unwrap();
        assert_eq!(contents(&chunks), vec!["abcd", "efgh", "ij"]);
    }

    #[test]
    fn multibyte_text_is_measured_in_chars() {
        let chunks = chunk_document(&doc("äöüäöü"), 4).unwrap();
        assert_eq!(contents(&chunks), vec!["äöüä", "öü"]);
        assert!(chunks.iter().all(|c| c.content_length <= 4));
    }

    #[test]
    fn empty_body_is_rejected() {
        assert!(matches!(chunk_document(&doc(" \n "), 10), Err(Error::EmptyDocument)));
        assert!(chunk_document(&doc("x"), 0).is_err());
    }

    #[test]
    fn heading_folds_into_title() {
        let chunks = chunk_document(&doc("# Setup\nInstall it.\n\nUse it."), 20).unwrap();
        assert_eq!(chunks[0].title, "T: Setup");
        assert_eq!(chunks[1].title, "T");
    }

    #[test]
    fn ten_kilobyte_body_reconcatenates() {
        let sentence = "The quick brown fox jumps over the lazy dog near the river bank. ";
        let mut body = String::new();
        let mut i = 0;
        while body.len() < 10_000 {
            body.push_str(sentence);
            i += 1;
            if i % 7 == 0 {
                body.push_str("\n\n");
            }
        }
        let chunks = chunk_document(&doc(&body), 2000).unwrap();
        assert!(chunks.len() >= 5);
        assert!(chunks.iter().all(|c| c.content_length <= 2000));
        let joined: String = chunks.iter().map(|c| c.content.as_str()).collect();
        assert_eq!(strip_ws(&joined), strip_ws(&body));
    }

    #[test]
    fn chunk_ids_map_back_to_documents() {
        assert_eq!(doc_of_chunk("kb#a#3"), "kb#a");
        assert_eq!(doc_of_chunk(&chunk_id("doc-1", 0)), "doc-1");
    }

    #[test]
    fn corpus_parsing() {
        let p = Path::new("c.jsonl");
        let two = "{\"doc_id\":\"a\",\"title\":\"A\",\"body\":\"x\",\"version\":1}\n\
                   {\"doc_id\":\"b\",\"title\":\"B\",\"body\":\"y\",\"version\":2}\n";
        assert_eq!(parse_corpus(two, p).unwrap().len(), 2);
        assert!(parse_corpus("", p).unwrap().is_empty());

        let dup = "{\"doc_id\":\"a\",\"title\":\"A\",\"body\":\"x\",\"version\":1}\n\
                   {\"doc_id\":\"a\",\"title\":\"A\",\"body\":\"y\",\"version\":2}\n";
        match parse_corpus(dup, p) {
            Err(Error::DuplicateDocument(id)) => assert_eq!(id, "a"),
            other => panic!("expected duplicate error, got {other:?}"),
        }

        let bad = "{\"doc_id\":\"a\",\"title\":\"A\",\"body\":\"x\",\"version\":1}\n{oops\n";
        match parse_corpus(bad, p) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }
}
