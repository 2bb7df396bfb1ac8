//! JSONL corpora: one document per line, either
//! `{"id": "...", "tokens": [ints]}` or `{"id": "...", "text": "..."}`.
//!
//! Text documents are split on whitespace and mapped through a vocabulary
//! built from the corpus itself, words numbered in order of first appearance.
//! Word ids start right after the largest raw token id in the corpus so the
//! two kinds of document can be mixed.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::segmenter::{TokenId, TokenSequence};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawDocument {
    Tokens { id: String, tokens: Vec<TokenId> },
    Text { id: String, text: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub tokens: TokenSequence,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    /// Words of text documents; word `i` has id `word_offset + i`.
    pub vocabulary: Vec<String>,
    pub word_offset: usize,
    pub vocab_size: usize,
}

impl Corpus {
    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut raw = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(line).map_err(|e| {
            Error::input(format!(
                "line {lineno}: expected {{\"id\", \"tokens\"}} or {{\"id\", \"text\"}}: {e}"
            ))
        })?;
        let id = match &doc {
            RawDocument::Tokens { id, .. } | RawDocument::Text { id, .. } => id.clone(),
        };
        if !seen.insert(id.clone()) {
            return Err(Error::input(format!(
                "line {lineno}: duplicate document id {id:?}"
            )));
        }
        raw.push((lineno, doc));
    }

    let word_offset = raw
        .iter()
        .filter_map(|(_, d)| match d {
            RawDocument::Tokens { tokens, .. } => tokens.iter().max().map(|&t| t as usize + 1),
            RawDocument::Text { .. } => None,
        })
        .max()
        .unwrap_or(0);

    let mut vocabulary: Vec<String> = Vec::new();
    let mut word_ids: HashMap<String, TokenId> = HashMap::new();
    let mut documents = Vec::with_capacity(raw.len());
    for (lineno, doc) in raw {
        let (id, tokens) = match doc {
            RawDocument::Tokens { id, tokens } => (id, tokens),
            RawDocument::Text { id, text } => {
                let tokens = text
                    .split_whitespace()
                    .map(|w| {
                        *word_ids.entry(w.to_string()).or_insert_with(|| {
                            vocabulary.push(w.to_string());
                            (word_offset + vocabulary.len() - 1) as TokenId
                        })
                    })
                    .collect();
                (id, tokens)
            }
        };
        let tokens = TokenSequence::new(tokens)
            .map_err(|_| Error::input(format!("line {lineno}: document {id:?} has no tokens")))?;
        documents.push(Document { id, tokens });
    }
    let vocab_size = word_offset + vocabulary.len();
    Ok(Corpus {
        documents,
        vocabulary,
        word_offset,
        vocab_size,
    })
}
