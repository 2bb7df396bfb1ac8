//! Overlapping fixed-length segmentation of token sequences.
//!
//! Segments advance with stride `L - O`. When the next regular stride would
//! run past the end, the final segment is anchored so that it ends exactly at
//! the last token; it therefore keeps length `L` and may overlap its
//! predecessor by more than `O`. A segment shorter than `L` only appears when
//! the whole sequence is shorter than `L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Non-empty ordered list of token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence(Vec<TokenId>);

impl TokenSequence {
    pub fn new(tokens: Vec<TokenId>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::input("token sequence must not be empty"));
        }
        Ok(TokenSequence(tokens))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<TokenId> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    /// 1-based position of the segment in its set.
    pub index: usize,
    /// 0-based source offset of the first token.
    pub start: usize,
    pub tokens: Vec<TokenId>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn end(&self) -> usize {
        self.start + self.tokens.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSet {
    pub chunk_len: usize,
    pub overlap: usize,
    pub segments: Vec<Segment>,
}

impl SegmentSet {
    pub fn stride(&self) -> usize {
        self.chunk_len - self.overlap
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn to_json(&self, with_tokens: bool) -> SegmentSetJson {
        SegmentSetJson {
            chunk_len: self.chunk_len,
            overlap: self.overlap,
            segments: self
                .segments
                .iter()
                .map(|s| SegmentJson {
                    i: s.index,
                    start: s.start,
                    len: s.len(),
                    tokens: with_tokens.then(|| s.tokens.clone()),
                })
                .collect(),
        }
    }
}

/// JSON form: `{"L":…, "O":…, "segments":[{"i":…, "start":…, "len":…}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSetJson {
    #[serde(rename = "L")]
    pub chunk_len: usize,
    #[serde(rename = "O")]
    pub overlap: usize,
    pub segments: Vec<SegmentJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentJson {
    pub i: usize,
    pub start: usize,
    pub len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenId>>,
}

pub fn check_window(chunk_len: usize, overlap: usize) -> Result<()> {
    if chunk_len < 2 {
        return Err(Error::config(format!(
            "chunk length {chunk_len} must be at least 2"
        )));
    }
    if overlap >= chunk_len {
        return Err(Error::config(format!(
            "overlap {overlap} >= chunk length {chunk_len}: stride would be non-positive"
        )));
    }
    Ok(())
}

/// Number of segments `segment` produces for a sequence of `n` tokens:
/// `ceil((n - O) / (L - O))` when `n > L`, else 1.
pub fn segment_count(n: usize, chunk_len: usize, overlap: usize) -> usize {
    if n <= chunk_len {
        1
    } else {
        (n - overlap).div_ceil(chunk_len - overlap)
    }
}

pub fn segment(x: &TokenSequence, chunk_len: usize, overlap: usize) -> Result<SegmentSet> {
    check_window(chunk_len, overlap)?;
    let n = x.len();
    let stride = chunk_len - overlap;
    let mut starts = Vec::with_capacity(segment_count(n, chunk_len, overlap));
    if n <= chunk_len {
        starts.push(0);
    } else {
        let mut start = 0;
        while start + chunk_len < n {
            starts.push(start);
            start += stride;
        }
        starts.push(n - chunk_len);
    }
    let segments = starts
        .into_iter()
        .enumerate()
        .map(|(i, start)| {
            let end = (start + chunk_len).min(n);
            Segment {
                index: i + 1,
                start,
                tokens: x.tokens()[start..end].to_vec(),
            }
        })
        .collect();
    Ok(SegmentSet {
        chunk_len,
        overlap,
        segments,
    })
}

/// Rebuilds the source sequence: the first segment whole, then each later
/// segment's tokens beyond the positions already emitted.
pub fn reconstruct(s: &SegmentSet) -> Result<TokenSequence> {
    let mut out: Vec<TokenId> = Vec::new();
    for (pos, seg) in s.segments.iter().enumerate() {
        if seg.index != pos + 1 {
            return Err(Error::contract(format!(
                "segment at position {pos} has index {}",
                seg.index
            )));
        }
        if seg.start > out.len() {
            return Err(Error::contract(format!(
                "gap before segment {}: starts at {} but only {} tokens emitted",
                seg.index,
                seg.start,
                out.len()
            )));
        }
        if pos > 0 && seg.end() <= out.len() {
            return Err(Error::contract(format!(
                "segment {} adds no new tokens",
                seg.index
            )));
        }
        let shared = out.len() - seg.start;
        let shared = shared.min(seg.len());
        if out[seg.start..seg.start + shared] != seg.tokens[..shared] {
            return Err(Error::contract(format!(
                "segment {} disagrees with its predecessor in the overlap",
                seg.index
            )));
        }
        out.extend_from_slice(&seg.tokens[shared..]);
    }
    TokenSequence::new(out).map_err(|_| Error::contract("segment set is empty"))
}
