//! Boundary extraction, directional cumulative context, weighted fusion,
//! middle-token sampling and decoder-input assembly.
//!
//! Chunk positions in this module's API are 0-based slice positions; the
//! 1-based chunk index is carried in [`ChunkBoundary::index`] and in row
//! provenance. With 0-based position `i` and `C` chunks:
//!
//! ```text
//! back_ctx[i] = (L[i] + sum_{j<i} (L[j] + R[j])) / (2i + 1)
//! fwd_ctx[i]  = (R[i] + sum_{j>i} (L[j] + R[j])) / (2(C-1-i) + 1)
//! L'[i] = alpha * L[i] + (1 - alpha) * back_ctx[i]
//! R'[i] = alpha * R[i] + (1 - alpha) * fwd_ctx[i]
//! ```
//!
//! `back_ctx[0]` is `L[0]` and `fwd_ctx[C-1]` is `R[C-1]`, bit for bit.
//! Averages are taken row-wise over the `k x d` blocks.

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::ChunkEncoding;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Boundary width in tokens.
    pub k: usize,
    /// Middle rows sampled per chunk.
    pub m: usize,
    pub alpha: f64,
    pub middle_seed: u64,
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!("alpha {alpha} is outside [0, 1]")));
    }
    Ok(())
}

impl FusionConfig {
    pub fn validate(&self, chunk_len: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("boundary width k must be at least 1"));
        }
        if 2 * self.k + self.m > chunk_len {
            return Err(Error::config(format!(
                "2k + m = {} exceeds chunk length {chunk_len}",
                2 * self.k + self.m
            )));
        }
        check_alpha(self.alpha)
    }
}

/// Left and right boundary blocks of one encoded chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkBoundary {
    pub index: usize,
    pub start: usize,
    pub len: usize,
    /// Rows `[0, k)` of the chunk states.
    pub left: Matrix,
    /// Rows `[len - k, len)`.
    pub right: Matrix,
    /// Set when the chunk is shorter than `2k`, so left and right share rows.
    pub shared_rows: bool,
}

/// Splits off the first and last `k` rows of a chunk.
///
/// Chunks shorter than `2k` are rejected unless `allow_short` is set, in which
/// case the two blocks overlap and `shared_rows` is flagged. Chunks shorter
/// than `k` are always rejected.
pub fn extract_boundaries(h: &ChunkEncoding, k: usize, allow_short: bool) -> Result<ChunkBoundary> {
    let len = h.len();
    if k == 0 {
        return Err(Error::config("boundary width k must be at least 1"));
    }
    if len < k || (len < 2 * k && !allow_short) {
        return Err(Error::DegenerateChunk(format!(
            "chunk {} has {len} rows, fewer than 2k = {}",
            h.index,
            2 * k
        )));
    }
    Ok(ChunkBoundary {
        index: h.index,
        start: h.start,
        len,
        left: h.hidden.slice_rows(0..k),
        right: h.hidden.slice_rows(len - k..len),
        shared_rows: len < 2 * k,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    k: usize,
    d: usize,
    chunks: Vec<ChunkBoundary>,
}

impl BoundarySet {
    pub fn new(chunks: Vec<ChunkBoundary>) -> Result<Self> {
        let first = chunks
            .first()
            .ok_or_else(|| Error::contract("boundary set needs at least one chunk"))?;
        let (k, d) = first.left.shape();
        for c in &chunks {
            if c.left.shape() != (k, d) || c.right.shape() != (k, d) {
                return Err(Error::config(format!(
                    "chunk {} boundary shapes {:?}/{:?} differ from {k}x{d}",
                    c.index,
                    c.left.shape(),
                    c.right.shape()
                )));
            }
        }
        Ok(BoundarySet { k, d, chunks })
    }

    /// Builds a set from bare blocks; chunk bookkeeping is synthesized
    /// (indices `1..=C`, each chunk spanning exactly its two blocks).
    pub fn from_blocks(lefts: Vec<Matrix>, rights: Vec<Matrix>) -> Result<Self> {
        if lefts.len() != rights.len() {
            return Err(Error::contract(format!(
                "{} left blocks but {} right blocks",
                lefts.len(),
                rights.len()
            )));
        }
        let chunks = lefts
            .into_iter()
            .zip(rights)
            .enumerate()
            .map(|(i, (left, right))| {
                let k = left.rows();
                ChunkBoundary {
                    index: i + 1,
                    start: 2 * k * i,
                    len: 2 * k,
                    left,
                    right,
                    shared_rows: false,
                }
            })
            .collect();
        BoundarySet::new(chunks)
    }

    pub fn from_encodings(
        encodings: &[ChunkEncoding],
        k: usize,
        allow_short: bool,
    ) -> Result<Self> {
        let chunks = encodings
            .iter()
            .map(|h| extract_boundaries(h, k, allow_short))
            .collect::<Result<Vec<_>>>()?;
        BoundarySet::new(chunks)
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn chunks(&self) -> &[ChunkBoundary] {
        &self.chunks
    }

    pub fn left(&self, i: usize) -> &Matrix {
        &self.chunks[i].left
    }

    pub fn right(&self, i: usize) -> &Matrix {
        &self.chunks[i].right
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.chunks.len() {
            return Err(Error::contract(format!(
                "chunk position {i} out of range for {} chunks",
                self.chunks.len()
            )));
        }
        Ok(())
    }

    /// Chunks in reverse order with left and right blocks swapped.
    pub fn mirrored(&self) -> BoundarySet {
        let chunks = self
            .chunks
            .iter()
            .rev()
            .enumerate()
            .map(|(i, c)| ChunkBoundary {
                index: i + 1,
                left: c.right.clone(),
                right: c.left.clone(),
                ..c.clone()
            })
            .collect();
        BoundarySet {
            k: self.k,
            d: self.d,
            chunks,
        }
    }

    /// Backward context of chunk `i`, summed directly over `j < i`.
    pub fn backward_context(&self, i: usize) -> Result<Matrix> {
        self.check_index(i)?;
        if i == 0 {
            return Ok(self.chunks[0].left.clone());
        }
        let mut acc = self.chunks[i].left.clone();
        for c in &self.chunks[..i] {
            acc.add_assign(&c.left)?;
            acc.add_assign(&c.right)?;
        }
        let count = (2 * i + 1) as f64;
        Ok(acc.map(|v| v / count))
    }

    /// Forward context of chunk `i`, summed directly over `j > i`.
    pub fn forward_context(&self, i: usize) -> Result<Matrix> {
        self.check_index(i)?;
        let last = self.chunks.len() - 1;
        if i == last {
            return Ok(self.chunks[last].right.clone());
        }
        let mut acc = self.chunks[i].right.clone();
        for c in &self.chunks[i + 1..] {
            acc.add_assign(&c.left)?;
            acc.add_assign(&c.right)?;
        }
        let count = (2 * (last - i) + 1) as f64;
        Ok(acc.map(|v| v / count))
    }

    /// All backward and forward contexts in one prefix scan and one suffix
    /// scan, O(C k d).
    pub fn contexts(&self) -> (Vec<Matrix>, Vec<Matrix>) {
        let c = self.chunks.len();
        let mut back = Vec::with_capacity(c);
        let mut running = Matrix::zeros(self.k, self.d);
        for (i, ch) in self.chunks.iter().enumerate() {
            if i == 0 {
                back.push(ch.left.clone());
            } else {
                let count = (2 * i + 1) as f64;
                back.push(Matrix::from_fn(self.k, self.d, |r, col| {
                    (ch.left.get(r, col) + running.get(r, col)) / count
                }));
            }
            add_pair(&mut running, ch);
        }

        let mut fwd = vec![Matrix::zeros(0, 0); c];
        let mut running = Matrix::zeros(self.k, self.d);
        for (i, ch) in self.chunks.iter().enumerate().rev() {
            if i == c - 1 {
                fwd[i] = ch.right.clone();
            } else {
                let count = (2 * (c - 1 - i) + 1) as f64;
                fwd[i] = Matrix::from_fn(self.k, self.d, |r, col| {
                    (ch.right.get(r, col) + running.get(r, col)) / count
                });
            }
            add_pair(&mut running, ch);
        }
        (back, fwd)
    }

    pub fn fuse(&self, alpha: f64) -> Result<FusedBoundarySet> {
        check_alpha(alpha)?;
        let (back_ctx, fwd_ctx) = self.contexts();
        let fused_left = self
            .chunks
            .iter()
            .zip(&back_ctx)
            .map(|(c, ctx)| c.left.lin_comb(alpha, ctx, 1.0 - alpha))
            .collect::<Result<Vec<_>>>()?;
        let fused_right = self
            .chunks
            .iter()
            .zip(&fwd_ctx)
            .map(|(c, ctx)| c.right.lin_comb(alpha, ctx, 1.0 - alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok(FusedBoundarySet {
            alpha,
            boundaries: self.clone(),
            back_ctx,
            fwd_ctx,
            fused_left,
            fused_right,
        })
    }

    /// Exact partial derivatives of `L'[i]` and `R'[i]` with respect to every
    /// source block. Fusion acts identically on each `(row, col)` coordinate,
    /// so one scalar per (fused block, source block) pair describes it.
    pub fn fusion_jacobian(&self, alpha: f64, i: usize) -> Result<FusionJacobian> {
        self.check_index(i)?;
        check_alpha(alpha)?;
        let c = self.chunks.len();
        let zero = SourceCoefficients::default();

        let back_share = (1.0 - alpha) / (2 * i + 1) as f64;
        let fused_left = (0..c)
            .map(|j| match j {
                _ if i == 0 && j == 0 => SourceCoefficients {
                    wrt_left: 1.0,
                    wrt_right: 0.0,
                },
                _ if j < i => SourceCoefficients {
                    wrt_left: back_share,
                    wrt_right: back_share,
                },
                _ if j == i => SourceCoefficients {
                    wrt_left: alpha + back_share,
                    wrt_right: 0.0,
                },
                _ => zero,
            })
            .collect();

        let fwd_share = (1.0 - alpha) / (2 * (c - 1 - i) + 1) as f64;
        let fused_right = (0..c)
            .map(|j| match j {
                _ if i == c - 1 && j == i => SourceCoefficients {
                    wrt_left: 0.0,
                    wrt_right: 1.0,
                },
                _ if j > i => SourceCoefficients {
                    wrt_left: fwd_share,
                    wrt_right: fwd_share,
                },
                _ if j == i => SourceCoefficients {
                    wrt_left: 0.0,
                    wrt_right: alpha + fwd_share,
                },
                _ => zero,
            })
            .collect();

        Ok(FusionJacobian {
            chunk: i,
            alpha,
            fused_left,
            fused_right,
        })
    }
}

fn add_pair(acc: &mut Matrix, ch: &ChunkBoundary) {
    for r in 0..acc.rows() {
        for col in 0..acc.cols() {
            let v = acc.get(r, col) + ch.left.get(r, col) + ch.right.get(r, col);
            acc.set(r, col, v);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SourceCoefficients {
    pub wrt_left: f64,
    pub wrt_right: f64,
}

/// Sensitivity table for one chunk's fused blocks; `fused_left[j]` holds
/// `(dL'[i]/dL[j], dL'[i]/dR[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionJacobian {
    pub chunk: usize,
    pub alpha: f64,
    pub fused_left: Vec<SourceCoefficients>,
    pub fused_right: Vec<SourceCoefficients>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedBoundarySet {
    pub alpha: f64,
    pub boundaries: BoundarySet,
    pub back_ctx: Vec<Matrix>,
    pub fwd_ctx: Vec<Matrix>,
    pub fused_left: Vec<Matrix>,
    pub fused_right: Vec<Matrix>,
}

impl FusedBoundarySet {
    pub fn len(&self) -> usize {
        self.fused_left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fused_left.is_empty()
    }
}

/// Interior rows sampled from one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct MiddleSample {
    pub rows: Matrix,
    /// Chunk-local row indices, ascending.
    pub positions: Vec<usize>,
    pub requested: usize,
}

impl MiddleSample {
    pub fn shortfall(&self) -> usize {
        self.requested - self.positions.len()
    }
}

/// Draws `m` rows uniformly without replacement from the interior
/// `[k, len - k)` and returns them in ascending row order. Takes every
/// interior row when there are fewer than `m`.
pub fn sample_middle(h: &ChunkEncoding, m: usize, k: usize, rng: &mut SeededRng) -> MiddleSample {
    let len = h.len();
    let interior = if len >= 2 * k { k..len - k } else { 0..0 };
    let mut positions: Vec<usize> = rng
        .sample_without_replacement(interior.len(), m)
        .into_iter()
        .map(|p| p + interior.start)
        .collect();
    positions.sort_unstable();
    MiddleSample {
        rows: h.hidden.select_rows(&positions),
        positions,
        requested: m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Left,
    Middle,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowProvenance {
    /// 1-based chunk index.
    pub chunk: usize,
    pub role: Role,
    /// Source token offset of the hidden state this row came from.
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub chunk: usize,
    pub role: Role,
    pub rows: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSummary {
    pub index: usize,
    pub start: usize,
    pub len: usize,
    pub middle_rows: usize,
    pub middle_shortfall: usize,
    pub shared_boundary_rows: bool,
}

/// Decoder input: `[L'1, M1, R'1, ..., L'C, MC, R'C]` stacked into one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedSequence {
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub blocks: Vec<Block>,
    pub flattened: Matrix,
    pub provenance: Vec<RowProvenance>,
    pub chunks: Vec<ChunkSummary>,
}

impl FusedSequence {
    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    pub fn rows(&self) -> usize {
        self.flattened.rows()
    }

    pub fn d(&self) -> usize {
        self.flattened.cols()
    }

    /// Row count in the non-degenerate case: `C * (2k + m)`.
    pub fn nominal_rows(&self) -> usize {
        self.chunk_count() * (2 * self.k + self.m)
    }

    pub fn manifest(&self) -> FusedManifest {
        FusedManifest {
            c: self.chunk_count(),
            k: self.k,
            m: self.m,
            alpha: self.alpha,
            rows: self.rows(),
            cols: self.d(),
            chunks: self.chunks.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Writes `<stem>.json` (manifest) and `<stem>.matrix` (flattened rows).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let json = dir.join(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(&self.manifest())?;
        text.push('\n');
        fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
        let mat = dir.join(format!("{stem}.matrix"));
        fs::write(&mat, self.flattened.to_text()).map_err(|e| Error::io(&mat, e))
    }

    pub fn read(dir: &Path, stem: &str) -> Result<FusedSequence> {
        let json = dir.join(format!("{stem}.json"));
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let manifest: FusedManifest = serde_json::from_str(&text)?;
        let mat = dir.join(format!("{stem}.matrix"));
        let flattened =
            Matrix::from_text(&fs::read_to_string(&mat).map_err(|e| Error::io(&mat, e))?)?;
        FusedSequence::from_manifest(manifest, flattened)
    }

    pub fn from_manifest(manifest: FusedManifest, flattened: Matrix) -> Result<FusedSequence> {
        if flattened.shape() != (manifest.rows, manifest.cols)
            || manifest.provenance.len() != manifest.rows
            || manifest.chunks.len() != manifest.c
        {
            return Err(Error::input("fused manifest disagrees with matrix shape"));
        }
        let mut blocks: Vec<Block> = Vec::new();
        for (row, p) in manifest.provenance.iter().enumerate() {
            match blocks.last_mut() {
                Some(b) if b.chunk == p.chunk && b.role == p.role => b.rows.end = row + 1,
                _ => blocks.push(Block {
                    chunk: p.chunk,
                    role: p.role,
                    rows: row..row + 1,
                }),
            }
        }
        Ok(FusedSequence {
            k: manifest.k,
            m: manifest.m,
            alpha: manifest.alpha,
            blocks,
            flattened,
            provenance: manifest.provenance,
            chunks: manifest.chunks,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedManifest {
    #[serde(rename = "C")]
    pub c: usize,
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub rows: usize,
    pub cols: usize,
    pub chunks: Vec<ChunkSummary>,
    pub provenance: Vec<RowProvenance>,
}

/// Concatenates fused boundaries and middle samples in chunk order.
pub fn assemble(fused: &FusedBoundarySet, middles: &[MiddleSample]) -> Result<FusedSequence> {
    let c = fused.len();
    if middles.len() != c || fused.fused_right.len() != c {
        return Err(Error::contract(format!(
            "{c} chunks but {} middle blocks and {} right blocks",
            middles.len(),
            fused.fused_right.len()
        )));
    }
    let k = fused.boundaries.k();
    let d = fused.boundaries.d();
    let m = middles.first().map_or(0, |s| s.requested);
    let mut parts: Vec<&Matrix> = Vec::with_capacity(3 * c);
    let mut blocks = Vec::with_capacity(3 * c);
    let mut provenance = Vec::new();
    let mut chunks = Vec::with_capacity(c);
    let mut row = 0;
    for (i, meta) in fused.boundaries.chunks().iter().enumerate() {
        let mid = &middles[i];
        if mid.rows.rows() > 0 && mid.rows.cols() != d {
            return Err(Error::contract(format!(
                "middle block {} has {} columns, expected {d}",
                meta.index,
                mid.rows.cols()
            )));
        }
        let sources: [(Role, &Matrix, Vec<usize>); 3] = [
            (Role::Left, &fused.fused_left[i], (0..k).collect()),
            (Role::Middle, &mid.rows, mid.positions.clone()),
            (
                Role::Right,
                &fused.fused_right[i],
                (meta.len - k..meta.len).collect(),
            ),
        ];
        for (role, block, local) in sources {
            if block.rows() == 0 {
                continue;
            }
            parts.push(block);
            blocks.push(Block {
                chunk: meta.index,
                role,
                rows: row..row + block.rows(),
            });
            row += block.rows();
            provenance.extend(local.into_iter().map(|p| RowProvenance {
                chunk: meta.index,
                role,
                source: meta.start + p,
            }));
        }
        chunks.push(ChunkSummary {
            index: meta.index,
            start: meta.start,
            len: meta.len,
            middle_rows: mid.positions.len(),
            middle_shortfall: mid.shortfall(),
            shared_boundary_rows: meta.shared_rows,
        });
    }
    let flattened = Matrix::vstack(&parts, d)?;
    Ok(FusedSequence {
        k,
        m,
        alpha: fused.alpha,
        blocks,
        flattened,
        provenance,
        chunks,
    })
}

/// Runs boundary extraction, fusion, middle sampling and assembly over a
/// document's chunk encodings. Chunk `i` samples its middle rows from
/// `SeededRng::new(middle_seed).fork(i)`.
pub fn cumulate(
    encodings: &[ChunkEncoding],
    cfg: &FusionConfig,
    allow_short: bool,
) -> Result<(FusedBoundarySet, FusedSequence)> {
    check_alpha(cfg.alpha)?;
    let boundaries = BoundarySet::from_encodings(encodings, cfg.k, allow_short)?;
    let fused = boundaries.fuse(cfg.alpha)?;
    let root = SeededRng::new(cfg.middle_seed);
    let middles: Vec<MiddleSample> = encodings
        .iter()
        .map(|h| sample_middle(h, cfg.m, cfg.k, &mut root.fork(h.index as u64)))
        .collect();
    let seq = assemble(&fused, &middles)?;
    Ok((fused, seq))
}
