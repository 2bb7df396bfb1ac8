//! Frozen, randomly initialized transformer encoder used as the per-chunk
//! encoder.
//!
//! Each chunk is encoded on its own: positional encodings restart at 0 for
//! every chunk and no state is shared between chunks. Blocks are pre-norm
//! (`x + attn(ln(x))`, then `x + ffn(ln(x))`) with a final layer norm, and the
//! returned states are the output of that final norm.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    gaussian, multi_head_attention, sinusoidal_positions, AttentionWeights, FeedForward, LN_EPS,
};
use crate::numerics::{Matrix, SeededRng};
use crate::segmenter::{Segment, SegmentSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 {
            return Err(Error::config(
                "encoder vocab_size, d_model, n_heads and d_ff must be positive",
            ));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub attention: AttentionWeights,
    pub ffn: FeedForward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    /// `vocab_size x d_model`, entries `N(0, 1)`.
    pub embedding: Matrix,
    pub layers: Vec<EncoderLayer>,
}

/// Top-layer hidden states of one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkEncoding {
    /// 1-based chunk index, matching `Segment::index`.
    pub index: usize,
    /// Source offset of the chunk's first token.
    pub start: usize,
    /// `(segment length x d_model)`.
    pub hidden: Matrix,
}

impl ChunkEncoding {
    pub fn len(&self) -> usize {
        self.hidden.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden.rows() == 0
    }
}

/// Draws all weights from `cfg.seed`: embedding first, then per layer
/// `wq, wk, wv, wo, w_in, w_out`, each row-major. Projection entries have
/// variance `1 / fan_in`.
pub fn init_weights(cfg: &EncoderConfig) -> Result<EncoderWeights> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.seed);
    let embedding = gaussian(&mut rng, cfg.vocab_size, cfg.d_model, 1.0);
    let layers = (0..cfg.n_layers)
        .map(|_| EncoderLayer {
            attention: AttentionWeights::init(&mut rng, cfg.d_model),
            ffn: FeedForward::init(&mut rng, cfg.d_model, cfg.d_ff),
        })
        .collect();
    Ok(EncoderWeights { embedding, layers })
}

fn check_segment(seg: &Segment, cfg: &EncoderConfig) -> Result<()> {
    if seg.len() > cfg.max_len {
        return Err(Error::config(format!(
            "segment {} has {} tokens, encoder max_len is {}",
            seg.index,
            seg.len(),
            cfg.max_len
        )));
    }
    if let Some(&bad) = seg.tokens.iter().find(|&&t| t as usize >= cfg.vocab_size) {
        return Err(Error::input(format!(
            "token id {bad} in segment {} is outside the vocabulary of {}",
            seg.index, cfg.vocab_size
        )));
    }
    Ok(())
}

/// Encodes one segment, calling `on_attention(layer, head, probs)` for every
/// attention matrix computed on the way.
pub fn encode_traced(
    seg: &Segment,
    w: &EncoderWeights,
    cfg: &EncoderConfig,
    mut on_attention: impl FnMut(usize, usize, &Matrix),
) -> Result<ChunkEncoding> {
    forward(seg, w, cfg, Some(&mut on_attention))
}

pub fn encode(seg: &Segment, w: &EncoderWeights, cfg: &EncoderConfig) -> Result<ChunkEncoding> {
    forward(seg, w, cfg, None)
}

type AttentionHook<'a> = &'a mut dyn FnMut(usize, usize, &Matrix);

fn forward(
    seg: &Segment,
    w: &EncoderWeights,
    cfg: &EncoderConfig,
    mut hook: Option<AttentionHook<'_>>,
) -> Result<ChunkEncoding> {
    check_segment(seg, cfg)?;
    let rows: Vec<Vec<f64>> = seg
        .tokens
        .iter()
        .map(|&t| w.embedding.row(t as usize).to_vec())
        .collect();
    let embedded = if rows.is_empty() {
        Matrix::zeros(0, cfg.d_model)
    } else {
        Matrix::from_rows(&rows)?
    };
    let mut x = embedded.add(&sinusoidal_positions(seg.len(), cfg.d_model))?;
    for (l, layer) in w.layers.iter().enumerate() {
        let normed = x.layer_norm(LN_EPS);
        let attn = multi_head_attention(
            &normed,
            &normed,
            &layer.attention,
            cfg.n_heads,
            false,
            hook.is_some(),
        )?;
        if let Some(hook) = hook.as_mut() {
            for (h, p) in attn.probs.iter().enumerate() {
                hook(l, h, p);
            }
        }
        x.add_assign(&attn.output)?;
        let ff = layer.ffn.forward(&x.layer_norm(LN_EPS))?;
        x.add_assign(&ff)?;
    }
    Ok(ChunkEncoding {
        index: seg.index,
        start: seg.start,
        hidden: x.layer_norm(LN_EPS),
    })
}

/// Encodes every segment. Results are in segment order whether or not the
/// chunks were processed in parallel.
pub fn encode_all(
    s: &SegmentSet,
    w: &EncoderWeights,
    cfg: &EncoderConfig,
    parallel: bool,
) -> Result<Vec<ChunkEncoding>> {
    if parallel {
        s.segments
            .par_iter()
            .map(|seg| encode(seg, w, cfg))
            .collect()
    } else {
        s.segments.iter().map(|seg| encode(seg, w, cfg)).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightManifest {
    config: EncoderConfig,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    file: String,
}

impl EncoderWeights {
    fn named(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![("embedding".to_string(), &self.embedding)];
        for (i, layer) in self.layers.iter().enumerate() {
            out.extend(layer.attention.named(&format!("layer{i}.attn")));
            out.extend(layer.ffn.named(&format!("layer{i}.ffn")));
        }
        out
    }

    /// Writes one Matrix text file per tensor plus `manifest.json`.
    pub fn dump(&self, cfg: &EncoderConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tensors = Vec::new();
        for (name, m) in self.named() {
            let file = format!("{name}.matrix");
            let path = dir.join(&file);
            fs::write(&path, m.to_text()).map_err(|e| Error::io(&path, e))?;
            tensors.push(TensorEntry {
                name,
                rows: m.rows(),
                cols: m.cols(),
                file,
            });
        }
        let manifest = WeightManifest {
            config: cfg.clone(),
            tensors,
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<(EncoderConfig, EncoderWeights)> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: WeightManifest = serde_json::from_str(&text)?;
        let cfg = manifest.config;
        cfg.validate()?;
        let mut by_name = std::collections::HashMap::new();
        for t in &manifest.tensors {
            let p = dir.join(&t.file);
            let m = Matrix::from_text(&fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?;
            if m.shape() != (t.rows, t.cols) {
                return Err(Error::input(format!(
                    "tensor {} has shape {:?}, manifest says {}x{}",
                    t.name,
                    m.shape(),
                    t.rows,
                    t.cols
                )));
            }
            by_name.insert(t.name.clone(), m);
        }
        let mut take = |name: String, rows: usize, cols: usize| -> Result<Matrix> {
            let m = by_name
                .remove(&name)
                .ok_or_else(|| Error::input(format!("missing tensor {name}")))?;
            if m.shape() != (rows, cols) {
                return Err(Error::input(format!(
                    "tensor {name} has wrong shape {:?}",
                    m.shape()
                )));
            }
            Ok(m)
        };
        let d = cfg.d_model;
        let embedding = take("embedding".into(), cfg.vocab_size, d)?;
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for i in 0..cfg.n_layers {
            let p = format!("layer{i}.attn");
            let attention = AttentionWeights {
                wq: take(format!("{p}.wq"), d, d)?,
                wk: take(format!("{p}.wk"), d, d)?,
                wv: take(format!("{p}.wv"), d, d)?,
                wo: take(format!("{p}.wo"), d, d)?,
            };
            let p = format!("layer{i}.ffn");
            let ffn = FeedForward {
                w_in: take(format!("{p}.w_in"), d, cfg.d_ff)?,
                w_out: take(format!("{p}.w_out"), cfg.d_ff, d)?,
            };
            layers.push(EncoderLayer { attention, ffn });
        }
        Ok((cfg, EncoderWeights { embedding, layers }))
    }
}
