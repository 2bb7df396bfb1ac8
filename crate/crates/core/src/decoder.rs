//! Forward-only decoder that consumes a [`FusedSequence`] through
//! cross-attention.
//!
//! Each block is pre-norm: causal self-attention over the prefix,
//! cross-attention over every memory row, then a feed-forward layer. Logits
//! come from the final normed state of the last prefix position projected on
//! the (tied) token embedding. Memory rows are attended as-is; no positional
//! signal is added to them.

use serde::{Deserialize, Serialize};

use crate::cumulation::{FusedSequence, RowProvenance};
use crate::error::{Error, Result};
use crate::nn::{
    gaussian, multi_head_attention, sinusoidal_positions, AttentionWeights, FeedForward, LN_EPS,
};
use crate::numerics::{Matrix, SeededRng};
use crate::segmenter::TokenId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 {
            return Err(Error::config(
                "decoder vocab_size, d_model, n_heads and d_ff must be positive",
            ));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::config(format!(
                "decoder d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayer {
    pub self_attention: AttentionWeights,
    pub cross_attention: AttentionWeights,
    pub ffn: FeedForward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderWeights {
    pub embedding: Matrix,
    pub layers: Vec<DecoderLayer>,
}

pub fn init_decoder(cfg: &DecoderConfig) -> Result<DecoderWeights> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.seed);
    let embedding = gaussian(&mut rng, cfg.vocab_size, cfg.d_model, 1.0);
    let layers = (0..cfg.n_layers)
        .map(|_| DecoderLayer {
            self_attention: AttentionWeights::init(&mut rng, cfg.d_model),
            cross_attention: AttentionWeights::init(&mut rng, cfg.d_model),
            ffn: FeedForward::init(&mut rng, cfg.d_model, cfg.d_ff),
        })
        .collect();
    Ok(DecoderWeights { embedding, layers })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// `1 x vocab_size` logits for the token after the prefix.
    pub logits: Matrix,
    /// Last-layer cross-attention averaged over heads,
    /// `(prefix length x memory rows)`.
    pub cross_attention: Matrix,
}

pub fn decode_step(
    prefix: &[TokenId],
    memory: &FusedSequence,
    w: &DecoderWeights,
    cfg: &DecoderConfig,
) -> Result<DecodeOutput> {
    if prefix.is_empty() {
        return Err(Error::input("decoder prefix must not be empty"));
    }
    if prefix.len() > cfg.max_len {
        return Err(Error::config(format!(
            "prefix of {} tokens exceeds decoder max_len {}",
            prefix.len(),
            cfg.max_len
        )));
    }
    if memory.d() != cfg.d_model {
        return Err(Error::config(format!(
            "memory width {} does not match decoder d_model {}",
            memory.d(),
            cfg.d_model
        )));
    }
    if memory.rows() == 0 || memory.provenance.len() != memory.rows() {
        return Err(Error::contract(format!(
            "memory has {} rows but {} provenance entries",
            memory.rows(),
            memory.provenance.len()
        )));
    }
    if let Some(&bad) = prefix.iter().find(|&&t| t as usize >= cfg.vocab_size) {
        return Err(Error::input(format!(
            "prefix token {bad} is outside the vocabulary of {}",
            cfg.vocab_size
        )));
    }

    let rows: Vec<Vec<f64>> = prefix
        .iter()
        .map(|&t| w.embedding.row(t as usize).to_vec())
        .collect();
    let mut x = Matrix::from_rows(&rows)?.add(&sinusoidal_positions(prefix.len(), cfg.d_model))?;
    let mut cross = Matrix::zeros(prefix.len(), memory.rows());
    for layer in &w.layers {
        let normed = x.layer_norm(LN_EPS);
        let sa = multi_head_attention(
            &normed,
            &normed,
            &layer.self_attention,
            cfg.n_heads,
            true,
            false,
        )?;
        x.add_assign(&sa.output)?;

        let normed = x.layer_norm(LN_EPS);
        let ca = multi_head_attention(
            &normed,
            &memory.flattened,
            &layer.cross_attention,
            cfg.n_heads,
            false,
            true,
        )?;
        x.add_assign(&ca.output)?;
        let mut mean = Matrix::zeros(prefix.len(), memory.rows());
        for p in &ca.probs {
            mean.add_assign(p)?;
        }
        cross = mean.scale(1.0 / ca.probs.len() as f64);

        let ff = layer.ffn.forward(&x.layer_norm(LN_EPS))?;
        x.add_assign(&ff)?;
    }
    let last = x
        .slice_rows(prefix.len() - 1..prefix.len())
        .layer_norm(LN_EPS);
    let logits = last.matmul_transposed(&w.embedding)?;
    Ok(DecodeOutput {
        logits,
        cross_attention: cross,
    })
}

/// Repeated greedy steps from `start`, returning the generated tokens
/// (excluding `start`). Ties go to the lowest token id.
pub fn greedy_decode(
    start: TokenId,
    steps: usize,
    memory: &FusedSequence,
    w: &DecoderWeights,
    cfg: &DecoderConfig,
) -> Result<(Vec<TokenId>, Matrix)> {
    let mut prefix = vec![start];
    let mut last_cross = Matrix::zeros(0, memory.rows());
    for _ in 0..steps {
        let out = decode_step(&prefix, memory, w, cfg)?;
        let next = out
            .logits
            .row(0)
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |best, (i, &v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            })
            .0;
        prefix.push(next as TokenId);
        last_cross = out.cross_attention;
    }
    Ok((prefix.split_off(1), last_cross))
}

/// Sums each query row's attention over the memory rows of every chunk.
/// Returns `(queries x C)` with chunks in order of first appearance.
pub fn attention_mass_by_chunk(
    cross_attention: &Matrix,
    provenance: &[RowProvenance],
) -> Result<Matrix> {
    if cross_attention.cols() != provenance.len() {
        return Err(Error::contract(format!(
            "{} attention columns but {} provenance rows",
            cross_attention.cols(),
            provenance.len()
        )));
    }
    let mut column_of = Vec::with_capacity(provenance.len());
    let mut chunks: Vec<usize> = Vec::new();
    for p in provenance {
        let col = match chunks.iter().position(|&c| c == p.chunk) {
            Some(col) => col,
            None => {
                chunks.push(p.chunk);
                chunks.len() - 1
            }
        };
        column_of.push(col);
    }
    let mut mass = Matrix::zeros(cross_attention.rows(), chunks.len());
    for q in 0..cross_attention.rows() {
        for (r, &col) in column_of.iter().enumerate() {
            let v = mass.get(q, col) + cross_attention.get(q, r);
            mass.set(q, col, v);
        }
    }
    Ok(mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulation::{cumulate, FusionConfig, Role};
    use crate::encoder::ChunkEncoding;

    fn dcfg(d: usize) -> DecoderConfig {
        DecoderConfig {
            vocab_size: 20,
            d_model: d,
            n_heads: 2,
            n_layers: 2,
            d_ff: 16,
            max_len: 16,
            seed: 4,
        }
    }

    fn memory(c: usize, d: usize, alpha: f64, bump_last_right: f64) -> FusedSequence {
        let mut rng = SeededRng::new(77);
        let encs: Vec<ChunkEncoding> = (0..c)
            .map(|i| {
                let mut hidden = gaussian(&mut rng, 6, d, 1.0);
                if i == c - 1 {
                    let v = hidden.get(5, 0) + bump_last_right;
                    hidden.set(5, 0, v);
                }
                ChunkEncoding {
                    index: i + 1,
                    start: i * 4,
                    hidden,
                }
            })
            .collect();
        let cfg = FusionConfig {
            k: 1,
            m: 2,
            alpha,
            middle_seed: 1,
        };
        cumulate(&encs, &cfg, false).unwrap().1
    }

    #[test]
    fn cross_attention_contract() {
        let cfg = dcfg(8);
        let w = init_decoder(&cfg).unwrap();
        let mem = memory(3, 8, 0.5, 0.0);
        let out = decode_step(&[1, 2, 3], &mem, &w, &cfg).unwrap();
        assert_eq!(out.cross_attention.shape(), (3, 12));
        assert_eq!(out.logits.shape(), (1, 20));
        for r in 0..3 {
            let s: f64 = out.cross_attention.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert!(out.logits.is_finite());
    }

    #[test]
    fn width_mismatch_rejected() {
        let cfg = dcfg(8);
        let w = init_decoder(&cfg).unwrap();
        let mem = memory(2, 6, 0.5, 0.0);
        assert!(matches!(
            decode_step(&[1], &mem, &w, &cfg),
            Err(Error::Config(_))
        ));
        let mut bad = memory(2, 8, 0.5, 0.0);
        bad.provenance.pop();
        assert!(matches!(
            decode_step(&[1], &bad, &w, &cfg),
            Err(Error::Contract(_))
        ));
        assert!(decode_step(&[], &memory(2, 8, 0.5, 0.0), &w, &cfg).is_err());
    }

    #[test]
    fn last_right_boundary_reaches_logits() {
        let cfg = dcfg(8);
        let w = init_decoder(&cfg).unwrap();
        let base = decode_step(&[1, 5], &memory(3, 8, 0.5, 0.0), &w, &cfg).unwrap();
        let bumped = decode_step(&[1, 5], &memory(3, 8, 0.5, 0.3), &w, &cfg).unwrap();
        assert!(base.logits.max_abs_diff(&bumped.logits) > 0.0);
    }

    #[test]
    fn greedy_is_deterministic() {
        let cfg = dcfg(8);
        let w = init_decoder(&cfg).unwrap();
        let mem = memory(2, 8, 0.5, 0.0);
        let a = greedy_decode(0, 5, &mem, &w, &cfg).unwrap();
        let b = greedy_decode(0, 5, &mem, &w, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.len(), 5);
    }

    fn prov(chunks: &[usize]) -> Vec<RowProvenance> {
        chunks
            .iter()
            .map(|&chunk| RowProvenance {
                chunk,
                role: Role::Middle,
                source: 0,
            })
            .collect()
    }

    #[test]
    fn mass_uniform_and_single() {
        let uniform = Matrix::from_fn(2, 8, |_, _| 1.0 / 8.0);
        let mass = attention_mass_by_chunk(&uniform, &prov(&[1, 1, 2, 2, 3, 3, 4, 4])).unwrap();
        assert_eq!(mass.row(0), &[0.25, 0.25, 0.25, 0.25]);
        let one = Matrix::from_fn(1, 3, |_, _| 1.0 / 3.0);
        let mass = attention_mass_by_chunk(&one, &prov(&[1, 1, 1])).unwrap();
        assert!((mass.get(0, 0) - 1.0).abs() < 1e-15);
        assert!(matches!(
            attention_mass_by_chunk(&one, &prov(&[1, 1])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn mass_matches_brute_force_grouping() {
        let mut rng = SeededRng::new(31);
        let chunks = [1, 1, 1, 2, 2, 3, 3, 3, 3];
        let att = gaussian(&mut rng, 4, chunks.len(), 1.0).row_softmax();
        let mass = attention_mass_by_chunk(&att, &prov(&chunks)).unwrap();
        for q in 0..4 {
            for c in 1..=3 {
                let brute: f64 = (0..chunks.len())
                    .filter(|&r| chunks[r] == c)
                    .map(|r| att.get(q, r))
                    .sum();
                assert!((mass.get(q, c - 1) - brute).abs() < 1e-15);
            }
            let total: f64 = mass.row(q).iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
}
