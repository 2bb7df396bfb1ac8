//! Position probe: how well can a linear readout recover a chunk's index from
//! its fused left boundary?
//!
//! Documents are built so that every chunk holds the same tokens. The encoder
//! then produces identical boundary states for every chunk, and any chunk
//! position information left in the fused left boundaries must have been
//! injected by cumulation.

use serde::Serialize;

use crate::cumulation::BoundarySet;
use crate::error::{Error, Result};
use crate::numerics::{ridge_fit, Matrix, SeededRng};
use crate::pipeline::Pipeline;
use crate::segmenter::{TokenId, TokenSequence};

pub const PROBE_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub alpha: f64,
    pub mse: f64,
    /// Per document, the fitted value for each chunk.
    pub predictions: Vec<Vec<f64>>,
    /// Per document, the centered chunk index targets.
    pub targets: Vec<Vec<f64>>,
}

/// Repeats `pattern` (one stride long) so that segmentation with the given
/// window yields exactly `chunks` segments with identical contents.
pub fn identical_chunk_document(
    pattern: &[TokenId],
    chunks: usize,
    chunk_len: usize,
    overlap: usize,
) -> Result<TokenSequence> {
    let stride = chunk_len
        .checked_sub(overlap)
        .filter(|&s| s > 0)
        .ok_or_else(|| Error::config("overlap must be smaller than chunk length"))?;
    if pattern.len() != stride {
        return Err(Error::config(format!(
            "pattern has {} tokens, stride is {stride}",
            pattern.len()
        )));
    }
    let n = chunks * stride + overlap;
    TokenSequence::new((0..n).map(|i| pattern[i % stride]).collect())
}

/// `documents` identical-chunk documents with random patterns.
pub fn synthetic_documents(
    documents: usize,
    chunks: usize,
    chunk_len: usize,
    overlap: usize,
    vocab_size: usize,
    seed: u64,
) -> Result<Vec<TokenSequence>> {
    let stride = chunk_len.saturating_sub(overlap);
    let root = SeededRng::new(seed);
    (0..documents)
        .map(|d| {
            let mut rng = root.fork(d as u64);
            let pattern: Vec<TokenId> = (0..stride)
                .map(|_| rng.below(vocab_size as u64) as TokenId)
                .collect();
            identical_chunk_document(&pattern, chunks, chunk_len, overlap)
        })
        .collect()
}

/// Encoded boundaries of probe documents, reusable across `alpha` values.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    documents: Vec<BoundarySet>,
}

impl ProbeSet {
    pub fn build(pipeline: &Pipeline, docs: &[TokenSequence]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::input("position probe needs at least one document"));
        }
        let mut documents = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let (segments, encodings) = pipeline.encode(doc, false)?;
            if segments.len() < 3 {
                return Err(Error::input(format!(
                    "probe document {d} has {} chunks, need at least 3",
                    segments.len()
                )));
            }
            let first = &segments.segments[0].tokens;
            if segments.segments.iter().any(|s| &s.tokens != first) {
                return Err(Error::input(format!(
                    "probe document {d} does not have identical chunk contents"
                )));
            }
            documents.push(BoundarySet::from_encodings(
                &encodings,
                pipeline.config.k,
                false,
            )?);
        }
        Ok(ProbeSet { documents })
    }

    pub fn boundaries(&self) -> &[BoundarySet] {
        &self.documents
    }

    /// Fits one ridge readout over all documents' fused left boundaries and
    /// reports the mean squared error on the fitted rows.
    pub fn run(&self, alpha: f64) -> Result<ProbeResult> {
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for b in &self.documents {
            let fused = b.fuse(alpha)?;
            let c = fused.len();
            let mean = (c + 1) as f64 / 2.0;
            let t: Vec<f64> = (1..=c).map(|i| i as f64 - mean).collect();
            for left in &fused.fused_left {
                features.push(left.data().to_vec());
            }
            targets.push(t);
        }
        let x = Matrix::from_rows(&features)?;
        let flat: Vec<Vec<f64>> = targets.iter().flatten().map(|&t| vec![t]).collect();
        let y = Matrix::from_rows(&flat)?;
        let w = ridge_fit(&x, &y, PROBE_RIDGE)?;
        let fitted = x.matmul(&w)?;
        let residual = fitted.sub(&y)?;
        let mse = residual.data().iter().map(|r| r * r).sum::<f64>() / residual.rows() as f64;
        let mut predictions = Vec::with_capacity(targets.len());
        let mut row = 0;
        for t in &targets {
            predictions.push((row..row + t.len()).map(|r| fitted.get(r, 0)).collect());
            row += t.len();
        }
        Ok(ProbeResult {
            alpha,
            mse,
            predictions,
            targets,
        })
    }
}

pub fn position_probe(
    pipeline: &Pipeline,
    docs: &[TokenSequence],
    alpha: f64,
) -> Result<ProbeResult> {
    ProbeSet::build(pipeline, docs)?.run(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PipelineConfig;
    use crate::segmenter::segment;

    fn pipeline() -> Pipeline {
        let cfg = PipelineConfig {
            chunk_len: 16,
            overlap: 4,
            m: 4,
            d_model: 16,
            encoder_heads: 2,
            decoder_heads: 2,
            ..PipelineConfig::default()
        };
        Pipeline::new(&cfg, 30).unwrap()
    }

    #[test]
    fn identical_chunk_documents_segment_evenly() {
        let pattern: Vec<u32> = (0..12).collect();
        let doc = identical_chunk_document(&pattern, 5, 16, 4).unwrap();
        let s = segment(&doc, 16, 4).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.segments.iter().all(|g| g.tokens == s.segments[0].tokens));
    }

    #[test]
    fn local_only_fusion_gives_target_variance() {
        let p = pipeline();
        let docs = synthetic_documents(1, 5, 16, 4, 30, 1).unwrap();
        let r = position_probe(&p, &docs, 1.0).unwrap();
        // variance of {-2,-1,0,1,2}
        assert!((r.mse - 2.0).abs() < 1e-6, "mse {}", r.mse);
    }

    #[test]
    fn cumulation_lowers_probe_error() {
        let p = pipeline();
        let docs = synthetic_documents(3, 5, 16, 4, 30, 2).unwrap();
        let set = ProbeSet::build(&p, &docs).unwrap();
        let local = set.run(1.0).unwrap();
        let fused = set.run(0.5).unwrap();
        assert!(fused.mse < local.mse);
    }

    #[test]
    fn rejects_non_identical_documents() {
        let p = pipeline();
        let doc = TokenSequence::new((0..64).map(|t| t % 30).collect()).unwrap();
        assert!(matches!(
            position_probe(&p, &[doc], 0.5),
            Err(Error::Input(_))
        ));
        let short = synthetic_documents(1, 2, 16, 4, 30, 1).unwrap();
        assert!(matches!(
            position_probe(&p, &short, 0.5),
            Err(Error::Input(_))
        ));
    }
}
