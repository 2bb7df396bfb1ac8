//! End-to-end document processing: segment, encode, cumulate.

use std::time::{Duration, Instant};

use crate::config::PipelineConfig;
use crate::cumulation::{cumulate, FusedBoundarySet, FusedSequence};
use crate::decoder::{init_decoder, DecoderConfig, DecoderWeights};
use crate::encoder::{encode_all, init_weights, ChunkEncoding, EncoderConfig, EncoderWeights};
use crate::error::Result;
use crate::segmenter::{segment, SegmentSet, TokenSequence};

/// A configured pipeline with its frozen encoder and decoder weights.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    pub encoder_config: EncoderConfig,
    pub encoder: EncoderWeights,
    pub decoder_config: DecoderConfig,
    pub decoder: DecoderWeights,
}

#[derive(Debug, Clone)]
pub struct DocumentRun {
    pub segments: SegmentSet,
    pub encodings: Vec<ChunkEncoding>,
    pub fused: FusedBoundarySet,
    pub sequence: FusedSequence,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    /// Segmentation plus chunk encoding.
    pub encode: Duration,
    /// Boundary extraction, context scans, fusion, middle sampling, assembly.
    pub fuse: Duration,
}

impl Pipeline {
    pub fn new(config: &PipelineConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        let encoder_config = config.encoder(vocab_size);
        let decoder_config = config.decoder(vocab_size);
        Ok(Pipeline {
            config: config.clone(),
            encoder: init_weights(&encoder_config)?,
            encoder_config,
            decoder: init_decoder(&decoder_config)?,
            decoder_config,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.encoder_config.vocab_size
    }

    pub fn encode(
        &self,
        tokens: &TokenSequence,
        parallel: bool,
    ) -> Result<(SegmentSet, Vec<ChunkEncoding>)> {
        let segments = segment(tokens, self.config.chunk_len, self.config.overlap)?;
        let encodings = encode_all(&segments, &self.encoder, &self.encoder_config, parallel)?;
        Ok((segments, encodings))
    }

    pub fn run(&self, tokens: &TokenSequence, parallel: bool) -> Result<DocumentRun> {
        self.run_timed(tokens, parallel).map(|(run, _)| run)
    }

    pub fn run_timed(
        &self,
        tokens: &TokenSequence,
        parallel: bool,
    ) -> Result<(DocumentRun, StageTimings)> {
        let t0 = Instant::now();
        let (segments, encodings) = self.encode(tokens, parallel)?;
        let t1 = Instant::now();
        let (fused, sequence) = cumulate(&encodings, &self.config.fusion(), true)?;
        let t2 = Instant::now();
        Ok((
            DocumentRun {
                segments,
                encodings,
                fused,
                sequence,
            },
            StageTimings {
                encode: t1 - t0,
                fuse: t2 - t1,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_document_row_count() {
        let cfg = PipelineConfig {
            chunk_len: 4,
            overlap: 2,
            k: 1,
            m: 1,
            d_model: 8,
            encoder_heads: 2,
            decoder_heads: 2,
            encoder_ff: 16,
            decoder_ff: 16,
            ..PipelineConfig::default()
        };
        let p = Pipeline::new(&cfg, 16).unwrap();
        let x = TokenSequence::new((0..10).collect()).unwrap();
        let run = p.run(&x, false).unwrap();
        assert_eq!(run.segments.len(), 4);
        assert_eq!(run.sequence.rows(), 12);
    }

    #[test]
    fn one_token_document_uses_shared_rows() {
        let cfg = PipelineConfig {
            d_model: 8,
            encoder_heads: 2,
            decoder_heads: 2,
            ..PipelineConfig::default()
        };
        let p = Pipeline::new(&cfg, 4).unwrap();
        let run = p.run(&TokenSequence::new(vec![3]).unwrap(), false).unwrap();
        assert_eq!(run.sequence.rows(), 2);
        assert!(run.sequence.chunks[0].shared_boundary_rows);
        assert_eq!(run.sequence.chunks[0].middle_shortfall, 300);
    }
}
