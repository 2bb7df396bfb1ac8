use serde::{Deserialize, Serialize};

use crate::cumulation::FusionConfig;
use crate::decoder::DecoderConfig;
use crate::encoder::EncoderConfig;
use crate::error::Result;
use crate::numerics::derive_seed;
use crate::segmenter::check_window;

/// Every hyperparameter of a pipeline run.
///
/// The defaults are the reference setting: `L = 1024`, `O = 150`, `k = 1`,
/// `m = 300`, `alpha = 0.5`, with small toy model dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub chunk_len: usize,
    pub overlap: usize,
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub d_model: usize,
    pub encoder_heads: usize,
    pub encoder_layers: usize,
    pub encoder_ff: usize,
    pub decoder_heads: usize,
    pub decoder_layers: usize,
    pub decoder_ff: usize,
    /// Greedy decoding steps for the demo output.
    pub decode_steps: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            chunk_len: 1024,
            overlap: 150,
            k: 1,
            m: 300,
            alpha: 0.5,
            d_model: 32,
            encoder_heads: 4,
            encoder_layers: 2,
            encoder_ff: 64,
            decoder_heads: 4,
            decoder_layers: 1,
            decoder_ff: 64,
            decode_steps: 8,
            seed: 0,
        }
    }
}

const ENCODER_STREAM: u64 = 1;
const DECODER_STREAM: u64 = 2;
const MIDDLE_STREAM: u64 = 3;

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        check_window(self.chunk_len, self.overlap)?;
        self.fusion().validate(self.chunk_len)?;
        self.encoder(1).validate()?;
        self.decoder(1).validate()
    }

    pub fn encoder_seed(&self) -> u64 {
        derive_seed(self.seed, ENCODER_STREAM)
    }

    pub fn decoder_seed(&self) -> u64 {
        derive_seed(self.seed, DECODER_STREAM)
    }

    pub fn middle_seed(&self) -> u64 {
        derive_seed(self.seed, MIDDLE_STREAM)
    }

    pub fn encoder(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            d_model: self.d_model,
            n_heads: self.encoder_heads,
            n_layers: self.encoder_layers,
            d_ff: self.encoder_ff,
            max_len: self.chunk_len,
            seed: self.encoder_seed(),
        }
    }

    pub fn decoder(&self, vocab_size: usize) -> DecoderConfig {
        DecoderConfig {
            vocab_size,
            d_model: self.d_model,
            n_heads: self.decoder_heads,
            n_layers: self.decoder_layers,
            d_ff: self.decoder_ff,
            max_len: self.decode_steps + 1,
            seed: self.decoder_seed(),
        }
    }

    pub fn fusion(&self) -> FusionConfig {
        FusionConfig {
            k: self.k,
            m: self.m,
            alpha: self.alpha,
            middle_seed: self.middle_seed(),
        }
    }
}
