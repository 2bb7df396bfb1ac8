//! Chunked encoding with directional boundary fusion for long-document encoder-decoder models.
//!
//! A long token sequence is cut into overlapping fixed-length chunks, each
//! chunk is encoded independently, and the first and last `k` hidden states of
//! every chunk are blended with running averages of all boundary states before
//! and after it. The fused boundaries, plus `m` sampled interior states per
//! chunk, form a compressed decoder input of `C * (2k + m)` rows.
//!
//! | module | role |
//! |---|---|
//! | [`numerics`] | dense matrices, linear solve, SplitMix64 generator |
//! | [`segmenter`] | overlapping segmentation and its inverse |
//! | [`encoder`] | frozen toy transformer encoder |
//! | [`cumulation`] | boundary contexts, fusion, middle sampling, assembly |
//! | [`decoder`] | cross-attention decoder over the fused sequence |
//! | [`eval`] | ROUGE and the position probe |
//! | [`bench`] | scaling measurements and row accounting |
//! | [`cli`] | the `scale` command line |
//!
//! Runnable walkthroughs live in `examples/`.

pub mod bench;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod cumulation;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod eval;
mod nn;
pub mod numerics;
pub mod pipeline;
pub mod segmenter;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use pipeline::Pipeline;
