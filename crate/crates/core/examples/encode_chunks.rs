//! Encodes each chunk independently with the frozen random encoder and
//! prints per-chunk hidden-state statistics. The attention hook shows that
//! every attention row is a probability distribution.

use scale_core::encoder::{encode_all, encode_traced, init_weights, EncoderConfig};
use scale_core::segmenter::{segment, TokenSequence};
use scale_core::Result;

fn main() -> Result<()> {
    let cfg = EncoderConfig {
        vocab_size: 100,
        d_model: 16,
        n_heads: 2,
        n_layers: 2,
        d_ff: 32,
        max_len: 32,
        seed: 5,
    };
    let weights = init_weights(&cfg)?;
    let doc = TokenSequence::new((0..90).map(|i| (i * 7 % 100) as u32).collect())?;
    let segments = segment(&doc, 32, 8)?;

    let encodings = encode_all(&segments, &weights, &cfg, true)?;
    for h in &encodings {
        let data = h.hidden.data();
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / data.len() as f64;
        println!(
            "chunk {} start {:>3} shape {:?} mean {mean:+.4} var {var:.4}",
            h.index,
            h.start,
            h.hidden.shape()
        );
    }

    let mut worst = 0.0f64;
    encode_traced(&segments.segments[0], &weights, &cfg, |_, _, probs| {
        for r in 0..probs.rows() {
            worst = worst.max((probs.row(r).iter().sum::<f64>() - 1.0).abs());
        }
    })?;
    println!("largest deviation of an attention row sum from 1: {worst:.2e}");
    Ok(())
}
