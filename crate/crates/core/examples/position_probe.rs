//! How much chunk-position information do fused left boundaries carry?
//!
//! Builds documents whose chunks all contain the same tokens, so the encoder
//! gives every chunk identical boundary states, then fits a linear readout
//! from fused left boundaries to chunk index for a sweep of `alpha`.
//!
//! ```bash
//! cargo run --release -p scale-core --example position_probe
//! ```

use scale_core::eval::{synthetic_documents, ProbeSet};
use scale_core::{Pipeline, PipelineConfig, Result};

fn main() -> Result<()> {
    let cfg = PipelineConfig {
        chunk_len: 64,
        overlap: 8,
        m: 8,
        ..PipelineConfig::default()
    };
    let vocab = 200;
    let pipeline = Pipeline::new(&cfg, vocab)?;

    for docs in [1, 4] {
        let documents = synthetic_documents(docs, 5, cfg.chunk_len, cfg.overlap, vocab, 7)?;
        let set = ProbeSet::build(&pipeline, &documents)?;
        println!("{docs} document(s), C = 5, d = {}", cfg.d_model);
        println!("{:>6} {:>14}", "alpha", "probe mse");
        for step in 0..=10 {
            let alpha = step as f64 / 10.0;
            let r = set.run(alpha)?;
            println!("{alpha:>6.1} {:>14.6e}", r.mse);
        }
        let r = set.run(0.5)?;
        println!("alpha = 0.5 predictions (doc 0): {:?}", r.predictions[0]);
        println!("targets:                          {:?}\n", r.targets[0]);
    }
    Ok(())
}
