//! Runs a document through the pipeline and lets the toy decoder attend
//! over the fused sequence; reports cross-attention mass per chunk.

use scale_core::bench::random_document;
use scale_core::decoder::{attention_mass_by_chunk, greedy_decode};
use scale_core::{Pipeline, PipelineConfig, Result};

fn main() -> Result<()> {
    let cfg = PipelineConfig {
        chunk_len: 128,
        overlap: 16,
        m: 24,
        ..PipelineConfig::default()
    };
    let pipeline = Pipeline::new(&cfg, 300)?;
    let doc = random_document(600, 300, 3)?;
    let run = pipeline.run(&doc, false)?;
    println!(
        "{} tokens, {} chunks, decoder memory {} x {}",
        doc.len(),
        run.segments.len(),
        run.sequence.rows(),
        run.sequence.d()
    );

    let (tokens, cross) = greedy_decode(
        0,
        cfg.decode_steps,
        &run.sequence,
        &pipeline.decoder,
        &pipeline.decoder_config,
    )?;
    println!("greedy tokens {tokens:?}");
    let mass = attention_mass_by_chunk(&cross, &run.sequence.provenance)?;
    let last = mass.rows() - 1;
    let shares: Vec<String> = mass.row(last).iter().map(|v| format!("{v:.3}")).collect();
    println!(
        "last query's attention mass by chunk: [{}]",
        shares.join(", ")
    );
    Ok(())
}
