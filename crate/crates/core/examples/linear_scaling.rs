//! Wall-clock scaling of encode + fuse against document length.
//!
//! Chunks have a fixed length, so encoding cost grows with the number of
//! chunks and therefore linearly in N. The context scan over chunk boundaries
//! should be a tiny fraction of the total.
//!
//! ```bash
//! cargo run --release -p scale-core --example linear_scaling
//! cargo run --release -p scale-core --example linear_scaling -- 4096 8192 16384 32768
//! ```

use scale_core::bench::{run_scaling, BenchConfig, DEFAULT_LENGTHS};
use scale_core::{PipelineConfig, Result};

fn main() -> Result<()> {
    let mut lengths: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    if lengths.is_empty() {
        lengths = DEFAULT_LENGTHS.to_vec();
    }
    let cfg = BenchConfig::new(PipelineConfig {
        d_model: 32,
        encoder_layers: 2,
        ..PipelineConfig::default()
    });
    let report = run_scaling(&lengths, &cfg)?;
    print!("{}", report.to_csv());
    println!("log-log slope        {:.3}", report.slope);
    println!("fuse / encode        {:.2e}", report.fuse_encode_ratio);
    println!("decoder rows / naive {:.4}", report.compression_ratio);
    if report.unreliable {
        println!("warning: smallest run under 50 ms, timings unreliable");
    }
    println!(
        "{}",
        serde_json::to_string(&report.verdict()).expect("verdict serializes")
    );
    Ok(())
}
