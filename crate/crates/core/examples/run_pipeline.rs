//! Full corpus run writing artifacts to a directory, the library
//! equivalent of `scale pipeline`.
//!
//! ```bash
//! cargo run --release -p scale-core --example run_pipeline -- /tmp/scale-run
//! ```

use std::path::{Path, PathBuf};

use scale_core::cli::{cmd_pipeline, RunConfig};
use scale_core::{PipelineConfig, Result};

fn main() -> Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("scale-example-run"));
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/tiny_corpus.jsonl");
    let run = RunConfig {
        pipeline: PipelineConfig::default(),
        out_dir,
        workers: 1,
    };
    let summary = cmd_pipeline(&run, &corpus)?;
    println!("config hash {}", summary.config_hash);
    for d in &summary.documents {
        println!(
            "{:<12} {:>5} tokens {:>2} chunks {:>4} rows -> {}",
            d.id, d.tokens, d.chunks, d.rows, d.dir
        );
    }
    println!("artifacts in {}", summary.out_dir.display());
    Ok(())
}
