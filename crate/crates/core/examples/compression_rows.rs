//! Decoder-input rows against naive chunk concatenation for growing
//! documents at the default settings.

use scale_core::bench::compare_naive_concat;
use scale_core::PipelineConfig;

fn main() {
    let cfg = PipelineConfig::default();
    println!(
        "L={} O={} k={} m={}",
        cfg.chunk_len, cfg.overlap, cfg.k, cfg.m
    );
    println!(
        "{:>8} {:>6} {:>10} {:>10} {:>8}",
        "N", "C", "rows", "naive", "ratio"
    );
    for n in [1_000, 4_096, 16_384, 65_536, 262_144, 1_048_576] {
        let counts = compare_naive_concat(n, &cfg);
        println!(
            "{n:>8} {:>6} {:>10} {:>10} {:>8.4}",
            counts.naive_rows / cfg.chunk_len,
            counts.scale_rows,
            counts.naive_rows,
            counts.ratio()
        );
    }
}
