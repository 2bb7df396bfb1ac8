//! Boundary extraction, middle sampling and assembly on synthetic chunk
//! encodings, with the row provenance of the flattened decoder input.

use scale_core::cumulation::{cumulate, FusionConfig};
use scale_core::encoder::ChunkEncoding;
use scale_core::numerics::Matrix;
use scale_core::Result;

fn main() -> Result<()> {
    let (len, d) = (12, 2);
    let encodings: Vec<ChunkEncoding> = (0..3)
        .map(|i| ChunkEncoding {
            index: i + 1,
            start: i * 8,
            hidden: Matrix::from_rows(
                &(0..len)
                    .map(|r| vec![(i * 100 + r) as f64, 0.0])
                    .collect::<Vec<_>>(),
            )
            .expect("finite"),
        })
        .collect();
    let cfg = FusionConfig {
        k: 2,
        m: 3,
        alpha: 0.5,
        middle_seed: 42,
    };
    let (_, seq) = cumulate(&encodings, &cfg, false)?;
    println!(
        "{} chunks -> {} rows (C * (2k + m) = {}), width {d}",
        seq.chunk_count(),
        seq.rows(),
        seq.nominal_rows()
    );
    for (row, p) in seq.provenance.iter().enumerate() {
        println!(
            "row {row:>2}: chunk {} {:<6} source token {:>2}  value {:>7.2}",
            p.chunk,
            format!("{:?}", p.role).to_lowercase(),
            p.source,
            seq.flattened.get(row, 0)
        );
    }
    Ok(())
}
