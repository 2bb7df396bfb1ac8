//! Splits a token sequence into overlapping chunks and stitches it back.
//!
//! ```bash
//! cargo run -p scale-core --example segment_document -- 20 8 3
//! ```

use scale_core::segmenter::{reconstruct, segment, TokenSequence};
use scale_core::Result;

fn main() -> Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let (n, l, o) = match args[..] {
        [n, l, o] => (n, l, o),
        _ => (20, 8, 3),
    };
    let x = TokenSequence::new((0..n as u32).collect())?;
    let s = segment(&x, l, o)?;
    println!(
        "N={n} L={l} O={o}: {} segments, stride {}",
        s.len(),
        s.stride()
    );
    for g in &s.segments {
        println!(
            "  #{:<3} [{:>5}, {:>5})  {:?}",
            g.index,
            g.start,
            g.end(),
            g.tokens
        );
    }
    assert_eq!(reconstruct(&s)?, x);
    println!("reconstruction matches the input");
    println!(
        "{}",
        serde_json::to_string(&s.to_json(false)).expect("serializable")
    );
    Ok(())
}
