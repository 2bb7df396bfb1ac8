//! Directional boundary contexts on the three-chunk scalar example, then
//! fusion at a few ratios.

use scale_core::cumulation::BoundarySet;
use scale_core::numerics::Matrix;
use scale_core::Result;

fn scalar(v: f64) -> Matrix {
    Matrix::from_rows(&[vec![v]]).expect("finite")
}

fn main() -> Result<()> {
    let b = BoundarySet::from_blocks(
        vec![scalar(1.0), scalar(3.0), scalar(5.0)],
        vec![scalar(2.0), scalar(4.0), scalar(6.0)],
    )?;
    let (back, fwd) = b.contexts();
    let values = |ms: &[Matrix]| ms.iter().map(|m| m.get(0, 0)).collect::<Vec<_>>();
    println!("backward contexts {:?}", values(&back));
    println!("forward contexts  {:?}", values(&fwd));
    for alpha in [0.0, 0.5, 1.0] {
        let fused = b.fuse(alpha)?;
        println!(
            "alpha {alpha:.1}: fused left {:?}, fused right {:?}",
            values(&fused.fused_left),
            values(&fused.fused_right)
        );
    }
    Ok(())
}
