//! Prints how much each source boundary contributes to one chunk's fused
//! boundaries, and confirms a coefficient with a finite difference.

use scale_core::cumulation::BoundarySet;
use scale_core::numerics::Matrix;
use scale_core::Result;

fn main() -> Result<()> {
    let c = 5;
    let alpha = 0.5;
    let target = 2;
    let scalar = |v: f64| Matrix::from_rows(&[vec![v]]).expect("finite");
    let lefts: Vec<Matrix> = (0..c).map(|i| scalar(i as f64)).collect();
    let rights: Vec<Matrix> = (0..c).map(|i| scalar(10.0 + i as f64)).collect();
    let b = BoundarySet::from_blocks(lefts.clone(), rights.clone())?;
    let jac = b.fusion_jacobian(alpha, target)?;

    println!("chunk {} at alpha {alpha}", target + 1);
    println!("source  dL'/dL    dL'/dR    dR'/dL    dR'/dR");
    for j in 0..c {
        let (l, r) = (jac.fused_left[j], jac.fused_right[j]);
        println!(
            "{:>6}  {:>8.5}  {:>8.5}  {:>8.5}  {:>8.5}",
            j + 1,
            l.wrt_left,
            l.wrt_right,
            r.wrt_left,
            r.wrt_right
        );
    }

    let h = 1e-5;
    let shifted = |delta: f64| -> Result<f64> {
        let mut l = lefts.clone();
        l[0] = scalar(delta);
        Ok(BoundarySet::from_blocks(l, rights.clone())?
            .fuse(alpha)?
            .fused_left[target]
            .get(0, 0))
    };
    let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
    println!(
        "finite difference dL'/dL_1 = {fd:.8}, analytic {:.8}",
        jac.fused_left[0].wrt_left
    );
    Ok(())
}
