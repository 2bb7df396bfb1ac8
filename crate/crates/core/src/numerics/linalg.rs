use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Solves `a x = b` for square `a` by Gaussian elimination with partial
/// pivoting. `b` may have several right-hand-side columns.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(Error::config(format!(
            "solve shape mismatch: {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut m = a.clone();
    let mut x = b.clone();
    let scale = a
        .data()
        .iter()
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m.get(i, col).abs().total_cmp(&m.get(j, col).abs()))
            .expect("non-empty range");
        if m.get(pivot, col).abs() <= scale * 1e-15 {
            return Err(Error::Numerical(format!(
                "singular system at column {col} of {n}"
            )));
        }
        if pivot != col {
            swap_rows(&mut m, pivot, col);
            swap_rows(&mut x, pivot, col);
        }
        let p = m.get(col, col);
        for r in col + 1..n {
            let f = m.get(r, col) / p;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                let v = m.get(r, c) - f * m.get(col, c);
                m.set(r, c, v);
            }
            for c in 0..x.cols() {
                let v = x.get(r, c) - f * x.get(col, c);
                x.set(r, c, v);
            }
        }
    }
    for col in (0..n).rev() {
        let p = m.get(col, col);
        for c in 0..x.cols() {
            let mut v = x.get(col, c);
            for k in col + 1..n {
                v -= m.get(col, k) * x.get(k, c);
            }
            x.set(col, c, v / p);
        }
    }
    Ok(x)
}

fn swap_rows(m: &mut Matrix, a: usize, b: usize) {
    for c in 0..m.cols() {
        let t = m.get(a, c);
        m.set(a, c, m.get(b, c));
        m.set(b, c, t);
    }
}

/// Ridge least squares: minimizes `|X w - y|^2 + lambda |w|^2`.
///
/// Uses the primal normal equations `(X^T X + lambda I) w = X^T y` when there
/// are at least as many samples as features, otherwise the equivalent dual
/// form `w = X^T (X X^T + lambda I)^{-1} y`.
pub fn ridge_fit(x: &Matrix, y: &Matrix, lambda: f64) -> Result<Matrix> {
    if x.rows() != y.rows() {
        return Err(Error::config("ridge_fit: sample count mismatch"));
    }
    let (n, p) = x.shape();
    if n >= p {
        let xt = x.transpose();
        let mut gram = xt.matmul(x)?;
        for i in 0..p {
            gram.set(i, i, gram.get(i, i) + lambda);
        }
        solve(&gram, &xt.matmul(y)?)
    } else {
        let mut gram = x.matmul_transposed(x)?;
        for i in 0..n {
            gram.set(i, i, gram.get(i, i) + lambda);
        }
        let dual = solve(&gram, y)?;
        x.transpose().matmul(&dual)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![4.0], vec![5.0]]).unwrap();
        let x = solve(&a, &b).unwrap();
        assert!((x.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((x.get(1, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(solve(&a, &b), Err(Error::Numerical(_))));
    }

    #[test]
    fn primal_and_dual_agree() {
        let x = Matrix::from_rows(&[vec![1.0, 0.5, -1.0], vec![0.0, 2.0, 1.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let dual = ridge_fit(&x, &y, 0.1).unwrap();
        // primal computed explicitly
        let xt = x.transpose();
        let mut gram = xt.matmul(&x).unwrap();
        for i in 0..3 {
            gram.set(i, i, gram.get(i, i) + 0.1);
        }
        let primal = solve(&gram, &xt.matmul(&y).unwrap()).unwrap();
        assert!(dual.max_abs_diff(&primal) < 1e-12);
    }
}
