use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
///
/// Entry `(r, c)` lives at `data[r * cols + c]`. Values are immutable once
/// built; every operation returns a fresh matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting length mismatches and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::config(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite matrix entry {bad}")));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::config("ragged rows"));
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub(crate) fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub(crate) fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::config(format!(
                "matmul shape mismatch: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (p, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * other.cols..(p + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`, without materializing the transpose.
    pub fn matmul_transposed(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::config(format!(
                "matmul_transposed shape mismatch: {}x{} times ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                let b = other.row(j);
                out.data[i * other.rows + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    fn check_same_shape(&self, other: &Matrix, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::config(format!(
                "{op} shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other, "add")?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other, "sub")?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub(crate) fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// `a * self + b * other`, element-wise.
    pub fn lin_comb(&self, a: f64, other: &Matrix, b: f64) -> Result<Matrix> {
        self.check_same_shape(other, "lin_comb")?;
        Ok(self.zip_map(other, |x, y| a * x + b * y))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Softmax over each row, with the row maximum subtracted first.
    pub fn row_softmax(&self) -> Matrix {
        let mut out = self.clone();
        for r in 0..out.rows {
            softmax_in_place(out.row_mut(r));
        }
        out
    }

    /// Per-row normalization to zero mean and unit variance (gain 1, bias 0).
    pub fn layer_norm(&self, eps: f64) -> Matrix {
        let mut out = self.clone();
        let n = self.cols as f64;
        for r in 0..out.rows {
            let row = out.row_mut(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * inv;
            }
        }
        out
    }

    pub fn slice_rows(&self, range: Range<usize>) -> Matrix {
        assert!(
            range.end <= self.rows,
            "row range {range:?} out of {}",
            self.rows
        );
        Matrix {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    pub fn slice_cols(&self, range: Range<usize>) -> Matrix {
        assert!(
            range.end <= self.cols,
            "col range {range:?} out of {}",
            self.cols
        );
        let width = range.len();
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[range.clone()]);
        }
        Matrix {
            rows: self.rows,
            cols: width,
            data,
        }
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks blocks vertically. All blocks must share a column count; an
    /// empty list yields a `0 x cols` matrix.
    pub fn vstack(blocks: &[&Matrix], cols: usize) -> Result<Matrix> {
        let mut data = Vec::with_capacity(blocks.iter().map(|b| b.data.len()).sum());
        let mut rows = 0;
        for b in blocks {
            if b.cols != cols {
                return Err(Error::config(format!(
                    "vstack column mismatch: {} vs {cols}",
                    b.cols
                )));
            }
            rows += b.rows;
            data.extend_from_slice(&b.data);
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Places `blocks` side by side.
    pub fn hstack(blocks: &[Matrix]) -> Result<Matrix> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(Error::config("hstack row mismatch"));
        }
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for b in blocks {
                data.extend_from_slice(b.row(r));
            }
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Serializes as `"rows cols"` followed by one space-separated line per
    /// row, each entry in shortest round-trip decimal form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.rows, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Matrix> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::input("empty matrix text"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::input(format!("bad matrix header {header:?}: {e}")))?;
        let [rows, cols] = dims[..] else {
            return Err(Error::input(format!("bad matrix header {header:?}")));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::input(format!("matrix text missing row {r}")))?;
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|e| Error::input(format!("row {r}: bad entry {tok:?}: {e}")))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(Error::input(format!(
                    "row {r} has {} entries, expected {cols}",
                    data.len() - before
                )));
            }
        }
        Matrix::from_vec(rows, cols, data)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Element-wise arithmetic mean of equally shaped matrices.
pub fn mean_of(matrices: &[&Matrix]) -> Result<Matrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::contract("mean_of called with an empty list"))?;
    let mut acc = (*first).clone();
    for m in &matrices[1..] {
        acc.add_assign(m)?;
    }
    Ok(acc.scale(1.0 / matrices.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn random(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.next_gaussian())
    }

    #[test]
    fn identity_times_a_is_a() {
        let a = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 7.0]]).unwrap();
        assert_eq!(Matrix::identity(2).matmul(&a).unwrap(), a);
    }

    #[test]
    fn hand_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let p = a.matmul(&b).unwrap();
        assert_eq!(p, Matrix::from_rows(&[vec![17.0], vec![39.0]]).unwrap());
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        assert!(matches!(a.matmul(&b), Err(Error::Config(_))));
    }

    #[test]
    fn matmul_transposed_agrees_with_explicit_transpose() {
        let mut rng = SeededRng::new(3);
        let a = random(&mut rng, 4, 5);
        let b = random(&mut rng, 6, 5);
        let fast = a.matmul_transposed(&b).unwrap();
        let slow = a.matmul(&b.transpose()).unwrap();
        assert!(fast.max_abs_diff(&slow) < 1e-12);
    }

    #[test]
    fn matmul_is_associative() {
        let mut rng = SeededRng::new(11);
        for _ in 0..20 {
            let (p, q, r, s) = (
                1 + rng.below(6) as usize,
                1 + rng.below(6) as usize,
                1 + rng.below(6) as usize,
                1 + rng.below(6) as usize,
            );
            let a = random(&mut rng, p, q);
            let b = random(&mut rng, q, r);
            let c = random(&mut rng, r, s);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let scale = left.data().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(left.max_abs_diff(&right) / scale < 1e-9);
        }
    }

    #[test]
    fn softmax_cases() {
        let s = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap().row_softmax();
        assert_eq!(s.data(), &[0.5, 0.5]);
        let s = Matrix::from_rows(&[vec![1000.0, 1000.0]])
            .unwrap()
            .row_softmax();
        assert_eq!(s.data(), &[0.5, 0.5]);
        let s = Matrix::from_rows(&[vec![0.0, 3f64.ln()]])
            .unwrap()
            .row_softmax();
        assert!((s.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((s.get(0, 1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn softmax_rows_are_distributions_and_shift_invariant() {
        let mut rng = SeededRng::new(5);
        let a = random(&mut rng, 8, 13).scale(10.0);
        let s = a.row_softmax();
        let shifted = Matrix::from_fn(8, 13, |r, c| a.get(r, c) + r as f64 * 3.5).row_softmax();
        for r in 0..8 {
            let sum: f64 = s.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(s.row(r).iter().all(|&v| v > 0.0 && v < 1.0));
        }
        assert!(s.max_abs_diff(&shifted) < 1e-12);
    }

    #[test]
    fn mean_of_cases() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(mean_of(&[&a]).unwrap(), a);
        let one = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let three = Matrix::from_rows(&[vec![3.0]]).unwrap();
        assert_eq!(mean_of(&[&one, &three]).unwrap().data(), &[2.0]);
        assert!(matches!(mean_of(&[]), Err(Error::Contract(_))));
        assert!(matches!(mean_of(&[&one, &a]), Err(Error::Config(_))));
    }

    #[test]
    fn mean_of_matches_sum_over_count() {
        let mut rng = SeededRng::new(8);
        let ms: Vec<Matrix> = (0..5).map(|_| random(&mut rng, 1, 4)).collect();
        let refs: Vec<&Matrix> = ms.iter().collect();
        let mean = mean_of(&refs).unwrap();
        for c in 0..4 {
            let mut sum = 0.0;
            for m in &ms {
                sum += m.get(0, c);
            }
            assert!((mean.get(0, c) - sum / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_cases() {
        let z = Matrix::from_rows(&[vec![5.0, 5.0, 5.0]])
            .unwrap()
            .layer_norm(1e-5);
        assert_eq!(z.data(), &[0.0, 0.0, 0.0]);
        let n = Matrix::from_rows(&[vec![1.0, -1.0]])
            .unwrap()
            .layer_norm(1e-5);
        assert!((n.get(0, 0) - 1.0).abs() < 1e-5 && (n.get(0, 1) + 1.0).abs() < 1e-5);
        let mut rng = SeededRng::new(9);
        let r = random(&mut rng, 6, 17).scale(4.0).layer_norm(1e-5);
        for i in 0..6 {
            let mean: f64 = r.row(i).iter().sum::<f64>() / 17.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let mut rng = SeededRng::new(12);
        let a = random(&mut rng, 3, 4);
        let back = Matrix::from_text(&a.to_text()).unwrap();
        assert_eq!(a, back);
        let empty = Matrix::zeros(0, 5);
        assert_eq!(Matrix::from_text(&empty.to_text()).unwrap(), empty);
    }

    #[test]
    fn text_format_layout() {
        let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![-2.0, 0.1]]).unwrap();
        assert_eq!(a.to_text(), "2 2\n1 0.5\n-2 0.1\n");
    }

    #[test]
    fn from_text_rejects_bad_input() {
        assert!(Matrix::from_text("2 2\n1 2\n3\n").is_err());
        assert!(Matrix::from_text("1 1\nNaN\n").is_err());
        assert!(Matrix::from_text("x\n").is_err());
    }
}
