//! Transformer building blocks shared by the toy encoder and decoder.

use crate::error::Result;
use crate::numerics::{softmax_in_place, Matrix, SeededRng};

pub(crate) const LN_EPS: f64 = 1e-5;

/// Gaussian matrix with entries drawn from `N(0, std^2)`, row-major draw order.
pub(crate) fn gaussian(rng: &mut SeededRng, rows: usize, cols: usize, std: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.next_gaussian() * std)
}

/// Fan-in scaled initializer: variance `1 / rows`.
pub(crate) fn fan_in(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
    gaussian(rng, rows, cols, 1.0 / (rows as f64).sqrt())
}

/// Sinusoidal positional encodings for positions `0..len`.
pub fn sinusoidal_positions(len: usize, d_model: usize) -> Matrix {
    Matrix::from_fn(len, d_model, |pos, i| {
        let pair = (i / 2) as f64;
        let angle = pos as f64 / 10_000f64.powf(2.0 * pair / d_model as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
}

impl AttentionWeights {
    pub(crate) fn init(rng: &mut SeededRng, d_model: usize) -> Self {
        AttentionWeights {
            wq: fan_in(rng, d_model, d_model),
            wk: fan_in(rng, d_model, d_model),
            wv: fan_in(rng, d_model, d_model),
            wo: fan_in(rng, d_model, d_model),
        }
    }

    pub(crate) fn named(&self, prefix: &str) -> Vec<(String, &Matrix)> {
        vec![
            (format!("{prefix}.wq"), &self.wq),
            (format!("{prefix}.wk"), &self.wk),
            (format!("{prefix}.wv"), &self.wv),
            (format!("{prefix}.wo"), &self.wo),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub w_in: Matrix,
    pub w_out: Matrix,
}

impl FeedForward {
    pub(crate) fn init(rng: &mut SeededRng, d_model: usize, d_ff: usize) -> Self {
        FeedForward {
            w_in: fan_in(rng, d_model, d_ff),
            w_out: fan_in(rng, d_ff, d_model),
        }
    }

    pub(crate) fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let hidden = x.matmul(&self.w_in)?.map(gelu);
        hidden.matmul(&self.w_out)
    }

    pub(crate) fn named(&self, prefix: &str) -> Vec<(String, &Matrix)> {
        vec![
            (format!("{prefix}.w_in"), &self.w_in),
            (format!("{prefix}.w_out"), &self.w_out),
        ]
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (0.797_884_560_802_865_4 * (x + 0.044_715 * x * x * x)).tanh())
}

pub(crate) struct AttentionOutput {
    pub output: Matrix,
    /// One `(queries x keys)` probability matrix per head; empty unless
    /// requested.
    pub probs: Vec<Matrix>,
}

/// Multi-head scaled dot-product attention of `queries` over `memory`.
/// With `causal`, query `i` only sees memory rows `0..=i`. Probability
/// matrices are materialized only when `keep_probs` is set; otherwise each
/// query row is processed with a single reused score buffer.
pub(crate) fn multi_head_attention(
    queries: &Matrix,
    memory: &Matrix,
    w: &AttentionWeights,
    n_heads: usize,
    causal: bool,
    keep_probs: bool,
) -> Result<AttentionOutput> {
    let d_model = queries.cols();
    let head_dim = d_model / n_heads;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let q = queries.matmul(&w.wq)?;
    let k = memory.matmul(&w.wk)?;
    let v = memory.matmul(&w.wv)?;
    let n_q = queries.rows();
    let n_k = memory.rows();
    let mut context = Matrix::zeros(n_q, d_model);
    let mut probs = Vec::new();
    let mut scores = vec![0.0; n_k];
    for h in 0..n_heads {
        let cols = h * head_dim..(h + 1) * head_dim;
        let qh = q.slice_cols(cols.clone());
        // head_dim x n_k, so the loops below run contiguously over keys
        let kt = k.slice_cols(cols.clone()).transpose();
        let vt = v.slice_cols(cols.clone()).transpose();
        let mut head_probs = keep_probs.then(|| Matrix::zeros(n_q, n_k));
        for r in 0..n_q {
            let visible = if causal { (r + 1).min(n_k) } else { n_k };
            scores.iter_mut().for_each(|s| *s = 0.0);
            for (c, &qc) in qh.row(r).iter().enumerate() {
                let qc = qc * scale;
                for (s, &kv) in scores[..visible].iter_mut().zip(&kt.row(c)[..visible]) {
                    *s += qc * kv;
                }
            }
            scores[visible..]
                .iter_mut()
                .for_each(|s| *s = f64::NEG_INFINITY);
            softmax_in_place(&mut scores);
            let out = &mut context.row_mut(r)[cols.clone()];
            for (c, o) in out.iter_mut().enumerate() {
                *o = scores[..visible]
                    .iter()
                    .zip(&vt.row(c)[..visible])
                    .map(|(p, x)| p * x)
                    .sum();
            }
            if let Some(m) = head_probs.as_mut() {
                m.row_mut(r).copy_from_slice(&scores);
            }
        }
        probs.extend(head_probs);
    }
    let output = context.matmul(&w.wo)?;
    Ok(AttentionOutput { output, probs })
}
