//! Wall-clock scaling of the encode and fuse stages, and decoder-input row
//! accounting against naive concatenation of all chunk states.
//!
//! Each length gets one discarded warm-up run followed by three timed runs;
//! the per-stage median is reported. The fitted slope is the least-squares
//! slope of `ln(total seconds)` against `ln(N)`.

use std::fmt::Write as _;
use std::time::Duration;

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use crate::pipeline::Pipeline;
use crate::segmenter::{segment_count, TokenId, TokenSequence};

pub const SLOPE_RANGE: (f64, f64) = (0.8, 1.3);
pub const MAX_FUSE_ENCODE_RATIO: f64 = 0.05;
/// Below this total time at the smallest length the timings are flagged.
pub const MIN_RELIABLE_SECONDS: f64 = 0.05;
pub const DEFAULT_LENGTHS: [usize; 4] = [8192, 16384, 32768, 65536];

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub pipeline: PipelineConfig,
    pub vocab_size: usize,
    pub repeats: usize,
    /// Encode chunks in parallel. The slope verdict is skipped in this mode.
    pub parallel: bool,
}

impl BenchConfig {
    pub fn new(pipeline: PipelineConfig) -> Self {
        BenchConfig {
            pipeline,
            vocab_size: 1000,
            repeats: 3,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowCounts {
    pub scale_rows: usize,
    pub naive_rows: usize,
}

impl RowCounts {
    pub fn ratio(&self) -> f64 {
        self.scale_rows as f64 / self.naive_rows as f64
    }
}

/// Decoder-input rows `C * (2k + m)` against `C * L`, from the segment-count
/// formula alone.
pub fn compare_naive_concat(n: usize, cfg: &PipelineConfig) -> RowCounts {
    let c = segment_count(n, cfg.chunk_len, cfg.overlap);
    RowCounts {
        scale_rows: c * (2 * cfg.k + cfg.m),
        naive_rows: c * cfg.chunk_len,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub c: usize,
    pub encode_seconds: f64,
    pub fuse_seconds: f64,
    pub total_seconds: f64,
    pub scale_rows: usize,
    pub naive_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub slope: f64,
    pub compression_ratio: f64,
    /// fuse / encode at the largest length.
    pub fuse_encode_ratio: f64,
    pub unreliable: bool,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub slope: f64,
    /// `None` when the slope test was skipped (parallel mode).
    pub pass: Option<bool>,
}

impl ScalingReport {
    pub fn slope_in_range(&self) -> bool {
        (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&self.slope)
    }

    pub fn verdict(&self) -> Verdict {
        let pass = (!self.parallel).then(|| {
            !self.unreliable
                && self.slope_in_range()
                && self.fuse_encode_ratio < MAX_FUSE_ENCODE_RATIO
        });
        Verdict {
            slope: self.slope,
            pass,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,C,encode_s,fuse_s,total_s,scale_rows,naive_rows\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{},{}",
                r.n,
                r.c,
                r.encode_seconds,
                r.fuse_seconds,
                r.total_seconds,
                r.scale_rows,
                r.naive_rows
            );
        }
        out
    }
}

pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn median(mut v: Vec<Duration>) -> f64 {
    v.sort_unstable();
    v[v.len() / 2].as_secs_f64()
}

/// Uniform random tokens; content does not affect cost.
pub fn random_document(n: usize, vocab_size: usize, seed: u64) -> Result<TokenSequence> {
    let mut rng = SeededRng::new(seed);
    TokenSequence::new(
        (0..n)
            .map(|_| rng.below(vocab_size as u64) as TokenId)
            .collect(),
    )
}

pub fn run_scaling(lengths: &[usize], cfg: &BenchConfig) -> Result<ScalingReport> {
    if lengths.len() < 4 {
        return Err(Error::config(format!(
            "scaling needs at least 4 lengths, got {}",
            lengths.len()
        )));
    }
    if lengths.windows(2).any(|w| w[0] >= w[1]) || lengths[0] == 0 {
        return Err(Error::config(
            "lengths must be positive and strictly increasing",
        ));
    }
    if cfg.repeats == 0 {
        return Err(Error::config("repeats must be at least 1"));
    }
    let pipeline = Pipeline::new(&cfg.pipeline, cfg.vocab_size)?;
    let root = SeededRng::new(cfg.pipeline.seed);
    let mut rows = Vec::with_capacity(lengths.len());
    for &n in lengths {
        let doc = random_document(n, cfg.vocab_size, root.fork(n as u64).seed())?;
        let (warm, _) = pipeline.run_timed(&doc, cfg.parallel)?;
        let c = warm.segments.len();
        let scale_rows = warm.sequence.rows();
        drop(warm);
        let mut encode = Vec::with_capacity(cfg.repeats);
        let mut fuse = Vec::with_capacity(cfg.repeats);
        let mut total = Vec::with_capacity(cfg.repeats);
        for _ in 0..cfg.repeats {
            let (_, t) = pipeline.run_timed(&doc, cfg.parallel)?;
            encode.push(t.encode);
            fuse.push(t.fuse);
            total.push(t.encode + t.fuse);
        }
        rows.push(ScalingRow {
            n,
            c,
            encode_seconds: median(encode),
            fuse_seconds: median(fuse),
            total_seconds: median(total),
            scale_rows,
            naive_rows: c * cfg.pipeline.chunk_len,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.total_seconds.max(1e-9)).collect();
    let last = rows.last().expect("at least four rows");
    let counts = compare_naive_concat(last.n, &cfg.pipeline);
    Ok(ScalingReport {
        slope: loglog_slope(&xs, &ys),
        compression_ratio: counts.ratio(),
        fuse_encode_ratio: last.fuse_seconds / last.encode_seconds,
        unreliable: rows[0].total_seconds < MIN_RELIABLE_SECONDS,
        parallel: cfg.parallel,
        rows,
    })
}
