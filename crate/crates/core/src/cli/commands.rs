//! Implementations behind the `scale` subcommands. Each returns data or text
//! so it can be driven from tests as well as from the binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bench::{run_scaling, BenchConfig, ScalingReport};
use crate::config::PipelineConfig;
use crate::corpus::{read_corpus, Corpus, Document};
use crate::decoder::{attention_mass_by_chunk, greedy_decode};
use crate::error::{Error, Result};
use crate::eval::{score_text, synthetic_documents, ProbeResult, ProbeSet, RougeTriple};
use crate::pipeline::Pipeline;
use crate::segmenter::{segment, SegmentSetJson};

/// Pipeline settings plus where to write and how many workers to use.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub out_dir: PathBuf,
    pub workers: usize,
}

/// Synthetic identical-chunk documents used by the position probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSettings {
    pub chunks: usize,
    pub documents: usize,
    pub vocab_size: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            chunks: 5,
            documents: 1,
            vocab_size: 1000,
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// SHA-256 of the config's canonical JSON form.
pub fn config_hash(cfg: &PipelineConfig) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(cfg)?.as_bytes()))
}

/// File-system safe form of a document id.
pub fn sanitize_id(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    match s.as_str() {
        "" | "." | ".." => format!("_{s}"),
        _ => s,
    }
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Serialize)]
struct SegmentLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    segments: SegmentSetJson,
}

/// One JSON line per document with its segmentation.
pub fn cmd_segment(cfg: &PipelineConfig, corpus: &Path, with_tokens: bool) -> Result<String> {
    crate::segmenter::check_window(cfg.chunk_len, cfg.overlap)?;
    let corpus = read_corpus(corpus)?;
    let mut out = String::new();
    for doc in &corpus.documents {
        let s = segment(&doc.tokens, cfg.chunk_len, cfg.overlap)?;
        let line = SegmentLine {
            id: &doc.id,
            segments: s.to_json(with_tokens),
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct Seeds {
    seed: u64,
    encoder: u64,
    decoder: u64,
    middle: u64,
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    config: &'a PipelineConfig,
    config_hash: &'a str,
    seeds: Seeds,
    corpus_sha256: String,
    vocab_size: usize,
    documents: Vec<DocumentEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DocumentEntry {
    pub id: String,
    pub dir: String,
    pub tokens: usize,
    pub chunks: usize,
    pub rows: usize,
}

#[derive(Debug, Serialize)]
struct DecodeDemo<'a> {
    start: u32,
    tokens: &'a [u32],
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub out_dir: PathBuf,
    pub config_hash: String,
    pub documents: Vec<DocumentEntry>,
}

/// Runs every corpus document through the pipeline and writes, under
/// `out_dir`: `config.hash`, `run.json`, `vocab.json` (text corpora) and per
/// document `docs/<id>/{segments.json, fused.json, fused.matrix, decode.json,
/// attention_mass.csv}`. Output bytes depend only on config and corpus.
pub fn cmd_pipeline(run: &RunConfig, corpus_path: &Path) -> Result<PipelineSummary> {
    run.pipeline.validate()?;
    let corpus_bytes = fs::read(corpus_path).map_err(|e| Error::io(corpus_path, e))?;
    let corpus = read_corpus(corpus_path)?;
    let hash = config_hash(&run.pipeline)?;

    create_dir(&run.out_dir)?;
    let hash_path = run.out_dir.join("config.hash");
    if let Ok(existing) = fs::read_to_string(&hash_path) {
        if existing.trim() != hash {
            return Err(Error::config(format!(
                "{} holds a run with config hash {}, this run is {hash}; use another --out-dir",
                run.out_dir.display(),
                existing.trim()
            )));
        }
    }
    write_file(&hash_path, format!("{hash}\n"))?;

    let dirs = document_dirs(&corpus)?;
    let documents = if corpus.is_empty() {
        warn!("corpus {} contains no documents", corpus_path.display());
        Vec::new()
    } else {
        if !corpus.vocabulary.is_empty() {
            let mut text = serde_json::to_string_pretty(&corpus.vocabulary)?;
            text.push('\n');
            write_file(&run.out_dir.join("vocab.json"), text)?;
        }
        let pipeline = Pipeline::new(&run.pipeline, corpus.vocab_size)?;
        let docs_root = run.out_dir.join("docs");
        create_dir(&docs_root)?;
        with_workers(run.workers, || {
            corpus
                .documents
                .par_iter()
                .zip(dirs.par_iter())
                .map(|(doc, dir)| process_document(&pipeline, doc, &docs_root.join(dir), dir))
                .collect::<Result<Vec<_>>>()
        })??
    };

    let cfg = &run.pipeline;
    let meta = RunMetadata {
        config: cfg,
        config_hash: &hash,
        seeds: Seeds {
            seed: cfg.seed,
            encoder: cfg.encoder_seed(),
            decoder: cfg.decoder_seed(),
            middle: cfg.middle_seed(),
        },
        corpus_sha256: sha256_hex(&corpus_bytes),
        vocab_size: corpus.vocab_size,
        documents: documents.clone(),
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    write_file(&run.out_dir.join("run.json"), text)?;
    Ok(PipelineSummary {
        out_dir: run.out_dir.clone(),
        config_hash: hash,
        documents,
    })
}

fn document_dirs(corpus: &Corpus) -> Result<Vec<String>> {
    let mut seen = std::collections::HashSet::new();
    corpus
        .documents
        .iter()
        .map(|d| {
            let dir = sanitize_id(&d.id);
            if !seen.insert(dir.clone()) {
                return Err(Error::input(format!(
                    "document id {:?} collides with another id after sanitizing to {dir:?}",
                    d.id
                )));
            }
            Ok(dir)
        })
        .collect()
}

fn process_document(
    pipeline: &Pipeline,
    doc: &Document,
    dir: &Path,
    name: &str,
) -> Result<DocumentEntry> {
    let run = pipeline.run(&doc.tokens, false)?;
    create_dir(dir)?;
    let mut seg = serde_json::to_string_pretty(&run.segments.to_json(false))?;
    seg.push('\n');
    write_file(&dir.join("segments.json"), seg)?;
    run.sequence.write(dir, "fused")?;

    let steps = pipeline.config.decode_steps;
    let (tokens, cross) = if steps > 0 {
        greedy_decode(
            0,
            steps,
            &run.sequence,
            &pipeline.decoder,
            &pipeline.decoder_config,
        )?
    } else {
        (
            Vec::new(),
            crate::numerics::Matrix::zeros(0, run.sequence.rows()),
        )
    };
    let mut demo = serde_json::to_string_pretty(&DecodeDemo {
        start: 0,
        tokens: &tokens,
    })?;
    demo.push('\n');
    write_file(&dir.join("decode.json"), demo)?;

    let mass = attention_mass_by_chunk(&cross, &run.sequence.provenance)?;
    let mut csv = String::from("query");
    for c in &run.sequence.chunks {
        let _ = write!(csv, ",chunk_{}", c.index);
    }
    csv.push('\n');
    for q in 0..mass.rows() {
        let _ = write!(csv, "{q}");
        for v in mass.row(q) {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    write_file(&dir.join("attention_mass.csv"), csv)?;

    Ok(DocumentEntry {
        id: doc.id.clone(),
        dir: format!("docs/{name}"),
        tokens: doc.tokens.len(),
        chunks: run.segments.len(),
        rows: run.sequence.rows(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AblationAxis {
    Alpha,
    M,
    #[value(name = "O", alias = "overlap")]
    Overlap,
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::Alpha => "alpha",
            AblationAxis::M => "m",
            AblationAxis::Overlap => "O",
        }
    }

    /// Config with the axis set to `value`, or `None` when the value is not a
    /// legal setting for the axis.
    pub fn apply(self, base: &PipelineConfig, value: f64) -> Option<PipelineConfig> {
        let mut cfg = base.clone();
        match self {
            AblationAxis::Alpha => cfg.alpha = value,
            AblationAxis::M | AblationAxis::Overlap => {
                if value < 0.0 || value.fract() != 0.0 || !value.is_finite() {
                    return None;
                }
                if self == AblationAxis::M {
                    cfg.m = value as usize;
                } else {
                    cfg.overlap = value as usize;
                }
            }
        }
        cfg.validate().ok().map(|_| cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub value: f64,
    pub probe_mse: f64,
    pub scale_rows: usize,
    pub fuse_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub axis: AblationAxis,
    pub rows: Vec<AblationRow>,
    pub skipped: Vec<f64>,
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},probe_mse,scale_rows,fuse_seconds\n", self.axis.name());
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6}",
                r.value, r.probe_mse, r.scale_rows, r.fuse_seconds
            );
        }
        out
    }
}

/// One corpus pipeline pass and one position probe per axis value.
/// `scale_rows` is the total decoder-input rows over the corpus and
/// `fuse_seconds` the total time spent in cumulation.
pub fn cmd_ablate(
    run: &RunConfig,
    axis: AblationAxis,
    values: &[f64],
    corpus_path: &Path,
    probe: &ProbeSettings,
) -> Result<AblationReport> {
    let corpus = read_corpus(corpus_path)?;
    if corpus.is_empty() {
        warn!("corpus {} contains no documents", corpus_path.display());
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut cached_probe: Option<ProbeSet> = None;
    for &value in values {
        let Some(cfg) = axis.apply(&run.pipeline, value) else {
            warn!("skipping invalid {} value {value}", axis.name());
            skipped.push(value);
            continue;
        };
        let (scale_rows, fuse) = if corpus.is_empty() {
            (0, Duration::ZERO)
        } else {
            let pipeline = Pipeline::new(&cfg, corpus.vocab_size)?;
            let per_doc = with_workers(run.workers, || {
                corpus
                    .documents
                    .par_iter()
                    .map(|d| {
                        pipeline
                            .run_timed(&d.tokens, false)
                            .map(|(r, t)| (r.sequence.rows(), t.fuse))
                    })
                    .collect::<Result<Vec<_>>>()
            })??;
            per_doc
                .into_iter()
                .fold((0, Duration::ZERO), |(n, t), (rn, rt)| (n + rn, t + rt))
        };
        let set = match (&cached_probe, axis) {
            (Some(set), AblationAxis::Alpha) => set.clone(),
            _ => build_probe(&cfg, probe)?,
        };
        let result = set.run(cfg.alpha)?;
        if axis == AblationAxis::Alpha {
            cached_probe = Some(set);
        }
        rows.push(AblationRow {
            value,
            probe_mse: result.mse,
            scale_rows,
            fuse_seconds: fuse.as_secs_f64(),
        });
    }
    Ok(AblationReport {
        axis,
        rows,
        skipped,
    })
}

fn build_probe(cfg: &PipelineConfig, probe: &ProbeSettings) -> Result<ProbeSet> {
    let pipeline = Pipeline::new(cfg, probe.vocab_size)?;
    let docs = synthetic_documents(
        probe.documents,
        probe.chunks,
        cfg.chunk_len,
        cfg.overlap,
        probe.vocab_size,
        cfg.seed,
    )?;
    ProbeSet::build(&pipeline, &docs)
}

/// Position probe at each `alpha`.
pub fn cmd_probe(
    cfg: &PipelineConfig,
    alphas: &[f64],
    probe: &ProbeSettings,
) -> Result<Vec<ProbeResult>> {
    cfg.validate()?;
    let set = build_probe(cfg, probe)?;
    alphas.iter().map(|&a| set.run(a)).collect()
}

pub fn probe_csv(results: &[ProbeResult]) -> String {
    let mut out = String::from("alpha,mse\n");
    for r in results {
        let _ = writeln!(out, "{},{}", r.alpha, r.mse);
    }
    out
}

pub fn cmd_bench(cfg: &BenchConfig, lengths: &[usize]) -> Result<ScalingReport> {
    run_scaling(lengths, cfg)
}

/// Scores line `i` of `candidates` against line `i` of `references` and
/// returns CSV with per-line F1 values and a final `mean` row.
pub fn cmd_rouge(candidates: &Path, references: &Path) -> Result<String> {
    let cand = fs::read_to_string(candidates).map_err(|e| Error::io(candidates, e))?;
    let refs = fs::read_to_string(references).map_err(|e| Error::io(references, e))?;
    let cand: Vec<&str> = cand.lines().collect();
    let refs: Vec<&str> = refs.lines().collect();
    if cand.len() != refs.len() {
        return Err(Error::input(format!(
            "{} has {} lines but {} has {} lines",
            candidates.display(),
            cand.len(),
            references.display(),
            refs.len()
        )));
    }
    let scores: Vec<RougeTriple> = cand
        .iter()
        .zip(&refs)
        .map(|(c, r)| score_text(c, r))
        .collect();
    let mut out = String::from("line,rouge1_f1,rouge2_f1,rougeL_f1\n");
    for (i, s) in scores.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            i + 1,
            s.rouge1.f1,
            s.rouge2.f1,
            s.rouge_l.f1
        );
    }
    let n = scores.len().max(1) as f64;
    let mean = |f: fn(&RougeTriple) -> f64| scores.iter().map(f).sum::<f64>() / n;
    let _ = writeln!(
        out,
        "mean,{},{},{}",
        mean(|s| s.rouge1.f1),
        mean(|s| s.rouge2.f1),
        mean(|s| s.rouge_l.f1)
    );
    Ok(out)
}
