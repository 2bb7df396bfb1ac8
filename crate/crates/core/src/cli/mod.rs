//! Command-line front end for the `scale` binary.
//!
//! Settings are layered: built-in defaults, then a JSON config file
//! (`--config`), then environment variables, then flags. Every pipeline flag
//! can be set through an environment variable named `SCALE_` followed by the
//! flag in upper snake case, e.g. `SCALE_CHUNK_LEN`, `SCALE_ALPHA`,
//! `SCALE_SEED`, `SCALE_OUT_DIR`.

mod commands;

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_ablate, cmd_bench, cmd_pipeline, cmd_probe, cmd_rouge, cmd_segment, config_hash, probe_csv,
    sanitize_id, AblationAxis, AblationReport, AblationRow, DocumentEntry, PipelineSummary,
    ProbeSettings, RunConfig,
};

use crate::bench::{BenchConfig, DEFAULT_LENGTHS};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "scale",
    version,
    about = "Chunked encoding and boundary fusion for long documents"
)]
pub struct Cli {
    /// JSON file with pipeline settings; unspecified fields keep their defaults.
    #[arg(long, global = true, env = "SCALE_CONFIG")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, env = "SCALE_SEED")]
    pub seed: Option<u64>,

    #[arg(long, global = true, env = "SCALE_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,

    #[arg(long, global = true, env = "SCALE_WORKERS", default_value_t = 1)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// Chunk length L.
    #[arg(long, env = "SCALE_CHUNK_LEN")]
    pub chunk_len: Option<usize>,
    /// Overlap O between consecutive chunks.
    #[arg(long, env = "SCALE_OVERLAP")]
    pub overlap: Option<usize>,
    /// Boundary width k.
    #[arg(long, env = "SCALE_K")]
    pub k: Option<usize>,
    /// Middle rows m sampled per chunk.
    #[arg(long, env = "SCALE_M")]
    pub m: Option<usize>,
    /// Fusion ratio in [0, 1].
    #[arg(long, env = "SCALE_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, env = "SCALE_D_MODEL")]
    pub d_model: Option<usize>,
    #[arg(long, env = "SCALE_ENCODER_HEADS")]
    pub encoder_heads: Option<usize>,
    #[arg(long, env = "SCALE_ENCODER_LAYERS")]
    pub encoder_layers: Option<usize>,
    #[arg(long, env = "SCALE_ENCODER_FF")]
    pub encoder_ff: Option<usize>,
    #[arg(long, env = "SCALE_DECODER_HEADS")]
    pub decoder_heads: Option<usize>,
    #[arg(long, env = "SCALE_DECODER_LAYERS")]
    pub decoder_layers: Option<usize>,
    #[arg(long, env = "SCALE_DECODER_FF")]
    pub decoder_ff: Option<usize>,
    #[arg(long, env = "SCALE_DECODE_STEPS")]
    pub decode_steps: Option<usize>,
}

impl PipelineArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        set!(
            chunk_len,
            overlap,
            k,
            m,
            alpha,
            d_model,
            encoder_heads,
            encoder_layers,
            encoder_ff,
            decoder_heads,
            decoder_layers,
            decoder_ff,
            decode_steps
        );
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    /// Chunks per synthetic probe document.
    #[arg(long, default_value_t = 5)]
    pub probe_chunks: usize,
    /// Number of synthetic probe documents.
    #[arg(long, default_value_t = 1)]
    pub probe_docs: usize,
    #[arg(long, default_value_t = 1000)]
    pub probe_vocab: usize,
}

impl From<&ProbeArgs> for ProbeSettings {
    fn from(a: &ProbeArgs) -> Self {
        ProbeSettings {
            chunks: a.probe_chunks,
            documents: a.probe_docs,
            vocab_size: a.probe_vocab,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the segmentation of every corpus document as JSON lines.
    Segment {
        #[arg(long)]
        corpus: PathBuf,
        /// Include token ids in the output.
        #[arg(long)]
        with_tokens: bool,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Run the full pipeline over a JSONL corpus and write artifacts.
    Pipeline {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Sweep one hyperparameter and write a CSV of probe error and row counts.
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        axis: AblationAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        probe: ProbeArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Measure encode/fuse wall time against document length.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LENGTHS)]
        lengths: Vec<usize>,
        /// Encode chunks in parallel; skips the slope verdict.
        #[arg(long)]
        parallel: bool,
        #[arg(long, default_value_t = 1000)]
        vocab: usize,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// ROUGE-1/2/L F1 for line-aligned candidate and reference files.
    Rouge {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        references: PathBuf,
    },
    /// Fit the position probe on synthetic identical-chunk documents.
    Probe {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0])]
        alphas: Vec<f64>,
        #[command(flatten)]
        probe: ProbeArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
}

impl Cli {
    /// Defaults, then `--config`, then environment and flags.
    pub fn pipeline_config(&self, args: &PipelineArgs) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::config(format!("{}: {e}", path.display())))?
            }
            None => PipelineConfig::default(),
        };
        args.apply(&mut cfg);
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn run_config(&self, args: &PipelineArgs) -> Result<RunConfig> {
        let pipeline = self.pipeline_config(args)?;
        pipeline.validate()?;
        Ok(RunConfig {
            pipeline,
            out_dir: self.out_dir.clone(),
            workers: self.workers,
        })
    }
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn create_out_dir(dir: &std::path::Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Segment {
            corpus,
            with_tokens,
            pipeline,
        } => {
            let cfg = cli.pipeline_config(pipeline)?;
            emit(&cmd_segment(&cfg, corpus, *with_tokens)?)
        }
        Command::Pipeline { corpus, pipeline } => {
            let run = cli.run_config(pipeline)?;
            let summary = cmd_pipeline(&run, corpus)?;
            emit(&format!(
                "wrote {} documents to {} (config {})\n",
                summary.documents.len(),
                summary.out_dir.display(),
                summary.config_hash
            ))
        }
        Command::Ablate {
            corpus,
            axis,
            values,
            probe,
            pipeline,
        } => {
            let run = cli.run_config(pipeline)?;
            let report = cmd_ablate(&run, *axis, values, corpus, &probe.into())?;
            let csv = report.to_csv();
            create_out_dir(&run.out_dir)?;
            let path = run.out_dir.join(format!("ablate_{}.csv", axis.name()));
            fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
            emit(&csv)
        }
        Command::Bench {
            lengths,
            parallel,
            vocab,
            pipeline,
        } => {
            let run = cli.run_config(pipeline)?;
            let mut cfg = BenchConfig::new(run.pipeline.clone());
            cfg.parallel = *parallel;
            cfg.vocab_size = *vocab;
            let report = if *parallel {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(run.workers.max(1))
                    .build()
                    .map_err(|e| Error::config(e.to_string()))?;
                pool.install(|| cmd_bench(&cfg, lengths))?
            } else {
                cmd_bench(&cfg, lengths)?
            };
            let csv = report.to_csv();
            create_out_dir(&run.out_dir)?;
            let path = run.out_dir.join("bench.csv");
            fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
            emit(&csv)?;
            emit(&format!("{}\n", serde_json::to_string(&report.verdict())?))
        }
        Command::Rouge {
            candidates,
            references,
        } => emit(&cmd_rouge(candidates, references)?),
        Command::Probe {
            alphas,
            probe,
            pipeline,
        } => {
            let cfg = cli.pipeline_config(pipeline)?;
            let results = cmd_probe(&cfg, alphas, &probe.into())?;
            emit(&probe_csv(&results))
        }
    }
}
