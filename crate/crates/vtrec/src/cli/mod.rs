//! Operator surface: one subcommand per pipeline stage, a TOML config
//! driving all of them, and a `runs.jsonl` audit trail in every output
//! directory.
//!
//! Exit codes are uniform: 0 success, 1 environment/I-O failure, 2
//! user or config error.

mod commands;
mod config;
mod manifest;

pub use config::PipelineConfig;
pub use manifest::{ArtifactRef, RunManifest, RUNS_FILE};

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::model::ModelError;
use crate::nn::NnError;
use crate::synthgen::store::StoreError;
use crate::synthgen::GenError;
use crate::train::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Wrong invocation or incompatible artifacts.
    #[error("{0}")]
    Usage(String),
    #[error("config parse: {0}")]
    Toml(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use CliError::*;
        match self {
            Usage(_) | Toml(_) => 2,
            Gen(GenError::BadConfig(_) | GenError::UnknownPolicy(_) | GenError::BadPriors(_)) => {
                2
            }
            Model(ModelError::BadConfig(_) | ModelError::ConfigMismatch { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "vtrec",
    version,
    about = "Transition recommendation workbench: synthesize labeled corpora, \
             train the two-stage model, evaluate, ablate, and rank transitions \
             for raw shots"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a starter pipeline config.
    InitConfig {
        /// Scale preset: desk | paper.
        #[arg(long, default_value = "desk")]
        preset: String,
        /// Where to write the TOML.
        #[arg(long, default_value = "vtrec.toml")]
        out: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Render a labeled synthetic corpus and report its statistics.
    BuildCorpus {
        #[arg(long)]
        config: PathBuf,
        /// Output root (default $VTREC_OUT_ROOT, then ./vtrec-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stage 1: train the clip classifier and distill the category table.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        /// Corpus directory (default <out>/corpus).
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stage 2: train the retrieval recommender against the table.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Classifier checkpoint (default <out>/pretrain/classifier.ckpt).
        #[arg(long)]
        classifier: Option<PathBuf>,
        /// Category table CSV (default <out>/pretrain/table.csv).
        #[arg(long)]
        table: Option<PathBuf>,
        /// Random unit rows instead of the pretrained table (and no
        /// matching-space projections).
        #[arg(long)]
        random_embedding: bool,
        /// Score each boundary from its two adjacent shots only.
        #[arg(long)]
        no_context: bool,
        /// Drop visual tokens (audio-only model).
        #[arg(long)]
        no_visual: bool,
        /// Drop audio tokens.
        #[arg(long)]
        no_audio: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrieval metrics of a trained recommender on one corpus split.
    Eval {
        /// Recommender checkpoint (default <out>/train/recommender.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Split to score: train | val.
        #[arg(long, default_value = "val")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrain the standard variant grid and tabulate the comparison.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
        /// Comma-separated seeds (default: ablation_seeds from the config).
        #[arg(long)]
        seeds: Option<String>,
        /// Also render the clip-embedding projection image.
        #[arg(long)]
        plot: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank transition categories for every boundary between raw shots.
    Recommend {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Shot files in timeline order (.vframes), at least two.
        #[arg(long, num_args = 1.., required = true)]
        shots: Vec<PathBuf>,
        /// Soundtrack (.audio); required unless the model ignores audio.
        #[arg(long)]
        audio: Option<PathBuf>,
        /// Override the table stored in the checkpoint.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        /// Also write the ranking CSV to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Cli {
    pub fn run(self) -> Result<(), CliError> {
        match self.command {
            Command::InitConfig { preset, out, force } => {
                commands::cmd_init_config(&preset, &out, force)
            }
            Command::BuildCorpus { config, out } => commands::cmd_build_corpus(&config, out),
            Command::Pretrain {
                config,
                corpus,
                out,
            } => commands::cmd_pretrain(&config, corpus, out),
            Command::Train {
                config,
                corpus,
                classifier,
                table,
                random_embedding,
                no_context,
                no_visual,
                no_audio,
                out,
            } => commands::cmd_train(
                &config,
                corpus,
                classifier,
                table,
                commands::TrainFlags {
                    random_embedding,
                    no_context,
                    no_visual,
                    no_audio,
                },
                out,
            ),
            Command::Eval {
                checkpoint,
                corpus,
                split,
                out,
            } => commands::cmd_eval(checkpoint, corpus, &split, out),
            Command::Ablate {
                config,
                corpus,
                classifier,
                table,
                seeds,
                plot,
                out,
            } => commands::cmd_ablate(&config, corpus, classifier, table, seeds, plot, out),
            Command::Recommend {
                checkpoint,
                shots,
                audio,
                table,
                top_k,
                out,
            } => commands::cmd_recommend(&checkpoint, &shots, audio, table, top_k, out),
        }
    }
}
