use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "anchorkg", version, about = "Anchor-vocabulary knowledge-graph embeddings")]
pub struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Run directory holding all artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read labelled triple files and write the id maps and splits.
    Ingest {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        valid: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Choose anchors on the training graph.
    SelectAnchors,
    /// Hash every entity and report collisions.
    Tokenize,
    /// Train a model on the tokenized graph.
    Train,
    /// Ranking evaluation of a checkpoint.
    Eval {
        #[arg(long, value_enum, default_value_t = Task::Link)]
        task: Task,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        /// Triples linking new entities to known ones (out-of-sample task).
        #[arg(long)]
        unseen: Option<PathBuf>,
        /// Parameter file; the sidecar is the same path with a `.json` extension.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Graph, anchor-distance and memory statistics.
    Stats,
    /// Write every entity's encoding as `label<TAB>v1<TAB>...`.
    ExportEmbeddings {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Link,
    Relation,
    OutOfSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Valid,
    Test,
}
