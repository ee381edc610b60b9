//! Command-line pipeline: each subcommand reads artifacts from the run
//! directory and writes its own.

pub mod args;
pub mod commands;
pub mod error;
pub mod run_dir;

use args::{Cli, Command};
use commands::Context;
pub use error::{CliError, CliResult};

/// Runs one command and returns its one-line summary.
pub fn run(cli: Cli) -> CliResult<String> {
    let ctx = Context::new(cli.config.as_deref(), cli.seed, &cli.out)?;
    let pool = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Ingest { train, valid, test } => commands::ingest(&ctx, train, valid, test),
        Command::SelectAnchors => commands::select(&ctx),
        Command::Tokenize => commands::tokenize(&ctx),
        Command::Train => commands::train_cmd(&ctx),
        Command::Eval {
            task,
            split,
            unseen,
            checkpoint,
        } => commands::eval(&ctx, task, split, unseen, checkpoint),
        Command::Stats => commands::stats(&ctx),
        Command::ExportEmbeddings { checkpoint } => commands::export_embeddings(&ctx, checkpoint),
    })
}
