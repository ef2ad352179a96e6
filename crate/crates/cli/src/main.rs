mod args;
mod commands;
mod config;
mod output;
mod report;

use std::fmt;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use graphfolk::predict::PredictError;
use graphfolk::synth::SynthError;
use graphfolk::{GraphError, ParseError};

use args::{Cli, Command};
use config::{ConfigFile, Settings};

/// Bad user input that is not a file-format error from the library:
/// inconsistent flags, an unreadable config, an invalid block-model spec.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

/// 2 for malformed input, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let malformed = err.chain().any(|cause| {
        cause.is::<InputError>()
            || cause.is::<ParseError>()
            || cause.is::<SynthError>()
            || matches!(cause.downcast_ref::<GraphError>(), Some(GraphError::Parse(_)))
            || matches!(
                cause.downcast_ref::<PredictError>(),
                Some(PredictError::Parse(_) | PredictError::Csv(_) | PredictError::Alignment { .. })
            )
    });
    if malformed {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let settings = Settings::resolve(cli.seed, cli.threads, file)?;
    rayon::ThreadPoolBuilder::new().num_threads(settings.threads).build_global()?;
    log::debug!("seed {} threads {}", settings.seed, settings.threads);

    match &cli.command {
        Command::Prune { input, out, graph } => commands::prune(&settings, input, out, graph),
        Command::Walk { edges, out, graph, walk } => commands::walk(&settings, edges, out, graph, walk),
        Command::Train { corpus, out, train } => commands::train_cmd(&settings, corpus, out, train),
        Command::Eval { embeddings, labels, task, out, eval } => {
            commands::eval(&settings, embeddings, labels, *task, out, eval)
        }
        Command::Synth { spec, out_dir } => commands::synth(&settings, spec, out_dir),
        Command::Pipeline { out_dir, synth, edges, labels, task, dims, graph, walk, train, eval } => {
            let inputs = commands::PipelineInputs {
                synth: synth.as_deref(),
                edges: edges.as_deref(),
                labels: labels.as_deref(),
                task: *task,
                dims,
            };
            commands::pipeline(&settings, out_dir, inputs, graph, walk, train, eval)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
