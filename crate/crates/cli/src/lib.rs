// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pipeline commands behind the `instprobe` binary.
//!
//! Every command reads one TOML config, writes under one output directory
//! and stamps its outputs with a config hash. Exit codes: 2 for
//! configuration errors, 3 for data errors, 4 for invariant violations.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod cmd;
pub mod config;
pub mod error;
pub mod inputs;
pub mod output;
pub mod svg;

pub use config::{Loaded, Overrides, PipelineConfig};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "instprobe", version, about = "Probe instruction-conditioned activations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Pipeline config (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Output directory; overrides io.output_dir and $INSTPROBE_OUT.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides corpus.seed and synth.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated probe CV seeds; overrides probe.seeds.
    #[arg(long, value_delimiter = ',')]
    pub probe_seeds: Option<Vec<u64>>,
}

impl Common {
    pub fn load(&self) -> Result<Loaded> {
        let o = Overrides { seed: self.seed, probe_seeds: self.probe_seeds.clone(), output_dir: self.out.clone() };
        PipelineConfig::load(&self.config, &o)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render prompt corpora from raw task files.
    BuildCorpus(Common),
    /// Write planted synthetic activation runs.
    Synth(Common),
    /// Fit probes on every requested (run, probe, role, layer).
    Probe(Common),
    /// Compute report tables and plots from runs and stats.
    Report(Common),
    /// Check activation files for format and integrity errors.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Runs one command; returns the paths written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::BuildCorpus(c) => Ok(cmd::corpus::build_corpus(&c.load()?)?.files),
        Command::Synth(c) => {
            let loaded = c.load()?;
            pool(loaded.config.probe.threads)?.install(|| cmd::synth::synth(&loaded))
        }
        Command::Probe(c) => {
            let loaded = c.load()?;
            pool(loaded.config.probe.threads)?.install(|| cmd::probe::probe(&loaded))
        }
        Command::Report(c) => cmd::report::report(&c.load()?),
        Command::Validate { files } => cmd::validate::validate(&files).map(|_| Vec::new()),
    }
}
