// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use instprobe::actstore::read_run;
use instprobe::probes::{ProbeKind, ProbeStats};
use instprobe::ActivationRun;
use serde::{Deserialize, Serialize};

use crate::cmd::synth::RUNS_DIR;
use crate::config::Loaded;
use crate::error::{CliError, Result};
use crate::output::file_digest;

pub const STATS_DIR: &str = "stats";

/// An input run named by its file stem.
#[derive(Debug, Clone)]
pub struct RunInput {
    pub name: String,
    pub path: PathBuf,
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::Config(format!("run path {} has no usable file name", path.display())))
}

/// `io.runs`, or every `.actrun` written by `synth` when that list is empty.
pub fn run_inputs(loaded: &Loaded) -> Result<Vec<RunInput>> {
    let paths: Vec<PathBuf> = if loaded.config.io.runs.is_empty() {
        let dir = loaded.output_dir.join(RUNS_DIR);
        let entries = std::fs::read_dir(&dir)
            .map_err(|e| CliError::Config(format!("io.runs is empty and {} is unreadable: {e}", dir.display())))?;
        let mut v: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "actrun"))
            .collect();
        v.sort();
        v
    } else {
        loaded.config.io.runs.iter().map(|p| loaded.resolve(p)).collect()
    };
    if paths.is_empty() {
        return Err(CliError::Config("no input runs".into()));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        if !path.is_file() {
            return Err(CliError::Config(format!("run not found: {}", path.display())));
        }
        let name = stem(&path)?;
        if !seen.insert(name.clone()) {
            return Err(CliError::Config(format!("two input runs share the name {name:?}")));
        }
        out.push(RunInput { name, path });
    }
    Ok(out)
}

pub fn digests(runs: &[RunInput]) -> Result<Vec<(String, String)>> {
    runs.iter().map(|r| Ok((r.name.clone(), file_digest(&r.path)?))).collect()
}

pub fn load_run(input: &RunInput) -> Result<ActivationRun> {
    read_run(&input.path).map_err(|e| CliError::data(input.path.display(), e))
}

/// One line of a stats file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub config_hash: String,
    pub run: String,
    #[serde(flatten)]
    pub stats: ProbeStats,
}

pub fn stats_path(loaded: &Loaded, run: &str, kind: ProbeKind) -> PathBuf {
    loaded.output_dir.join(STATS_DIR).join(format!("{run}.{kind}.stats.jsonl"))
}

pub fn read_stats(path: &Path) -> Result<Vec<StatsRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::data(format!("{}:{}", path.display(), i + 1), e)))
        .collect()
}
