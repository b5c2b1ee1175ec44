// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use instprobe::actstore::write_run;
use instprobe::seed::stable_hash;
use instprobe::synth::generate_planted_run;
use rayon::prelude::*;

use crate::config::Loaded;
use crate::error::{CliError, Result};

pub const RUNS_DIR: &str = "runs";

pub fn run_seed(base: u64, name: &str) -> u64 {
    stable_hash(base, &["synth-run", name])
}

/// Writes one planted `.actrun` per configured synth run.
pub fn synth(loaded: &Loaded) -> Result<Vec<PathBuf>> {
    let s = &loaded.config.synth;
    if s.runs.is_empty() {
        return Err(CliError::Config("no [[synth.runs]] configured".into()));
    }
    let hash = loaded.hash(&[]);
    let dir = loaded.output_dir.join(RUNS_DIR);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    s.runs
        .par_iter()
        .map(|r| {
            let mut run = generate_planted_run(&r.profile, run_seed(s.seed, &r.name))
                .map_err(|e| CliError::Config(format!("synth run {}: {e}", r.name)))?;
            run.manifest.notes.insert("config_hash".into(), hash.clone());
            run.manifest.notes.insert("run_name".into(), r.name.clone());
            let path = dir.join(format!("{}.actrun", r.name));
            write_run(&run, &path).map_err(|e| CliError::data(path.display(), e))?;
            Ok(path)
        })
        .collect()
}
