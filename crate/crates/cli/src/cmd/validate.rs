// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use instprobe::actstore::read_run;

use crate::error::{CliError, Result};

/// One line per file; every file is checked before the first failure is
/// reported.
pub fn validate(paths: &[PathBuf]) -> Result<Vec<String>> {
    if paths.is_empty() {
        return Err(CliError::Config("no files to validate".into()));
    }
    let mut lines = Vec::with_capacity(paths.len());
    let mut failed = 0usize;
    for p in paths {
        match read_run(p) {
            Ok(run) => {
                let m = &run.manifest;
                lines.push(format!(
                    "ok\t{}\t{} {} {} {}\tlayers={} instances={} dim={} roles={}",
                    p.display(),
                    m.model_id,
                    m.task,
                    m.variation,
                    m.intervention,
                    m.num_layers,
                    m.num_instances(),
                    m.hidden_dim,
                    m.roles.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(",")
                ));
            }
            Err(e) => {
                failed += 1;
                lines.push(format!("invalid\t{}\t{e}", p.display()));
            }
        }
    }
    for l in &lines {
        println!("{l}");
    }
    if failed > 0 {
        return Err(CliError::Data(format!("{failed} of {} files failed validation", paths.len())));
    }
    Ok(lines)
}
