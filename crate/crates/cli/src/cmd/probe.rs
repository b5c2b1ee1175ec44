// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use instprobe::probes::{probe_layer, ProbeError, ProbeKind};
use instprobe::{ActivationRun, Role};
use rayon::prelude::*;

use crate::config::Loaded;
use crate::error::{CliError, Result};
use crate::inputs::{digests, load_run, run_inputs, stats_path, StatsRecord};
use crate::output::write_atomic;

/// The (role, layer) cells requested for one run.
fn cells(loaded: &Loaded, name: &str, run: &ActivationRun) -> Result<Vec<(Role, usize)>> {
    let p = &loaded.config.probe;
    let m = &run.manifest;
    let roles = if p.roles.is_empty() { m.roles.clone() } else { p.roles.clone() };
    for role in &roles {
        if !m.roles.contains(role) {
            let stored: Vec<&str> = m.roles.iter().map(|r| r.as_str()).collect();
            return Err(CliError::Data(format!("run {name} has no {role} role (stored: {})", stored.join(", "))));
        }
    }
    let layers: Vec<usize> = if p.layers.is_empty() { (0..m.num_layers).collect() } else { p.layers.clone() };
    if let Some(l) = layers.iter().find(|&&l| l >= m.num_layers) {
        return Err(CliError::Data(format!("run {name} has {} layers; layer {l} requested", m.num_layers)));
    }
    let mut out: Vec<(Role, usize)> = roles.iter().flat_map(|&r| layers.iter().map(move |&l| (r, l))).collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn probe_error(name: &str, e: ProbeError) -> CliError {
    match e {
        ProbeError::Config(_) | ProbeError::NoHeldOut(_) | ProbeError::NoSeeds => CliError::Config(e.to_string()),
        ProbeError::LengthMismatch { .. } => CliError::Invariant(format!("run {name}: {e}")),
        _ => CliError::data(format!("run {name}"), e),
    }
}

/// Probes every requested (run, kind, role, layer) and writes one stats
/// file per (run, kind).
pub fn probe(loaded: &Loaded) -> Result<Vec<PathBuf>> {
    let inputs = run_inputs(loaded)?;
    let hash = loaded.hash(&digests(&inputs)?);
    let runs: Vec<ActivationRun> = inputs.iter().map(load_run).collect::<Result<_>>()?;
    let kinds = &loaded.config.probe.kinds;

    let mut jobs: Vec<(usize, ProbeKind, Role, usize)> = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        for &(role, layer) in &cells(loaded, &inputs[i].name, run)? {
            jobs.extend(kinds.iter().map(|&k| (i, k, role, layer)));
        }
    }
    log::info!("probing {} cells across {} runs", jobs.len(), runs.len());
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(i, kind, role, layer)| {
            let job = loaded.config.probe.job(kind);
            probe_layer(&runs[i], role, layer, &job).map_err(|e| probe_error(&inputs[i].name, e))
        })
        .collect::<Result<_>>()?;

    let mut written = Vec::new();
    for (i, input) in inputs.iter().enumerate() {
        for &kind in kinds {
            let mut body = String::new();
            for ((_, _, _, _), stats) in jobs.iter().zip(&results).filter(|((j, k, _, _), _)| *j == i && *k == kind) {
                let rec = StatsRecord { config_hash: hash.clone(), run: input.name.clone(), stats: stats.clone() };
                body.push_str(&serde_json::to_string(&rec).expect("stats serialize"));
                body.push('\n');
            }
            let path = stats_path(loaded, &input.name, kind);
            write_atomic(&path, body.as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}
