// SPDX-License-Identifier: MIT OR Apache-2.0

//! Report tables and plots. Column meanings are documented in REPORTS.md.

use std::collections::BTreeMap;
use std::path::PathBuf;

use instprobe::analysis::{
    alignment, behavior_alignment, cross_layer_agreement, instance_tau, intervention_delta, kendall_tau, layer_curves,
    relative_rescale, variation_agreement, AlignmentCategory, EmTally, Third,
};
use instprobe::probes::{ProbeKind, ProbeStats};
use instprobe::{ActivationRun, Intervention, Role, SanityVariant, TaskKind, Variation};

use crate::config::{AgreementBasis, Loaded, RunPair, Statistic};
use crate::error::{CliError, Result};
use crate::inputs::{digests, load_run, read_stats, run_inputs, stats_path};
use crate::output::{cell, f6, file_digest, opt, pp, write_atomic, Table};
use crate::svg;

pub const REPORT_DIR: &str = "report";
pub const INDEX_FILE: &str = "index.tsv";

struct RunData {
    name: String,
    run: ActivationRun,
    stats: BTreeMap<ProbeKind, Vec<ProbeStats>>,
}

impl RunData {
    /// Stats of one (kind, role), ascending by layer.
    fn role_stats(&self, kind: ProbeKind, role: Role) -> Vec<&ProbeStats> {
        self.stats.get(&kind).map(|v| v.iter().filter(|s| s.role == role).collect()).unwrap_or_default()
    }

    fn group(&self) -> (String, TaskKind, SanityVariant, Intervention) {
        let m = &self.run.manifest;
        (m.model_id.clone(), m.task, m.sanity, m.intervention)
    }
}

fn analysis_err(context: impl std::fmt::Display) -> impl FnOnce(instprobe::analysis::AnalysisError) -> CliError {
    move |e| CliError::data(context, e)
}

/// Input names paired with their SHA-256 digests.
type Digests = Vec<(String, String)>;

fn load(loaded: &Loaded) -> Result<(Vec<RunData>, Digests)> {
    let inputs = run_inputs(loaded)?;
    let mut digest_list = digests(&inputs)?;
    let mut out = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let run = load_run(input)?;
        let n = run.manifest.num_instances();
        let mut stats = BTreeMap::new();
        for &kind in &loaded.config.probe.kinds {
            let path = stats_path(loaded, &input.name, kind);
            if !path.is_file() {
                return Err(CliError::Data(format!("missing {}; run `probe` first", path.display())));
            }
            digest_list.push((format!("stats/{}.{kind}", input.name), file_digest(&path)?));
            let mut recs = read_stats(&path)?;
            for r in &recs {
                if r.run != input.name || r.stats.probe != kind || r.stats.predictions.len() != n {
                    return Err(CliError::Data(format!(
                        "{}: record for run {:?}, probe {}, {} predictions does not match run {} ({n} instances)",
                        path.display(),
                        r.run,
                        r.stats.probe,
                        r.stats.predictions.len(),
                        input.name
                    )));
                }
            }
            recs.sort_by_key(|r| (r.stats.role, r.stats.layer));
            stats.insert(kind, recs.into_iter().map(|r| r.stats).collect());
        }
        out.push(RunData { name: input.name.clone(), run, stats });
    }
    Ok((out, digest_list))
}

struct Writer {
    dir: PathBuf,
    hash: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let p = self.dir.join(name);
        t.write(&p, &self.hash)?;
        self.files.push(p);
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        write_atomic(&p, body.as_bytes())?;
        self.files.push(p);
        Ok(())
    }
}

pub fn report(loaded: &Loaded) -> Result<Vec<PathBuf>> {
    let (runs, inputs) = load(loaded)?;
    let a = &loaded.config.analysis;
    let kinds = loaded.config.probe.kinds.clone();
    let mut w = Writer { dir: loaded.output_dir.join(REPORT_DIR), hash: loaded.hash(&inputs), files: Vec::new() };

    if a.wants(Statistic::ProbeStats) {
        w.table("probe_stats.tsv", &probe_stats_table(&runs))?;
    }
    if a.wants(Statistic::Behavior) {
        w.table("behavior.tsv", &behavior_table(&runs))?;
    }
    if a.wants(Statistic::Curves) {
        curves(&runs, &kinds, a.svg, &mut w)?;
    }
    if a.wants(Statistic::Tau) {
        w.table("tau_config.tsv", &config_tau_table(&runs, &kinds)?)?;
        w.table("tau_instance.tsv", &instance_tau_table(&runs, &kinds)?)?;
    }
    if a.wants(Statistic::Agreement) {
        w.table("variation_agreement.tsv", &agreement_table(&runs, &kinds, a.agreement_basis)?)?;
    }
    if a.wants(Statistic::Alignment) {
        let (t, r) = alignment_tables(&runs, &kinds)?;
        w.table("alignment.tsv", &t)?;
        w.table("alignment_runs.tsv", &r)?;
    }
    if a.wants(Statistic::Heatmap) {
        heatmaps(&runs, &kinds, a.svg, &mut w)?;
    }
    if a.wants(Statistic::Intervention) {
        w.table("intervention.tsv", &intervention_table(&runs, &kinds, &a.intervention_pairs)?)?;
    }
    if a.wants(Statistic::Rescale) && a.rescale_points >= 2 {
        w.table("rescaled_curves.tsv", &rescale_table(&runs, &kinds, a.rescale_points)?)?;
    }

    let mut index = Table::new(&["file", "sha256"]);
    for f in &w.files {
        let name = f.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        index.push(vec![name, file_digest(f)?]);
    }
    let hash = w.hash.clone();
    w.text(INDEX_FILE, &index.render(&hash))?;
    Ok(w.files)
}

fn probe_stats_table(runs: &[RunData]) -> Table {
    let mut t = Table::new(&[
        "run",
        "probe",
        "role",
        "layer",
        "mean_accuracy",
        "stddev",
        "pooled_accuracy",
        "folds_used",
        "folds_skipped",
        "control_accuracy",
        "selectivity",
        "mdl_bits",
        "mdl_compression",
        "dropped_dims",
    ]);
    for r in runs {
        for stats in r.stats.values() {
            for s in stats {
                t.push(vec![
                    cell(&r.name),
                    s.probe.to_string(),
                    s.role.to_string(),
                    s.layer.to_string(),
                    f6(s.mean),
                    f6(s.stddev),
                    f6(s.pooled_accuracy),
                    s.accuracies.len().to_string(),
                    s.skipped_folds.len().to_string(),
                    opt(s.control_mean, f6),
                    opt(s.selectivity(), f6),
                    opt(s.mdl_codelength_bits, |x| format!("{x:.3}")),
                    opt(s.mdl_compression, f6),
                    s.max_dropped_dims.to_string(),
                ]);
            }
        }
    }
    t
}

fn behavior_table(runs: &[RunData]) -> Table {
    let mut t = Table::new(&[
        "run",
        "model",
        "task",
        "variation",
        "sanity",
        "intervention",
        "instances",
        "em_accuracy",
        "malformed",
        "no_answer_label",
    ]);
    for r in runs {
        let m = &r.run.manifest;
        let mut tally = EmTally::default();
        for i in &m.instances {
            tally.record(&i.behavior.generated_text, &i.behavior.expected_answer);
        }
        let unparsed = m.instances.iter().filter(|i| i.behavior.predicted_label.is_none()).count();
        t.push(vec![
            cell(&r.name),
            cell(&m.model_id),
            m.task.to_string(),
            m.variation.to_string(),
            m.sanity.to_string(),
            m.intervention.to_string(),
            tally.total.to_string(),
            opt(tally.accuracy(), f6),
            tally.malformed.to_string(),
            unparsed.to_string(),
        ]);
    }
    t
}

fn groups(runs: &[RunData]) -> BTreeMap<(String, TaskKind, SanityVariant, Intervention), Vec<&RunData>> {
    let mut g: BTreeMap<_, Vec<&RunData>> = BTreeMap::new();
    for r in runs {
        g.entry(r.group()).or_default().push(r);
    }
    g
}

fn curves(runs: &[RunData], kinds: &[ProbeKind], svg_on: bool, w: &mut Writer) -> Result<()> {
    for role in Role::ALL {
        let mut t = Table::new(&[
            "model",
            "task",
            "sanity",
            "intervention",
            "probe",
            "layer",
            "runs",
            "mean_accuracy",
            "spread_pp",
        ]);
        let mut series = Vec::new();
        for ((model, task, sanity, intervention), members) in groups(runs) {
            for &kind in kinds {
                let sets: BTreeMap<&str, Vec<ProbeStats>> = members
                    .iter()
                    .filter_map(|r| {
                        let s: Vec<ProbeStats> = r.role_stats(kind, role).into_iter().cloned().collect();
                        (!s.is_empty()).then_some((r.name.as_str(), s))
                    })
                    .collect();
                if sets.is_empty() {
                    continue;
                }
                let curve = layer_curves(&sets, role).map_err(analysis_err(format!("curves for {model}/{task}")))?;
                for (j, layer) in curve.layers.iter().enumerate() {
                    t.push(vec![
                        cell(&model),
                        task.to_string(),
                        sanity.to_string(),
                        intervention.to_string(),
                        kind.to_string(),
                        layer.to_string(),
                        sets.len().to_string(),
                        f6(curve.mean[j]),
                        pp(curve.spread_pp[j]),
                    ]);
                }
                series.push(svg::Series {
                    label: format!("{model} {task} {sanity} {intervention} {kind}"),
                    x: curve.layers.iter().map(|&l| l as f64).collect(),
                    y: curve.mean.clone(),
                    band: Some(curve.spread_pp.iter().map(|s| s / 100.0).collect()),
                });
            }
        }
        if t.rows.is_empty() {
            continue;
        }
        w.table(&format!("curves_{role}.tsv"), &t)?;
        if svg_on {
            let hash = w.hash.clone();
            let body = svg::line_chart(&format!("{role} tokens: probe accuracy"), "layer", "accuracy", &series, &hash);
            w.text(&format!("curves_{role}.svg"), &body)?;
        }
    }
    Ok(())
}

/// Kendall's τ between per-run probe accuracy and EM accuracy, over the
/// runs sharing (sanity, intervention).
fn config_tau_table(runs: &[RunData], kinds: &[ProbeKind]) -> Result<Table> {
    let mut t = Table::new(&["sanity", "intervention", "probe", "role", "layer", "runs", "tau"]);
    let mut by_setting: BTreeMap<(SanityVariant, Intervention), Vec<&RunData>> = BTreeMap::new();
    for r in runs.iter().filter(|r| r.run.manifest.em_accuracy().is_some()) {
        by_setting.entry((r.run.manifest.sanity, r.run.manifest.intervention)).or_default().push(r);
    }
    for ((sanity, intervention), setting) in by_setting {
        for &kind in kinds {
            for role in Role::ALL {
                let members: Vec<(&RunData, Vec<&ProbeStats>)> =
                    setting.iter().map(|r| (*r, r.role_stats(kind, role))).filter(|(_, s)| !s.is_empty()).collect();
                if members.len() < 2 {
                    continue;
                }
                let em: Vec<f64> =
                    members.iter().map(|(r, _)| r.run.manifest.em_accuracy().unwrap_or(f64::NAN)).collect();
                let tau = |x: &[f64]| kendall_tau(x, &em).map_err(analysis_err("config-level tau"));
                let prefix = [sanity.to_string(), intervention.to_string(), kind.to_string(), role.to_string()];
                let mut push = |layer: String, tau: Option<f64>| {
                    let mut row = prefix.to_vec();
                    row.extend([layer, members.len().to_string(), opt(tau, f6)]);
                    t.push(row);
                };
                let layers: Vec<usize> = members[0].1.iter().map(|s| s.layer).collect();
                if members.iter().all(|(_, s)| s.iter().map(|s| s.layer).eq(layers.iter().copied())) {
                    for (j, layer) in layers.iter().enumerate() {
                        let x: Vec<f64> = members.iter().map(|(_, s)| s[j].mean).collect();
                        push(layer.to_string(), tau(&x)?);
                    }
                }
                let x: Vec<f64> =
                    members.iter().map(|(_, s)| s.iter().map(|s| s.mean).sum::<f64>() / s.len() as f64).collect();
                push("mean".into(), tau(&x)?);
            }
        }
    }
    Ok(t)
}

fn instance_tau_table(runs: &[RunData], kinds: &[ProbeKind]) -> Result<Table> {
    let mut t = Table::new(&["run", "probe", "role", "layer", "tau"]);
    for r in runs {
        let (labels, behavior) = (r.run.manifest.labels(), r.run.manifest.behavior_correct());
        for &kind in kinds {
            for role in Role::ALL {
                for s in r.role_stats(kind, role) {
                    let tau = instance_tau(&s.predictions, &labels, &behavior).map_err(analysis_err(&r.name))?;
                    t.push(vec![cell(&r.name), kind.to_string(), role.to_string(), s.layer.to_string(), opt(tau, f6)]);
                }
            }
        }
    }
    Ok(t)
}

/// Per-instance value compared across runs: the prediction (`-1` when
/// missing, else 0/1) or its correctness (0/1).
fn instance_values(r: &RunData, s: &ProbeStats, basis: AgreementBasis) -> BTreeMap<String, i8> {
    r.run
        .manifest
        .instances
        .iter()
        .zip(&s.predictions)
        .map(|(inst, p)| {
            let v = match basis {
                AgreementBasis::Prediction => p.map_or(-1, |b| b as i8),
                AgreementBasis::Correctness => (*p == Some(inst.label.is_positive())) as i8,
            };
            (inst.id.clone(), v)
        })
        .collect()
}

fn agreement_table(runs: &[RunData], kinds: &[ProbeKind], basis: AgreementBasis) -> Result<Table> {
    let mut t = Table::new(&[
        "model",
        "task",
        "sanity",
        "intervention",
        "probe",
        "role",
        "layer",
        "basis",
        "run_a",
        "run_b",
        "instances",
        "rate",
    ]);
    let basis_name = match basis {
        AgreementBasis::Prediction => "prediction",
        AgreementBasis::Correctness => "correctness",
    };
    for ((model, task, sanity, intervention), members) in groups(runs) {
        if members.len() < 2 {
            continue;
        }
        for &kind in kinds {
            for role in Role::ALL {
                let per_run: Vec<(&RunData, Vec<&ProbeStats>)> =
                    members.iter().map(|r| (*r, r.role_stats(kind, role))).filter(|(_, s)| !s.is_empty()).collect();
                if per_run.len() < 2 {
                    continue;
                }
                let layers: Vec<usize> = per_run[0].1.iter().map(|s| s.layer).collect();
                for &layer in &layers {
                    let mut values = BTreeMap::new();
                    for (r, stats) in &per_run {
                        let s = stats.iter().find(|s| s.layer == layer).ok_or_else(|| {
                            CliError::Data(format!("run {} has no {role} stats at layer {layer}", r.name))
                        })?;
                        values.insert(r.name.clone(), instance_values(r, s, basis));
                    }
                    let ag =
                        variation_agreement(&values).map_err(analysis_err(format!("agreement for {model}/{task}")))?;
                    let prefix = [
                        cell(&model),
                        task.to_string(),
                        sanity.to_string(),
                        intervention.to_string(),
                        kind.to_string(),
                        role.to_string(),
                        layer.to_string(),
                        basis_name.to_string(),
                    ];
                    for p in &ag.pairwise {
                        let mut row = prefix.to_vec();
                        row.extend([cell(&p.a), cell(&p.b), ag.num_instances.to_string(), f6(p.rate)]);
                        t.push(row);
                    }
                    let mut row = prefix.to_vec();
                    row.extend(["*".into(), "*".into(), ag.num_instances.to_string(), f6(ag.all_agree)]);
                    t.push(row);
                }
            }
        }
    }
    Ok(t)
}

fn alignment_tables(runs: &[RunData], kinds: &[ProbeKind]) -> Result<(Table, Table)> {
    let mut t = Table::new(&[
        "run",
        "probe",
        "role",
        "layer",
        "both_correct",
        "probe_wrong_only",
        "probe_correct_only",
        "both_wrong",
        "behavior_alignment",
    ]);
    let mut rl = Table::new(&["run", "probe", "role", "category", "run_length", "fraction"]);
    for r in runs {
        let m = &r.run.manifest;
        let (labels, behavior) = (m.labels(), m.behavior_correct());
        let implied: Vec<Option<bool>> =
            m.instances.iter().map(|i| i.behavior.predicted_label.map(|l| l.is_positive())).collect();
        for &kind in kinds {
            for role in Role::ALL {
                let stats = r.role_stats(kind, role);
                if stats.is_empty() {
                    continue;
                }
                let preds: Vec<Vec<Option<bool>>> = stats.iter().map(|s| s.predictions.clone()).collect();
                let br = alignment(&preds, &behavior, &labels).map_err(analysis_err(&r.name))?;
                let ba = behavior_alignment(&preds, &implied).map_err(analysis_err(&r.name))?;
                for (j, s) in stats.iter().enumerate() {
                    let mut row = vec![cell(&r.name), kind.to_string(), role.to_string(), s.layer.to_string()];
                    row.extend(AlignmentCategory::ALL.iter().map(|&c| f6(br.proportion(j, c))));
                    row.push(f6(ba[j]));
                    t.push(row);
                }
                for c in AlignmentCategory::ALL {
                    for len in 0..=stats.len() {
                        rl.push(vec![
                            cell(&r.name),
                            kind.to_string(),
                            role.to_string(),
                            c.as_str().to_string(),
                            len.to_string(),
                            f6(br.run_length_fraction(c, len)),
                        ]);
                    }
                }
            }
        }
    }
    Ok((t, rl))
}

fn heatmaps(runs: &[RunData], kinds: &[ProbeKind], svg_on: bool, w: &mut Writer) -> Result<()> {
    let mut t = Table::new(&["run", "probe", "role", "layer_i", "layer_j", "agreement"]);
    let mut plots = Vec::new();
    for r in runs {
        for &kind in kinds {
            for role in Role::ALL {
                let stats = r.role_stats(kind, role);
                if stats.is_empty() {
                    continue;
                }
                let layers: Vec<usize> = stats.iter().map(|s| s.layer).collect();
                let preds: Vec<Vec<Option<bool>>> = stats.iter().map(|s| s.predictions.clone()).collect();
                let mat = cross_layer_agreement(&layers, &preds).map_err(analysis_err(&r.name))?;
                for i in 0..mat.size() {
                    for j in 0..mat.size() {
                        t.push(vec![
                            cell(&r.name),
                            kind.to_string(),
                            role.to_string(),
                            layers[i].to_string(),
                            layers[j].to_string(),
                            f6(mat.get(i, j)),
                        ]);
                    }
                }
                if svg_on {
                    let title = format!("{} {kind} {role}: cross-layer agreement", r.name);
                    plots.push((
                        format!("heatmap_{}_{kind}_{role}.svg", r.name),
                        svg::heatmap(&title, &layers, &mat.values, &w.hash),
                    ));
                }
            }
        }
    }
    w.table("cross_layer_agreement.tsv", &t)?;
    for (name, body) in plots {
        w.text(&name, &body)?;
    }
    Ok(())
}

/// Explicit pairs plus automatic ones: within (model, task, variation,
/// sanity), the single `none` run is the baseline of every other run.
fn intervention_pairs<'a>(runs: &'a [RunData], explicit: &[RunPair]) -> Result<Vec<(&'a RunData, &'a RunData)>> {
    let by_name: BTreeMap<&str, &RunData> = runs.iter().map(|r| (r.name.as_str(), r)).collect();
    let mut pairs = Vec::new();
    for p in explicit {
        let get = |n: &str| {
            by_name
                .get(n)
                .copied()
                .ok_or_else(|| CliError::Config(format!("intervention pair names unknown run {n:?}")))
        };
        pairs.push((get(&p.baseline)?, get(&p.intervened)?));
    }
    let mut keyed: BTreeMap<(String, TaskKind, Variation, SanityVariant), Vec<&RunData>> = BTreeMap::new();
    for r in runs {
        let m = &r.run.manifest;
        keyed.entry((m.model_id.clone(), m.task, m.variation, m.sanity)).or_default().push(r);
    }
    for members in keyed.values() {
        let bases: Vec<&&RunData> =
            members.iter().filter(|r| r.run.manifest.intervention == Intervention::None).collect();
        if bases.len() != 1 {
            if bases.len() > 1 && members.len() > bases.len() {
                log::warn!("{} baseline runs share a configuration; pair them explicitly", bases.len());
            }
            continue;
        }
        for r in members.iter().filter(|r| r.run.manifest.intervention != Intervention::None) {
            let pair = (*bases[0], *r);
            if !pairs.iter().any(|(a, b)| a.name == pair.0.name && b.name == pair.1.name) {
                pairs.push(pair);
            }
        }
    }
    Ok(pairs)
}

fn intervention_table(runs: &[RunData], kinds: &[ProbeKind], explicit: &[RunPair]) -> Result<Table> {
    let mut t = Table::new(&[
        "baseline",
        "intervened",
        "intervention",
        "probe",
        "behavior_delta_pp",
        "role",
        "third",
        "first_layer",
        "last_layer",
        "accuracy_delta_pp",
    ]);
    for (base, int) in intervention_pairs(runs, explicit)? {
        for &kind in kinds {
            let d = intervention_delta(&base.run, &base.stats[&kind], &int.run, &int.stats[&kind])
                .map_err(analysis_err(format!("intervention {} vs {}", base.name, int.name)))?;
            for (role, deltas) in &d.role_deltas {
                for (k, third) in Third::ALL.iter().enumerate() {
                    let range = &d.thirds[k];
                    let (first, last) = if range.is_empty() {
                        (String::new(), String::new())
                    } else {
                        (range.start.to_string(), (range.end - 1).to_string())
                    };
                    t.push(vec![
                        cell(&base.name),
                        cell(&int.name),
                        int.run.manifest.intervention.to_string(),
                        kind.to_string(),
                        pp(d.behavior_pp),
                        role.to_string(),
                        third.as_str().to_string(),
                        first,
                        last,
                        opt(deltas[k].map(|x| 100.0 * x), pp),
                    ]);
                }
            }
        }
    }
    Ok(t)
}

fn rescale_table(runs: &[RunData], kinds: &[ProbeKind], points: usize) -> Result<Table> {
    let mut t = Table::new(&["run", "probe", "role", "num_layers", "position", "accuracy"]);
    for r in runs {
        let l = r.run.manifest.num_layers;
        for &kind in kinds {
            for role in Role::ALL {
                let stats = r.role_stats(kind, role);
                if stats.is_empty() {
                    continue;
                }
                if !stats.iter().map(|s| s.layer).eq(0..l) {
                    log::warn!("{}: {role} stats do not cover every layer; skipped in rescaled curves", r.name);
                    continue;
                }
                let values: Vec<f64> = stats.iter().map(|s| s.mean).collect();
                let grid = relative_rescale(&values, points).map_err(analysis_err(&r.name))?;
                for (j, v) in grid.iter().enumerate() {
                    let pos = j as f64 / (points - 1) as f64;
                    t.push(vec![cell(&r.name), kind.to_string(), role.to_string(), l.to_string(), f6(pos), f6(*v)]);
                }
            }
        }
    }
    Ok(t)
}
