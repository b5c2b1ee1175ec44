// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::path::PathBuf;

use instprobe::corpus::{
    apply_sanity_batch, build_instances, instruction_template, render_prompt, CorpusError, FewshotPool, RenderedPrompt,
    CORPUS_FORMAT_VERSION, DEMO_FORMAT, FEWSHOT_DEMOS, SEPARATOR,
};
use instprobe::seed::sha256_hex;
use instprobe::{SanityVariant, TaskKind, Variation};
use serde::Serialize;

use crate::config::Loaded;
use crate::error::{CliError, Result};
use crate::output::{file_digest, write_atomic};

pub const MANIFEST_FILE: &str = "corpus_manifest.json";

#[derive(Serialize)]
struct CorpusLine<'a> {
    config_hash: &'a str,
    #[serde(flatten)]
    prompt: &'a RenderedPrompt,
}

#[derive(Debug, Serialize)]
struct RejectionEntry {
    index: usize,
    reason: String,
}

#[derive(Debug, Serialize)]
struct TaskEntry {
    task: TaskKind,
    raw_file: String,
    raw_sha256: String,
    instances: usize,
    demo_pool: usize,
    instruction: String,
    rejections: Vec<RejectionEntry>,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct FileEntry {
    file: String,
    task: TaskKind,
    variation: Variation,
    sanity: SanityVariant,
    lines: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct SkippedEntry {
    task: TaskKind,
    variation: Variation,
    sanity: SanityVariant,
    reason: String,
}

#[derive(Debug, Serialize)]
struct CorpusManifest {
    config_hash: String,
    corpus_format_version: u32,
    separator: &'static str,
    demo_format: &'static str,
    fewshot_demos: usize,
    seed: u64,
    limit: usize,
    fewshot_pairs: usize,
    tasks: Vec<TaskEntry>,
    files: Vec<FileEntry>,
    skipped: Vec<SkippedEntry>,
}

pub fn corpus_file_name(task: TaskKind, variation: Variation, sanity: SanityVariant) -> String {
    match sanity {
        SanityVariant::None => format!("{task}.{variation}.corpus.jsonl"),
        s => format!("{task}.{variation}.{s}.corpus.jsonl"),
    }
}

#[derive(Debug)]
pub struct CorpusSummary {
    pub files: Vec<PathBuf>,
    pub config_hash: String,
}

pub fn build_corpus(loaded: &Loaded) -> Result<CorpusSummary> {
    let c = &loaded.config.corpus;
    let raw_dir = c.raw_dir.as_ref().ok_or_else(|| CliError::Config("corpus.raw_dir is required".into()))?;
    let raw_dir = loaded.resolve(raw_dir);
    let mut raw_paths = BTreeMap::new();
    for &task in &c.tasks {
        let p = raw_dir.join(format!("{task}.jsonl"));
        if !p.is_file() {
            return Err(CliError::Config(format!("raw file for {task} not found: {}", p.display())));
        }
        raw_paths.insert(task, p);
    }
    let mut inputs = Vec::new();
    for (task, p) in &raw_paths {
        inputs.push((format!("raw/{task}.jsonl"), file_digest(p)?));
    }
    let hash = loaded.hash(&inputs);
    let out_dir = loaded.output_dir.join("corpus");

    let mut manifest = CorpusManifest {
        config_hash: hash.clone(),
        corpus_format_version: CORPUS_FORMAT_VERSION,
        separator: SEPARATOR,
        demo_format: DEMO_FORMAT,
        fewshot_demos: FEWSHOT_DEMOS,
        seed: c.seed,
        limit: c.limit,
        fewshot_pairs: c.fewshot_pairs,
        tasks: Vec::new(),
        files: Vec::new(),
        skipped: Vec::new(),
    };
    let mut written = Vec::new();

    for (i, (&task, path)) in raw_paths.iter().enumerate() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let outcome = build_instances(text.lines(), task, c.limit + 2 * c.fewshot_pairs);
        let (pool, eval) = FewshotPool::carve(outcome.instances, c.fewshot_pairs, c.seed);
        for w in &outcome.warnings {
            log::warn!("{w}");
        }
        if !outcome.rejections.is_empty() {
            log::warn!("{task}: {} raw records rejected", outcome.rejections.len());
        }
        let instruction = c.instructions.get(&task).map(String::as_str).unwrap_or(instruction_template(task));
        manifest.tasks.push(TaskEntry {
            task,
            raw_file: inputs[i].0.clone(),
            raw_sha256: inputs[i].1.clone(),
            instances: eval.len(),
            demo_pool: pool.len(),
            instruction: instruction.to_string(),
            rejections: outcome
                .rejections
                .into_iter()
                .map(|r| RejectionEntry { index: r.index, reason: r.reason })
                .collect(),
            warnings: outcome.warnings,
        });

        for &variation in &c.variations {
            let base: Vec<RenderedPrompt> = eval
                .iter()
                .map(|inst| render_prompt(inst, variation, Some(instruction), &pool, c.seed))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| match e {
                    CorpusError::InsufficientPool { .. } => {
                        CliError::Config(format!("{e}; raise corpus.fewshot_pairs or supply more raw records"))
                    }
                    other => CliError::data(format!("rendering {task}/{variation}"), other),
                })?;
            for &sanity in &c.sanity {
                let prompts = match sanity {
                    SanityVariant::None => base.clone(),
                    s => match apply_sanity_batch(&base, s, c.seed) {
                        Ok(p) => p,
                        Err(e @ CorpusError::NoInstructionToRewrite(_)) => {
                            manifest.skipped.push(SkippedEntry { task, variation, sanity, reason: e.to_string() });
                            continue;
                        }
                        Err(e) => return Err(CliError::data(format!("sanity {s} on {task}/{variation}"), e)),
                    },
                };
                let mut body = String::new();
                for p in &prompts {
                    p.check_invariants().map_err(|e| CliError::Invariant(format!("{}: {e}", p.instance_id)))?;
                    body.push_str(
                        &serde_json::to_string(&CorpusLine { config_hash: &hash, prompt: p })
                            .expect("prompt serializes"),
                    );
                    body.push('\n');
                }
                let name = corpus_file_name(task, variation, sanity);
                let path = out_dir.join(&name);
                write_atomic(&path, body.as_bytes())?;
                manifest.files.push(FileEntry {
                    file: name,
                    task,
                    variation,
                    sanity,
                    lines: prompts.len(),
                    sha256: sha256_hex(body.as_bytes()),
                });
                written.push(path);
            }
        }
    }

    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let mpath = out_dir.join(MANIFEST_FILE);
    write_atomic(&mpath, text.as_bytes())?;
    written.push(mpath);
    Ok(CorpusSummary { files: written, config_hash: hash })
}
