// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pipeline configuration: one TOML file, five sections.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Command-line flags may override seeds and the output directory;
//! nothing else.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use instprobe::corpus::DEFAULT_INSTANCE_LIMIT;
use instprobe::probes::{CvOptions, MdlOptions, ProbeConfig, ProbeJob, ProbeKind, DEFAULT_FOLDS, DEFAULT_SEEDS};
use instprobe::seed::sha256_hex;
use instprobe::synth::PlantProfile;
use instprobe::{Role, SanityVariant, TaskKind, Variation};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Output root when neither the flag nor `io.output_dir` is given.
pub const OUTPUT_ENV: &str = "INSTPROBE_OUT";
pub const FALLBACK_OUTPUT_DIR: &str = "instprobe-out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: CorpusSection,
    pub synth: SynthSection,
    pub probe: ProbeSection,
    pub analysis: AnalysisSection,
    pub io: IoSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Directory holding one `<task>.jsonl` raw file per task.
    pub raw_dir: Option<PathBuf>,
    pub tasks: Vec<TaskKind>,
    pub variations: Vec<Variation>,
    pub sanity: Vec<SanityVariant>,
    /// Evaluation instances per task.
    pub limit: usize,
    pub seed: u64,
    /// Source pairs per task held out as few-shot demonstrations.
    pub fewshot_pairs: usize,
    /// Instruction overrides; may use `{pos}`/`{neg}`.
    pub instructions: BTreeMap<TaskKind, String>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            raw_dir: None,
            tasks: TaskKind::ALL.to_vec(),
            variations: Variation::ALL.to_vec(),
            sanity: vec![SanityVariant::None],
            limit: DEFAULT_INSTANCE_LIMIT,
            seed: 0,
            fewshot_pairs: 8,
            instructions: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// Base seed; each run's seed is derived from it and the run name.
    pub seed: u64,
    pub runs: Vec<SynthRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRun {
    pub name: String,
    pub profile: PlantProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub kinds: Vec<ProbeKind>,
    pub folds: usize,
    pub seeds: Vec<u64>,
    /// Empty means every layer.
    pub layers: Vec<usize>,
    /// Empty means every stored role; a listed role missing from a run is an error.
    pub roles: Vec<Role>,
    /// Seed of the control task; absent disables selectivity.
    pub control_seed: Option<u64>,
    pub mdl: bool,
    pub mdl_seed: u64,
    pub mdl_schedule: Option<Vec<f64>>,
    pub l2_strength: Option<f64>,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub standardize: bool,
    /// Worker threads; 0 uses one per core.
    pub threads: usize,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let p = ProbeConfig::default();
        Self {
            kinds: vec![ProbeKind::Linear],
            folds: DEFAULT_FOLDS,
            seeds: DEFAULT_SEEDS.to_vec(),
            layers: Vec::new(),
            roles: Vec::new(),
            control_seed: None,
            mdl: false,
            mdl_seed: 0,
            mdl_schedule: None,
            l2_strength: p.l2_strength,
            max_iterations: p.max_iterations,
            convergence_tol: p.convergence_tol,
            standardize: p.standardize,
            threads: 0,
        }
    }
}

impl ProbeSection {
    pub fn job(&self, kind: ProbeKind) -> ProbeJob {
        ProbeJob {
            probe: ProbeConfig {
                kind,
                l2_strength: self.l2_strength,
                max_iterations: self.max_iterations,
                convergence_tol: self.convergence_tol,
                standardize: self.standardize,
                ..ProbeConfig::of_kind(kind)
            },
            cv: CvOptions { folds: self.folds, seeds: self.seeds.clone() },
            control_seed: self.control_seed,
            mdl: self.mdl.then(|| MdlOptions { schedule: self.mdl_schedule.clone(), seed: self.mdl_seed }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    ProbeStats,
    Behavior,
    Curves,
    Tau,
    Agreement,
    Alignment,
    Heatmap,
    Intervention,
    Rescale,
}

impl Statistic {
    pub const ALL: [Statistic; 9] = [
        Statistic::ProbeStats,
        Statistic::Behavior,
        Statistic::Curves,
        Statistic::Tau,
        Statistic::Agreement,
        Statistic::Alignment,
        Statistic::Heatmap,
        Statistic::Intervention,
        Statistic::Rescale,
    ];
}

/// What variation agreement compares per instance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementBasis {
    #[default]
    Prediction,
    Correctness,
}

/// How layers are split into lower/middle/upper thirds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThirdsPolicy {
    /// `⌊L/3⌋` layers in each of the lower two thirds, the remainder on top.
    #[default]
    Floor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPair {
    pub baseline: String,
    pub intervened: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub statistics: Vec<Statistic>,
    pub agreement_basis: AgreementBasis,
    pub thirds: ThirdsPolicy,
    /// Grid size for relative-depth curves.
    pub rescale_points: usize,
    pub svg: bool,
    /// Explicit baseline/intervened pairs by run name. Runs are also paired
    /// automatically when they differ only in intervention.
    pub intervention_pairs: Vec<RunPair>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            statistics: Statistic::ALL.to_vec(),
            agreement_basis: AgreementBasis::Prediction,
            thirds: ThirdsPolicy::Floor,
            rescale_points: 11,
            svg: true,
            intervention_pairs: Vec::new(),
        }
    }
}

impl AnalysisSection {
    pub fn wants(&self, s: Statistic) -> bool {
        self.statistics.contains(&s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    /// `.actrun` inputs; empty means the runs written by `synth`.
    pub runs: Vec<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

/// Seed and output overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub probe_seeds: Option<Vec<u64>>,
    pub output_dir: Option<PathBuf>,
}

/// A loaded configuration with overrides applied and paths resolved.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// SHA-256 (first 16 hex digits) of the effective configuration, minus
    /// the output directory and thread count, followed by the digest of every
    /// input file.
    pub fn hash(&self, inputs: &[(String, String)]) -> String {
        let mut c = self.config.clone();
        c.io.output_dir = None;
        c.probe.threads = 0;
        let mut text = serde_json::to_string(&c).expect("config serializes");
        for (name, digest) in inputs {
            text.push_str(&format!("\n{name}\t{digest}"));
        }
        sha256_hex(text.as_bytes())[..16].to_string()
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let c = &self.corpus;
        if c.tasks.is_empty() || c.variations.is_empty() || c.sanity.is_empty() {
            return bad("corpus.tasks, corpus.variations and corpus.sanity must be non-empty".into());
        }
        if c.limit < 2 {
            return bad(format!("corpus.limit must be at least 2, got {}", c.limit));
        }
        if c.variations.contains(&Variation::NoInstructionFewshot) && c.fewshot_pairs < 2 {
            return bad("few-shot prompts need corpus.fewshot_pairs >= 2".into());
        }
        let p = &self.probe;
        if p.kinds.is_empty() {
            return bad("probe.kinds must be non-empty".into());
        }
        if p.seeds.is_empty() {
            return bad("probe.seeds must be non-empty".into());
        }
        if p.folds < 2 {
            return bad(format!("probe.folds must be at least 2, got {}", p.folds));
        }
        for kind in &p.kinds {
            p.job(*kind).probe.validate().map_err(|e| CliError::Config(format!("probe: {e}")))?;
        }
        if let Some(s) = &p.mdl_schedule {
            instprobe::probes::MdlSchedule::new(s.clone())
                .map_err(|e| CliError::Config(format!("probe.mdl_schedule: {e}")))?;
        }
        let mut names = std::collections::BTreeSet::new();
        for run in &self.synth.runs {
            if run.name.is_empty() || run.name.contains(['/', '\\']) || run.name.starts_with('.') {
                return bad(format!("synth run name {:?} is not a plain file name", run.name));
            }
            if !names.insert(&run.name) {
                return bad(format!("duplicate synth run name {:?}", run.name));
            }
            run.profile.validate().map_err(|e| CliError::Config(format!("synth run {}: {e}", run.name)))?;
        }
        if self.analysis.rescale_points == 1 {
            return bad("analysis.rescale_points must be 0 or at least 2".into());
        }
        Ok(())
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Loaded> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        if let Some(seed) = overrides.seed {
            config.corpus.seed = seed;
            config.synth.seed = seed;
        }
        if let Some(seeds) = &overrides.probe_seeds {
            if seeds.is_empty() {
                return Err(CliError::Config("--probe-seeds must list at least one seed".into()));
            }
            config.probe.seeds = seeds.clone();
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base_dir = if base_dir.as_os_str().is_empty() { PathBuf::from(".") } else { base_dir };
        let mut loaded = Loaded { config, base_dir, output_dir: PathBuf::new() };
        loaded.output_dir = match (&overrides.output_dir, &loaded.config.io.output_dir) {
            (Some(flag), _) => flag.clone(),
            (None, Some(cfg)) => loaded.resolve(cfg),
            (None, None) => {
                std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| FALLBACK_OUTPUT_DIR.into())
            }
        };
        Ok(loaded)
    }
}
