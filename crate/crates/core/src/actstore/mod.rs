// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `.actrun` activation-run format.
//!
//! A run holds mean-pooled hidden states for every layer (layer 0 is the
//! embedding output), every stored token role, and every instance, plus the
//! behavior record of each instance. The byte layout is documented in
//! `FORMAT.md` at the repository root.

mod io;
mod pair;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, SanityVariant, TaskKind, Variation};

pub use io::{read_from, read_run, to_bytes, write_run, write_to, CHECKSUM_LEN, HEADER_LEN, MAGIC, MAX_MANIFEST_BYTES};
pub use pair::{validate_pair, Compatibility, PairReport};

/// Current `.actrun` format version.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ActStoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an .actrun file (bad magic bytes {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("truncated {section}: expected {expected} bytes, found {actual}")]
    Truncated { section: &'static str, expected: u64, actual: u64 },
    #[error("{0} unexpected trailing bytes after checksum")]
    TrailingBytes(u64),
    #[error("manifest of {0} bytes exceeds the {MAX_MANIFEST_BYTES}-byte limit")]
    ManifestTooLarge(u64),
    #[error("declared tensor size overflows")]
    SizeOverflow,
    #[error("checksum mismatch: stored {stored}, computed {computed}")]
    ChecksumMismatch { stored: String, computed: String },
    #[error("manifest is not valid JSON: {0}")]
    ManifestParse(#[from] serde_json::Error),
    #[error("invalid run: {0}")]
    Invalid(String),
    #[error("non-finite value {value} at role {role}, layer {layer}, instance {instance}, dim {dim}")]
    NonFinite { role: Role, layer: usize, instance: usize, dim: usize, value: f32 },
}

/// Token positions whose pooled states are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Sample,
    Output,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::Sample, Role::Output];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Sample => "sample",
            Role::Output => "output",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sample" => Ok(Role::Sample),
            "output" => Ok(Role::Output),
            _ => Err(format!("unknown role {s:?}")),
        }
    }
}

/// Attention-blocking intervention applied while extracting the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intervention {
    None,
    Full,
    PromptOnly,
}

impl fmt::Display for Intervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Intervention::None => "none",
            Intervention::Full => "full",
            Intervention::PromptOnly => "prompt_only",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorRecord {
    pub generated_text: String,
    pub expected_answer: String,
    pub em_correct: bool,
    /// Label implied by the generation, if it matched either answer word.
    pub predicted_label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceEntry {
    pub id: String,
    pub source_pair_id: String,
    pub label: Label,
    pub behavior: BehaviorRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub model_id: String,
    pub task: TaskKind,
    pub variation: Variation,
    pub sanity: SanityVariant,
    pub intervention: Intervention,
    /// Layer count including layer 0 (embedding output).
    pub num_layers: usize,
    pub hidden_dim: usize,
    /// Stored roles, in tensor block order.
    pub roles: Vec<Role>,
    /// Instances in storage order.
    pub instances: Vec<InstanceEntry>,
    #[serde(default)]
    pub degraded: bool,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn num_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn instance_ids(&self) -> impl Iterator<Item = &str> {
        self.instances.iter().map(|i| i.id.as_str())
    }

    pub fn labels(&self) -> Vec<bool> {
        self.instances.iter().map(|i| i.label.is_positive()).collect()
    }

    pub fn behavior_correct(&self) -> Vec<bool> {
        self.instances.iter().map(|i| i.behavior.em_correct).collect()
    }

    /// Exact-match accuracy in [0, 1]; `None` for an empty run.
    pub fn em_accuracy(&self) -> Option<f64> {
        if self.instances.is_empty() {
            return None;
        }
        let correct = self.instances.iter().filter(|i| i.behavior.em_correct).count();
        Some(correct as f64 / self.instances.len() as f64)
    }

    pub fn validate(&self) -> Result<(), ActStoreError> {
        let invalid = |m: String| Err(ActStoreError::Invalid(m));
        if self.format_version != FORMAT_VERSION {
            return Err(ActStoreError::UnsupportedVersion { found: self.format_version, supported: FORMAT_VERSION });
        }
        if self.num_layers < 2 {
            return invalid(format!("num_layers must be at least 2, got {}", self.num_layers));
        }
        if self.hidden_dim < 1 {
            return invalid("hidden_dim must be at least 1".into());
        }
        let mut roles = HashSet::new();
        for r in &self.roles {
            if !roles.insert(r) {
                return invalid(format!("role {r} listed twice"));
            }
        }
        let mut ids = HashSet::new();
        for inst in &self.instances {
            if !ids.insert(inst.id.as_str()) {
                return invalid(format!("duplicate instance id {:?}", inst.id));
            }
        }
        Ok(())
    }
}

/// Pooled activations for one role, row-major `[layer, instance, dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleTensor {
    pub num_layers: usize,
    pub num_instances: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl RoleTensor {
    pub fn zeros(num_layers: usize, num_instances: usize, dim: usize) -> Self {
        Self { num_layers, num_instances, dim, data: vec![0.0; num_layers * num_instances * dim] }
    }

    pub fn byte_len(&self) -> usize {
        self.data.len() * 4
    }

    /// The `N × d` block of one layer.
    pub fn layer(&self, layer: usize) -> &[f32] {
        let stride = self.num_instances * self.dim;
        &self.data[layer * stride..(layer + 1) * stride]
    }

    pub fn row(&self, layer: usize, instance: usize) -> &[f32] {
        let start = (layer * self.num_instances + instance) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn row_mut(&mut self, layer: usize, instance: usize) -> &mut [f32] {
        let start = (layer * self.num_instances + instance) * self.dim;
        &mut self.data[start..start + self.dim]
    }

    /// Coordinates `(layer, instance, dim)` of the first non-finite value.
    pub fn first_non_finite(&self) -> Option<(usize, usize, usize, f32)> {
        self.data.iter().position(|v| !v.is_finite()).map(|flat| {
            let dim = flat % self.dim;
            let instance = (flat / self.dim) % self.num_instances;
            let layer = flat / (self.dim * self.num_instances);
            (layer, instance, dim, self.data[flat])
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRun {
    pub manifest: RunManifest,
    pub tensors: BTreeMap<Role, RoleTensor>,
}

impl ActivationRun {
    pub fn tensor(&self, role: Role) -> Option<&RoleTensor> {
        self.tensors.get(&role)
    }

    /// Checks manifest invariants, tensor shapes, and finiteness.
    pub fn validate(&self) -> Result<(), ActStoreError> {
        self.manifest.validate()?;
        let m = &self.manifest;
        if self.tensors.len() != m.roles.len() || m.roles.iter().any(|r| !self.tensors.contains_key(r)) {
            return Err(ActStoreError::Invalid(format!(
                "manifest roles {:?} do not match stored tensors {:?}",
                m.roles,
                self.tensors.keys().collect::<Vec<_>>()
            )));
        }
        for role in &m.roles {
            let t = &self.tensors[role];
            let expected = m.num_layers * m.num_instances() * m.hidden_dim;
            if t.num_layers != m.num_layers
                || t.num_instances != m.num_instances()
                || t.dim != m.hidden_dim
                || t.data.len() != expected
            {
                return Err(ActStoreError::Invalid(format!(
                    "{role} tensor shape [{}, {}, {}] with {} values does not match manifest [{}, {}, {}]",
                    t.num_layers,
                    t.num_instances,
                    t.dim,
                    t.data.len(),
                    m.num_layers,
                    m.num_instances(),
                    m.hidden_dim
                )));
            }
            if let Some((layer, instance, dim, value)) = t.first_non_finite() {
                return Err(ActStoreError::NonFinite { role: *role, layer, instance, dim, value });
            }
        }
        Ok(())
    }

    /// Copy with instances rearranged so that new position `i` holds old instance `perm[i]`.
    pub fn reordered(&self, perm: &[usize]) -> ActivationRun {
        let mut manifest = self.manifest.clone();
        manifest.instances = perm.iter().map(|&i| self.manifest.instances[i].clone()).collect();
        let tensors = self
            .tensors
            .iter()
            .map(|(role, t)| {
                let mut out = RoleTensor::zeros(t.num_layers, perm.len(), t.dim);
                for layer in 0..t.num_layers {
                    for (new, &old) in perm.iter().enumerate() {
                        out.row_mut(layer, new).copy_from_slice(t.row(layer, old));
                    }
                }
                (*role, out)
            })
            .collect();
        ActivationRun { manifest, tensors }
    }
}


#[cfg(test)]
mod tests {
    use super::testing::small_run;
    use super::*;

    #[test]
    fn valid_run_passes() {
        small_run(3, 4, 2).validate().unwrap();
    }

    #[test]
    fn nan_reports_coordinates() {
        let mut run = small_run(3, 4, 2);
        run.tensors.get_mut(&Role::Output).unwrap().row_mut(2, 1)[1] = f32::NAN;
        match run.validate() {
            Err(ActStoreError::NonFinite { role, layer, instance, dim, .. }) => {
                assert_eq!((role, layer, instance, dim), (Role::Output, 2, 1, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_invariants() {
        let mut run = small_run(3, 4, 2);
        run.manifest.num_layers = 1;
        assert!(matches!(run.validate(), Err(ActStoreError::Invalid(_))));
        let mut run = small_run(3, 4, 2);
        run.manifest.instances[1].id = "inst-0".into();
        assert!(matches!(run.validate(), Err(ActStoreError::Invalid(_))));
        let mut run = small_run(3, 4, 2);
        run.manifest.roles = vec![Role::Sample];
        assert!(matches!(run.validate(), Err(ActStoreError::Invalid(_))));
        let mut run = small_run(3, 4, 2);
        run.manifest.hidden_dim = 3;
        assert!(matches!(run.validate(), Err(ActStoreError::Invalid(_))));
    }

    #[test]
    fn reorder_moves_rows_and_records() {
        let run = small_run(2, 3, 2);
        let r = run.reordered(&[2, 0, 1]);
        assert_eq!(r.manifest.instances[0].id, "inst-2");
        assert_eq!(r.tensor(Role::Sample).unwrap().row(1, 0), run.tensor(Role::Sample).unwrap().row(1, 2));
        r.validate().unwrap();
    }
}
