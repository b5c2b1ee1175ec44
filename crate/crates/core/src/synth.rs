// SPDX-License-Identifier: MIT OR Apache-2.0

//! Planted-signal activation runs.
//!
//! For every (layer, role) the two classes are unit-variance spherical
//! Gaussians whose means sit at `±δ/2` along a seeded random unit direction.
//! The optimal classifier then has accuracy `Φ(δ/2)` ([`bayes_accuracy`]),
//! which gives probes and analyses a closed-form target.
//!
//! Behavior is planted from the output role (the sample role when no output
//! role is generated) at the last layer: with probability `behavior_coupling`
//! an instance is answered correctly exactly when the Bayes rule classifies
//! its features correctly, otherwise by a fair coin.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::actstore::{
    ActivationRun, BehaviorRecord, InstanceEntry, Intervention, Role, RoleTensor, RunManifest, FORMAT_VERSION,
};
use crate::corpus::{AnswerVocabulary, Label, SanityVariant, TaskKind, Variation};
use crate::seed::substream;

pub const SYNTH_MODEL_ID: &str = "synthetic/planted";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SynthError {
    #[error("invalid plant profile: {0}")]
    Profile(String),
}

/// Generative parameters of a planted run.
///
/// A role is generated iff its separation list is present; each list holds
/// one `δ` per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantProfile {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_instances: usize,
    #[serde(default)]
    pub sample_separation: Option<Vec<f64>>,
    #[serde(default)]
    pub output_separation: Option<Vec<f64>>,
    #[serde(default)]
    pub behavior_coupling: f64,
    #[serde(default = "default_task")]
    pub task: TaskKind,
    #[serde(default = "default_variation")]
    pub variation: Variation,
    #[serde(default = "default_intervention")]
    pub intervention: Intervention,
}

fn default_task() -> TaskKind {
    TaskKind::Blimp
}
fn default_variation() -> Variation {
    Variation::InstructionFirst
}
fn default_intervention() -> Intervention {
    Intervention::None
}

impl PlantProfile {
    /// Both roles with a constant separation across layers.
    pub fn uniform(num_layers: usize, hidden_dim: usize, num_instances: usize, sample: f64, output: f64) -> Self {
        Self {
            num_layers,
            hidden_dim,
            num_instances,
            sample_separation: Some(vec![sample; num_layers]),
            output_separation: Some(vec![output; num_layers]),
            behavior_coupling: 0.0,
            task: default_task(),
            variation: default_variation(),
            intervention: default_intervention(),
        }
    }

    pub fn separation(&self, role: Role) -> Option<&[f64]> {
        match role {
            Role::Sample => self.sample_separation.as_deref(),
            Role::Output => self.output_separation.as_deref(),
        }
    }

    pub fn roles(&self) -> Vec<Role> {
        Role::ALL.into_iter().filter(|r| self.separation(*r).is_some()).collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Profile(m));
        if self.num_layers < 2 {
            return bad(format!("num_layers must be at least 2, got {}", self.num_layers));
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive".into());
        }
        if self.num_instances == 0 || !self.num_instances.is_multiple_of(2) {
            return bad(format!("num_instances must be even and positive, got {}", self.num_instances));
        }
        if !(0.0..=1.0).contains(&self.behavior_coupling) {
            return bad(format!("behavior_coupling must lie in [0, 1], got {}", self.behavior_coupling));
        }
        if self.roles().is_empty() {
            return bad("at least one role needs a separation list".into());
        }
        for role in self.roles() {
            let sep = self.separation(role).unwrap();
            if sep.len() != self.num_layers {
                return bad(format!("{role} separation has {} entries for {} layers", sep.len(), self.num_layers));
            }
            if let Some(d) = sep.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
                return bad(format!("{role} separation {d} must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Accuracy of the optimal classifier for two unit-variance spherical
/// Gaussians whose means are `delta` apart.
///
/// # Panics
/// If `delta` is negative or NaN.
pub fn bayes_accuracy(delta: f64) -> f64 {
    assert!(delta >= 0.0, "separation must be >= 0, got {delta}");
    0.5 * libm::erfc(-delta / (2.0 * std::f64::consts::SQRT_2))
}

/// Seeded unit vector; the direction of the class means.
pub fn planted_direction(seed: u64, role: Role, layer: usize, dim: usize) -> Vec<f64> {
    let mut rng = substream(seed, &["synth-direction", role.as_str(), &layer.to_string()]);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn instance_ids(i: usize) -> (String, String) {
    let pair = format!("synth-{:06}", i / 2);
    let id = format!("{pair}-{}", if i.is_multiple_of(2) { "acc" } else { "unacc" });
    (id, pair)
}

/// Draws a planted run. Deterministic per `(profile, seed)`.
pub fn generate_planted_run(profile: &PlantProfile, seed: u64) -> Result<ActivationRun, SynthError> {
    profile.validate()?;
    let (l, n, d) = (profile.num_layers, profile.num_instances, profile.hidden_dim);
    let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();

    let mut tensors = BTreeMap::new();
    for role in profile.roles() {
        let sep = profile.separation(role).unwrap();
        let mut t = RoleTensor::zeros(l, n, d);
        for (layer, &delta) in sep.iter().enumerate() {
            let u = planted_direction(seed, role, layer, d);
            let mut rng = substream(seed, &["synth-noise", role.as_str(), &layer.to_string()]);
            for (i, &positive) in labels.iter().enumerate() {
                let shift = if positive { delta / 2.0 } else { -delta / 2.0 };
                for (k, v) in t.row_mut(layer, i).iter_mut().enumerate() {
                    let noise: f64 = rng.sample(StandardNormal);
                    *v = (shift * u[k] + noise) as f32;
                }
            }
        }
        tensors.insert(role, t);
    }

    let anchor = if tensors.contains_key(&Role::Output) { Role::Output } else { Role::Sample };
    let u = planted_direction(seed, anchor, l - 1, d);
    let anchor_tensor = &tensors[&anchor];
    let vocab = AnswerVocabulary::yes_no();

    let instances = (0..n)
        .map(|i| {
            let (id, pair) = instance_ids(i);
            let label = Label::from_positive(labels[i]);
            let score: f64 = anchor_tensor.row(l - 1, i).iter().zip(&u).map(|(&x, &w)| x as f64 * w).sum();
            let bayes_correct = (score >= 0.0) == labels[i];
            let mut rng = substream(seed, &["synth-behavior", &id]);
            let correct =
                if rng.random::<f64>() < profile.behavior_coupling { bayes_correct } else { rng.random::<bool>() };
            let said = if correct { label } else { label.flipped() };
            InstanceEntry {
                id,
                source_pair_id: pair,
                label,
                behavior: BehaviorRecord {
                    generated_text: vocab.for_label(said).to_string(),
                    expected_answer: vocab.for_label(label).to_string(),
                    em_correct: correct,
                    predicted_label: Some(said),
                },
            }
        })
        .collect();

    let mut notes = BTreeMap::new();
    notes.insert("synth_seed".to_string(), seed.to_string());
    notes.insert("behavior_coupling".to_string(), profile.behavior_coupling.to_string());
    let manifest = RunManifest {
        format_version: FORMAT_VERSION,
        model_id: SYNTH_MODEL_ID.to_string(),
        task: profile.task,
        variation: profile.variation,
        sanity: SanityVariant::None,
        intervention: profile.intervention,
        num_layers: l,
        hidden_dim: d,
        roles: profile.roles(),
        instances,
        degraded: false,
        notes,
    };
    Ok(ActivationRun { manifest, tensors })
}
