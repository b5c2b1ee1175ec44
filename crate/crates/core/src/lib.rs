// SPDX-License-Identifier: MIT OR Apache-2.0

//! Probing and intervention analysis of how instruction tokens shape
//! task-specific information at sample-token and output-token positions.
//!
//! The crate is organized bottom-up:
//!
//! - [`corpus`]: binary judgment datasets, prompt rendering, sanity transforms
//! - [`actstore`]: the `.actrun` activation-run file format
//! - [`probes`]: linear and MLP probes, cross-validation, control tasks, MDL
//! - [`analysis`]: layer curves, rank correlation, agreement, alignment, interventions
//! - [`synth`]: planted-signal runs with a closed-form Bayes rate

pub mod actstore;
pub mod analysis;
pub mod corpus;
pub mod probes;
pub mod seed;
pub mod synth;

pub use actstore::{ActivationRun, Intervention, Role, RunManifest};
pub use corpus::{Label, SanityVariant, TaskKind, Variation};
