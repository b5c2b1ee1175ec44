// SPDX-License-Identifier: MIT OR Apache-2.0

pub mod corpus;
pub mod probe;
pub mod report;
pub mod synth;
pub mod validate;
