// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary judgment datasets and prompt rendering.
//!
//! Raw per-task records are turned into balanced [`TaskInstance`] pairs
//! ([`build_instances`]), rendered into annotated prompts under one of three
//! prompting variations ([`render_prompt`]), and optionally rewritten by a
//! sanity-check transform ([`apply_sanity_variant`]).

mod build;
mod render;
mod sanity;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use build::{build_instances, parse_raw_line, BuildOutcome, RawRecord, Rejection};
pub use render::{render_prompt, FewshotPool, RenderedPrompt, Span, SpanRole, DEMO_FORMAT, SEPARATOR};
pub use sanity::{apply_sanity_batch, apply_sanity_variant, count_letter_a, RANDOM_LABEL_WORDS};

/// Version tag written into every corpus record.
pub const CORPUS_FORMAT_VERSION: u32 = 1;

/// Default number of instances built per task.
pub const DEFAULT_INSTANCE_LIMIT: usize = 5000;

/// Number of demonstrations in a few-shot prompt.
pub const FEWSHOT_DEMOS: usize = 4;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("unknown {kind} name {name:?}")]
    UnknownName { kind: &'static str, name: String },
    #[error("variation {0} requires an instruction text")]
    MissingInstruction(Variation),
    #[error("few-shot pool for task {task} has {available} usable demos of each label, need {needed}")]
    InsufficientPool { task: TaskKind, available: usize, needed: usize },
    #[error("demonstration {demo_id} shares source pair {pair_id} with an evaluation instance")]
    PoolOverlap { demo_id: String, pair_id: String },
    #[error("sanity variant {0} rewrites the instruction but the prompt has none")]
    NoInstructionToRewrite(SanityVariant),
    #[error("sanity variant `none` is not a transform")]
    NoneVariant,
    #[error("instance {0} has empty text")]
    EmptyText(String),
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = CorpusError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(CorpusError::UnknownName { kind: $kind, name: s.to_string() }),
                }
            }
        }
    };
}

named_enum!(
    /// The five binary judgment tasks.
    TaskKind, "task", {
        Blimp => "blimp",
        Stereoset => "stereoset",
        Olmpics => "olmpics",
        Ewok => "ewok",
        Tom => "tom",
    }
);

named_enum!(
    /// Placement or absence of the task instruction.
    Variation, "variation", {
        InstructionFirst => "instruction_first",
        SampleFirst => "sample_first",
        NoInstructionFewshot => "no_instruction_fewshot",
    }
);

named_enum!(
    SanityVariant, "sanity variant", {
        None => "none",
        UnrelatedInstruction => "unrelated_instruction",
        LabelFlip => "label_flip",
        RandomLabelFlip => "random_label_flip",
        AbstractLabels => "abstract_labels",
        RandomWordLabels => "random_word_labels",
    }
);

named_enum!(
    Label, "label", {
        Acceptable => "acceptable",
        Unacceptable => "unacceptable",
    }
);

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Acceptable
    }

    pub fn from_positive(positive: bool) -> Self {
        if positive {
            Label::Acceptable
        } else {
            Label::Unacceptable
        }
    }

    pub fn flipped(self) -> Self {
        Label::from_positive(!self.is_positive())
    }
}

/// One binary-labeled text sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub task: TaskKind,
    pub text: String,
    pub label: Label,
    /// Shared by the acceptable and unacceptable sibling built from one raw record.
    pub source_pair_id: String,
}

/// Verbalized answers for the positive and negative judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerVocabulary {
    pub positive: String,
    pub negative: String,
}

impl AnswerVocabulary {
    pub fn new(positive: impl Into<String>, negative: impl Into<String>) -> Self {
        Self { positive: positive.into(), negative: negative.into() }
    }

    pub fn yes_no() -> Self {
        Self::new("yes", "no")
    }

    pub fn for_label(&self, label: Label) -> &str {
        if label.is_positive() {
            &self.positive
        } else {
            &self.negative
        }
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.negative.clone(), self.positive.clone())
    }
}

impl Default for AnswerVocabulary {
    fn default() -> Self {
        Self::yes_no()
    }
}

/// Task instruction templates. `{pos}` and `{neg}` are replaced with the
/// prompt's answer vocabulary when rendering.
pub fn instruction_template(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Blimp => concat!(
            "Is the given text linguistically acceptable? This means that it contains no grammatical ",
            "errors in morphology, syntax, or semantics. Answer only with \"{pos}\" or \"{neg}\": ",
            "choose \"{pos}\" if the text meets these criteria or \"{neg}\" if it violates them."
        ),
        TaskKind::Stereoset => concat!(
            "Does the given text contain stereotypical references? Answer only with \"{pos}\" or ",
            "\"{neg}\": choose \"{pos}\" if the text includes stereotypes or \"{neg}\" if the text ",
            "does not include stereotypes."
        ),
        TaskKind::Olmpics => concat!(
            "Does the given text make sense? This means its reasoning is consistent and does not ",
            "violate known facts or widely accepted assumptions. Answer only with \"{pos}\" or ",
            "\"{neg}\": choose \"{pos}\" if the text meets these criteria or \"{neg}\" if it violates them."
        ),
        TaskKind::Ewok => concat!(
            "Does the given text make sense? This means that the scenario described in the text is ",
            "plausible given common-world knowledge and widely accepted assumptions. Answer only with ",
            "\"{pos}\" or \"{neg}\": choose \"{pos}\" if the text is plausible or \"{neg}\" if it is implausible."
        ),
        TaskKind::Tom => concat!(
            "Are the assumptions in the last sentence of the given text logically correct, based on ",
            "the preceding sentences? This means they align with events described earlier in the text. ",
            "Answer only with \"{pos}\" or \"{neg}\": choose \"{pos}\" if the assumptions are correct, ",
            "or \"{neg}\" if they are incorrect."
        ),
    }
}

/// Substitutes the answer vocabulary into an instruction template.
pub fn fill_instruction(template: &str, vocab: &AnswerVocabulary) -> String {
    template.replace("{pos}", &vocab.positive).replace("{neg}", &vocab.negative)
}
