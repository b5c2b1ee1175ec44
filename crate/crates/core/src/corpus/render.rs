// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    fill_instruction, AnswerVocabulary, CorpusError, Label, SanityVariant, TaskInstance, TaskKind, Variation,
    CORPUS_FORMAT_VERSION, FEWSHOT_DEMOS,
};
use crate::seed::{stable_hash, substream};

/// Separator placed between prompt blocks and between demonstrations.
pub const SEPARATOR: &str = "\n";

/// Layout of one demonstration inside the few-shot block.
pub const DEMO_FORMAT: &str = "{text}\n{answer}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanRole {
    Instruction,
    Fewshot,
    Sample,
}

/// Half-open range of Unicode scalar values (not bytes) within `full_text`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const EMPTY: Span = Span { start: 0, end: 0 };

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        !self.is_empty() && !other.is_empty() && self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demo {
    pub instance_id: String,
    pub text: String,
    pub label: Label,
}

/// An instance assembled into a prompt, with character-level span annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub corpus_format_version: u32,
    pub instance_id: String,
    pub source_pair_id: String,
    pub task: TaskKind,
    /// Task label of the instance; this is what probes predict.
    pub label: Label,
    pub variation: Variation,
    pub sanity: SanityVariant,
    pub full_text: String,
    pub spans: BTreeMap<SpanRole, Span>,
    pub expected_answer: String,
    pub answer_vocabulary: AnswerVocabulary,
    /// Label the expected answer verbalizes. Equals `label` except under the
    /// unrelated-instruction sanity prompt, where it encodes the letter-count truth.
    pub answer_label: Label,
    /// Instruction with `{pos}`/`{neg}` placeholders; `None` for few-shot prompts.
    pub instruction_template: Option<String>,
    pub sample_text: String,
    pub demos: Vec<Demo>,
}

impl RenderedPrompt {
    pub fn span(&self, role: SpanRole) -> Span {
        self.spans.get(&role).copied().unwrap_or(Span::EMPTY)
    }

    /// Text covered by the span for `role`.
    pub fn span_text(&self, role: SpanRole) -> &str {
        let span = self.span(role);
        if span.is_empty() {
            return "";
        }
        let byte_at = |char_idx: usize| {
            self.full_text.char_indices().nth(char_idx).map(|(b, _)| b).unwrap_or(self.full_text.len())
        };
        &self.full_text[byte_at(span.start)..byte_at(span.end)]
    }

    pub fn instruction_text(&self) -> Option<String> {
        self.instruction_template.as_deref().map(|t| fill_instruction(t, &self.answer_vocabulary))
    }

    fn demo_block(&self) -> String {
        self.demos
            .iter()
            .map(|d| {
                DEMO_FORMAT.replace("{text}", &d.text).replace("{answer}", self.answer_vocabulary.for_label(d.label))
            })
            .collect::<Vec<_>>()
            .join(SEPARATOR)
    }

    /// Rebuilds `full_text`, `spans` and `expected_answer` from the components.
    pub(crate) fn reassemble(&mut self) {
        let instruction = self.instruction_text();
        let demos = self.demo_block();
        let blocks: Vec<(SpanRole, &str)> = match self.variation {
            Variation::InstructionFirst => vec![
                (SpanRole::Instruction, instruction.as_deref().unwrap_or("")),
                (SpanRole::Sample, &self.sample_text),
            ],
            Variation::SampleFirst => vec![
                (SpanRole::Sample, &self.sample_text),
                (SpanRole::Instruction, instruction.as_deref().unwrap_or("")),
            ],
            Variation::NoInstructionFewshot => {
                vec![(SpanRole::Fewshot, demos.as_str()), (SpanRole::Sample, &self.sample_text)]
            }
        };

        let mut text = String::new();
        let mut cursor = 0usize;
        let mut spans = BTreeMap::from([
            (SpanRole::Instruction, Span::EMPTY),
            (SpanRole::Fewshot, Span::EMPTY),
            (SpanRole::Sample, Span::EMPTY),
        ]);
        for (i, (role, block)) in blocks.iter().enumerate() {
            if i > 0 {
                text.push_str(SEPARATOR);
                cursor += SEPARATOR.chars().count();
            }
            let len = block.chars().count();
            spans.insert(*role, Span { start: cursor, end: cursor + len });
            text.push_str(block);
            cursor += len;
        }
        self.full_text = text;
        self.spans = spans;
        self.expected_answer = self.answer_vocabulary.for_label(self.answer_label).to_string();
    }

    /// Checks the structural invariants of a rendered prompt.
    pub fn check_invariants(&self) -> Result<(), String> {
        let total = self.full_text.chars().count();
        let roles = [SpanRole::Instruction, SpanRole::Fewshot, SpanRole::Sample];
        for role in roles {
            let s = self.span(role);
            if s.start > s.end || s.end > total {
                return Err(format!("{role:?} span {s:?} outside text of length {total}"));
            }
        }
        for (i, a) in roles.iter().enumerate() {
            for b in &roles[i + 1..] {
                if self.span(*a).overlaps(&self.span(*b)) {
                    return Err(format!("{a:?} and {b:?} spans overlap"));
                }
            }
        }
        if self.span(SpanRole::Sample).is_empty() {
            return Err("sample span is empty".into());
        }
        let fewshot = self.variation == Variation::NoInstructionFewshot;
        if self.span(SpanRole::Instruction).is_empty() != fewshot {
            return Err("instruction span presence does not match variation".into());
        }
        if self.span(SpanRole::Fewshot).is_empty() == fewshot {
            return Err("few-shot span presence does not match variation".into());
        }
        if self.span_text(SpanRole::Sample) != self.sample_text {
            return Err("sample span does not reproduce the sample text".into());
        }
        if self.expected_answer != self.answer_vocabulary.for_label(self.answer_label) {
            return Err("expected answer does not match vocabulary".into());
        }
        Ok(())
    }
}

/// Labeled demonstrations per task, disjoint from the evaluation instances.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FewshotPool {
    demos: BTreeMap<TaskKind, Vec<TaskInstance>>,
}

impl FewshotPool {
    /// Builds a pool, rejecting any demo that shares a source pair with an evaluation instance.
    pub fn new(demos: Vec<TaskInstance>, evaluation: &[TaskInstance]) -> Result<Self, CorpusError> {
        let eval_pairs: BTreeSet<&str> = evaluation.iter().map(|i| i.source_pair_id.as_str()).collect();
        let mut pool = FewshotPool::default();
        for demo in demos {
            if eval_pairs.contains(demo.source_pair_id.as_str()) {
                return Err(CorpusError::PoolOverlap { demo_id: demo.id, pair_id: demo.source_pair_id });
            }
            pool.demos.entry(demo.task).or_default().push(demo);
        }
        Ok(pool)
    }

    /// Moves `pairs_per_task` whole source pairs of each task into a demo pool,
    /// chosen by seeded hash order, and returns the pool with the remaining
    /// evaluation instances in their original order.
    pub fn carve(instances: Vec<TaskInstance>, pairs_per_task: usize, seed: u64) -> (Self, Vec<TaskInstance>) {
        let mut pairs: BTreeMap<TaskKind, BTreeSet<(u64, String)>> = BTreeMap::new();
        for inst in &instances {
            let h = stable_hash(seed, &["pool", inst.source_pair_id.as_str()]);
            pairs.entry(inst.task).or_default().insert((h, inst.source_pair_id.clone()));
        }
        let chosen: BTreeSet<String> =
            pairs.values().flat_map(|set| set.iter().take(pairs_per_task).map(|(_, p)| p.clone())).collect();
        let (demos, eval): (Vec<_>, Vec<_>) = instances.into_iter().partition(|i| chosen.contains(&i.source_pair_id));
        let pool = FewshotPool::new(demos, &eval).expect("carved pool is disjoint by construction");
        (pool, eval)
    }

    pub fn demos_for(&self, task: TaskKind) -> &[TaskInstance] {
        self.demos.get(&task).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.demos.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Four demonstrations for `inst`, alternating positive/negative.
    fn draw(&self, inst: &TaskInstance, seed: u64) -> Result<Vec<Demo>, CorpusError> {
        let per_label = FEWSHOT_DEMOS / 2;
        let candidates = self.demos_for(inst.task).iter().filter(|d| d.source_pair_id != inst.source_pair_id);
        let (mut pos, mut neg): (Vec<&TaskInstance>, Vec<&TaskInstance>) =
            candidates.partition(|d| d.label.is_positive());
        let available = pos.len().min(neg.len());
        if available < per_label {
            return Err(CorpusError::InsufficientPool { task: inst.task, available, needed: per_label });
        }
        let mut rng = substream(seed, &["fewshot", inst.id.as_str()]);
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        Ok(pos
            .into_iter()
            .zip(neg)
            .take(per_label)
            .flat_map(|(p, n)| [p, n])
            .map(|d| Demo { instance_id: d.id.clone(), text: d.text.clone(), label: d.label })
            .collect())
    }
}

/// Renders `inst` under `variation`.
///
/// `instruction_text` may contain `{pos}`/`{neg}` placeholders for the answer
/// words; it is required for the two instruction variations and ignored for
/// the few-shot variation.
pub fn render_prompt(
    inst: &TaskInstance,
    variation: Variation,
    instruction_text: Option<&str>,
    pool: &FewshotPool,
    seed: u64,
) -> Result<RenderedPrompt, CorpusError> {
    if inst.text.is_empty() {
        return Err(CorpusError::EmptyText(inst.id.clone()));
    }
    let (instruction_template, demos) = match variation {
        Variation::InstructionFirst | Variation::SampleFirst => {
            let text = instruction_text.filter(|t| !t.is_empty()).ok_or(CorpusError::MissingInstruction(variation))?;
            (Some(text.to_string()), Vec::new())
        }
        Variation::NoInstructionFewshot => (None, pool.draw(inst, seed)?),
    };
    let mut prompt = RenderedPrompt {
        corpus_format_version: CORPUS_FORMAT_VERSION,
        instance_id: inst.id.clone(),
        source_pair_id: inst.source_pair_id.clone(),
        task: inst.task,
        label: inst.label,
        variation,
        sanity: SanityVariant::None,
        full_text: String::new(),
        spans: BTreeMap::new(),
        expected_answer: String::new(),
        answer_vocabulary: AnswerVocabulary::yes_no(),
        answer_label: inst.label,
        instruction_template,
        sample_text: inst.text.clone(),
        demos,
    };
    prompt.reassemble();
    Ok(prompt)
}
