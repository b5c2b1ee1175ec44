// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sanity-check prompt transforms: unrelated instructions and answer-label
//! manipulations. The sample text is never touched.

use rand::seq::IndexedRandom;

use super::{AnswerVocabulary, CorpusError, Label, RenderedPrompt, SanityVariant};
use crate::seed::{stable_hash, substream};

/// Word list for the random-word answer pairs.
pub const RANDOM_LABEL_WORDS: &[&str] = &[
    "table", "river", "pencil", "cloud", "garden", "window", "tiger", "violin", "candle", "bridge", "orange", "mirror",
    "forest", "ladder", "pepper", "rocket", "saddle", "island", "hammer", "basket", "planet", "button", "carpet",
    "dragon", "feather", "guitar", "helmet", "jacket", "kettle", "lemon",
];

/// Case-insensitive count of the letter "a".
pub fn count_letter_a(text: &str) -> usize {
    text.chars().filter(|c| matches!(c, 'a' | 'A')).count()
}

fn unrelated_template(count: usize) -> String {
    format!(
        "Does the given text contain the letter \"a\" exactly {count} times? Answer only with \"{{pos}}\" \
         or \"{{neg}}\": choose \"{{pos}}\" if it does or \"{{neg}}\" if it does not."
    )
}

fn coin(seed: u64, tag: &str, id: &str) -> bool {
    stable_hash(seed, &[tag, id]) & 1 == 1
}

fn rewrite_unrelated(p: &mut RenderedPrompt, truthful: bool, seed: u64) {
    let actual = count_letter_a(&p.sample_text);
    let stated = if truthful {
        actual
    } else if actual == 0 || coin(seed, "unrelated-direction", &p.instance_id) {
        actual + 1
    } else {
        actual - 1
    };
    p.instruction_template = Some(unrelated_template(stated));
    p.answer_label = Label::from_positive(truthful);
}

fn random_word_vocabulary(seed: u64) -> AnswerVocabulary {
    let mut rng = substream(seed, &["random-word-labels"]);
    let words: Vec<&&str> = RANDOM_LABEL_WORDS.choose_multiple(&mut rng, 2).collect();
    AnswerVocabulary::new(*words[0], *words[1])
}

fn transform(
    p: &RenderedPrompt,
    variant: SanityVariant,
    seed: u64,
    truthful: impl FnOnce() -> bool,
) -> Result<RenderedPrompt, CorpusError> {
    let mut out = p.clone();
    match variant {
        SanityVariant::None => return Err(CorpusError::NoneVariant),
        SanityVariant::UnrelatedInstruction => {
            if out.instruction_template.is_none() {
                return Err(CorpusError::NoInstructionToRewrite(variant));
            }
            rewrite_unrelated(&mut out, truthful(), seed);
        }
        SanityVariant::LabelFlip => out.answer_vocabulary = out.answer_vocabulary.swapped(),
        SanityVariant::RandomLabelFlip => {
            if coin(seed, "random-label-flip", &out.instance_id) {
                out.answer_vocabulary = out.answer_vocabulary.swapped();
            }
        }
        SanityVariant::AbstractLabels => out.answer_vocabulary = AnswerVocabulary::new("apple", "banana"),
        SanityVariant::RandomWordLabels => out.answer_vocabulary = random_word_vocabulary(seed),
    }
    out.sanity = variant;
    out.reassemble();
    Ok(out)
}

/// Applies one sanity transform to a single prompt.
///
/// For the unrelated instruction the truthful/perturbed choice is a seeded
/// per-instance coin; use [`apply_sanity_batch`] for an exactly balanced split.
pub fn apply_sanity_variant(
    p: &RenderedPrompt,
    variant: SanityVariant,
    seed: u64,
) -> Result<RenderedPrompt, CorpusError> {
    transform(p, variant, seed, || !coin(seed, "unrelated-truthful", &p.instance_id))
}

/// Applies a sanity transform to a whole prompt set. The unrelated
/// instruction states the true letter count for exactly half of the prompts
/// (by seeded hash rank), so the letter-count question stays balanced.
pub fn apply_sanity_batch(
    prompts: &[RenderedPrompt],
    variant: SanityVariant,
    seed: u64,
) -> Result<Vec<RenderedPrompt>, CorpusError> {
    let mut order: Vec<(u64, usize)> = prompts
        .iter()
        .enumerate()
        .map(|(i, p)| (stable_hash(seed, &["unrelated-rank", p.instance_id.as_str()]), i))
        .collect();
    order.sort_unstable();
    let mut truthful = vec![false; prompts.len()];
    for &(_, i) in order.iter().take(prompts.len() / 2) {
        truthful[i] = true;
    }
    prompts.iter().zip(truthful).map(|(p, t)| transform(p, variant, seed, || t)).collect()
}
