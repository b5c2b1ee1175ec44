// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::corpus::{AnswerVocabulary, Label};

const TERMINAL_PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '"', '\''];

/// Lowercase, trim, and strip trailing punctuation.
pub fn normalize_answer(text: &str) -> String {
    text.trim().to_lowercase().trim_end_matches(TERMINAL_PUNCTUATION).trim_end().to_string()
}

/// Exact match: the normalized generation starts with the normalized expected answer.
pub fn behavior_em(generated: &str, expected: &str) -> bool {
    let expected = normalize_answer(expected);
    !expected.is_empty() && normalize_answer(generated).starts_with(&expected)
}

/// The label whose answer word the generation starts with, if exactly one does.
pub fn implied_label(generated: &str, vocab: &AnswerVocabulary) -> Option<Label> {
    let pos = behavior_em(generated, &vocab.positive);
    let neg = behavior_em(generated, &vocab.negative);
    match (pos, neg) {
        (true, false) => Some(Label::Acceptable),
        (false, true) => Some(Label::Unacceptable),
        _ => None,
    }
}

/// Running exact-match counts; empty generations are tallied as malformed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmTally {
    pub correct: usize,
    pub total: usize,
    pub malformed: usize,
}

impl EmTally {
    pub fn record(&mut self, generated: &str, expected: &str) -> bool {
        let hit = behavior_em(generated, expected);
        self.total += 1;
        self.correct += hit as usize;
        if generated.trim().is_empty() {
            self.malformed += 1;
        }
        hit
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_rules() {
        assert!(behavior_em("Yes.", "yes"));
        assert!(behavior_em("  YES, it is acceptable", "yes"));
        assert!(!behavior_em("no", "yes"));
        assert!(!behavior_em("", "yes"));
        assert!(!behavior_em("yes", ""));
        assert!(behavior_em("No!", "no."));
    }

    #[test]
    fn tally_counts_malformed() {
        let mut t = EmTally::default();
        assert!(!t.record("", "yes"));
        assert!(t.record("yes", "yes"));
        assert!(!t.record("   ", "no"));
        assert_eq!(t, EmTally { correct: 1, total: 3, malformed: 2 });
        assert_eq!(EmTally::default().accuracy(), None);
    }

    #[test]
    fn implied_labels() {
        let v = AnswerVocabulary::yes_no();
        assert_eq!(implied_label("Yes", &v), Some(Label::Acceptable));
        assert_eq!(implied_label("no.", &v), Some(Label::Unacceptable));
        assert_eq!(implied_label("maybe", &v), None);
        let overlapping = AnswerVocabulary::new("a", "ab");
        assert_eq!(implied_label("ab", &overlapping), None);
    }
}
