// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashSet;

use serde::Deserialize;

use super::{Label, TaskInstance, TaskKind};

/// Placeholder replaced by the answer option in oLMpics stems.
pub const MASK_TOKEN: &str = "[MASK]";
/// Placeholder replaced by the concept filler in EWOK templates.
pub const CONCEPT_TOKEN: &str = "[CONCEPT]";

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlimpRaw {
    id: Option<String>,
    sentence_good: String,
    sentence_bad: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct StereosetRaw {
    id: Option<String>,
    stereotype: String,
    anti_stereotype: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct OlmpicsRaw {
    id: Option<String>,
    stem: String,
    choices: Vec<String>,
    answer_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct EwokRaw {
    id: Option<String>,
    template: String,
    matching: String,
    mismatching: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct TomRaw {
    id: Option<String>,
    story: Vec<String>,
    entity: String,
    true_location: String,
    false_location: Option<String>,
    #[serde(default)]
    containers: Vec<String>,
}

/// A validated raw record reduced to its acceptable/unacceptable texts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: Option<String>,
    pub acceptable: String,
    pub unacceptable: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// Zero-based position of the record in the input.
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildOutcome {
    pub instances: Vec<TaskInstance>,
    pub rejections: Vec<Rejection>,
    pub warnings: Vec<String>,
}

fn non_empty(field: &str, value: &str) -> Result<(), String> {
    if value.trim().is_empty() {
        Err(format!("field `{field}` is empty"))
    } else {
        Ok(())
    }
}

fn fill_once(template: &str, token: &str, filler: &str) -> Result<String, String> {
    match template.matches(token).count() {
        1 => Ok(template.replacen(token, filler, 1)),
        n => Err(format!("expected exactly one {token} placeholder, found {n}")),
    }
}

fn tom_sentence(entity: &str, location: &str) -> String {
    format!("The {entity} is in the {location}.")
}

/// Parses one line-delimited JSON record under `task`'s raw schema and
/// applies the task's pair construction rule.
pub fn parse_raw_line(task: TaskKind, line: &str) -> Result<RawRecord, String> {
    let err = |e: serde_json::Error| format!("malformed {task} record: {e}");
    let record = match task {
        TaskKind::Blimp => {
            let r: BlimpRaw = serde_json::from_str(line).map_err(err)?;
            RawRecord { id: r.id, acceptable: r.sentence_good, unacceptable: r.sentence_bad }
        }
        TaskKind::Stereoset => {
            let r: StereosetRaw = serde_json::from_str(line).map_err(err)?;
            RawRecord { id: r.id, acceptable: r.stereotype, unacceptable: r.anti_stereotype }
        }
        TaskKind::Olmpics => {
            let r: OlmpicsRaw = serde_json::from_str(line).map_err(err)?;
            let correct = r.choices.get(r.answer_index).ok_or_else(|| {
                format!("answer_index {} out of range for {} choices", r.answer_index, r.choices.len())
            })?;
            // first wrong option in listed order
            let wrong = r
                .choices
                .iter()
                .enumerate()
                .find(|(i, c)| *i != r.answer_index && *c != correct)
                .map(|(_, c)| c)
                .ok_or("no incorrect option distinct from the answer")?;
            non_empty("choices", correct)?;
            non_empty("choices", wrong)?;
            RawRecord {
                id: r.id,
                acceptable: fill_once(&r.stem, MASK_TOKEN, correct)?,
                unacceptable: fill_once(&r.stem, MASK_TOKEN, wrong)?,
            }
        }
        TaskKind::Ewok => {
            let r: EwokRaw = serde_json::from_str(line).map_err(err)?;
            non_empty("matching", &r.matching)?;
            non_empty("mismatching", &r.mismatching)?;
            RawRecord {
                id: r.id,
                acceptable: fill_once(&r.template, CONCEPT_TOKEN, &r.matching)?,
                unacceptable: fill_once(&r.template, CONCEPT_TOKEN, &r.mismatching)?,
            }
        }
        TaskKind::Tom => {
            let r: TomRaw = serde_json::from_str(line).map_err(err)?;
            if r.story.is_empty() {
                return Err("field `story` has no sentences".into());
            }
            non_empty("entity", &r.entity)?;
            non_empty("true_location", &r.true_location)?;
            let wrong = match r.false_location {
                Some(loc) => loc,
                None => r
                    .containers
                    .iter()
                    .find(|c| **c != r.true_location && !c.trim().is_empty())
                    .cloned()
                    .ok_or("no false_location and no alternative container in `containers`")?,
            };
            non_empty("false_location", &wrong)?;
            if wrong == r.true_location {
                return Err("false_location equals true_location".into());
            }
            let story = r.story.join(" ");
            RawRecord {
                id: r.id,
                acceptable: format!("{story} {}", tom_sentence(&r.entity, &r.true_location)),
                unacceptable: format!("{story} {}", tom_sentence(&r.entity, &wrong)),
            }
        }
    };
    non_empty("acceptable text", &record.acceptable)?;
    non_empty("unacceptable text", &record.unacceptable)?;
    if record.acceptable == record.unacceptable {
        return Err("acceptable and unacceptable texts are identical".into());
    }
    Ok(record)
}

/// Builds balanced instance pairs from raw line-delimited records.
///
/// Malformed records are rejected individually and the build continues.
/// `limit` counts instances; an odd limit is rounded down to whole pairs.
pub fn build_instances<I, S>(raw_lines: I, task: TaskKind, limit: usize) -> BuildOutcome
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let max_pairs = limit / 2;
    let mut out = BuildOutcome::default();
    let mut seen = HashSet::new();
    let mut available = 0usize;

    for (index, line) in raw_lines.into_iter().enumerate() {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        let record = match parse_raw_line(task, line) {
            Ok(r) => r,
            Err(reason) => {
                out.rejections.push(Rejection { index, reason });
                continue;
            }
        };
        let key = record.id.clone().unwrap_or_else(|| format!("{index:05}"));
        if !seen.insert(key.clone()) {
            out.rejections.push(Rejection { index, reason: format!("duplicate record id {key:?}") });
            continue;
        }
        available += 1;
        if available > max_pairs {
            continue;
        }
        let pair_id = format!("{task}-{key}");
        out.instances.push(TaskInstance {
            id: format!("{pair_id}-acc"),
            task,
            text: record.acceptable,
            label: Label::Acceptable,
            source_pair_id: pair_id.clone(),
        });
        out.instances.push(TaskInstance {
            id: format!("{pair_id}-unacc"),
            task,
            text: record.unacceptable,
            label: Label::Unacceptable,
            source_pair_id: pair_id,
        });
    }

    if available < max_pairs {
        out.warnings.push(format!(
            "{task}: requested {limit} instances but only {available} valid pairs ({} instances) are available",
            2 * available
        ));
    } else if available > max_pairs {
        log::debug!("{task}: truncated {available} valid pairs to {max_pairs}");
    }
    if limit % 2 == 1 {
        out.warnings.push(format!("{task}: odd limit {limit} rounded down to {} instances", 2 * max_pairs));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tom_story_builds_confirming_and_wrong_sentences() {
        let line = r#"{"story":["Carter entered the front yard.","Carter moved the banana to the green basket."],"entity":"banana","true_location":"green basket","false_location":"red cupboard"}"#;
        let out = build_instances([line], TaskKind::Tom, 10);
        assert_eq!(out.instances.len(), 2);
        let acc = &out.instances[0];
        assert_eq!(acc.label, Label::Acceptable);
        assert!(acc.text.ends_with("The banana is in the green basket."), "{}", acc.text);
        assert!(out.instances[1].text.ends_with("The banana is in the red cupboard."));
        assert_eq!(acc.source_pair_id, out.instances[1].source_pair_id);
    }

    #[test]
    fn tom_distractor_comes_from_other_containers() {
        let line = r#"{"story":["Ann moved the key to the box."],"entity":"key","true_location":"box","containers":["box","drawer"]}"#;
        let out = build_instances([line], TaskKind::Tom, 2);
        assert!(out.instances[1].text.ends_with("The key is in the drawer."));
    }

    #[test]
    fn olmpics_fills_mask_with_correct_and_incorrect_option() {
        let line =
            r#"{"stem":"It was [MASK] manly, it was really unmanly.","choices":["not","really"],"answer_index":0}"#;
        let out = build_instances([line], TaskKind::Olmpics, 2);
        assert_eq!(out.instances[0].text, "It was not manly, it was really unmanly.");
        assert_eq!(out.instances[0].label, Label::Acceptable);
        assert_eq!(out.instances[1].text, "It was really manly, it was really unmanly.");
        assert_eq!(out.instances[1].label, Label::Unacceptable);
    }

    #[test]
    fn ewok_and_paired_tasks() {
        let ewok = r#"{"template":"Ali is 35 years older than Wei. Ali is Wei's [CONCEPT].","matching":"parent","mismatching":"child"}"#;
        let out = build_instances([ewok], TaskKind::Ewok, 2);
        assert_eq!(out.instances[0].text, "Ali is 35 years older than Wei. Ali is Wei's parent.");
        let blimp = r#"{"sentence_good":"The patients care for Adam.","sentence_bad":"The patient care for Adam."}"#;
        let out = build_instances([blimp], TaskKind::Blimp, 2);
        assert_eq!(out.instances[1].text, "The patient care for Adam.");
        let stereo = r#"{"stereotype":"The strong mover carried the couch.","anti_stereotype":"The weak mover carried the couch."}"#;
        let out = build_instances([stereo], TaskKind::Stereoset, 2);
        assert_eq!(out.instances[0].label, Label::Acceptable);
        assert!(out.instances[0].text.contains("strong"));
    }

    #[test]
    fn empty_input_gives_empty_list() {
        let out = build_instances(Vec::<String>::new(), TaskKind::Blimp, 5000);
        assert!(out.instances.is_empty());
        assert!(out.rejections.is_empty());
    }

    #[test]
    fn malformed_records_are_rejected_and_build_continues() {
        let lines = [
            r#"{"sentence_good":"A.","sentence_bad":"B."}"#,
            r#"not json"#,
            r#"{"sentence_good":"","sentence_bad":"B."}"#,
            r#"{"sentence_good":"C.","sentence_bad":"C."}"#,
            r#"{"sentence_good":"D.","sentence_bad":"E.","extra":1}"#,
            r#"{"sentence_good":"F.","sentence_bad":"G."}"#,
        ];
        let out = build_instances(lines, TaskKind::Blimp, 100);
        assert_eq!(out.instances.len(), 4);
        let rejected: Vec<usize> = out.rejections.iter().map(|r| r.index).collect();
        assert_eq!(rejected, vec![1, 2, 3, 4]);
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn olmpics_requires_single_mask_and_valid_answer() {
        assert!(
            parse_raw_line(TaskKind::Olmpics, r#"{"stem":"no mask","choices":["a","b"],"answer_index":0}"#).is_err()
        );
        assert!(parse_raw_line(TaskKind::Olmpics, r#"{"stem":"[MASK]","choices":["a","b"],"answer_index":2}"#).is_err());
        assert!(parse_raw_line(TaskKind::Olmpics, r#"{"stem":"[MASK]","choices":["a"],"answer_index":0}"#).is_err());
    }

    #[test]
    fn limit_truncates_and_stays_balanced() {
        let lines: Vec<String> =
            (0..10).map(|i| format!(r#"{{"sentence_good":"good {i}.","sentence_bad":"bad {i}."}}"#)).collect();
        let out = build_instances(&lines, TaskKind::Blimp, 6);
        assert_eq!(out.instances.len(), 6);
        assert!(out.warnings.is_empty());
        let pos = out.instances.iter().filter(|i| i.label.is_positive()).count();
        assert_eq!(pos, 3);

        let out = build_instances(&lines, TaskKind::Blimp, 40);
        assert_eq!(out.instances.len(), 20);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let lines = [
            r#"{"id":"x","sentence_good":"A.","sentence_bad":"B."}"#,
            r#"{"id":"x","sentence_good":"C.","sentence_bad":"D."}"#,
        ];
        let out = build_instances(lines, TaskKind::Blimp, 10);
        assert_eq!(out.instances.len(), 2);
        assert_eq!(out.instances[0].id, "blimp-x-acc");
        assert_eq!(out.rejections.len(), 1);
    }
}
