//! Human annotation handling: batch construction, ingest validation, voted
//! final scores, and inter-annotator agreement.
//!
//! Annotation records share their schema with classifier outputs on purpose:
//! human and machine judgments flow through the same downstream metrics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{AnnotationRecord, AnnotationScore, BigFiveTrait, GeneratedText};
use crate::metrics::{self, score_to_group, MetricsError};
use crate::rng::SplitMix64;

/// Errors raised while aggregating or sampling annotations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotationError {
    #[error(
        "(text {text_id}, trait {trait_}) has {found} records; voting needs exactly {expected}"
    )]
    GroupArity {
        text_id: String,
        trait_: BigFiveTrait,
        found: usize,
        expected: usize,
    },
    #[error("need at least {needed} annotators, got {got}")]
    NotEnoughAnnotators { needed: usize, got: usize },
    #[error("batch size and total must be positive")]
    EmptyBatchPlan,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Raters per (text, trait) group; the voting scheme assumes three.
pub const RATERS_PER_TEXT: usize = 3;

/// One planned annotation batch: which texts, and who rates each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationBatch {
    pub batch_id: String,
    pub assignments: Vec<TextAssignment>,
}

/// One text with its assigned annotators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextAssignment {
    pub text_id: String,
    pub annotators: Vec<String>,
}

/// A single validation problem found in an annotation file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnotationViolation {
    /// A (text, trait) group with a rater count other than three.
    MissingRater {
        text_id: String,
        #[serde(rename = "trait")]
        trait_: BigFiveTrait,
        found: usize,
    },
    /// The same annotator rated the same (text, trait) twice.
    DuplicateAnnotator {
        text_id: String,
        #[serde(rename = "trait")]
        trait_: BigFiveTrait,
        annotator_id: String,
    },
    /// A record references a text id that is not in the dataset.
    UnknownText { text_id: String },
    /// A highlighted span falls outside the referenced text.
    SpanOutOfBounds {
        text_id: String,
        annotator_id: String,
        start: usize,
        end: usize,
    },
    /// A reason outside the configured closed vocabulary.
    UnknownReason {
        text_id: String,
        annotator_id: String,
        reason: String,
    },
}

/// Everything wrong with an annotation file, in one pass.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<AnnotationViolation>,
    pub records_checked: u64,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks rater counts, annotator duplication, text references, span
/// bounds, and (when a closed vocabulary is configured) reason membership.
/// Report-based: all problems are listed, none abort the pass.
pub fn validate_annotations(
    records: &[AnnotationRecord],
    texts: &[GeneratedText],
    reason_vocabulary: Option<&BTreeSet<String>>,
) -> ValidationReport {
    let by_id: BTreeMap<&str, &GeneratedText> = texts.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut report = ValidationReport {
        records_checked: records.len() as u64,
        ..ValidationReport::default()
    };

    let mut groups: BTreeMap<(&str, BigFiveTrait), Vec<&AnnotationRecord>> = BTreeMap::new();
    for record in records {
        groups
            .entry((record.text_id.as_str(), record.trait_))
            .or_default()
            .push(record);

        if let Some(vocabulary) = reason_vocabulary {
            for reason in &record.reasons {
                if !vocabulary.contains(reason) {
                    report.violations.push(AnnotationViolation::UnknownReason {
                        text_id: record.text_id.clone(),
                        annotator_id: record.annotator_id.clone(),
                        reason: reason.clone(),
                    });
                }
            }
        }

        match by_id.get(record.text_id.as_str()) {
            None => report.violations.push(AnnotationViolation::UnknownText {
                text_id: record.text_id.clone(),
            }),
            Some(text) => {
                let char_len = text.text.chars().count();
                for span in &record.spans {
                    if span.start >= span.end || span.end > char_len {
                        report
                            .violations
                            .push(AnnotationViolation::SpanOutOfBounds {
                                text_id: record.text_id.clone(),
                                annotator_id: record.annotator_id.clone(),
                                start: span.start,
                                end: span.end,
                            });
                    }
                }
            }
        }
    }

    for ((text_id, trait_), group) in &groups {
        if group.len() != RATERS_PER_TEXT {
            report.violations.push(AnnotationViolation::MissingRater {
                text_id: text_id.to_string(),
                trait_: *trait_,
                found: group.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for record in group {
            if !seen.insert(record.annotator_id.as_str()) {
                report
                    .violations
                    .push(AnnotationViolation::DuplicateAnnotator {
                        text_id: text_id.to_string(),
                        trait_: *trait_,
                        annotator_id: record.annotator_id.clone(),
                    });
            }
        }
    }
    report
}

/// A voted final score for one (text, trait), with the mean of the numeric
/// annotator scores kept alongside for level-3 comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalScore {
    pub text_id: String,
    #[serde(rename = "trait")]
    pub trait_: BigFiveTrait,
    pub score: AnnotationScore,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric_mean: Option<f64>,
    pub raters: u32,
}

/// Applies majority voting per (text, trait) group. Every group must hold
/// exactly three records (run [`validate_annotations`] first).
pub fn aggregate_final_scores(
    records: &[AnnotationRecord],
) -> Result<Vec<FinalScore>, AnnotationError> {
    let mut groups: BTreeMap<(String, BigFiveTrait), Vec<&AnnotationRecord>> = BTreeMap::new();
    for record in records {
        groups
            .entry((record.text_id.clone(), record.trait_))
            .or_default()
            .push(record);
    }
    let mut finals = Vec::with_capacity(groups.len());
    for ((text_id, trait_), group) in groups {
        if group.len() != RATERS_PER_TEXT {
            return Err(AnnotationError::GroupArity {
                text_id,
                trait_,
                found: group.len(),
                expected: RATERS_PER_TEXT,
            });
        }
        let scores = [group[0].score, group[1].score, group[2].score];
        let numeric: Vec<f64> = scores
            .iter()
            .filter_map(|s| s.as_value())
            .map(|v| v as f64)
            .collect();
        let numeric_mean = if numeric.is_empty() {
            None
        } else {
            Some(numeric.iter().sum::<f64>() / numeric.len() as f64)
        };
        finals.push(FinalScore {
            text_id,
            trait_,
            score: metrics::majority_vote(scores),
            numeric_mean,
            raters: RATERS_PER_TEXT as u32,
        });
    }
    Ok(finals)
}

/// Grouping level for inter-annotator kappa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KappaLevel {
    /// Present (numeric score) versus absent (non-distinguishable).
    Level1,
    /// The four score groups.
    Level2,
}

/// Fleiss' kappa per trait. Level 1 uses two categories (present/absent);
/// level 2 uses the four score groups. Traits where kappa is undefined
/// (degenerate chance agreement) come back as `None`.
pub fn interannotator_kappa(
    records: &[AnnotationRecord],
    level: KappaLevel,
) -> Result<BTreeMap<BigFiveTrait, Option<f64>>, AnnotationError> {
    let mut per_trait: BTreeMap<BigFiveTrait, BTreeMap<String, Vec<AnnotationScore>>> =
        BTreeMap::new();
    for record in records {
        per_trait
            .entry(record.trait_)
            .or_default()
            .entry(record.text_id.clone())
            .or_default()
            .push(record.score);
    }
    let mut kappas = BTreeMap::new();
    for (trait_, subjects) in per_trait {
        let mut counts: Vec<Vec<u64>> = Vec::with_capacity(subjects.len());
        for (text_id, scores) in subjects {
            if scores.len() != RATERS_PER_TEXT {
                return Err(AnnotationError::GroupArity {
                    text_id,
                    trait_,
                    found: scores.len(),
                    expected: RATERS_PER_TEXT,
                });
            }
            let mut row = match level {
                KappaLevel::Level1 => alloc::vec![0u64; 2],
                KappaLevel::Level2 => alloc::vec![0u64; 4],
            };
            for score in scores {
                let category = match level {
                    KappaLevel::Level1 => usize::from(!score.is_numeric()),
                    KappaLevel::Level2 => score_to_group(score).index(),
                };
                row[category] += 1;
            }
            counts.push(row);
        }
        let kappa = match metrics::fleiss_kappa(&counts) {
            Ok(value) => Some(value),
            Err(MetricsError::DegenerateAgreement) => None,
            Err(other) => return Err(AnnotationError::Metrics(other)),
        };
        kappas.insert(trait_, kappa);
    }
    Ok(kappas)
}

/// Samples texts into annotation batches, balanced across (model,
/// temperature) strata, and rotates annotators so each text gets three
/// distinct raters. Deterministic under a fixed seed.
pub fn sample_annotation_batches(
    texts: &[GeneratedText],
    annotators: &[String],
    total: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<AnnotationBatch>, AnnotationError> {
    if total == 0 || batch_size == 0 {
        return Err(AnnotationError::EmptyBatchPlan);
    }
    if annotators.len() < RATERS_PER_TEXT {
        return Err(AnnotationError::NotEnoughAnnotators {
            needed: RATERS_PER_TEXT,
            got: annotators.len(),
        });
    }
    let mut rng = SplitMix64::new(seed);
    let mut strata: BTreeMap<(String, String), Vec<&GeneratedText>> = BTreeMap::new();
    for text in texts {
        strata
            .entry((text.model.clone(), text.temperature.as_str().to_string()))
            .or_default()
            .push(text);
    }
    let mut pools: Vec<Vec<&GeneratedText>> = strata.into_values().collect();
    for pool in &mut pools {
        rng.shuffle(pool);
    }
    // Round-robin across strata keeps the sample balanced by model and
    // temperature as long as the pools allow.
    let mut selected: Vec<&GeneratedText> = Vec::with_capacity(total);
    let mut cursor = 0;
    while selected.len() < total {
        let mut picked_any = false;
        for pool in &mut pools {
            if selected.len() >= total {
                break;
            }
            if cursor < pool.len() {
                selected.push(pool[cursor]);
                picked_any = true;
            }
        }
        if !picked_any {
            break;
        }
        cursor += 1;
    }

    let mut batches = Vec::new();
    for (batch_index, chunk) in selected.chunks(batch_size).enumerate() {
        let assignments = chunk
            .iter()
            .enumerate()
            .map(|(text_index, text)| {
                let base = (batch_index * batch_size + text_index) * RATERS_PER_TEXT;
                let annotators = (0..RATERS_PER_TEXT)
                    .map(|j| annotators[(base + j) % annotators.len()].clone())
                    .collect();
                TextAssignment {
                    text_id: text.id.clone(),
                    annotators,
                }
            })
            .collect();
        batches.push(AnnotationBatch {
            batch_id: format!("batch-{:03}", batch_index + 1),
            assignments,
        });
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AnnotatedSpan, PersonalityProfile, PromptScore, Temperature};
    use alloc::vec;

    fn text(id: &str) -> GeneratedText {
        GeneratedText::new(
            id.into(),
            "m".into(),
            Temperature::zero(),
            "q1".into(),
            PersonalityProfile::single(BigFiveTrait::Openness, PromptScore::new(4).unwrap()),
            "A dozen chars plus some more.".into(),
        )
    }

    fn record(text_id: &str, annotator: &str, score: AnnotationScore) -> AnnotationRecord {
        AnnotationRecord {
            text_id: text_id.into(),
            annotator_id: annotator.into(),
            trait_: BigFiveTrait::Openness,
            score,
            reasons: vec![],
            spans: vec![],
        }
    }

    fn val(v: i8) -> AnnotationScore {
        AnnotationScore::Value(v)
    }

    fn nd() -> AnnotationScore {
        AnnotationScore::NonDistinguishable
    }

    #[test]
    fn complete_valid_set_has_no_violations() {
        let texts = vec![text("t1")];
        let records = vec![
            record("t1", "a1", val(1)),
            record("t1", "a2", val(1)),
            record("t1", "a3", val(0)),
        ];
        let report = validate_annotations(&records, &texts, None);
        assert!(report.is_clean());
        assert_eq!(report.records_checked, 3);
    }

    #[test]
    fn two_raters_is_a_missing_rater_violation() {
        let texts = vec![text("t1")];
        let records = vec![record("t1", "a1", val(1)), record("t1", "a2", val(1))];
        let report = validate_annotations(&records, &texts, None);
        assert_eq!(
            report.violations,
            vec![AnnotationViolation::MissingRater {
                text_id: "t1".into(),
                trait_: BigFiveTrait::Openness,
                found: 2,
            }]
        );
    }

    #[test]
    fn span_past_text_end_is_flagged() {
        let texts = vec![text("t1")];
        let mut bad = record("t1", "a1", val(1));
        bad.spans.push(AnnotatedSpan {
            start: 5,
            end: 500,
            surface: "out of range".into(),
        });
        let records = vec![bad, record("t1", "a2", val(1)), record("t1", "a3", val(1))];
        let report = validate_annotations(&records, &texts, None);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, AnnotationViolation::SpanOutOfBounds { .. })));
    }

    #[test]
    fn reasons_checked_against_a_closed_vocabulary() {
        let texts = vec![text("t1")];
        let mut with_reason = record("t1", "a1", val(1));
        with_reason.reasons = vec!["word choice".into(), "made-up reason".into()];
        let records = vec![
            with_reason,
            record("t1", "a2", val(1)),
            record("t1", "a3", val(1)),
        ];
        let vocabulary: BTreeSet<String> = ["word choice", "tone"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let report = validate_annotations(&records, &texts, Some(&vocabulary));
        assert_eq!(
            report
                .violations
                .iter()
                .filter(|v| matches!(v, AnnotationViolation::UnknownReason { .. }))
                .count(),
            1
        );
        // Without a vocabulary, reasons are unchecked.
        assert!(validate_annotations(&records, &texts, None).is_clean());
    }

    #[test]
    fn unknown_text_and_duplicate_annotator_flagged() {
        let texts = vec![text("t1")];
        let records = vec![
            record("ghost", "a1", val(1)),
            record("t1", "a1", val(1)),
            record("t1", "a1", val(2)),
            record("t1", "a3", val(0)),
        ];
        let report = validate_annotations(&records, &texts, None);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, AnnotationViolation::UnknownText { .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, AnnotationViolation::DuplicateAnnotator { .. })));
    }

    #[test]
    fn final_score_voting_examples() {
        let records = vec![
            record("t1", "a1", val(2)),
            record("t1", "a2", val(2)),
            record("t1", "a3", val(1)),
        ];
        let finals = aggregate_final_scores(&records).unwrap();
        assert_eq!(finals.len(), 1);
        assert_eq!(finals[0].score, val(2));
        assert!((finals[0].numeric_mean.unwrap() - 5.0 / 3.0).abs() < 1e-12);

        let records = vec![
            record("t2", "a1", nd()),
            record("t2", "a2", nd()),
            record("t2", "a3", val(1)),
        ];
        assert_eq!(aggregate_final_scores(&records).unwrap()[0].score, nd());

        let records = vec![
            record("t3", "a1", val(-1)),
            record("t3", "a2", val(0)),
            record("t3", "a3", val(2)),
        ];
        assert_eq!(aggregate_final_scores(&records).unwrap()[0].score, val(0));
    }

    #[test]
    fn aggregation_is_annotator_order_invariant() {
        let forward = vec![
            record("t1", "a1", val(-2)),
            record("t1", "a2", val(1)),
            record("t1", "a3", val(1)),
        ];
        let backward = vec![forward[2].clone(), forward[0].clone(), forward[1].clone()];
        assert_eq!(
            aggregate_final_scores(&forward).unwrap()[0].score,
            aggregate_final_scores(&backward).unwrap()[0].score
        );
    }

    #[test]
    fn wrong_group_size_is_an_error() {
        let records = vec![record("t1", "a1", val(1))];
        assert!(matches!(
            aggregate_final_scores(&records),
            Err(AnnotationError::GroupArity { found: 1, .. })
        ));
    }

    #[test]
    fn unanimous_annotators_give_kappa_one_at_both_levels() {
        // Unanimity with category diversity across subjects.
        let mut records = Vec::new();
        for (i, score) in [val(2), nd(), val(-1), val(0)].iter().enumerate() {
            for annotator in ["a1", "a2", "a3"] {
                records.push(record(&format!("t{i}"), annotator, *score));
            }
        }
        let level1 = interannotator_kappa(&records, KappaLevel::Level1).unwrap();
        let level2 = interannotator_kappa(&records, KappaLevel::Level2).unwrap();
        assert!((level1[&BigFiveTrait::Openness].unwrap() - 1.0).abs() < 1e-12);
        assert!((level2[&BigFiveTrait::Openness].unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn level2_kappa_equals_kappa_over_grouped_encoding() {
        // Disagreement pattern crossing group boundaries.
        let mut records = Vec::new();
        let pattern = [
            [val(-2), val(-1), val(0)],
            [val(1), val(2), nd()],
            [val(0), val(0), val(1)],
            [nd(), nd(), val(-1)],
            [val(2), val(1), val(1)],
        ];
        for (i, scores) in pattern.iter().enumerate() {
            for (j, score) in scores.iter().enumerate() {
                records.push(record(&format!("t{i}"), &format!("a{j}"), *score));
            }
        }
        let via_module = interannotator_kappa(&records, KappaLevel::Level2).unwrap()
            [&BigFiveTrait::Openness]
            .unwrap();

        // Independent direct evaluation over the grouped categories.
        let mut counts = Vec::new();
        for scores in pattern {
            let mut row = vec![0u64; 4];
            for score in scores {
                row[score_to_group(score).index()] += 1;
            }
            counts.push(row);
        }
        let direct = metrics::fleiss_kappa(&counts).unwrap();
        assert!((via_module - direct).abs() < 1e-12);
    }

    #[test]
    fn batch_sampler_shapes_and_determinism() {
        let mut texts_pool = Vec::new();
        for model in ["alpha", "beta"] {
            for temp in ["0", "0.7"] {
                for i in 0..30 {
                    let mut t = text(&format!("{model}-{temp}-{i}"));
                    t.model = model.into();
                    t.temperature = Temperature::parse(temp).unwrap();
                    texts_pool.push(t);
                }
            }
        }
        let annotators: Vec<String> = (1..=8).map(|i| format!("annotator-{i}")).collect();
        let batches = sample_annotation_batches(&texts_pool, &annotators, 60, 20, 11).unwrap();
        assert_eq!(batches.len(), 3);
        for batch in &batches {
            assert_eq!(batch.assignments.len(), 20);
            for assignment in &batch.assignments {
                assert_eq!(assignment.annotators.len(), 3);
                let distinct: BTreeSet<&String> = assignment.annotators.iter().collect();
                assert_eq!(distinct.len(), 3);
            }
        }
        // Balanced: 15 from each of the 4 strata.
        let ids: Vec<&str> = batches
            .iter()
            .flat_map(|b| b.assignments.iter().map(|a| a.text_id.as_str()))
            .collect();
        for model in ["alpha", "beta"] {
            for temp in ["0", "0.7"] {
                let prefix = format!("{model}-{temp}-");
                assert_eq!(ids.iter().filter(|id| id.starts_with(&prefix)).count(), 15);
            }
        }
        let again = sample_annotation_batches(&texts_pool, &annotators, 60, 20, 11).unwrap();
        assert_eq!(batches, again);
    }

    #[test]
    fn sampler_needs_three_annotators() {
        let err = sample_annotation_batches(&[text("t1")], &["a".into()], 1, 1, 0);
        assert!(matches!(
            err,
            Err(AnnotationError::NotEnoughAnnotators { .. })
        ));
    }
}
