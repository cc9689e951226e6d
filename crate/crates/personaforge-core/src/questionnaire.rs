//! Questionnaire administration: build the Likert prompt for one statement,
//! parse the constrained answer, apply reverse keying, and aggregate trait
//! scores.
//!
//! Each statement is an independent chat call with no conversation memory;
//! high- and low-trait runs differ only in the persona text placed in the
//! system prompt's PERSONALITY block.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{BigFiveTrait, Temperature};
use crate::provider::{ChatProvider, ChatRequest, ProviderError};
use crate::template::{require_slot, TemplateError};

/// Errors raised while administering or scoring a questionnaire.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuestionnaireError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("response matches no answer option: `{0}`")]
    Unparseable(String),
    #[error("response matches {count} distinct answer options: `{raw}`")]
    Ambiguous { raw: String, count: usize },
    #[error("no records to aggregate")]
    EmptyInput,
    #[error("records mix {0}; aggregation expects one (trait, model, level) group")]
    MixedRecords(String),
    #[error("questionnaire has no items for trait {0}")]
    NoItemsForTrait(BigFiveTrait),
    #[error("duplicate questionnaire item {0}")]
    DuplicateItem(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// One questionnaire statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireItem {
    pub id: String,
    pub statement: String,
    #[serde(rename = "trait")]
    pub trait_: BigFiveTrait,
    pub reverse_keyed: bool,
}

/// A validated item set: ids and statements are unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Questionnaire {
    items: Vec<QuestionnaireItem>,
}

impl Questionnaire {
    pub fn new(items: Vec<QuestionnaireItem>) -> Result<Self, QuestionnaireError> {
        let mut ids = BTreeSet::new();
        let mut statements = BTreeSet::new();
        for item in &items {
            if !ids.insert(item.id.clone()) {
                return Err(QuestionnaireError::DuplicateItem(item.id.clone()));
            }
            if !statements.insert(item.statement.clone()) {
                return Err(QuestionnaireError::DuplicateItem(item.statement.clone()));
            }
        }
        Ok(Questionnaire { items })
    }

    pub fn items(&self) -> &[QuestionnaireItem] {
        &self.items
    }

    pub fn items_for(&self, trait_: BigFiveTrait) -> Vec<&QuestionnaireItem> {
        self.items.iter().filter(|i| i.trait_ == trait_).collect()
    }
}

/// The five answer options, in ordinal order 1..=5.
pub const LIKERT_OPTIONS: [&str; 5] = [
    "disagree strongly with the statement",
    "disagree a little with the statement",
    "agree nor disagree with the statement",
    "agree a little with the statement",
    "agree strongly with the statement",
];

/// A parsed Likert answer, ordinal 1..=5 bound to [`LIKERT_OPTIONS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LikertLevel(u8);

impl LikertLevel {
    pub fn from_ordinal(ordinal: u8) -> Option<Self> {
        (1..=5).contains(&ordinal).then_some(LikertLevel(ordinal))
    }

    pub fn ordinal(&self) -> u8 {
        self.0
    }

    pub fn canonical(&self) -> &'static str {
        LIKERT_OPTIONS[(self.0 - 1) as usize]
    }
}

impl TryFrom<u8> for LikertLevel {
    type Error = String;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        LikertLevel::from_ordinal(value)
            .ok_or_else(|| format!("likert ordinal {value} not in 1..=5"))
    }
}

impl From<LikertLevel> for u8 {
    fn from(level: LikertLevel) -> u8 {
        level.0
    }
}

/// Which pole of a trait the persona text asks the model to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetLevel {
    High,
    Low,
}

impl TargetLevel {
    pub const ALL: [TargetLevel; 2] = [TargetLevel::High, TargetLevel::Low];

    pub fn as_str(&self) -> &'static str {
        match self {
            TargetLevel::High => "high",
            TargetLevel::Low => "low",
        }
    }
}

/// One administered statement: the raw answer plus its parsed and keyed
/// score. Unparseable answers keep the raw response and carry `error`
/// instead of a score; they are excluded from aggregation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireRunRecord {
    pub model: String,
    #[serde(rename = "trait")]
    pub trait_: BigFiveTrait,
    pub level: TargetLevel,
    pub temperature: Temperature,
    pub item_id: String,
    pub repetition: u32,
    pub raw_response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likert: Option<LikertLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_score: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Builds the questionnaire chat request for one statement. The option list
/// and layout are fixed; only the PERSONALITY block and the statement vary.
pub fn build_questionnaire_prompt(
    item: &QuestionnaireItem,
    trait_prompt_text: &str,
    model: &str,
    temperature: Temperature,
) -> Result<ChatRequest, QuestionnaireError> {
    let persona = require_slot("TRAIT PROMPT", trait_prompt_text)?;
    let statement = require_slot("STATEMENT", &item.statement)?;
    let system = format!(
        "TASK:\n\
         Indicate your level of agreement or disagreement with the statement in the CHARACTERISTICS according to your PERSONALITY. Use only the PROVIDED OPTIONS.\n\
         \n\
         PERSONALITY:\n\
         ```\n\
         {persona}\n\
         ```\n\
         \n\
         PROVIDED OPTIONS:\n\
         - disagree strongly with the statement\n\
         - disagree a little with the statement\n\
         - agree nor disagree with the statement\n\
         - agree a little with the statement\n\
         - agree strongly with the statement\n\
         \n\
         Provide your output only from the constant list ['disagree strongly with the statement', 'disagree a little with the statement', 'agree nor disagree with the statement', 'agree a little with the statement', 'agree strongly with the statement'] without explanation."
    );
    let user = format!("CHARACTERISTICS:\n```\n{statement}\n```");
    Ok(ChatRequest::new(model, system, user, temperature)?)
}

/// Parses a model answer into a Likert level.
///
/// Matching is case-insensitive containment against the five full option
/// strings. A match whose span lies inside another match is discarded, so
/// the "agree ..." embedded in every "disagree ..." option never shadows it.
/// Zero surviving options is unparseable; two or more distinct surviving
/// options is ambiguous.
pub fn parse_likert_response(raw: &str) -> Result<LikertLevel, QuestionnaireError> {
    let haystack = raw.trim().to_lowercase();
    let mut matches: Vec<(usize, usize, u8)> = Vec::new();
    for (index, option) in LIKERT_OPTIONS.iter().enumerate() {
        let mut from = 0;
        while let Some(at) = haystack[from..].find(option) {
            let start = from + at;
            matches.push((start, start + option.len(), index as u8 + 1));
            from = start + 1;
        }
    }
    let surviving: Vec<u8> = matches
        .iter()
        .filter(|(start, end, _)| {
            !matches
                .iter()
                .any(|(s2, e2, _)| (s2, e2) != (start, end) && s2 <= start && end <= e2)
        })
        .map(|(_, _, ordinal)| *ordinal)
        .collect();
    let distinct: BTreeSet<u8> = surviving.iter().copied().collect();
    match distinct.len() {
        0 => Err(QuestionnaireError::Unparseable(raw.to_string())),
        1 => Ok(LikertLevel(*distinct.iter().next().unwrap())),
        count => Err(QuestionnaireError::Ambiguous {
            raw: raw.to_string(),
            count,
        }),
    }
}

/// Reverse keying: agreement with a reverse-keyed statement indicates a low
/// trait level, so its ordinal is inverted.
pub fn score_item(likert: LikertLevel, reverse_keyed: bool) -> u8 {
    if reverse_keyed {
        6 - likert.ordinal()
    } else {
        likert.ordinal()
    }
}

/// Arithmetic mean of the keyed item scores in one (trait, model, level)
/// group. Records carrying a parse error are skipped.
pub fn aggregate_trait_score(
    records: &[QuestionnaireRunRecord],
) -> Result<f64, QuestionnaireError> {
    let first = records.first().ok_or(QuestionnaireError::EmptyInput)?;
    for record in records {
        if record.trait_ != first.trait_ {
            return Err(QuestionnaireError::MixedRecords("traits".to_string()));
        }
        if record.model != first.model {
            return Err(QuestionnaireError::MixedRecords("models".to_string()));
        }
        if record.level != first.level {
            return Err(QuestionnaireError::MixedRecords("levels".to_string()));
        }
    }
    let scores: Vec<u8> = records.iter().filter_map(|r| r.item_score).collect();
    if scores.is_empty() {
        return Err(QuestionnaireError::EmptyInput);
    }
    Ok(scores.iter().map(|&s| s as f64).sum::<f64>() / scores.len() as f64)
}

/// Administers every item of one trait, `repetitions` times each.
///
/// One record per (repetition, item), in that nesting order. Unparseable
/// answers become records with an error marker; provider failures are
/// retried once per item and then propagate.
#[allow(clippy::too_many_arguments)]
pub fn run_questionnaire(
    provider: &dyn ChatProvider,
    questionnaire: &Questionnaire,
    trait_: BigFiveTrait,
    level: TargetLevel,
    trait_prompt_text: &str,
    model: &str,
    temperature: Temperature,
    repetitions: u32,
) -> Result<Vec<QuestionnaireRunRecord>, QuestionnaireError> {
    let items = questionnaire.items_for(trait_);
    if items.is_empty() {
        return Err(QuestionnaireError::NoItemsForTrait(trait_));
    }
    let mut records = Vec::with_capacity(items.len() * repetitions as usize);
    for repetition in 1..=repetitions {
        for item in &items {
            let request =
                build_questionnaire_prompt(item, trait_prompt_text, model, temperature.clone())?
                    .with_sample_index(repetition);
            let response = match provider.complete(&request) {
                Ok(response) => response,
                // One re-ask per item before giving up on the run.
                Err(_) => provider.complete(&request)?,
            };
            let mut record = QuestionnaireRunRecord {
                model: model.to_string(),
                trait_,
                level,
                temperature: temperature.clone(),
                item_id: item.id.clone(),
                repetition,
                raw_response: response.text.clone(),
                likert: None,
                item_score: None,
                error: None,
            };
            match parse_likert_response(&response.text) {
                Ok(likert) => {
                    record.likert = Some(likert);
                    record.item_score = Some(score_item(likert, item.reverse_keyed));
                }
                Err(err) => record.error = Some(err.to_string()),
            }
            records.push(record);
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{MockBehavior, MockMatcher, MockProvider};
    use alloc::vec;

    fn item(id: &str, statement: &str, trait_: BigFiveTrait, reverse: bool) -> QuestionnaireItem {
        QuestionnaireItem {
            id: id.to_string(),
            statement: statement.to_string(),
            trait_,
            reverse_keyed: reverse,
        }
    }

    #[test]
    fn prompt_characteristics_block_is_exact() {
        let item = item(
            "o10",
            "Is curious about many different things",
            BigFiveTrait::Openness,
            false,
        );
        let request = build_questionnaire_prompt(
            &item,
            "You are open to experience.",
            "m",
            Temperature::zero(),
        )
        .unwrap();
        assert_eq!(
            request.user_prompt,
            "CHARACTERISTICS:\n```\nIs curious about many different things\n```"
        );
        assert!(request
            .system_prompt
            .contains("Provide your output only from the constant list"));
    }

    #[test]
    fn empty_trait_prompt_is_a_template_error() {
        let item = item("x", "Is talkative", BigFiveTrait::Extraversion, false);
        let err = build_questionnaire_prompt(&item, "", "m", Temperature::zero());
        assert_eq!(
            err,
            Err(QuestionnaireError::Template(TemplateError::EmptySlot(
                "TRAIT PROMPT"
            )))
        );
    }

    #[test]
    fn runs_differ_only_in_the_persona_slot() {
        let item = item("x", "Is talkative", BigFiveTrait::Extraversion, false);
        let high =
            build_questionnaire_prompt(&item, "HIGH PERSONA", "m", Temperature::zero()).unwrap();
        let low =
            build_questionnaire_prompt(&item, "LOW PERSONA", "m", Temperature::zero()).unwrap();
        assert_eq!(high.user_prompt, low.user_prompt);
        assert_eq!(
            high.system_prompt.replace("HIGH PERSONA", "LOW PERSONA"),
            low.system_prompt
        );
    }

    #[test]
    fn parse_all_canonical_options() {
        for (i, option) in LIKERT_OPTIONS.iter().enumerate() {
            assert_eq!(
                parse_likert_response(option).unwrap().ordinal(),
                i as u8 + 1
            );
        }
    }

    #[test]
    fn parse_is_trim_and_case_insensitive() {
        let parsed = parse_likert_response("  Disagree strongly with the statement.  ").unwrap();
        assert_eq!(parsed.ordinal(), 1);
        assert_eq!(
            parse_likert_response("agree a little with the statement")
                .unwrap()
                .ordinal(),
            4
        );
    }

    #[test]
    fn embedded_agree_option_does_not_shadow_disagree() {
        // "disagree a little ..." textually contains "agree a little ...".
        let parsed = parse_likert_response("I disagree a little with the statement").unwrap();
        assert_eq!(parsed.ordinal(), 2);
    }

    #[test]
    fn unparseable_and_ambiguous_responses() {
        assert!(matches!(
            parse_likert_response("I feel neutral"),
            Err(QuestionnaireError::Unparseable(_))
        ));
        let two =
            "agree strongly with the statement, or maybe disagree a little with the statement";
        assert!(matches!(
            parse_likert_response(two),
            Err(QuestionnaireError::Ambiguous { count: 2, .. })
        ));
    }

    #[test]
    fn reverse_keying() {
        let five = LikertLevel::from_ordinal(5).unwrap();
        let three = LikertLevel::from_ordinal(3).unwrap();
        let two = LikertLevel::from_ordinal(2).unwrap();
        assert_eq!(score_item(five, true), 1);
        assert_eq!(score_item(three, true), 3);
        assert_eq!(score_item(two, false), 2);
    }

    #[test]
    fn reverse_keying_is_an_involution() {
        for ordinal in 1..=5u8 {
            let level = LikertLevel::from_ordinal(ordinal).unwrap();
            let keyed = score_item(level, true);
            let back = score_item(LikertLevel::from_ordinal(keyed).unwrap(), true);
            assert_eq!(back, ordinal);
        }
    }

    fn record(score: u8) -> QuestionnaireRunRecord {
        QuestionnaireRunRecord {
            model: "m".into(),
            trait_: BigFiveTrait::Extraversion,
            level: TargetLevel::High,
            temperature: Temperature::zero(),
            item_id: "x".into(),
            repetition: 1,
            raw_response: String::new(),
            likert: LikertLevel::from_ordinal(score.min(5)),
            item_score: Some(score),
            error: None,
        }
    }

    #[test]
    fn aggregation_examples() {
        assert_eq!(
            aggregate_trait_score(&[record(5), record(5), record(5)]).unwrap(),
            5.0
        );
        assert_eq!(aggregate_trait_score(&[record(1), record(5)]).unwrap(), 3.0);
        // Mean of 2,3,4,5 done by hand: 14/4.
        assert_eq!(
            aggregate_trait_score(&[record(2), record(3), record(4), record(5)]).unwrap(),
            3.5
        );
        assert_eq!(
            aggregate_trait_score(&[]),
            Err(QuestionnaireError::EmptyInput)
        );
    }

    #[test]
    fn aggregation_is_order_invariant() {
        let a = aggregate_trait_score(&[record(1), record(4), record(5)]).unwrap();
        let b = aggregate_trait_score(&[record(5), record(1), record(4)]).unwrap();
        assert_eq!(a, b);
    }

    fn ten_forward_items() -> Questionnaire {
        let items = (0..10)
            .map(|i| {
                item(
                    &format!("o{i}"),
                    &format!("Statement number {i}"),
                    BigFiveTrait::Openness,
                    false,
                )
            })
            .collect();
        Questionnaire::new(items).unwrap()
    }

    #[test]
    fn run_all_agree_strongly_forward_items() {
        let questionnaire = ten_forward_items();
        let mock = MockProvider::new().with_default_reply("agree strongly with the statement");
        let records = run_questionnaire(
            &mock,
            &questionnaire,
            BigFiveTrait::Openness,
            TargetLevel::High,
            "persona",
            "m",
            Temperature::zero(),
            1,
        )
        .unwrap();
        assert_eq!(records.len(), 10);
        assert_eq!(aggregate_trait_score(&records).unwrap(), 5.0);
    }

    #[test]
    fn run_all_agree_strongly_reverse_items() {
        let items = (0..6)
            .map(|i| {
                item(
                    &format!("r{i}"),
                    &format!("Reverse statement {i}"),
                    BigFiveTrait::Neuroticism,
                    true,
                )
            })
            .collect();
        let questionnaire = Questionnaire::new(items).unwrap();
        let mock = MockProvider::new().with_default_reply("agree strongly with the statement");
        let records = run_questionnaire(
            &mock,
            &questionnaire,
            BigFiveTrait::Neuroticism,
            TargetLevel::Low,
            "persona",
            "m",
            Temperature::zero(),
            1,
        )
        .unwrap();
        assert_eq!(aggregate_trait_score(&records).unwrap(), 1.0);
    }

    #[test]
    fn mixed_script_over_extraversion_items_matches_hand_scoring() {
        // BFI-44 Extraversion: 8 items, 3 reverse-keyed.
        let specs: [(&str, &str, bool); 8] = [
            ("e1", "Is talkative", false),
            ("e6", "Is reserved", true),
            ("e11", "Is full of energy", false),
            ("e16", "Generates a lot of enthusiasm", false),
            ("e21", "Tends to be quiet", true),
            ("e26", "Has an assertive personality", false),
            ("e31", "Is sometimes shy, inhibited", true),
            ("e36", "Is outgoing, sociable", false),
        ];
        let items: Vec<QuestionnaireItem> = specs
            .iter()
            .map(|(id, statement, reverse)| {
                item(id, statement, BigFiveTrait::Extraversion, *reverse)
            })
            .collect();
        let questionnaire = Questionnaire::new(items).unwrap();

        // Scripted answers per statement, with hand-computed keyed scores:
        //   talkative: agree strongly      -> 5
        //   reserved (R): disagree a little -> 6-2 = 4
        //   energy: agree a little          -> 4
        //   enthusiasm: agree nor disagree  -> 3
        //   quiet (R): agree strongly       -> 6-5 = 1
        //   assertive: disagree strongly    -> 1
        //   shy (R): disagree strongly      -> 6-1 = 5
        //   outgoing: agree a little        -> 4
        // Mean = (5+4+4+3+1+1+5+4)/8 = 27/8 = 3.375
        let script: [(&str, usize); 8] = [
            ("Is talkative", 4),
            ("Is reserved", 1),
            ("Is full of energy", 3),
            ("Generates a lot of enthusiasm", 2),
            ("Tends to be quiet", 4),
            ("Has an assertive personality", 0),
            ("Is sometimes shy, inhibited", 0),
            ("Is outgoing, sociable", 3),
        ];
        let mut mock = MockProvider::new();
        for (needle, option_index) in script {
            mock = mock.rule(
                MockMatcher::UserContains(needle.into()),
                MockBehavior::Reply(LIKERT_OPTIONS[option_index].into()),
            );
        }
        let records = run_questionnaire(
            &mock,
            &questionnaire,
            BigFiveTrait::Extraversion,
            TargetLevel::High,
            "persona",
            "m",
            Temperature::zero(),
            1,
        )
        .unwrap();
        assert_eq!(records.len(), 8);
        assert_eq!(aggregate_trait_score(&records).unwrap(), 3.375);
    }

    #[test]
    fn unparseable_answers_are_recorded_and_excluded() {
        let questionnaire = ten_forward_items();
        let mock = MockProvider::new()
            .rule(
                MockMatcher::UserContains("Statement number 0".into()),
                MockBehavior::Reply("I cannot answer that".into()),
            )
            .with_default_reply("agree a little with the statement");
        let records = run_questionnaire(
            &mock,
            &questionnaire,
            BigFiveTrait::Openness,
            TargetLevel::High,
            "persona",
            "m",
            Temperature::zero(),
            1,
        )
        .unwrap();
        assert_eq!(records.len(), 10);
        assert_eq!(records.iter().filter(|r| r.error.is_some()).count(), 1);
        assert_eq!(aggregate_trait_score(&records).unwrap(), 4.0);
    }

    #[test]
    fn no_items_for_trait_is_an_error() {
        let questionnaire = ten_forward_items();
        let mock = MockProvider::new().with_default_reply("agree strongly with the statement");
        let err = run_questionnaire(
            &mock,
            &questionnaire,
            BigFiveTrait::Neuroticism,
            TargetLevel::High,
            "persona",
            "m",
            Temperature::zero(),
            1,
        );
        assert_eq!(
            err,
            Err(QuestionnaireError::NoItemsForTrait(
                BigFiveTrait::Neuroticism
            ))
        );
    }

    #[test]
    fn duplicate_statements_rejected() {
        let items = vec![
            item("a", "Same statement", BigFiveTrait::Openness, false),
            item("b", "Same statement", BigFiveTrait::Openness, false),
        ];
        assert!(matches!(
            Questionnaire::new(items),
            Err(QuestionnaireError::DuplicateItem(_))
        ));
    }
}
