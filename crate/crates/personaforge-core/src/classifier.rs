//! The clue-and-reasoning judge: prompt construction, tolerant JSON verdict
//! parsing, and batch classification of generated texts per trait.
//!
//! The judge receives exactly the instructions a human annotator gets: first
//! list clues, then reason, then commit to a score in [-2, 2] or declare the
//! trait non-distinguishable.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{
    AnnotationScore, BigFiveTrait, ClassifierOutput, DecisionType, GeneratedText, Temperature,
};
use crate::generation::{TraitDefinition, TraitDefinitions};
use crate::provider::{ChatProvider, ChatRequest, ProviderError};
use crate::template::{require_slot, TemplateError};

/// Errors raised while classifying.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("no trait definition configured for {0}")]
    MissingDefinition(BigFiveTrait),
    #[error("judge output is not JSON: {0}")]
    MalformedJson(String),
    #[error("judge JSON violates the verdict schema: {0}")]
    SchemaViolation(String),
    #[error("classification failed after {attempts} attempts: {last_error}")]
    ClassificationFailed { attempts: u32, last_error: String },
    #[error("duplicate text id {0} in classification input")]
    DuplicateTextId(String),
    #[error("unknown question id {0}")]
    UnknownQuestion(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Judge settings. The judge model itself is whatever provider the caller
/// hands in; temperature defaults to 0 for stability.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    /// Re-asks allowed when the judge fails to return parseable JSON.
    pub retry_limit: u32,
    pub temperature: Temperature,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            retry_limit: 2,
            temperature: Temperature::zero(),
        }
    }
}

/// Which traits to classify each text for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraitSelector {
    /// Only the traits present in the text's prompted profile.
    Prompted,
    /// All five traits regardless of the profile.
    All,
}

/// Builds the judge request for one (text, trait) pair.
pub fn build_classifier_prompt(
    trait_: BigFiveTrait,
    question_text: &str,
    answer_text: &str,
    definition: &TraitDefinition,
    model: &str,
    temperature: Temperature,
) -> Result<ChatRequest, ClassifierError> {
    let question = require_slot("QUESTION", question_text)?;
    let answer = require_slot("ANSWER", answer_text)?;
    let general = require_slot("DEFINITION", &definition.definition)?;
    let high = require_slot("DEFINITION OF HIGH SCORE", &definition.high)?;
    let low = require_slot("DEFINITION OF LOW SCORE", &definition.low)?;
    let name = trait_.display_name();

    let system = format!(
        "You will be provided with answers to questions. Detect the score of {name} for the author of the INPUT from the list [-2, -1, 0, 1, 2] or Nondistinguishable. Use INSTRUCTION.\n\
         TASK:\n\
         1. First, list CLUES (i.e., keywords, phrases, contextual information, semantic relations, semantic meaning, tones, references) that support the score determination of {name} of INPUT.\n\
         2. Second, deduce the diagnostic REASONING process from premises (i.e., clues, input) that supports the INPUT score determination (Limit the number of words to 130).\n\
         3. Third, based on clues, reasoning and input, determine the score of {name} for the author of INPUT from the list [-2, -1, 0, 1, 2] or Nondistinguishable.\n\
         4. Mark what made you choose this score as decision type: Explicit signs, Implicit signs, Intuition, Nondistinguishable.\n\
         5. Provide your output in JSON format with the keys: score, clues, reasoning, decision type.\n\
         PROVIDE ONLY JSON.\n\
         \n\
         INSTRUCTION:\n\
         - Definition: {general}\n\
         - High score of {name} (maximum 2):\n\
         '{high}'\n\
         - Low score of {name} (minimum -2):\n\
         '{low}'\n\
         - Explicit signs: The person mentions obvious facts that are connected with this trait score.\n\
         - Implicit signs: The person mentions facts that may imply them having this trait score.\n\
         - Intuition: My intuition tells that the person has this trait score.\n\
         - Nondistinguishable: I can't tell what trait score the person has.\n\
         - If the text does not contain substantial, significant, and convincing indicators of the trait score, then use Nondistinguishable.\n\
         - Choose something other than Nondistinguishable if you have a high degree of confidence in the answer."
    );
    let user = format!("Question: {question}\nINPUT: {answer}");
    Ok(ChatRequest::new(model, system, user, temperature)?)
}

/// A parsed judge verdict, before it is attached to a text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierVerdict {
    pub score: AnnotationScore,
    pub clues: Vec<String>,
    pub reasoning: String,
    pub decision_type: DecisionType,
}

impl ClassifierVerdict {
    pub fn into_output(
        self,
        text_id: String,
        trait_: BigFiveTrait,
    ) -> Result<ClassifierOutput, ClassifierError> {
        ClassifierOutput::new(
            text_id,
            trait_,
            self.score,
            self.clues,
            self.reasoning,
            self.decision_type,
        )
        .map_err(|e| ClassifierError::SchemaViolation(e.to_string()))
    }
}

fn strip_code_fences(raw: &str) -> &str {
    let trimmed = raw.trim();
    if let Some(after_open) = trimmed.split_once("```") {
        let body = after_open.1;
        // Drop an optional language tag on the fence line.
        let body = body.strip_prefix("json").unwrap_or(body);
        if let Some((inner, _)) = body.split_once("```") {
            return inner.trim();
        }
        return body.trim();
    }
    trimmed
}

fn normalize_key(key: &str) -> String {
    key.chars()
        .flat_map(|c| c.to_lowercase())
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect()
}

fn field<'a>(object: &'a serde_json::Map<String, Value>, name: &str) -> Option<&'a Value> {
    object
        .iter()
        .find(|(key, _)| normalize_key(key) == name)
        .map(|(_, value)| value)
}

/// Parses a judge response into a verdict, tolerantly.
///
/// Code fences and surrounding prose are stripped, the first JSON object is
/// taken, and both `"decision type"` and `"decision_type"` spellings are
/// accepted. The score must be an integer in [-2, 2] or the string
/// `"Nondistinguishable"` (case-insensitive), and it must agree with the
/// decision type on non-distinguishability.
pub fn parse_classifier_json(raw: &str) -> Result<ClassifierVerdict, ClassifierError> {
    let stripped = strip_code_fences(raw);
    let start = stripped
        .find('{')
        .ok_or_else(|| ClassifierError::MalformedJson("no JSON object found".to_string()))?;
    let mut stream = serde_json::Deserializer::from_str(&stripped[start..]).into_iter::<Value>();
    let value = stream
        .next()
        .ok_or_else(|| ClassifierError::MalformedJson("no JSON value found".to_string()))?
        .map_err(|e| ClassifierError::MalformedJson(e.to_string()))?;
    let object = value.as_object().ok_or_else(|| {
        ClassifierError::MalformedJson("payload is not a JSON object".to_string())
    })?;

    let score_value = field(object, "score")
        .ok_or_else(|| ClassifierError::SchemaViolation("missing key `score`".to_string()))?;
    let score = match score_value {
        Value::Number(n) => {
            let as_int = n
                .as_i64()
                .or_else(|| {
                    n.as_f64()
                        .filter(|&f| libm::trunc(f) == f)
                        .map(|f| f as i64)
                })
                .ok_or_else(|| {
                    ClassifierError::SchemaViolation(format!("score {n} is not an integer"))
                })?;
            let small = i8::try_from(as_int).map_err(|_| {
                ClassifierError::SchemaViolation(format!("score {as_int} out of range"))
            })?;
            AnnotationScore::value(small)
                .map_err(|e| ClassifierError::SchemaViolation(e.to_string()))?
        }
        Value::String(s) if AnnotationScore::parse_nd_marker(s) => {
            AnnotationScore::NonDistinguishable
        }
        other => {
            return Err(ClassifierError::SchemaViolation(format!(
                "unrecognized score {other}"
            )))
        }
    };

    let clues = match field(object, "clues") {
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| match item {
                Value::String(s) => Ok(s.clone()),
                other => Err(ClassifierError::SchemaViolation(format!(
                    "clue {other} is not a string"
                ))),
            })
            .collect::<Result<Vec<String>, _>>()?,
        // A single bare string is close enough to a one-element list.
        Some(Value::String(s)) => alloc::vec![s.clone()],
        Some(other) => {
            return Err(ClassifierError::SchemaViolation(format!(
                "clues must be a list of strings, got {other}"
            )))
        }
        None => {
            return Err(ClassifierError::SchemaViolation(
                "missing key `clues`".to_string(),
            ))
        }
    };

    let reasoning = match field(object, "reasoning") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => {
            return Err(ClassifierError::SchemaViolation(format!(
                "reasoning must be a string, got {other}"
            )))
        }
        None => {
            return Err(ClassifierError::SchemaViolation(
                "missing key `reasoning`".to_string(),
            ))
        }
    };

    let decision_raw = field(object, "decision_type").ok_or_else(|| {
        ClassifierError::SchemaViolation("missing key `decision type`".to_string())
    })?;
    let decision_type = match decision_raw {
        Value::String(s) => DecisionType::parse(s).ok_or_else(|| {
            ClassifierError::SchemaViolation(format!("unrecognized decision type `{s}`"))
        })?,
        other => {
            return Err(ClassifierError::SchemaViolation(format!(
                "decision type must be a string, got {other}"
            )))
        }
    };

    let score_nd = !score.is_numeric();
    let decision_nd = decision_type == DecisionType::NonDistinguishable;
    if score_nd != decision_nd {
        return Err(ClassifierError::SchemaViolation(
            "score and decision type disagree on non-distinguishability".to_string(),
        ));
    }

    Ok(ClassifierVerdict {
        score,
        clues,
        reasoning,
        decision_type,
    })
}

/// A successful classification with its attempt history.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationOutcome {
    pub output: ClassifierOutput,
    pub attempts: u32,
    /// Raw judge responses, one per attempt, the last being the parsed one.
    pub raw_attempts: Vec<String>,
}

/// Classifies one text for one trait, re-asking on unparseable output.
///
/// Each re-ask appends a `PROVIDE ONLY JSON.` reminder to the user prompt
/// and bumps the sample index so a cached bad answer is never replayed.
#[allow(clippy::too_many_arguments)]
pub fn classify_text(
    provider: &dyn ChatProvider,
    model: &str,
    config: &ClassifierConfig,
    text: &GeneratedText,
    trait_: BigFiveTrait,
    question_text: &str,
    definitions: &TraitDefinitions,
) -> Result<ClassificationOutcome, ClassifierError> {
    let definition = definitions
        .0
        .get(&trait_)
        .ok_or(ClassifierError::MissingDefinition(trait_))?;
    let base = build_classifier_prompt(
        trait_,
        question_text,
        &text.text,
        definition,
        model,
        config.temperature.clone(),
    )?;
    let mut raw_attempts = Vec::new();
    let mut last_error = String::new();
    for attempt in 0..=config.retry_limit {
        let request = if attempt == 0 {
            base.clone()
        } else {
            let mut retry = base.clone();
            retry.user_prompt = format!("{}\n\nPROVIDE ONLY JSON.", base.user_prompt);
            retry.with_sample_index(attempt)
        };
        let response = provider.complete(&request)?;
        raw_attempts.push(response.text.clone());
        match parse_classifier_json(&response.text) {
            Ok(verdict) => {
                let output = verdict.into_output(text.id.clone(), trait_)?;
                return Ok(ClassificationOutcome {
                    output,
                    attempts: attempt + 1,
                    raw_attempts,
                });
            }
            Err(
                err @ (ClassifierError::MalformedJson(_) | ClassifierError::SchemaViolation(_)),
            ) => {
                last_error = err.to_string();
            }
            Err(other) => return Err(other),
        }
    }
    Err(ClassifierError::ClassificationFailed {
        attempts: config.retry_limit + 1,
        last_error,
    })
}

/// A per-item failure inside a batch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationFailure {
    pub text_id: String,
    #[serde(rename = "trait")]
    pub trait_: BigFiveTrait,
    pub error: String,
}

/// Batch result: outputs plus explicit per-item failures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassificationRun {
    pub outputs: Vec<ClassifierOutput>,
    pub failures: Vec<ClassificationFailure>,
    pub total_attempts: u64,
}

/// Classifies a batch of texts. Duplicate text ids abort before any call;
/// individual failures are logged and the run continues.
pub fn classify_batch(
    provider: &dyn ChatProvider,
    model: &str,
    config: &ClassifierConfig,
    texts: &[GeneratedText],
    selector: TraitSelector,
    questions: &BTreeMap<String, String>,
    definitions: &TraitDefinitions,
) -> Result<ClassificationRun, ClassifierError> {
    let mut seen = BTreeSet::new();
    for text in texts {
        if !seen.insert(text.id.as_str()) {
            return Err(ClassifierError::DuplicateTextId(text.id.clone()));
        }
    }
    let mut run = ClassificationRun::default();
    for text in texts {
        let traits: Vec<BigFiveTrait> = match selector {
            TraitSelector::Prompted => text.profile.traits(),
            TraitSelector::All => BigFiveTrait::ALL.to_vec(),
        };
        for trait_ in traits {
            let Some(question_text) = questions.get(&text.question_id) else {
                run.failures.push(ClassificationFailure {
                    text_id: text.id.clone(),
                    trait_,
                    error: ClassifierError::UnknownQuestion(text.question_id.clone()).to_string(),
                });
                continue;
            };
            match classify_text(
                provider,
                model,
                config,
                text,
                trait_,
                question_text,
                definitions,
            ) {
                Ok(outcome) => {
                    run.total_attempts += outcome.attempts as u64;
                    run.outputs.push(outcome.output);
                }
                Err(err) => run.failures.push(ClassificationFailure {
                    text_id: text.id.clone(),
                    trait_,
                    error: err.to_string(),
                }),
            }
        }
    }
    Ok(run)
}
