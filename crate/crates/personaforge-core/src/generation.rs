//! Trait-conditioned text generation: prompt construction over score grids
//! and sampled profiles, plus detection and masking of trait leakage in the
//! answers.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{
    BigFiveTrait, DomainError, GeneratedText, PersonalityProfile, PromptScore, Span, Temperature,
};
use crate::provider::{ChatProvider, ChatRequest, ProviderError};
use crate::rng::SplitMix64;
use crate::template::{require_slot, TemplateError};

/// Errors raised while building or executing generation jobs.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerationError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("grid dimension `{0}` is empty")]
    EmptyDimension(&'static str),
    #[error("no trait definition configured for {0}")]
    MissingDefinition(BigFiveTrait),
    #[error("sampler statistics missing for {0}")]
    MissingSamplerStat(BigFiveTrait),
    #[error("sampler variance for {trait_} must be finite and >= 0, got {variance}")]
    InvalidVariance { trait_: BigFiveTrait, variance: f64 },
    #[error("sampler count must be positive")]
    ZeroCount,
    #[error("invalid mask span: {0}")]
    InvalidSpan(String),
    #[error("duplicate question id {0}")]
    DuplicateQuestion(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// One question the model answers in persona.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionBankEntry {
    pub id: String,
    pub text: String,
}

/// A validated question set with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionBank {
    entries: Vec<QuestionBankEntry>,
}

impl QuestionBank {
    pub fn new(entries: Vec<QuestionBankEntry>) -> Result<Self, GenerationError> {
        let mut seen = alloc::collections::BTreeSet::new();
        for entry in &entries {
            if !seen.insert(entry.id.clone()) {
                return Err(GenerationError::DuplicateQuestion(entry.id.clone()));
            }
        }
        Ok(QuestionBank { entries })
    }

    pub fn entries(&self) -> &[QuestionBankEntry] {
        &self.entries
    }

    pub fn text_of(&self, id: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .map(|e| e.text.as_str())
    }
}

/// Low/high score descriptions plus the general definition of one trait.
/// Shared between the generation prompt and the judge prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraitDefinition {
    pub definition: String,
    pub low: String,
    pub high: String,
}

/// Definition texts for each trait the experiments touch.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraitDefinitions(pub BTreeMap<BigFiveTrait, TraitDefinition>);

impl TraitDefinitions {
    pub fn get(&self, trait_: BigFiveTrait) -> Result<&TraitDefinition, GenerationError> {
        self.0
            .get(&trait_)
            .ok_or(GenerationError::MissingDefinition(trait_))
    }

    pub fn insert(&mut self, trait_: BigFiveTrait, definition: TraitDefinition) {
        self.0.insert(trait_, definition);
    }
}

/// Normal-distribution sampling settings for full-profile generation. The
/// per-trait means and variances are user-supplied configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSamplerConfig {
    /// (mean, variance) per trait; all five required.
    pub stats: BTreeMap<BigFiveTrait, (f64, f64)>,
    pub seed: u64,
    pub count: usize,
}

/// One pending generation call.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationJob {
    pub profile: PersonalityProfile,
    pub question: QuestionBankEntry,
    pub temperature: Temperature,
}

/// The fixed wording of the generation system prompt, slots excluded. The
/// lexical analyses lemmatize this (together with the trait definitions) to
/// measure how much generated vocabulary the prompts themselves supplied.
pub const GENERATION_PROMPT_FIXED_TEXT: &str = "TASK: Answer the QUESTION according to your \
PERSONALITY. Use INSTRUCTION. Use at most 5 sentences. Do not mention your personality traits \
in the text. Type only the answer, without the information about your personality score. \
Your personality trait is rated as. The personality trait is rated from 1 to 5. 1 is the \
lowest score and 5 is the highest score.";

/// Builds the persona text-generation request.
///
/// The system prompt carries one "Your personality trait X is rated as N."
/// line per profile entry (O,C,E,A,N order) and the low/high score
/// definitions of each prompted trait; the user prompt carries the question.
pub fn build_generation_prompt(
    profile: &PersonalityProfile,
    question: &QuestionBankEntry,
    definitions: &TraitDefinitions,
    model: &str,
) -> Result<ChatRequest, GenerationError> {
    build_generation_prompt_at(profile, question, definitions, model, Temperature::zero())
}

/// [`build_generation_prompt`] with an explicit temperature.
pub fn build_generation_prompt_at(
    profile: &PersonalityProfile,
    question: &QuestionBankEntry,
    definitions: &TraitDefinitions,
    model: &str,
    temperature: Temperature,
) -> Result<ChatRequest, GenerationError> {
    let question_text = require_slot("QUESTION", &question.text)?;

    let mut personality_lines = String::new();
    let mut definition_lines = String::new();
    for (trait_, score) in profile.scores() {
        let definition = definitions.get(trait_)?;
        let low = require_slot("DEFINITION OF LOW SCORE", &definition.low)?;
        let high = require_slot("DEFINITION OF HIGH SCORE", &definition.high)?;
        personality_lines.push_str(&format!(
            "- Your personality trait {} is rated as {}.\n",
            trait_.display_name(),
            score.get()
        ));
        definition_lines.push_str(&format!("- {low}\n- {high}\n"));
    }

    let system = format!(
        "TASK:\n\
         Answer the QUESTION according to your PERSONALITY. Use INSTRUCTION. Use at most 5 sentences. Do not mention your personality traits in the text. Type only the answer, without the information about your personality score.\n\
         \n\
         PERSONALITY:\n\
         {personality_lines}\
         \n\
         INSTRUCTION:\n\
         - The personality trait is rated from 1 to 5. 1 is the lowest score and 5 is the highest score.\n\
         {definition_lines}"
    );
    // Drop the trailing newline left by the last definition line.
    let system = system.trim_end_matches('\n').to_string();
    let user = format!("QUESTION:\n```\n{question_text}\n```");
    Ok(ChatRequest::new(model, system, user, temperature)?)
}

/// Cartesian product of trait x score x temperature x question, each job a
/// single-trait profile. Job order follows that nesting, so ids assigned by
/// position are stable.
pub fn single_trait_grid(
    traits: &[BigFiveTrait],
    scores: &[PromptScore],
    temperatures: &[Temperature],
    questions: &[QuestionBankEntry],
) -> Result<Vec<GenerationJob>, GenerationError> {
    if traits.is_empty() {
        return Err(GenerationError::EmptyDimension("traits"));
    }
    if scores.is_empty() {
        return Err(GenerationError::EmptyDimension("scores"));
    }
    if temperatures.is_empty() {
        return Err(GenerationError::EmptyDimension("temperatures"));
    }
    if questions.is_empty() {
        return Err(GenerationError::EmptyDimension("questions"));
    }
    let mut jobs =
        Vec::with_capacity(traits.len() * scores.len() * temperatures.len() * questions.len());
    for trait_ in traits {
        for score in scores {
            for temperature in temperatures {
                for question in questions {
                    jobs.push(GenerationJob {
                        profile: PersonalityProfile::single(*trait_, *score),
                        question: question.clone(),
                        temperature: temperature.clone(),
                    });
                }
            }
        }
    }
    Ok(jobs)
}

/// Full-profile jobs: every sampled profile answers every question at every
/// temperature.
pub fn profile_jobs(
    profiles: &[PersonalityProfile],
    temperatures: &[Temperature],
    questions: &[QuestionBankEntry],
) -> Result<Vec<GenerationJob>, GenerationError> {
    if profiles.is_empty() {
        return Err(GenerationError::EmptyDimension("profiles"));
    }
    if temperatures.is_empty() {
        return Err(GenerationError::EmptyDimension("temperatures"));
    }
    if questions.is_empty() {
        return Err(GenerationError::EmptyDimension("questions"));
    }
    let mut jobs = Vec::new();
    for profile in profiles {
        for temperature in temperatures {
            for question in questions {
                jobs.push(GenerationJob {
                    profile: profile.clone(),
                    question: question.clone(),
                    temperature: temperature.clone(),
                });
            }
        }
    }
    Ok(jobs)
}

/// Draws full profiles from independent per-trait normal distributions.
///
/// Each draw is rounded to the nearest integer and then clamped into 1..=5.
/// Draw order is (profile, trait in O,C,E,A,N order), so a fixed seed always
/// yields the same profile list.
pub fn sample_profiles(
    config: &ProfileSamplerConfig,
) -> Result<Vec<PersonalityProfile>, GenerationError> {
    if config.count == 0 {
        return Err(GenerationError::ZeroCount);
    }
    for trait_ in BigFiveTrait::ALL {
        let (_, variance) = config
            .stats
            .get(&trait_)
            .ok_or(GenerationError::MissingSamplerStat(trait_))?;
        if !variance.is_finite() || *variance < 0.0 {
            return Err(GenerationError::InvalidVariance {
                trait_,
                variance: *variance,
            });
        }
    }
    let mut rng = SplitMix64::new(config.seed);
    let mut profiles = Vec::with_capacity(config.count);
    for _ in 0..config.count {
        let mut scores = BTreeMap::new();
        for trait_ in BigFiveTrait::ALL {
            let (mean, variance) = config.stats[&trait_];
            let draw = rng.next_normal(mean, libm::sqrt(variance));
            let rounded = libm::round(draw);
            let clamped = if rounded < 1.0 {
                1
            } else if rounded > 5.0 {
                5
            } else {
                rounded as u8
            };
            scores.insert(
                trait_,
                PromptScore::new(clamped).expect("clamped into range"),
            );
        }
        profiles.push(PersonalityProfile::full(scores)?);
    }
    Ok(profiles)
}

/// A job that could not produce a record, preserved in the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub job_index: usize,
    pub question_id: String,
    pub error: String,
}

/// The outcome of executing a job list: records plus explicit failures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenerationRun {
    pub texts: Vec<GeneratedText>,
    pub failures: Vec<GenerationFailure>,
}

/// Executes one job; `id` becomes the record id.
pub fn run_generation_job(
    provider: &dyn ChatProvider,
    job: &GenerationJob,
    definitions: &TraitDefinitions,
    model: &str,
    id: String,
) -> Result<GeneratedText, GenerationError> {
    let request = build_generation_prompt_at(
        &job.profile,
        &job.question,
        definitions,
        model,
        job.temperature.clone(),
    )?;
    let response = provider.complete(&request)?;
    Ok(GeneratedText::new(
        id,
        model.to_string(),
        job.temperature.clone(),
        job.question.id.clone(),
        job.profile.clone(),
        response.text,
    ))
}

/// Runs every job in order. Failed jobs are recorded in the run log and
/// skipped; they never disappear silently.
pub fn generate_texts(
    provider: &dyn ChatProvider,
    jobs: &[GenerationJob],
    definitions: &TraitDefinitions,
    model: &str,
) -> GenerationRun {
    let mut run = GenerationRun::default();
    for (index, job) in jobs.iter().enumerate() {
        let id = format!("txt-{index:05}");
        match run_generation_job(provider, job, definitions, model, id) {
            Ok(text) => run.texts.push(text),
            Err(err) => run.failures.push(GenerationFailure {
                job_index: index,
                question_id: job.question.id.clone(),
                error: err.to_string(),
            }),
        }
    }
    run
}

/// Phrases whose appearance in a generated text gives the persona away.
/// Lines starting with `#` in the source file are comments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageLexicon {
    phrases: Vec<Vec<char>>,
    originals: Vec<String>,
}

impl LeakageLexicon {
    pub fn new<I: IntoIterator<Item = String>>(phrases: I) -> Self {
        let mut originals: Vec<String> = phrases
            .into_iter()
            .map(|p| p.trim().to_lowercase())
            .filter(|p| !p.is_empty())
            .collect();
        originals.sort();
        originals.dedup();
        let chars = originals.iter().map(|p| p.chars().collect()).collect();
        LeakageLexicon {
            phrases: chars,
            originals,
        }
    }

    pub fn parse(source: &str) -> Self {
        Self::new(
            source
                .lines()
                .filter(|line| !line.trim_start().starts_with('#'))
                .map(|line| line.to_string()),
        )
    }

    /// The built-in phrase list: trait names, persona-prompt wording, and
    /// score phrases.
    pub fn default_phrases() -> Vec<String> {
        let mut phrases: Vec<String> = BigFiveTrait::ALL
            .iter()
            .map(|t| t.key().to_string())
            .collect();
        phrases.push("extroversion".to_string());
        phrases.push("openness to experience".to_string());
        phrases.push("big five".to_string());
        phrases.push("personality".to_string());
        phrases.push("personality trait".to_string());
        phrases.push("my personality trait".to_string());
        phrases.push("trait score".to_string());
        phrases.push("rated as".to_string());
        phrases.push("score".to_string());
        for n in 1..=5 {
            phrases.push(format!("score of {n}"));
        }
        phrases
    }

    pub fn default_lexicon() -> Self {
        Self::new(Self::default_phrases())
    }

    pub fn phrases(&self) -> &[String] {
        &self.originals
    }
}

/// A leakage hit: where it is (char offsets) and which phrase matched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageMatch {
    pub span: Span,
    pub term: String,
}

fn fold_char(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

/// Scans a text for lexicon phrases, case-insensitively and on word
/// boundaries. Matching is greedy left to right: at each position the
/// longest matching phrase wins and scanning resumes after it, so the
/// returned spans never overlap.
pub fn detect_trait_leakage(text: &str, lexicon: &LeakageLexicon) -> Vec<LeakageMatch> {
    let chars: Vec<char> = text.chars().collect();
    let folded: Vec<char> = chars.iter().map(|&c| fold_char(c)).collect();
    let mut hits = Vec::new();
    let mut at = 0;
    while at < folded.len() {
        let mut best: Option<usize> = None;
        for (index, phrase) in lexicon.phrases.iter().enumerate() {
            let end = at + phrase.len();
            if end > folded.len() || phrase.is_empty() {
                continue;
            }
            if folded[at..end] != phrase[..] {
                continue;
            }
            // Word boundaries: the characters flanking the match must not be
            // alphanumeric, so "score" never fires inside "scored".
            let left_ok = at == 0 || !folded[at - 1].is_alphanumeric();
            let right_ok = end == folded.len() || !folded[end].is_alphanumeric();
            if !left_ok || !right_ok {
                continue;
            }
            match best {
                Some(current) if lexicon.phrases[current].len() >= phrase.len() => {}
                _ => best = Some(index),
            }
        }
        if let Some(index) = best {
            let len = lexicon.phrases[index].len();
            hits.push(LeakageMatch {
                span: Span::new(at, at + len),
                term: lexicon.originals[index].clone(),
            });
            at += len;
        } else {
            at += 1;
        }
    }
    hits
}

/// Replaces each span with `[MASKED]`. Spans must be in-bounds, ascending,
/// and non-overlapping — i.e. exactly what [`detect_trait_leakage`] emits
/// for the same text.
pub fn mask_leakage(text: &str, spans: &[Span]) -> Result<(String, bool), GenerationError> {
    let chars: Vec<char> = text.chars().collect();
    let mut previous_end = 0;
    for span in spans {
        if span.is_empty() || span.end > chars.len() {
            return Err(GenerationError::InvalidSpan(format!(
                "{}..{} out of bounds for {} chars",
                span.start,
                span.end,
                chars.len()
            )));
        }
        if span.start < previous_end {
            return Err(GenerationError::InvalidSpan(format!(
                "{}..{} overlaps or is out of order",
                span.start, span.end
            )));
        }
        previous_end = span.end;
    }
    if spans.is_empty() {
        return Ok((text.to_string(), false));
    }
    let mut masked = String::with_capacity(text.len());
    let mut cursor = 0;
    for span in spans {
        masked.extend(&chars[cursor..span.start]);
        masked.push_str("[MASKED]");
        cursor = span.end;
    }
    masked.extend(&chars[cursor..]);
    Ok((masked, true))
}

/// Detects and masks leakage in one record. The raw text moves to
/// `original_text` and the masked form replaces `text`; records without
/// hits pass through untouched.
pub fn apply_leakage_mask(
    mut record: GeneratedText,
    lexicon: &LeakageLexicon,
) -> Result<GeneratedText, GenerationError> {
    let hits = detect_trait_leakage(&record.text, lexicon);
    let spans: Vec<Span> = hits.iter().map(|h| h.span).collect();
    let (masked, edited) = mask_leakage(&record.text, &spans)?;
    if edited {
        record.original_text = Some(core::mem::take(&mut record.text));
        record.text = masked;
        record.edited = true;
        record.masked_spans = spans;
    }
    Ok(record)
}
