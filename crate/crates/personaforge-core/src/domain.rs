//! Core vocabulary shared by every pipeline stage: traits, score scales,
//! personality profiles, and the records that flow between stages.
//!
//! All values here are immutable after construction and safe to share across
//! threads. Constructors validate their invariants, so a deserialized record
//! is as trustworthy as a freshly built one.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Errors raised by domain constructors and record validation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("prompt score {0} out of range 1..=5")]
    PromptScoreOutOfRange(i64),
    #[error("annotation score {0} out of range -2..=2")]
    AnnotationScoreOutOfRange(i64),
    #[error("temperature `{0}` is not a real number in [0,1]")]
    InvalidTemperature(String),
    #[error("single-trait profile must contain exactly one score, got {0}")]
    SingleTraitShape(usize),
    #[error("full profile must contain all five traits, got {0}")]
    FullProfileShape(usize),
    #[error("unknown trait name `{0}`")]
    UnknownTrait(String),
    #[error("decision type and score disagree on non-distinguishability")]
    NdCoupling,
    #[error("masked spans present but record not marked edited")]
    UneditedMask,
    #[error("span {start}..{end} is invalid for a text of {len} chars")]
    SpanOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
}

/// The five personality dimensions, in the fixed O,C,E,A,N order used by
/// every prompt and report in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BigFiveTrait {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
}

impl BigFiveTrait {
    /// All five traits in O,C,E,A,N order.
    pub const ALL: [BigFiveTrait; 5] = [
        BigFiveTrait::Openness,
        BigFiveTrait::Conscientiousness,
        BigFiveTrait::Extraversion,
        BigFiveTrait::Agreeableness,
        BigFiveTrait::Neuroticism,
    ];

    /// Capitalized name as it appears inside prompt templates.
    pub fn display_name(&self) -> &'static str {
        match self {
            BigFiveTrait::Openness => "Openness",
            BigFiveTrait::Conscientiousness => "Conscientiousness",
            BigFiveTrait::Extraversion => "Extraversion",
            BigFiveTrait::Agreeableness => "Agreeableness",
            BigFiveTrait::Neuroticism => "Neuroticism",
        }
    }

    /// Lowercase name used in data files (`"openness"`, ...). Data files
    /// spell traits out in full so they stay self-describing; the OCEAN
    /// initials never appear in persisted records.
    pub fn key(&self) -> &'static str {
        match self {
            BigFiveTrait::Openness => "openness",
            BigFiveTrait::Conscientiousness => "conscientiousness",
            BigFiveTrait::Extraversion => "extraversion",
            BigFiveTrait::Agreeableness => "agreeableness",
            BigFiveTrait::Neuroticism => "neuroticism",
        }
    }

    /// Parses either the lowercase key or the capitalized display name.
    pub fn parse(name: &str) -> Result<Self, DomainError> {
        let lowered = name.trim().to_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.key() == lowered)
            .ok_or_else(|| DomainError::UnknownTrait(name.to_string()))
    }
}

impl fmt::Display for BigFiveTrait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// A trait score placed in a prompt, in 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PromptScore(u8);

impl PromptScore {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 5;

    pub fn new(value: u8) -> Result<Self, DomainError> {
        if (Self::MIN..=Self::MAX).contains(&value) {
            Ok(PromptScore(value))
        } else {
            Err(DomainError::PromptScoreOutOfRange(value as i64))
        }
    }

    pub fn get(&self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for PromptScore {
    type Error = DomainError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        PromptScore::new(value)
    }
}

impl From<PromptScore> for u8 {
    fn from(score: PromptScore) -> u8 {
        score.0
    }
}

impl fmt::Display for PromptScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An annotator or classifier verdict: a signed intensity in -2..=2, or the
/// statement that the trait cannot be told from the text at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnnotationScore {
    Value(i8),
    NonDistinguishable,
}

impl AnnotationScore {
    pub fn value(value: i8) -> Result<Self, DomainError> {
        if (-2..=2).contains(&value) {
            Ok(AnnotationScore::Value(value))
        } else {
            Err(DomainError::AnnotationScoreOutOfRange(value as i64))
        }
    }

    pub fn as_value(&self) -> Option<i8> {
        match self {
            AnnotationScore::Value(v) => Some(*v),
            AnnotationScore::NonDistinguishable => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, AnnotationScore::Value(_))
    }

    /// Recognizes "nondistinguishable" regardless of case, hyphens, spaces,
    /// or underscores.
    pub fn parse_nd_marker(s: &str) -> bool {
        let folded: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(|c| c.to_lowercase())
            .collect();
        folded == "nondistinguishable"
    }
}

impl fmt::Display for AnnotationScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnotationScore::Value(v) => write!(f, "{v}"),
            AnnotationScore::NonDistinguishable => f.write_str("nondistinguishable"),
        }
    }
}

impl Serialize for AnnotationScore {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            AnnotationScore::Value(v) => serializer.serialize_i8(*v),
            AnnotationScore::NonDistinguishable => serializer.serialize_str("nondistinguishable"),
        }
    }
}

impl<'de> Deserialize<'de> for AnnotationScore {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ScoreVisitor;

        impl serde::de::Visitor<'_> for ScoreVisitor {
            type Value = AnnotationScore;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer in -2..=2 or the string \"nondistinguishable\"")
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Self::Value, E> {
                let small = i8::try_from(v)
                    .map_err(|_| E::custom(DomainError::AnnotationScoreOutOfRange(v)))?;
                AnnotationScore::value(small).map_err(E::custom)
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Self::Value, E> {
                self.visit_i64(
                    i64::try_from(v)
                        .map_err(|_| E::custom(DomainError::AnnotationScoreOutOfRange(i64::MAX)))?,
                )
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if AnnotationScore::parse_nd_marker(v) {
                    Ok(AnnotationScore::NonDistinguishable)
                } else {
                    Err(E::custom(alloc::format!("unrecognized score `{v}`")))
                }
            }
        }

        deserializer.deserialize_any(ScoreVisitor)
    }
}

/// Four-way grouping of annotation scores: Low {-2,-1}, Mid {0},
/// High {+1,+2}, and non-distinguishable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreGroup {
    Low,
    Mid,
    High,
    #[serde(rename = "nondistinguishable")]
    NonDistinguishable,
}

impl ScoreGroup {
    pub const ALL: [ScoreGroup; 4] = [
        ScoreGroup::Low,
        ScoreGroup::Mid,
        ScoreGroup::High,
        ScoreGroup::NonDistinguishable,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ScoreGroup::Low => "low",
            ScoreGroup::Mid => "mid",
            ScoreGroup::High => "high",
            ScoreGroup::NonDistinguishable => "nd",
        }
    }

    /// Column index in confusion matrices (Low, Mid, High, ND).
    pub fn index(&self) -> usize {
        match self {
            ScoreGroup::Low => 0,
            ScoreGroup::Mid => 1,
            ScoreGroup::High => 2,
            ScoreGroup::NonDistinguishable => 3,
        }
    }
}

/// L/M/H band of the 1..=5 score placed in a generation prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptedLevel {
    Low,
    Mid,
    High,
}

impl PromptedLevel {
    pub const ALL: [PromptedLevel; 3] =
        [PromptedLevel::Low, PromptedLevel::Mid, PromptedLevel::High];

    pub fn letter(&self) -> &'static str {
        match self {
            PromptedLevel::Low => "L",
            PromptedLevel::Mid => "M",
            PromptedLevel::High => "H",
        }
    }

    /// Row index in confusion matrices (L, M, H).
    pub fn index(&self) -> usize {
        match self {
            PromptedLevel::Low => 0,
            PromptedLevel::Mid => 1,
            PromptedLevel::High => 2,
        }
    }
}

/// A sampling temperature in \[0,1\], kept as its exact decimal string so
/// persisted records and cache keys never depend on float formatting. The
/// stored form is the shortest round-trip representation (`"0"`, `"0.5"`,
/// `"0.7"`, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Temperature(String);

impl Temperature {
    pub fn new(value: f64) -> Result<Self, DomainError> {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(DomainError::InvalidTemperature(alloc::format!("{value}")));
        }
        Ok(Temperature(alloc::format!("{value}")))
    }

    pub fn parse(s: &str) -> Result<Self, DomainError> {
        let value: f64 = s
            .trim()
            .parse()
            .map_err(|_| DomainError::InvalidTemperature(s.to_string()))?;
        Self::new(value)
    }

    pub fn value(&self) -> f64 {
        // Stored form always parses; it was produced by formatting an f64.
        self.0.parse().unwrap_or(0.0)
    }

    /// The canonical decimal string, used verbatim in files and cache keys.
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn zero() -> Self {
        Temperature("0".to_string())
    }
}

impl TryFrom<String> for Temperature {
    type Error = DomainError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Temperature::parse(&value)
    }
}

impl From<Temperature> for String {
    fn from(t: Temperature) -> String {
        t.0
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Whether a profile prompts a single trait or all five.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Single,
    Full,
}

/// The persona a model is asked to simulate: one prompted score per trait.
///
/// Single-trait profiles hold exactly one entry; full profiles hold all
/// five. The map is ordered, so iteration always yields O,C,E,A,N order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct PersonalityProfile {
    kind: ProfileKind,
    scores: BTreeMap<BigFiveTrait, PromptScore>,
}

#[derive(Serialize, Deserialize)]
struct RawProfile {
    kind: ProfileKind,
    scores: BTreeMap<BigFiveTrait, PromptScore>,
}

impl TryFrom<RawProfile> for PersonalityProfile {
    type Error = DomainError;
    fn try_from(raw: RawProfile) -> Result<Self, Self::Error> {
        PersonalityProfile::from_parts(raw.kind, raw.scores)
    }
}

impl From<PersonalityProfile> for RawProfile {
    fn from(profile: PersonalityProfile) -> RawProfile {
        RawProfile {
            kind: profile.kind,
            scores: profile.scores,
        }
    }
}

impl PersonalityProfile {
    pub fn single(trait_: BigFiveTrait, score: PromptScore) -> Self {
        let mut scores = BTreeMap::new();
        scores.insert(trait_, score);
        PersonalityProfile {
            kind: ProfileKind::Single,
            scores,
        }
    }

    pub fn full(scores: BTreeMap<BigFiveTrait, PromptScore>) -> Result<Self, DomainError> {
        Self::from_parts(ProfileKind::Full, scores)
    }

    pub fn from_parts(
        kind: ProfileKind,
        scores: BTreeMap<BigFiveTrait, PromptScore>,
    ) -> Result<Self, DomainError> {
        match kind {
            ProfileKind::Single if scores.len() != 1 => {
                Err(DomainError::SingleTraitShape(scores.len()))
            }
            ProfileKind::Full if scores.len() != BigFiveTrait::ALL.len() => {
                Err(DomainError::FullProfileShape(scores.len()))
            }
            _ => Ok(PersonalityProfile { kind, scores }),
        }
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    /// Entries in O,C,E,A,N order.
    pub fn scores(&self) -> impl Iterator<Item = (BigFiveTrait, PromptScore)> + '_ {
        self.scores.iter().map(|(t, s)| (*t, *s))
    }

    pub fn score_for(&self, trait_: BigFiveTrait) -> Option<PromptScore> {
        self.scores.get(&trait_).copied()
    }

    /// The lone trait of a single-trait profile.
    pub fn single_trait(&self) -> Option<BigFiveTrait> {
        match self.kind {
            ProfileKind::Single => self.scores.keys().next().copied(),
            ProfileKind::Full => None,
        }
    }

    pub fn traits(&self) -> Vec<BigFiveTrait> {
        self.scores.keys().copied().collect()
    }
}

/// Half-open character range (`start..end`) within a text. Offsets count
/// `char`s, not bytes, so spans survive any UTF-8 re-encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn check_within(&self, char_len: usize) -> Result<(), DomainError> {
        if self.is_empty() || self.end > char_len {
            Err(DomainError::SpanOutOfBounds {
                start: self.start,
                end: self.end,
                len: char_len,
            })
        } else {
            Ok(())
        }
    }
}

/// One model answer to one question under one profile and temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedText {
    pub id: String,
    pub model: String,
    pub temperature: Temperature,
    pub question_id: String,
    pub profile: PersonalityProfile,
    pub text: String,
    pub edited: bool,
    pub masked_spans: Vec<Span>,
    /// The unmasked original, kept whenever `edited` so the raw response can
    /// always be reconstructed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_text: Option<String>,
}

impl GeneratedText {
    pub fn new(
        id: String,
        model: String,
        temperature: Temperature,
        question_id: String,
        profile: PersonalityProfile,
        text: String,
    ) -> Self {
        GeneratedText {
            id,
            model,
            temperature,
            question_id,
            profile,
            text,
            edited: false,
            masked_spans: Vec::new(),
            original_text: None,
        }
    }

    /// Checks the record-level invariants after deserialization.
    pub fn validate(&self) -> Result<(), DomainError> {
        if !self.masked_spans.is_empty() && !self.edited {
            return Err(DomainError::UneditedMask);
        }
        let len = self.text.chars().count();
        for span in &self.masked_spans {
            // Masked spans index the *original* text; when edited, bounds are
            // checked against it instead.
            let reference = self
                .original_text
                .as_ref()
                .map(|t| t.chars().count())
                .unwrap_or(len);
            span.check_within(reference)?;
        }
        Ok(())
    }
}

/// One human rater's judgment of one trait in one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub text_id: String,
    pub annotator_id: String,
    #[serde(rename = "trait")]
    pub trait_: BigFiveTrait,
    pub score: AnnotationScore,
    /// Choices from the configured closed reason vocabulary.
    #[serde(default)]
    pub reasons: Vec<String>,
    /// Highlighted evidence: character ranges plus the surface string.
    #[serde(default)]
    pub spans: Vec<AnnotatedSpan>,
}

/// A highlighted span with its surface form, as delivered by annotators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

/// How the judge model says it reached its verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionType {
    ExplicitSigns,
    ImplicitSigns,
    Intuition,
    #[serde(rename = "nondistinguishable")]
    NonDistinguishable,
}

impl DecisionType {
    /// Parses judge output such as `"Explicit signs"` or `"implicit_signs"`.
    pub fn parse(s: &str) -> Option<Self> {
        let folded: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(|c| c.to_lowercase())
            .collect();
        match folded.as_str() {
            "explicitsigns" => Some(DecisionType::ExplicitSigns),
            "implicitsigns" => Some(DecisionType::ImplicitSigns),
            "intuition" => Some(DecisionType::Intuition),
            "nondistinguishable" => Some(DecisionType::NonDistinguishable),
            _ => None,
        }
    }
}

/// Judge verdict for one (text, trait) pair.
///
/// The score and decision type agree on non-distinguishability by
/// construction: `NonDistinguishable` appears in both or in neither.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClassifierOutput", into = "RawClassifierOutput")]
pub struct ClassifierOutput {
    pub text_id: String,
    pub trait_: BigFiveTrait,
    pub score: AnnotationScore,
    pub clues: Vec<String>,
    pub reasoning: String,
    pub decision_type: DecisionType,
}

#[derive(Serialize, Deserialize)]
struct RawClassifierOutput {
    text_id: String,
    #[serde(rename = "trait")]
    trait_: BigFiveTrait,
    score: AnnotationScore,
    clues: Vec<String>,
    reasoning: String,
    decision_type: DecisionType,
}

impl TryFrom<RawClassifierOutput> for ClassifierOutput {
    type Error = DomainError;
    fn try_from(raw: RawClassifierOutput) -> Result<Self, Self::Error> {
        ClassifierOutput::new(
            raw.text_id,
            raw.trait_,
            raw.score,
            raw.clues,
            raw.reasoning,
            raw.decision_type,
        )
    }
}

impl From<ClassifierOutput> for RawClassifierOutput {
    fn from(out: ClassifierOutput) -> RawClassifierOutput {
        RawClassifierOutput {
            text_id: out.text_id,
            trait_: out.trait_,
            score: out.score,
            clues: out.clues,
            reasoning: out.reasoning,
            decision_type: out.decision_type,
        }
    }
}

impl ClassifierOutput {
    pub fn new(
        text_id: String,
        trait_: BigFiveTrait,
        score: AnnotationScore,
        clues: Vec<String>,
        reasoning: String,
        decision_type: DecisionType,
    ) -> Result<Self, DomainError> {
        let score_nd = !score.is_numeric();
        let decision_nd = decision_type == DecisionType::NonDistinguishable;
        if score_nd != decision_nd {
            return Err(DomainError::NdCoupling);
        }
        Ok(ClassifierOutput {
            text_id,
            trait_,
            score,
            clues,
            reasoning,
            decision_type,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn prompt_score_bounds() {
        assert!(PromptScore::new(1).is_ok());
        assert!(PromptScore::new(5).is_ok());
        assert_eq!(
            PromptScore::new(0),
            Err(DomainError::PromptScoreOutOfRange(0))
        );
        assert_eq!(
            PromptScore::new(6),
            Err(DomainError::PromptScoreOutOfRange(6))
        );
    }

    #[test]
    fn annotation_score_bounds() {
        assert!(AnnotationScore::value(-2).is_ok());
        assert!(AnnotationScore::value(2).is_ok());
        assert!(AnnotationScore::value(3).is_err());
        assert!(AnnotationScore::value(-3).is_err());
    }

    #[test]
    fn annotation_score_serde_forms() {
        let nd: AnnotationScore = serde_json::from_str("\"Nondistinguishable\"").unwrap();
        assert_eq!(nd, AnnotationScore::NonDistinguishable);
        let v: AnnotationScore = serde_json::from_str("-2").unwrap();
        assert_eq!(v, AnnotationScore::Value(-2));
        assert_eq!(
            serde_json::to_string(&nd).unwrap(),
            "\"nondistinguishable\""
        );
        assert_eq!(serde_json::to_string(&v).unwrap(), "-2");
        assert!(serde_json::from_str::<AnnotationScore>("7").is_err());
    }

    #[test]
    fn trait_names_serialize_as_full_words() {
        assert_eq!(
            serde_json::to_string(&BigFiveTrait::Openness).unwrap(),
            "\"openness\""
        );
        assert_eq!(
            serde_json::from_str::<BigFiveTrait>("\"neuroticism\"").unwrap(),
            BigFiveTrait::Neuroticism
        );
    }

    #[test]
    fn temperature_is_canonical_decimal_string() {
        let t = Temperature::new(0.7).unwrap();
        assert_eq!(t.as_str(), "0.7");
        assert_eq!(Temperature::new(0.0).unwrap().as_str(), "0");
        assert_eq!(Temperature::parse("0.70").unwrap().as_str(), "0.7");
        assert!(Temperature::new(1.5).is_err());
        assert!(Temperature::parse("nope").is_err());
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, "\"0.7\"");
        assert_eq!(serde_json::from_str::<Temperature>(&json).unwrap(), t);
    }

    #[test]
    fn profile_shape_invariants() {
        let single =
            PersonalityProfile::single(BigFiveTrait::Neuroticism, PromptScore::new(4).unwrap());
        assert_eq!(single.single_trait(), Some(BigFiveTrait::Neuroticism));

        let mut partial = BTreeMap::new();
        partial.insert(BigFiveTrait::Openness, PromptScore::new(3).unwrap());
        assert_eq!(
            PersonalityProfile::full(partial),
            Err(DomainError::FullProfileShape(1))
        );

        let mut all = BTreeMap::new();
        for t in BigFiveTrait::ALL {
            all.insert(t, PromptScore::new(3).unwrap());
        }
        let full = PersonalityProfile::full(all).unwrap();
        let order: Vec<BigFiveTrait> = full.scores().map(|(t, _)| t).collect();
        assert_eq!(order, BigFiveTrait::ALL.to_vec());
    }

    #[test]
    fn profile_deserialization_rejects_bad_shapes() {
        let bad = r#"{"kind":"single","scores":{"openness":3,"neuroticism":2}}"#;
        assert!(serde_json::from_str::<PersonalityProfile>(bad).is_err());
        let good = r#"{"kind":"single","scores":{"openness":3}}"#;
        assert!(serde_json::from_str::<PersonalityProfile>(good).is_ok());
    }

    #[test]
    fn classifier_output_nd_coupling_enforced() {
        let err = ClassifierOutput::new(
            "t1".into(),
            BigFiveTrait::Openness,
            AnnotationScore::NonDistinguishable,
            vec![],
            "none".into(),
            DecisionType::Intuition,
        );
        assert_eq!(err, Err(DomainError::NdCoupling));

        let ok = ClassifierOutput::new(
            "t1".into(),
            BigFiveTrait::Openness,
            AnnotationScore::Value(2),
            vec!["vivid imagery".into()],
            "clear".into(),
            DecisionType::ExplicitSigns,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn generated_text_mask_invariant() {
        let mut record = GeneratedText::new(
            "g1".into(),
            "mock".into(),
            Temperature::zero(),
            "q1".into(),
            PersonalityProfile::single(BigFiveTrait::Openness, PromptScore::new(5).unwrap()),
            "hello world".into(),
        );
        assert!(record.validate().is_ok());
        record.masked_spans.push(Span::new(0, 5));
        assert_eq!(record.validate(), Err(DomainError::UneditedMask));
        record.edited = true;
        record.original_text = Some("hello world".into());
        assert!(record.validate().is_ok());
        record.masked_spans.push(Span::new(10, 99));
        assert!(matches!(
            record.validate(),
            Err(DomainError::SpanOutOfBounds { .. })
        ));
    }

    #[test]
    fn jsonl_round_trip_generated_text() {
        let mut record = GeneratedText::new(
            "g1".into(),
            "mock-model".into(),
            Temperature::parse("0.5").unwrap(),
            "q2".into(),
            PersonalityProfile::single(BigFiveTrait::Agreeableness, PromptScore::new(2).unwrap()),
            "I value quiet cooperation.".into(),
        );
        record.edited = true;
        record.masked_spans = vec![Span::new(8, 13)];
        record.original_text = Some("I value quiet cooperation.".into());
        let line = serde_json::to_string(&record).unwrap();
        let back: GeneratedText = serde_json::from_str(&line).unwrap();
        assert_eq!(back, record);
    }
}
