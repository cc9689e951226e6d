//! Bundled default data files. Every one of these can be replaced through
//! the configuration file; the bundle just makes a bare `personaforge`
//! invocation work end to end against the mock provider.

use std::collections::BTreeMap;

use personaforge_core::domain::BigFiveTrait;
use personaforge_core::generation::{TraitDefinition, TraitDefinitions};
use personaforge_core::questionnaire::TargetLevel;

pub const BFI44_JSON: &str = include_str!("../assets/bfi44.json");
pub const QUESTIONS_JSON: &str = include_str!("../assets/questions.json");
pub const LEAKAGE_LEXICON: &str = include_str!("../assets/leakage_lexicon.txt");
pub const MOCK_SCRIPT_JSON: &str = include_str!("../assets/mock_script.json");

const TRAIT_PROMPTS: [((BigFiveTrait, TargetLevel), &str); 10] = [
    (
        (BigFiveTrait::Openness, TargetLevel::High),
        include_str!("../assets/trait_prompts/openness_high.txt"),
    ),
    (
        (BigFiveTrait::Openness, TargetLevel::Low),
        include_str!("../assets/trait_prompts/openness_low.txt"),
    ),
    (
        (BigFiveTrait::Conscientiousness, TargetLevel::High),
        include_str!("../assets/trait_prompts/conscientiousness_high.txt"),
    ),
    (
        (BigFiveTrait::Conscientiousness, TargetLevel::Low),
        include_str!("../assets/trait_prompts/conscientiousness_low.txt"),
    ),
    (
        (BigFiveTrait::Extraversion, TargetLevel::High),
        include_str!("../assets/trait_prompts/extraversion_high.txt"),
    ),
    (
        (BigFiveTrait::Extraversion, TargetLevel::Low),
        include_str!("../assets/trait_prompts/extraversion_low.txt"),
    ),
    (
        (BigFiveTrait::Agreeableness, TargetLevel::High),
        include_str!("../assets/trait_prompts/agreeableness_high.txt"),
    ),
    (
        (BigFiveTrait::Agreeableness, TargetLevel::Low),
        include_str!("../assets/trait_prompts/agreeableness_low.txt"),
    ),
    (
        (BigFiveTrait::Neuroticism, TargetLevel::High),
        include_str!("../assets/trait_prompts/neuroticism_high.txt"),
    ),
    (
        (BigFiveTrait::Neuroticism, TargetLevel::Low),
        include_str!("../assets/trait_prompts/neuroticism_low.txt"),
    ),
];

const TRAIT_DEFINITIONS: [(BigFiveTrait, &str); 5] = [
    (
        BigFiveTrait::Openness,
        include_str!("../assets/trait_definitions/openness.json"),
    ),
    (
        BigFiveTrait::Conscientiousness,
        include_str!("../assets/trait_definitions/conscientiousness.json"),
    ),
    (
        BigFiveTrait::Extraversion,
        include_str!("../assets/trait_definitions/extraversion.json"),
    ),
    (
        BigFiveTrait::Agreeableness,
        include_str!("../assets/trait_definitions/agreeableness.json"),
    ),
    (
        BigFiveTrait::Neuroticism,
        include_str!("../assets/trait_definitions/neuroticism.json"),
    ),
];

/// The bundled persona texts, trimmed, keyed by (trait, level).
pub fn builtin_trait_prompts() -> BTreeMap<(BigFiveTrait, TargetLevel), String> {
    TRAIT_PROMPTS
        .iter()
        .map(|((trait_, level), text)| ((*trait_, *level), text.trim().to_string()))
        .collect()
}

/// The bundled trait definitions.
pub fn builtin_trait_definitions() -> TraitDefinitions {
    let mut definitions = TraitDefinitions::default();
    for (trait_, json) in TRAIT_DEFINITIONS {
        let parsed: TraitDefinition =
            serde_json::from_str(json).expect("bundled definition files parse");
        definitions.insert(trait_, parsed);
    }
    definitions
}
