//! `personaforge classify`: run the judge over every (text, trait) pair and
//! write the verdicts plus an attempt log.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::Serialize;

use personaforge_core::classifier::{
    classify_text, ClassifierConfig, ClassifierError, TraitSelector,
};
use personaforge_core::domain::{BigFiveTrait, Temperature};

use crate::commands::{load_generated_texts, resolve_input};
use crate::config::Context;
use crate::fsio::write_jsonl;
use crate::manifest::write_manifest;
use crate::runner::run_indexed;
use crate::{config_error, CliResult};

pub struct Args {
    pub input: Option<PathBuf>,
    pub traits: Option<String>,
}

#[derive(Serialize)]
struct AttemptLog {
    text_id: String,
    #[serde(rename = "trait")]
    trait_: BigFiveTrait,
    attempts: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn run(mut context: Context, args: Args) -> CliResult<i32> {
    let input = resolve_input(&context, args.input.as_deref(), "generated_texts.jsonl")?;
    let texts = load_generated_texts(&mut context, &input)?;
    let selector = match args
        .traits
        .unwrap_or_else(|| context.config.classifier.traits.clone())
        .as_str()
    {
        "prompted" => TraitSelector::Prompted,
        "all" => TraitSelector::All,
        other => {
            return Err(config_error(format!(
                "classifier traits must be `prompted` or `all`, got `{other}`"
            )))
        }
    };

    let mut seen = BTreeSet::new();
    for text in &texts {
        if !seen.insert(text.id.as_str()) {
            return Err(config_error(format!(
                "duplicate text id {} in {}",
                text.id,
                input.display()
            )));
        }
    }

    let questions = context.load_questions()?;
    let question_map: BTreeMap<String, String> = questions
        .entries()
        .iter()
        .map(|q| (q.id.clone(), q.text.clone()))
        .collect();
    let definitions = context.load_definitions()?;
    let classifier_config = ClassifierConfig {
        retry_limit: context.config.classifier.retry_limit,
        temperature: Temperature::parse(&context.config.classifier.temperature)
            .map_err(|e| config_error(e.to_string()))?,
    };

    let judge_name = context
        .config
        .classifier
        .provider
        .clone()
        .unwrap_or_else(|| context.provider_name.clone());
    let (provider, counters, model) = context.build_provider(&judge_name)?;

    // One pair per (text, selected trait), in file order then profile order.
    let pairs: Vec<(usize, BigFiveTrait)> = texts
        .iter()
        .enumerate()
        .flat_map(|(index, text)| {
            let traits = match selector {
                TraitSelector::Prompted => text.profile.traits(),
                TraitSelector::All => BigFiveTrait::ALL.to_vec(),
            };
            traits.into_iter().map(move |t| (index, t))
        })
        .collect();

    let results = run_indexed(pairs.len(), context.workers, |pair_index| {
        let (text_index, trait_) = pairs[pair_index];
        let text = &texts[text_index];
        let question_text = question_map
            .get(&text.question_id)
            .map(String::as_str)
            .ok_or_else(|| ClassifierError::UnknownQuestion(text.question_id.clone()));
        match question_text {
            Ok(question_text) => classify_text(
                &provider,
                &model,
                &classifier_config,
                text,
                trait_,
                question_text,
                &definitions,
            ),
            Err(err) => Err(err),
        }
    });

    let mut outputs = Vec::new();
    let mut log = Vec::new();
    let mut failed = 0usize;
    for (pair_index, result) in results.into_iter().enumerate() {
        let (text_index, trait_) = pairs[pair_index];
        match result {
            Ok(outcome) => {
                log.push(AttemptLog {
                    text_id: outcome.output.text_id.clone(),
                    trait_,
                    attempts: outcome.attempts,
                    error: None,
                });
                outputs.push(outcome.output);
            }
            Err(error) => {
                failed += 1;
                log.push(AttemptLog {
                    text_id: texts[text_index].id.clone(),
                    trait_,
                    attempts: classifier_config.retry_limit + 1,
                    error: Some(error.to_string()),
                });
            }
        }
    }

    let outputs_path = context.out_path("classifier_outputs.jsonl");
    let log_path = context.out_path("classification_log.jsonl");
    write_jsonl(&outputs_path, &outputs)?;
    write_jsonl(&log_path, &log)?;

    write_manifest(
        &context,
        "classify",
        &model,
        &[&outputs_path, &log_path],
        counters.provider_calls(),
        counters.cache_hits(),
    )?;

    println!(
        "classify: {} verdicts ({} failures) from {} texts -> {}",
        outputs.len(),
        failed,
        texts.len(),
        context.out_dir.display()
    );
    if failed > 0 {
        eprintln!("warning: {failed} classifications failed; see classification_log.jsonl");
        return Ok(1);
    }
    Ok(0)
}
