//! `personaforge generate`: run the single-trait grid and/or sampled full
//! profiles against the provider, mask trait leakage, and write the
//! generated-texts dataset plus a run log.

use personaforge_core::generation::{
    apply_leakage_mask, profile_jobs, run_generation_job, sample_profiles, single_trait_grid,
    GenerationFailure, GenerationJob,
};

use crate::config::Context;
use crate::fsio::write_jsonl;
use crate::manifest::write_manifest;
use crate::runner::run_indexed;
use crate::{config_error, run_error, CliResult};

pub struct Args {
    pub mode: Option<String>,
    pub scores: Option<Vec<u8>>,
    pub temperatures: Option<Vec<String>>,
    pub count: Option<usize>,
}

pub fn run(mut context: Context, args: Args) -> CliResult<i32> {
    if let Some(scores) = args.scores {
        context.config.generation.scores = scores;
    }
    if let Some(temps) = args.temperatures {
        context.config.generation.temperatures = temps;
    }
    if let Some(mode) = args.mode {
        context.config.generation.mode = mode;
    }
    if let Some(count) = args.count {
        context.config.generation.profile_count = count;
    }
    let mode = context.config.generation.mode.clone();
    if !matches!(mode.as_str(), "single" | "full" | "both") {
        return Err(config_error(format!(
            "generation mode must be single, full, or both, got `{mode}`"
        )));
    }

    let questions = context.load_questions()?;
    let definitions = context.load_definitions()?;
    let lexicon = context.load_leakage_lexicon()?;
    let mask = context.config.generation.mask_leakage;
    let (traits, scores, temperatures) = context.grid_dimensions()?;

    let mut jobs: Vec<GenerationJob> = Vec::new();
    if matches!(mode.as_str(), "single" | "both") {
        jobs.extend(
            single_trait_grid(&traits, &scores, &temperatures, questions.entries())
                .map_err(|e| config_error(e.to_string()))?,
        );
    }
    if matches!(mode.as_str(), "full" | "both") {
        let sampler = context.sampler_config(context.config.generation.profile_count)?;
        let profiles = sample_profiles(&sampler).map_err(|e| config_error(e.to_string()))?;
        jobs.extend(
            profile_jobs(&profiles, &temperatures, questions.entries())
                .map_err(|e| config_error(e.to_string()))?,
        );
    }

    let provider_name = context.provider_name.clone();
    let (provider, counters, model) = context.build_provider(&provider_name)?;

    let results = run_indexed(jobs.len(), context.workers, |index| {
        run_generation_job(
            &provider,
            &jobs[index],
            &definitions,
            &model,
            format!("txt-{index:05}"),
        )
    });

    let mut texts = Vec::new();
    let mut failures: Vec<GenerationFailure> = Vec::new();
    for (index, result) in results.into_iter().enumerate() {
        match result {
            Ok(record) => {
                let record = if mask {
                    apply_leakage_mask(record, &lexicon).map_err(|e| run_error(e.to_string()))?
                } else {
                    record
                };
                texts.push(record);
            }
            Err(error) => failures.push(GenerationFailure {
                job_index: index,
                question_id: jobs[index].question.id.clone(),
                error: error.to_string(),
            }),
        }
    }

    let texts_path = context.out_path("generated_texts.jsonl");
    let log_path = context.out_path("generation_log.jsonl");
    write_jsonl(&texts_path, &texts)?;
    write_jsonl(&log_path, &failures)?;

    write_manifest(
        &context,
        "generate",
        &model,
        &[&texts_path, &log_path],
        counters.provider_calls(),
        counters.cache_hits(),
    )?;

    let masked = texts.iter().filter(|t| t.edited).count();
    println!(
        "generate: {} texts ({} masked), {} failures -> {}",
        texts.len(),
        masked,
        failures.len(),
        context.out_dir.display()
    );
    if !failures.is_empty() {
        eprintln!(
            "warning: {} generation jobs failed; see generation_log.jsonl",
            failures.len()
        );
        return Ok(1);
    }
    Ok(0)
}
