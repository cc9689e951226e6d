//! `personaforge questionnaire`: administer the questionnaire for every
//! (trait, level) pair, then emit the runs, score histograms, and
//! reliability coefficients.

use std::collections::BTreeMap;

use personaforge_core::domain::{BigFiveTrait, Temperature};
use personaforge_core::metrics::{cronbach_alpha, guttman_lambda, RatingMatrix};
use personaforge_core::questionnaire::{
    aggregate_trait_score, run_questionnaire, QuestionnaireRunRecord, TargetLevel,
};

use crate::config::Context;
use crate::fsio::{csv_float, write_csv, write_jsonl};
use crate::manifest::write_manifest;
use crate::runner::run_indexed;
use crate::{config_error, run_error, CliResult};

/// Histogram bins over the aggregate score range [1, 5], half-open except
/// the last: [1.0,1.5), ..., [4.5,5.0].
pub const HISTOGRAM_BIN_EDGES: [f64; 8] = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5];

pub struct Args {
    pub repetitions: Option<u32>,
    pub temperature: Option<String>,
}

pub fn run(mut context: Context, args: Args) -> CliResult<i32> {
    let questionnaire = context.load_questionnaire()?;
    let trait_prompts = context.load_trait_prompts()?;
    let repetitions = args
        .repetitions
        .unwrap_or(context.config.questionnaire.repetitions)
        .max(1);
    let temperature_text = args
        .temperature
        .clone()
        .unwrap_or_else(|| context.config.questionnaire.temperature.clone());
    let temperature =
        Temperature::parse(&temperature_text).map_err(|e| config_error(e.to_string()))?;
    let lambda_variant = context.config.questionnaire.lambda_variant()?;

    let provider_name = context.provider_name.clone();
    let (provider, counters, model) = context.build_provider(&provider_name)?;

    // One unit per (trait, level), covering only traits the questionnaire
    // actually has items for; items within a unit run sequentially so
    // records stay in deterministic order.
    let covered: Vec<BigFiveTrait> = BigFiveTrait::ALL
        .into_iter()
        .filter(|t| !questionnaire.items_for(*t).is_empty())
        .collect();
    if covered.is_empty() {
        return Err(config_error("questionnaire has no items for any trait"));
    }
    let units: Vec<(BigFiveTrait, TargetLevel)> = covered
        .iter()
        .flat_map(|t| TargetLevel::ALL.iter().map(move |l| (*t, *l)))
        .collect();
    let results = run_indexed(units.len(), context.workers, |index| {
        let (trait_, level) = units[index];
        let persona = &trait_prompts[&(trait_, level)];
        run_questionnaire(
            &provider,
            &questionnaire,
            trait_,
            level,
            persona,
            &model,
            temperature.clone(),
            repetitions,
        )
    });

    let mut records: Vec<QuestionnaireRunRecord> = Vec::new();
    for result in results {
        records.extend(result.map_err(|e| run_error(e.to_string()))?);
    }

    let runs_path = context.out_path("questionnaire_runs.jsonl");
    write_jsonl(&runs_path, &records)?;

    let histogram_path = context.out_path("score_histograms.csv");
    let histogram_rows = histogram_rows(&records, repetitions);
    let mut header: Vec<&str> = vec!["model", "trait", "level", "repetitions"];
    let bin_labels: Vec<String> = HISTOGRAM_BIN_EDGES
        .iter()
        .map(|edge| format!("bin_{edge:.1}"))
        .collect();
    header.extend(bin_labels.iter().map(String::as_str));
    write_csv(&histogram_path, &header, &histogram_rows)?;

    let reliability_path = context.out_path("reliability.csv");
    let reliability_rows = reliability_rows(&records, lambda_variant);
    write_csv(
        &reliability_path,
        &["trait", "cronbach_alpha", "guttman_lambda"],
        &reliability_rows,
    )?;

    write_manifest(
        &context,
        "questionnaire",
        &model,
        &[&runs_path, &histogram_path, &reliability_path],
        counters.provider_calls(),
        counters.cache_hits(),
    )?;

    let parse_failures = records.iter().filter(|r| r.error.is_some()).count();
    if parse_failures > 0 {
        eprintln!(
            "warning: {parse_failures} of {} answers were unparseable and excluded",
            records.len()
        );
    }
    println!(
        "questionnaire: {} records across {} trait/level runs -> {}",
        records.len(),
        units.len(),
        context.out_dir.display()
    );
    Ok(if parse_failures > 0 { 1 } else { 0 })
}

/// Per-repetition aggregate scores for one (model, trait, level) group.
fn repetition_aggregates(records: &[&QuestionnaireRunRecord], repetitions: u32) -> Vec<f64> {
    let mut aggregates = Vec::new();
    for repetition in 1..=repetitions {
        let pass: Vec<QuestionnaireRunRecord> = records
            .iter()
            .filter(|r| r.repetition == repetition)
            .map(|&r| r.clone())
            .collect();
        if let Ok(score) = aggregate_trait_score(&pass) {
            aggregates.push(score);
        }
    }
    aggregates
}

fn histogram_rows(records: &[QuestionnaireRunRecord], repetitions: u32) -> Vec<Vec<String>> {
    let mut groups: BTreeMap<(String, BigFiveTrait, TargetLevel), Vec<&QuestionnaireRunRecord>> =
        BTreeMap::new();
    for record in records {
        groups
            .entry((record.model.clone(), record.trait_, record.level))
            .or_default()
            .push(record);
    }
    groups
        .into_iter()
        .map(|((model, trait_, level), group)| {
            let aggregates = repetition_aggregates(&group, repetitions);
            let mut bins = [0u32; 8];
            for score in &aggregates {
                let mut bin = 0;
                for (index, edge) in HISTOGRAM_BIN_EDGES.iter().enumerate() {
                    if *score >= *edge {
                        bin = index;
                    }
                }
                bins[bin] += 1;
            }
            let mut row = vec![
                model,
                trait_.key().to_string(),
                level.as_str().to_string(),
                aggregates.len().to_string(),
            ];
            row.extend(bins.iter().map(|b| b.to_string()));
            row
        })
        .collect()
}

/// Reliability per trait over all fully-parsed repetition passes (both
/// levels pooled): rows are passes, columns are the trait's items.
fn reliability_rows(
    records: &[QuestionnaireRunRecord],
    lambda_variant: personaforge_core::metrics::LambdaVariant,
) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for trait_ in BigFiveTrait::ALL {
        let trait_records: Vec<&QuestionnaireRunRecord> =
            records.iter().filter(|r| r.trait_ == trait_).collect();
        if trait_records.is_empty() {
            continue;
        }
        let mut item_ids: Vec<&str> = trait_records
            .iter()
            .map(|r| r.item_id.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        item_ids.sort_unstable();

        let mut matrix_rows: Vec<Vec<u8>> = Vec::new();
        let mut passes: BTreeMap<(TargetLevel, u32), BTreeMap<&str, u8>> = BTreeMap::new();
        for record in &trait_records {
            if let Some(score) = record.item_score {
                passes
                    .entry((record.level, record.repetition))
                    .or_default()
                    .insert(record.item_id.as_str(), score);
            }
        }
        for scores in passes.values() {
            // A pass enters the matrix only when every item parsed.
            if scores.len() == item_ids.len() {
                matrix_rows.push(item_ids.iter().map(|id| scores[id]).collect());
            }
        }

        let (alpha, lambda) = match RatingMatrix::from_rows(&matrix_rows) {
            Ok(matrix) => (
                cronbach_alpha(&matrix)
                    .map(csv_float)
                    .unwrap_or_else(|_| "NA".into()),
                guttman_lambda(&matrix, lambda_variant)
                    .map(csv_float)
                    .unwrap_or_else(|_| "NA".into()),
            ),
            Err(_) => ("NA".into(), "NA".into()),
        };
        rows.push(vec![trait_.key().to_string(), alpha, lambda]);
    }
    rows
}
