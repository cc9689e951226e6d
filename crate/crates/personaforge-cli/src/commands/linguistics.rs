//! `personaforge linguistics`: TF-IDF neighbor analysis over the generated
//! texts, POS-grouped lexicon tables, and overlap statistics.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use personaforge_core::domain::{AnnotationRecord, BigFiveTrait};
use personaforge_core::generation::GENERATION_PROMPT_FIXED_TEXT;
use personaforge_core::linguistics::{
    extract_lexicon, fit_tfidf, lemma_set, pattern_overlap, prompt_derived_fraction,
    similarity_heatmap, top_k_similar_trait_means, top_n_per_cell, LexiconSource,
    PromptDerivedFractions, ScoreBand, TraitDocMeta,
};

use crate::commands::{load_generated_texts, resolve_input};
use crate::config::Context;
use crate::fsio::{csv_float, read_jsonl, write_csv, write_json_pretty};
use crate::manifest::write_manifest;
use crate::{config_error, run_error, CliResult};

pub struct Args {
    pub texts: Option<PathBuf>,
    pub k: Option<usize>,
}

/// Per-trait directional overlaps between score-band lemma sets. `None`
/// marks cells whose reference band produced no lemmas.
#[derive(Serialize)]
struct BandOverlap {
    #[serde(rename = "trait")]
    trait_: BigFiveTrait,
    neutral_in_low: Option<f64>,
    neutral_in_high: Option<f64>,
    high_in_low: Option<f64>,
    low_in_high: Option<f64>,
}

#[derive(Serialize)]
struct OverlapReport {
    prompt_derived: PromptDerivedFractions,
    band_overlaps: Vec<BandOverlap>,
}

pub fn run(mut context: Context, args: Args) -> CliResult<i32> {
    let texts_path = resolve_input(&context, args.texts.as_deref(), "generated_texts.jsonl")?;
    let texts = load_generated_texts(&mut context, &texts_path)?;
    let k = args.k.unwrap_or(context.config.linguistics.k).max(1);
    let top_n = context.config.linguistics.top_n.max(1);
    let stopwords = context.load_stopwords()?;
    let tagger = context.load_tagger()?;
    let definitions = context.load_definitions()?;

    // Neighbor analysis runs over single-trait texts; full-profile texts
    // have no single query trait and are skipped.
    let single: Vec<&personaforge_core::domain::GeneratedText> = texts
        .iter()
        .filter(|t| t.profile.single_trait().is_some())
        .collect();
    if single.is_empty() {
        return Err(run_error(
            "no single-trait texts in the dataset; neighbor analysis needs them".to_string(),
        ));
    }
    let corpus: Vec<&str> = single.iter().map(|t| t.text.as_str()).collect();
    let model = fit_tfidf(&corpus).map_err(|e| run_error(e.to_string()))?;
    let meta: Vec<TraitDocMeta> = single
        .iter()
        .map(|t| {
            let trait_ = t.profile.single_trait().expect("filtered to single");
            TraitDocMeta {
                id: t.id.clone(),
                trait_,
                prompt_score: t
                    .profile
                    .score_for(trait_)
                    .expect("single profile has score"),
            }
        })
        .collect();
    let neighbor_means =
        top_k_similar_trait_means(&model, &meta, k).map_err(|e| run_error(e.to_string()))?;
    let heatmap = similarity_heatmap(&neighbor_means);
    let heatmap_rows: Vec<Vec<String>> = heatmap
        .iter()
        .map(|row| {
            vec![
                row.trait_.key().to_string(),
                row.query_score.to_string(),
                row.texts.to_string(),
                csv_float(row.mean_neighbor_score),
            ]
        })
        .collect();
    let heatmap_path = context.out_path("similarity_heatmap.csv");
    write_csv(
        &heatmap_path,
        &["trait", "query_score", "texts", "mean_neighbor_score"],
        &heatmap_rows,
    )?;

    // Lexicon sources: whole masked texts by default, or the surface
    // strings annotators highlighted.
    let sources: Vec<LexiconSource> = match context.config.linguistics.source.as_str() {
        "texts" => single
            .iter()
            .map(|t| {
                let trait_ = t.profile.single_trait().expect("filtered");
                LexiconSource {
                    text: t.text.clone(),
                    trait_,
                    band: ScoreBand::from_prompt_score(
                        t.profile.score_for(trait_).expect("single"),
                    ),
                }
            })
            .collect(),
        "spans" => {
            let annotations_path = context
                .config
                .evaluation
                .annotations_file
                .clone()
                .ok_or_else(|| {
                    config_error("linguistics.source = \"spans\" needs evaluation.annotations_file")
                })?;
            let records: Vec<AnnotationRecord> = read_jsonl(&annotations_path)?;
            let by_id: BTreeMap<&str, &personaforge_core::domain::GeneratedText> =
                texts.iter().map(|t| (t.id.as_str(), t)).collect();
            records
                .iter()
                .filter_map(|record| {
                    let text = by_id.get(record.text_id.as_str())?;
                    let trait_ = record.trait_;
                    let score = text.profile.score_for(trait_)?;
                    let surfaces: Vec<String> =
                        record.spans.iter().map(|s| s.surface.clone()).collect();
                    (!surfaces.is_empty()).then(|| LexiconSource {
                        text: surfaces.join(" "),
                        trait_,
                        band: ScoreBand::from_prompt_score(score),
                    })
                })
                .collect()
        }
        other => {
            return Err(config_error(format!(
                "linguistics source must be `texts` or `spans`, got `{other}`"
            )))
        }
    };

    let entries =
        extract_lexicon(&sources, &tagger, &stopwords).map_err(|e| run_error(e.to_string()))?;
    let mut written = vec![heatmap_path];
    for trait_ in BigFiveTrait::ALL {
        let trait_entries: Vec<_> = entries
            .iter()
            .filter(|e| e.trait_ == trait_)
            .cloned()
            .collect();
        if trait_entries.is_empty() {
            continue;
        }
        let rows: Vec<Vec<String>> = top_n_per_cell(&trait_entries, top_n)
            .iter()
            .map(|entry| {
                vec![
                    entry.band.label().to_string(),
                    entry.pos.label().to_string(),
                    entry.lemma.clone(),
                    entry.frequency.to_string(),
                ]
            })
            .collect();
        let path = context.out_path(&format!("lexicon_{}.csv", trait_.key()));
        write_csv(&path, &["band", "pos", "lemma", "frequency"], &rows)?;
        written.push(path);
    }

    // Prompt-side material: the fixed template text plus every definition.
    let mut prompt_texts = vec![GENERATION_PROMPT_FIXED_TEXT.to_string()];
    for definition in definitions.0.values() {
        prompt_texts.push(definition.definition.clone());
        prompt_texts.push(definition.low.clone());
        prompt_texts.push(definition.high.clone());
    }
    let prompt_derived = prompt_derived_fraction(&entries, &prompt_texts, &tagger)
        .map_err(|e| run_error(e.to_string()))?;

    let mut band_overlaps = Vec::new();
    for trait_ in BigFiveTrait::ALL {
        let low = lemma_set(&entries, trait_, ScoreBand::Low);
        let neutral = lemma_set(&entries, trait_, ScoreBand::Neutral);
        let high = lemma_set(&entries, trait_, ScoreBand::High);
        if low.is_empty() && neutral.is_empty() && high.is_empty() {
            continue;
        }
        band_overlaps.push(BandOverlap {
            trait_,
            neutral_in_low: pattern_overlap(&neutral, &low).ok(),
            neutral_in_high: pattern_overlap(&neutral, &high).ok(),
            high_in_low: pattern_overlap(&high, &low).ok(),
            low_in_high: pattern_overlap(&low, &high).ok(),
        });
    }
    let overlap_path = context.out_path("overlap_report.json");
    write_json_pretty(
        &overlap_path,
        &OverlapReport {
            prompt_derived,
            band_overlaps,
        },
    )?;
    written.push(overlap_path);

    let paths: Vec<&std::path::Path> = written.iter().map(PathBuf::as_path).collect();
    write_manifest(&context, "linguistics", "-", &paths, 0, 0)?;

    println!(
        "linguistics: {} heatmap rows, {} lexicon entries, prompt-derived {:.1}% of lemma types -> {}",
        heatmap.len(),
        entries.len(),
        prompt_derived.type_level * 100.0,
        context.out_dir.display()
    );
    Ok(0)
}
