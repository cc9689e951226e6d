//! `personaforge report`: one human-readable Markdown summary embedding
//! whatever tables the upstream stages produced.

use std::path::Path;

use crate::config::Context;
use crate::fsio::write_file;
use crate::manifest::write_manifest;
use crate::{config_error, CliResult};

pub fn run(context: Context) -> CliResult<i32> {
    let mut sections = Vec::new();

    if let Some(table) = csv_as_markdown(&context.out_path("score_histograms.csv")) {
        sections.push(format!(
            "## Questionnaire score distributions\n\nCounts of per-repetition aggregate trait \
             scores per prompted trait and level (bin columns are half-open 0.5-wide \
             intervals).\n\n{table}"
        ));
    }
    if let Some(table) = csv_as_markdown(&context.out_path("reliability.csv")) {
        sections.push(format!(
            "## Questionnaire reliability\n\nInternal-consistency coefficients over repetition \
             passes (population-variance convention).\n\n{table}"
        ));
    }
    if let Some(table) = csv_as_markdown(&context.out_path("iaa_report.csv")) {
        sections.push(format!(
            "## Inter-annotator agreement\n\nFleiss' kappa per trait: level 1 is \
             presence/absence, level 2 the four score groups.\n\n{table}"
        ));
    }
    let mut confusion_tables = Vec::new();
    for trait_ in personaforge_core::domain::BigFiveTrait::ALL {
        let path = context.out_path(&format!("confusion_{}.csv", trait_.key()));
        if let Some(table) = csv_as_markdown(&path) {
            confusion_tables.push(format!("### {}\n\n{table}", trait_.display_name()));
        }
    }
    if !confusion_tables.is_empty() {
        sections.push(format!(
            "## Prompted versus detected trait levels\n\nRows are prompted levels (L/M/H), \
             columns the detected score groups.\n\n{}",
            confusion_tables.join("\n")
        ));
    }
    if let Some(table) = csv_as_markdown(&context.out_path("bias_report.csv")) {
        sections.push(format!("## Directional bias flags\n\n{table}"));
    }
    if let Some(table) = csv_as_markdown(&context.out_path("nd_report.csv")) {
        sections.push(format!(
            "## Non-distinguishable verdicts\n\nHow often the judge declined to score a trait, \
             and which prompted levels those texts carried.\n\n{table}"
        ));
    }
    if let Some(table) = csv_as_markdown(&context.out_path("similarity_heatmap.csv")) {
        sections.push(format!(
            "## Lexical similarity neighborhoods\n\nMean prompted score of the most similar \
             same-trait texts, grouped by the query text's prompted score.\n\n{table}"
        ));
    }
    let mut lexicon_tables = Vec::new();
    for trait_ in personaforge_core::domain::BigFiveTrait::ALL {
        let path = context.out_path(&format!("lexicon_{}.csv", trait_.key()));
        if let Some(table) = csv_as_markdown(&path) {
            lexicon_tables.push(format!("### {}\n\n{table}", trait_.display_name()));
        }
    }
    if !lexicon_tables.is_empty() {
        sections.push(format!(
            "## Most common lemmas by trait, band, and part of speech\n\n{}",
            lexicon_tables.join("\n")
        ));
    }
    if let Some(section) = overlap_summary(&context.out_path("overlap_report.json")) {
        sections.push(section);
    }
    if let Some(summary) = agreement_summary(&context.out_path("agreement_report.json")) {
        sections.push(summary);
    }

    if sections.is_empty() {
        return Err(config_error(format!(
            "no pipeline outputs found in {}; run a stage first",
            context.out_dir.display()
        )));
    }

    let body = format!(
        "# Personality simulation run report\n\n\
         Generated from the files in `{}`. All tables are derived from this run's own data; \
         numbers from other studies or model deployments are not comparison targets because \
         they depend on proprietary model outputs and annotator pools that are not \
         reproducible offline.\n\n{}\n",
        context.out_dir.display(),
        sections.join("\n\n")
    );
    let report_path = context.out_path("report.md");
    write_file(&report_path, body.as_bytes())?;
    write_manifest(&context, "report", "-", &[&report_path], 0, 0)?;
    println!(
        "report: {} sections -> {}",
        sections.len(),
        report_path.display()
    );
    Ok(0)
}

/// Renders a CSV file as a Markdown table, or `None` when absent.
fn csv_as_markdown(path: &Path) -> Option<String> {
    let mut reader = csv::Reader::from_path(path).ok()?;
    let header: Vec<String> = reader
        .headers()
        .ok()?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut lines = vec![
        format!("| {} |", header.join(" | ")),
        format!(
            "|{}|",
            header.iter().map(|_| " --- ").collect::<Vec<_>>().join("|")
        ),
    ];
    for record in reader.records().flatten() {
        let cells: Vec<String> = record.iter().map(|s| s.to_string()).collect();
        lines.push(format!("| {} |", cells.join(" | ")));
    }
    if lines.len() <= 2 {
        return None;
    }
    Some(lines.join("\n"))
}

fn overlap_summary(path: &Path) -> Option<String> {
    let text = std::fs::read_to_string(path).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    let derived = &value["prompt_derived"];
    let mut lines = vec![
        "## Lexicon overlap".to_string(),
        String::new(),
        format!(
            "{:.1}% of distinct lexicon lemmas ({} of {}) also occur in the generation \
             prompt material ({:.1}% weighted by frequency).",
            derived["type_level"].as_f64()? * 100.0,
            derived["derived_lemmas"],
            derived["lexicon_lemmas"],
            derived["token_level"].as_f64()? * 100.0,
        ),
        String::new(),
        "Directional overlaps between score-band lemma sets (share of the first band's \
         lemmas found in the second):"
            .to_string(),
        String::new(),
        "| trait | neutral in low | neutral in high | high in low | low in high |".to_string(),
        "| --- | --- | --- | --- | --- |".to_string(),
    ];
    let cell = |entry: &serde_json::Value, key: &str| match entry[key].as_f64() {
        Some(share) => format!("{:.1}%", share * 100.0),
        None => "-".to_string(),
    };
    for entry in value["band_overlaps"].as_array()? {
        lines.push(format!(
            "| {} | {} | {} | {} | {} |",
            entry["trait"].as_str().unwrap_or("?"),
            cell(entry, "neutral_in_low"),
            cell(entry, "neutral_in_high"),
            cell(entry, "high_in_low"),
            cell(entry, "low_in_high"),
        ));
    }
    Some(lines.join("\n"))
}

fn agreement_summary(path: &Path) -> Option<String> {
    let text = std::fs::read_to_string(path).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    let mut lines = vec![
        "## Classifier versus human agreement".to_string(),
        String::new(),
    ];
    let levels = [
        ("level1", "Level 1 (presence/absence), weighted P/R/F1"),
        ("level2", "Level 2 (score groups), weighted P/R/F1"),
    ];
    let mut any = false;
    for (key, label) in levels {
        if let Some(map) = value.get(key).and_then(|v| v.as_object()) {
            any = true;
            lines.push(format!("**{label}**"));
            lines.push(String::new());
            lines.push("| trait | precision | recall | f1 |".to_string());
            lines.push("| --- | --- | --- | --- |".to_string());
            for (trait_, scores) in map {
                lines.push(format!(
                    "| {} | {:.3} | {:.3} | {:.3} |",
                    trait_,
                    scores["precision"].as_f64().unwrap_or(f64::NAN),
                    scores["recall"].as_f64().unwrap_or(f64::NAN),
                    scores["f1"].as_f64().unwrap_or(f64::NAN),
                ));
            }
            lines.push(String::new());
        }
    }
    if let Some(map) = value.get("level3").and_then(|v| v.as_object()) {
        any = true;
        lines.push("**Level 3, mean absolute error against mean annotator scores**".to_string());
        lines.push(String::new());
        lines.push("| trait | mae | pairs used | pairs excluded |".to_string());
        lines.push("| --- | --- | --- | --- |".to_string());
        for (trait_, entry) in map {
            lines.push(format!(
                "| {} | {:.3} | {} | {} |",
                trait_,
                entry["mae"].as_f64().unwrap_or(f64::NAN),
                entry["pairs_used"],
                entry["pairs_excluded"],
            ));
        }
    }
    any.then(|| lines.join("\n"))
}
