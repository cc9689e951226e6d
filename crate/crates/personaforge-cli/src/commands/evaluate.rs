//! `personaforge evaluate`: the agreement report. Always produces
//! prompted-versus-detected confusion matrices, bias flags, and
//! non-distinguishable distributions; with human annotations it adds voted
//! final scores, inter-annotator kappa, and agreement levels 1-3.

use std::path::PathBuf;

use personaforge_core::annotation::{
    aggregate_final_scores, interannotator_kappa, validate_annotations, KappaLevel,
};
use personaforge_core::domain::{AnnotationRecord, BigFiveTrait, PromptedLevel, ScoreGroup};
use personaforge_core::metrics::{compile_agreement_report, HumanJudgments, MetricsError};

use crate::commands::{load_classifier_outputs, load_generated_texts, resolve_input};
use crate::config::Context;
use crate::fsio::{csv_float, read_jsonl, write_csv, write_json_pretty, write_jsonl};
use crate::manifest::write_manifest;
use crate::{config_error, run_error, CliResult};

pub struct Args {
    pub texts: Option<PathBuf>,
    pub outputs: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
}

pub fn run(mut context: Context, args: Args) -> CliResult<i32> {
    let threshold = context.config.evaluation.bias_threshold;
    if !(threshold > 0.5 && threshold <= 1.0) {
        return Err(config_error(format!(
            "bias threshold must be in (0.5, 1], got {threshold}"
        )));
    }

    let texts_path = resolve_input(&context, args.texts.as_deref(), "generated_texts.jsonl")?;
    let outputs_path = resolve_input(
        &context,
        args.outputs.as_deref(),
        "classifier_outputs.jsonl",
    )?;
    let texts = load_generated_texts(&mut context, &texts_path)?;
    let outputs = load_classifier_outputs(&mut context, &outputs_path)?;

    let annotations_path = args
        .annotations
        .clone()
        .or_else(|| context.config.evaluation.annotations_file.clone());

    let mut written: Vec<PathBuf> = Vec::new();
    let mut human = None;
    if let Some(path) = &annotations_path {
        if !path.exists() {
            return Err(config_error(format!(
                "annotations file {} does not exist",
                path.display()
            )));
        }
        let records: Vec<AnnotationRecord> = read_jsonl(path)?;
        context.inputs.push(crate::config::InputRecord {
            path: path.display().to_string(),
            sha256: crate::fsio::file_digest(path)?,
        });

        let reason_vocabulary = context.load_reason_vocabulary()?;
        let validation = validate_annotations(&records, &texts, reason_vocabulary.as_ref());
        let validation_path = context.out_path("annotation_validation.json");
        write_json_pretty(&validation_path, &validation)?;
        written.push(validation_path);
        if !validation.is_clean() {
            eprintln!(
                "warning: {} annotation violations; see annotation_validation.json",
                validation.violations.len()
            );
        }

        let finals = aggregate_final_scores(&records).map_err(|e| run_error(e.to_string()))?;
        let finals_path = context.out_path("final_scores.jsonl");
        write_jsonl(&finals_path, &finals)?;
        written.push(finals_path);

        let kappa1 = interannotator_kappa(&records, KappaLevel::Level1)
            .map_err(|e| run_error(e.to_string()))?;
        let kappa2 = interannotator_kappa(&records, KappaLevel::Level2)
            .map_err(|e| run_error(e.to_string()))?;
        let iaa_rows: Vec<Vec<String>> = BigFiveTrait::ALL
            .iter()
            .filter(|t| kappa1.contains_key(t) || kappa2.contains_key(t))
            .map(|t| {
                let cell = |map: &std::collections::BTreeMap<BigFiveTrait, Option<f64>>| {
                    map.get(t)
                        .and_then(|v| *v)
                        .map(csv_float)
                        .unwrap_or_else(|| "NA".into())
                };
                vec![t.key().to_string(), cell(&kappa1), cell(&kappa2)]
            })
            .collect();
        let iaa_path = context.out_path("iaa_report.csv");
        write_csv(
            &iaa_path,
            &["trait", "level1_kappa", "level2_kappa"],
            &iaa_rows,
        )?;
        written.push(iaa_path);

        let mut judgments = HumanJudgments::default();
        for final_score in finals {
            let key = (final_score.text_id.clone(), final_score.trait_);
            judgments.finals.insert(key.clone(), final_score.score);
            judgments
                .numeric_means
                .insert(key, final_score.numeric_mean);
        }
        human = Some(judgments);
    }

    let report = compile_agreement_report(&texts, &outputs, human.as_ref(), threshold).map_err(
        |e| match e {
            MetricsError::Misaligned(ids) => run_error(format!(
                "classifier outputs reference unknown text ids: {ids}"
            )),
            other => run_error(other.to_string()),
        },
    )?;

    let report_path = context.out_path("agreement_report.json");
    write_json_pretty(&report_path, &report)?;
    written.push(report_path);

    for (trait_, matrix) in &report.confusion {
        let normalized = matrix.row_normalized();
        let rows: Vec<Vec<String>> = PromptedLevel::ALL
            .iter()
            .map(|level| {
                let mut row = vec![level.letter().to_string()];
                for group in ScoreGroup::ALL {
                    row.push(matrix.get(*level, group).to_string());
                }
                for share in normalized[level.index()] {
                    row.push(csv_float(share));
                }
                row
            })
            .collect();
        let path = context.out_path(&format!("confusion_{}.csv", trait_.key()));
        write_csv(
            &path,
            &[
                "prompted_level",
                "detected_low",
                "detected_mid",
                "detected_high",
                "detected_nd",
                "share_low",
                "share_mid",
                "share_high",
                "share_nd",
            ],
            &rows,
        )?;
        written.push(path);
    }

    let bias_rows: Vec<Vec<String>> = report
        .bias
        .iter()
        .map(|(trait_, flags)| {
            vec![
                trait_.key().to_string(),
                flags.low_bias.to_string(),
                flags.high_bias.to_string(),
                flags.mid_follows_low.to_string(),
                flags.mid_follows_high.to_string(),
            ]
        })
        .collect();
    let bias_path = context.out_path("bias_report.csv");
    write_csv(
        &bias_path,
        &[
            "trait",
            "low_bias",
            "high_bias",
            "mid_follows_low",
            "mid_follows_high",
        ],
        &bias_rows,
    )?;
    written.push(bias_path);

    let nd_rows: Vec<Vec<String>> = report
        .nd
        .iter()
        .map(|(trait_, dist)| {
            vec![
                trait_.key().to_string(),
                dist.total.to_string(),
                dist.nd_count.to_string(),
                csv_float(dist.nd_rate),
                csv_float(dist.level_shares[0]),
                csv_float(dist.level_shares[1]),
                csv_float(dist.level_shares[2]),
            ]
        })
        .collect();
    let nd_path = context.out_path("nd_report.csv");
    write_csv(
        &nd_path,
        &[
            "trait",
            "total",
            "nd_count",
            "nd_rate",
            "share_prompted_low",
            "share_prompted_mid",
            "share_prompted_high",
        ],
        &nd_rows,
    )?;
    written.push(nd_path);

    let paths: Vec<&std::path::Path> = written.iter().map(PathBuf::as_path).collect();
    write_manifest(&context, "evaluate", "-", &paths, 0, 0)?;

    let flagged: Vec<String> = report
        .bias
        .iter()
        .filter(|(_, flags)| flags.any())
        .map(|(t, _)| t.key().to_string())
        .collect();
    println!(
        "evaluate: {} confusion matrices, bias flags on [{}]{} -> {}",
        report.confusion.len(),
        flagged.join(", "),
        if human.is_some() {
            format!(", {} human-aligned pairs", report.human_pairs)
        } else {
            ", no human annotations".to_string()
        },
        context.out_dir.display()
    );
    Ok(0)
}
