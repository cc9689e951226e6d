//! Command-level behavior: exit codes, inputs and degraded modes, trait
//! selection counts, and a hand-computed agreement fixture.

use std::path::Path;
use std::process::{Command, Output};

fn run_cli(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_personaforge"))
        .current_dir(cwd)
        .env("SOURCE_DATE_EPOCH", "0")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

fn count_lines(path: &Path) -> usize {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.is_empty())
        .count()
}

#[test]
fn missing_questionnaire_file_is_a_usage_error_before_any_call() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("personaforge.toml"),
        "[questionnaire]\nfile = \"does_not_exist.json\"\n",
    )
    .unwrap();
    let output = run_cli(
        dir.path(),
        &["--config", "personaforge.toml", "questionnaire"],
    );
    assert_eq!(output.status.code(), Some(2), "{}", stderr(&output));
    assert!(stderr(&output).contains("does_not_exist.json"));
}

#[test]
fn classify_without_generated_texts_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_cli(dir.path(), &["--out-dir", "out", "classify"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("generated_texts.jsonl"));
}

#[test]
fn report_without_outputs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_cli(dir.path(), &["--out-dir", "empty", "report"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn unknown_provider_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_cli(
        dir.path(),
        &["--provider", "nope", "--out-dir", "o", "report"],
    );
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("nope"));
}

#[test]
fn trait_selector_multiplies_outputs_and_full_mode_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    // 5 sampled full profiles x 1 temperature x 10 bundled questions.
    let generate = [
        "--out-dir",
        "out",
        "--seed",
        "7",
        "generate",
        "--mode",
        "full",
        "--count",
        "5",
        "--temps",
        "0",
    ];
    let output = run_cli(dir.path(), &generate);
    assert!(output.status.success(), "{}", stderr(&output));
    let texts_path = dir.path().join("out/generated_texts.jsonl");
    assert_eq!(count_lines(&texts_path), 50);
    let first = std::fs::read(&texts_path).unwrap();
    for line in std::fs::read_to_string(&texts_path).unwrap().lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(record["profile"]["kind"], "full");
        assert_eq!(record["profile"]["scores"].as_object().unwrap().len(), 5);
    }

    // Same seed reproduces the dataset byte for byte.
    let dir2 = tempfile::tempdir().unwrap();
    let output = run_cli(dir2.path(), &generate);
    assert!(output.status.success());
    let second = std::fs::read(dir2.path().join("out/generated_texts.jsonl")).unwrap();
    assert_eq!(first, second);

    // Prompted selection classifies each full profile for all five traits;
    // --traits all is identical here, so compare against a single-trait run.
    let output = run_cli(dir.path(), &["--out-dir", "out", "classify"]);
    assert!(output.status.success(), "{}", stderr(&output));
    assert_eq!(
        count_lines(&dir.path().join("out/classifier_outputs.jsonl")),
        250
    );
}

#[test]
fn prompted_vs_all_trait_selection_on_single_trait_texts() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_cli(
        dir.path(),
        &[
            "--out-dir",
            "out",
            "generate",
            "--scores",
            "5",
            "--temps",
            "0",
        ],
    );
    assert!(output.status.success(), "{}", stderr(&output));
    assert_eq!(
        count_lines(&dir.path().join("out/generated_texts.jsonl")),
        50
    );

    let output = run_cli(dir.path(), &["--out-dir", "out", "classify"]);
    assert!(output.status.success());
    assert_eq!(
        count_lines(&dir.path().join("out/classifier_outputs.jsonl")),
        50
    );

    let output = run_cli(
        dir.path(),
        &["--out-dir", "out", "classify", "--traits", "all"],
    );
    assert!(output.status.success());
    assert_eq!(
        count_lines(&dir.path().join("out/classifier_outputs.jsonl")),
        250
    );
}

#[test]
fn partial_generation_failure_exits_one_with_outputs_preserved() {
    let dir = tempfile::tempdir().unwrap();
    let script = serde_json::json!({
        "default": "a plain answer",
        "rules": [
            {"user_contains": "free weekend", "fail": "transport"}
        ]
    });
    std::fs::write(dir.path().join("mock.json"), script.to_string()).unwrap();
    std::fs::write(
        dir.path().join("personaforge.toml"),
        "[provider.mock]\nkind = \"mock\"\nmodel = \"mock-model\"\nscript = \"mock.json\"\n",
    )
    .unwrap();
    let output = run_cli(
        dir.path(),
        &[
            "--config",
            "personaforge.toml",
            "--out-dir",
            "out",
            "generate",
            "--scores",
            "5",
            "--temps",
            "0",
        ],
    );
    assert_eq!(output.status.code(), Some(1), "{}", stderr(&output));
    // q01 mentions the failing phrase: one failure per trait.
    assert_eq!(
        count_lines(&dir.path().join("out/generated_texts.jsonl")),
        45
    );
    assert_eq!(count_lines(&dir.path().join("out/generation_log.jsonl")), 5);
}

#[test]
fn evaluate_rejects_orphan_classifier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir_all(&out).unwrap();
    let text = serde_json::json!({
        "id": "txt-00000", "model": "m", "temperature": "0", "question_id": "q01",
        "profile": {"kind": "single", "scores": {"openness": 5}},
        "text": "hello", "edited": false, "masked_spans": [],
    });
    let verdict = serde_json::json!({
        "text_id": "txt-09999", "trait": "openness", "score": 1,
        "clues": [], "reasoning": "r", "decision_type": "implicit_signs",
    });
    std::fs::write(out.join("generated_texts.jsonl"), text.to_string() + "\n").unwrap();
    std::fs::write(
        out.join("classifier_outputs.jsonl"),
        verdict.to_string() + "\n",
    )
    .unwrap();
    let output = run_cli(dir.path(), &["--out-dir", "out", "evaluate"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("txt-09999"), "{}", stderr(&output));
}

#[test]
fn linguistics_with_oversized_k_reports_insufficient_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_cli(
        dir.path(),
        &[
            "--out-dir",
            "out",
            "generate",
            "--scores",
            "1,5",
            "--temps",
            "0",
        ],
    );
    assert!(output.status.success());
    let output = run_cli(
        dir.path(),
        &["--out-dir", "out", "linguistics", "--k", "1000"],
    );
    assert_eq!(output.status.code(), Some(1));
    assert!(
        stderr(&output).to_lowercase().contains("neighbors need"),
        "{}",
        stderr(&output)
    );
}

#[test]
fn report_with_only_questionnaire_outputs_has_that_section_alone() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_cli(
        dir.path(),
        &["--out-dir", "out", "questionnaire", "--repetitions", "2"],
    );
    assert!(output.status.success(), "{}", stderr(&output));
    let output = run_cli(dir.path(), &["--out-dir", "out", "report"]);
    assert!(output.status.success());
    let report = std::fs::read_to_string(dir.path().join("out/report.md")).unwrap();
    assert!(report.contains("## Questionnaire score distributions"));
    assert!(report.contains("## Questionnaire reliability"));
    assert!(!report.contains("## Lexical similarity"));
    assert!(!report.contains("## Prompted versus detected"));
}

/// Four texts with known annotations and verdicts; every reported metric is
/// asserted against hand-computed values.
#[test]
fn evaluate_matches_hand_computed_agreement_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir_all(&out).unwrap();

    let text = |id: &str, score: u8| {
        serde_json::json!({
            "id": id, "model": "m", "temperature": "0", "question_id": "q01",
            "profile": {"kind": "single", "scores": {"openness": score}},
            "text": format!("text body of {id}"), "edited": false, "masked_spans": [],
        })
        .to_string()
    };
    let texts = [text("t0", 5), text("t1", 5), text("t2", 1), text("t3", 3)].join("\n") + "\n";
    std::fs::write(out.join("generated_texts.jsonl"), texts).unwrap();

    let verdict = |id: &str, score: serde_json::Value, decision: &str| {
        serde_json::json!({
            "text_id": id, "trait": "openness", "score": score,
            "clues": ["c"], "reasoning": "r", "decision_type": decision,
        })
        .to_string()
    };
    let outputs = [
        verdict("t0", serde_json::json!(2), "explicit_signs"),
        verdict("t1", serde_json::json!(0), "intuition"),
        verdict(
            "t2",
            serde_json::json!("nondistinguishable"),
            "nondistinguishable",
        ),
        verdict("t3", serde_json::json!(1), "implicit_signs"),
    ]
    .join("\n")
        + "\n";
    std::fs::write(out.join("classifier_outputs.jsonl"), outputs).unwrap();

    let annotation = |id: &str, rater: &str, score: serde_json::Value| {
        serde_json::json!({
            "text_id": id, "annotator_id": rater, "trait": "openness",
            "score": score, "reasons": [], "spans": [],
        })
        .to_string()
    };
    let nd = serde_json::json!("nondistinguishable");
    let annotations = [
        annotation("t0", "a1", serde_json::json!(2)),
        annotation("t0", "a2", serde_json::json!(2)),
        annotation("t0", "a3", serde_json::json!(1)),
        annotation("t1", "a1", nd.clone()),
        annotation("t1", "a2", nd.clone()),
        annotation("t1", "a3", serde_json::json!(0)),
        annotation("t2", "a1", serde_json::json!(-1)),
        annotation("t2", "a2", serde_json::json!(-2)),
        annotation("t2", "a3", serde_json::json!(-1)),
        annotation("t3", "a1", serde_json::json!(0)),
        annotation("t3", "a2", serde_json::json!(1)),
        annotation("t3", "a3", serde_json::json!(2)),
    ]
    .join("\n")
        + "\n";
    std::fs::write(dir.path().join("annotations.jsonl"), annotations).unwrap();

    let output = run_cli(
        dir.path(),
        &[
            "--out-dir",
            "out",
            "evaluate",
            "--annotations",
            "annotations.jsonl",
        ],
    );
    assert!(output.status.success(), "{}", stderr(&output));

    // Voted finals: t0 -> 2 (majority), t1 -> nd (majority),
    // t2 -> -1 (majority), t3 -> 1 (median of 0,1,2).
    let finals: Vec<serde_json::Value> = std::fs::read_to_string(out.join("final_scores.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let final_of = |id: &str| finals.iter().find(|f| f["text_id"] == id).unwrap()["score"].clone();
    assert_eq!(final_of("t0"), serde_json::json!(2));
    assert_eq!(final_of("t1"), serde_json::json!("nondistinguishable"));
    assert_eq!(final_of("t2"), serde_json::json!(-1));
    assert_eq!(final_of("t3"), serde_json::json!(1));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("agreement_report.json")).unwrap())
            .unwrap();

    // Level 1 by hand: present support 3 with P=R=F=2/3, absent support 1
    // with zeros -> weighted 0.5 across the board.
    let level1 = &report["level1"]["openness"];
    assert!((level1["precision"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((level1["recall"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((level1["f1"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    // Level 2 by hand: high support 2 perfect, nd and low supports 1 with
    // zeros -> weighted 0.5.
    let level2 = &report["level2"]["openness"];
    assert!((level2["precision"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((level2["recall"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((level2["f1"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    // Level 3 by hand: |2 - 5/3| + |0 - 0| + |1 - 1| over 3 used pairs,
    // one pair excluded for the ND verdict.
    let level3 = &report["level3"]["openness"];
    assert!((level3["mae"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-12);
    assert_eq!(level3["pairs_used"], 3);
    assert_eq!(level3["pairs_excluded"], 1);

    // Confusion by hand: H row [0,1,1,0], M row [0,0,1,0], L row [0,0,0,1].
    let counts = &report["confusion"]["openness"]["counts"];
    assert_eq!(counts[2], serde_json::json!([0, 1, 1, 0]));
    assert_eq!(counts[1], serde_json::json!([0, 0, 1, 0]));
    assert_eq!(counts[0], serde_json::json!([0, 0, 0, 1]));

    // ND distribution by hand: 1 of 4, all prompted low.
    let nd_dist = &report["nd"]["openness"];
    assert!((nd_dist["nd_rate"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(nd_dist["level_shares"], serde_json::json!([1.0, 0.0, 0.0]));

    // Fleiss' kappa by hand: level 1 = 2/5, level 2 = 9/17.
    let iaa = std::fs::read_to_string(out.join("iaa_report.csv")).unwrap();
    assert!(iaa.contains("openness,0.400000,0.529412"), "{iaa}");
}

#[test]
fn custom_questionnaire_and_questions_plug_in_through_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let questionnaire = serde_json::json!([
        {"id": "c1", "statement": "Keeps a meticulous calendar", "trait": "conscientiousness", "reverse_keyed": false},
        {"id": "c2", "statement": "Abandons chores halfway", "trait": "conscientiousness", "reverse_keyed": true},
    ]);
    let questions = serde_json::json!([
        {"id": "k1", "text": "How do you plan a busy week?"},
    ]);
    std::fs::write(
        dir.path().join("tiny_inventory.json"),
        questionnaire.to_string(),
    )
    .unwrap();
    std::fs::write(
        dir.path().join("tiny_questions.json"),
        questions.to_string(),
    )
    .unwrap();
    std::fs::write(
        dir.path().join("personaforge.toml"),
        r#"
[questionnaire]
file = "tiny_inventory.json"
repetitions = 2

[generation]
questions_file = "tiny_questions.json"
scores = [1, 5]
temperatures = ["0"]
"#,
    )
    .unwrap();

    let output = run_cli(
        dir.path(),
        &[
            "--config",
            "personaforge.toml",
            "--out-dir",
            "out",
            "questionnaire",
        ],
    );
    assert!(output.status.success(), "{}", stderr(&output));
    // 2 items x 2 repetitions x (high, low) for the one covered trait.
    assert_eq!(
        count_lines(&dir.path().join("out/questionnaire_runs.jsonl")),
        8
    );

    let output = run_cli(
        dir.path(),
        &[
            "--config",
            "personaforge.toml",
            "--out-dir",
            "out",
            "generate",
        ],
    );
    assert!(output.status.success(), "{}", stderr(&output));
    // 5 traits x 2 scores x 1 temperature x 1 custom question.
    let texts = std::fs::read_to_string(dir.path().join("out/generated_texts.jsonl")).unwrap();
    assert_eq!(texts.lines().count(), 10);
    assert!(texts.contains("\"question_id\":\"k1\""));

    // The manifest records the custom files as inputs with digests.
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest_generate.json")).unwrap();
    assert!(manifest.contains("tiny_questions.json"));
}

#[test]
fn linguistics_span_source_uses_annotator_highlights() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir_all(&out).unwrap();

    // Six openness texts so k=1 neighbor analysis works, plus annotations
    // highlighting one span each for the first three.
    let mut texts = Vec::new();
    let mut annotations = Vec::new();
    let bodies = [
        "curiosity fuels vivid painting",
        "curiosity draws bold murals",
        "curiosity sparks strange sculptures",
        "routine keeps calm order",
        "routine holds steady habits",
        "routine guards quiet days",
    ];
    for (index, body) in bodies.iter().enumerate() {
        let id = format!("t{index}");
        let score = if index < 3 { 5 } else { 1 };
        texts.push(
            serde_json::json!({
                "id": id, "model": "m", "temperature": "0", "question_id": "q01",
                "profile": {"kind": "single", "scores": {"openness": score}},
                "text": body, "edited": false, "masked_spans": [],
            })
            .to_string(),
        );
        for rater in 0..3 {
            annotations.push(
                serde_json::json!({
                    "text_id": format!("t{index}"), "annotator_id": format!("a{rater}"),
                    "trait": "openness", "score": if index < 3 { 2 } else { -2 },
                    "reasons": [],
                    "spans": [{"start": 0, "end": 9, "surface": body.split(' ').next().unwrap()}],
                })
                .to_string(),
            );
        }
    }
    std::fs::write(out.join("generated_texts.jsonl"), texts.join("\n") + "\n").unwrap();
    std::fs::write(
        dir.path().join("annotations.jsonl"),
        annotations.join("\n") + "\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("personaforge.toml"),
        "[linguistics]\nsource = \"spans\"\nk = 1\n\n[evaluation]\nannotations_file = \"annotations.jsonl\"\n",
    )
    .unwrap();

    let output = run_cli(
        dir.path(),
        &[
            "--config",
            "personaforge.toml",
            "--out-dir",
            "out",
            "linguistics",
        ],
    );
    assert!(output.status.success(), "{}", stderr(&output));
    let lexicon = std::fs::read_to_string(out.join("lexicon_openness.csv")).unwrap();
    // Only highlighted surfaces are counted: "curiosity" and "routine".
    assert!(lexicon.contains("curiosity"));
    assert!(lexicon.contains("routine"));
    assert!(!lexicon.contains("painting"));
}
