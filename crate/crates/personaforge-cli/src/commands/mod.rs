//! The six pipeline subcommands.

pub mod classify;
pub mod evaluate;
pub mod generate;
pub mod linguistics;
pub mod questionnaire;
pub mod report;

use std::path::{Path, PathBuf};

use personaforge_core::domain::{ClassifierOutput, GeneratedText};

use crate::config::Context;
use crate::fsio::read_jsonl;
use crate::{config_error, run_error, CliResult};

/// Resolves a stage input: explicit flag value, or the conventional file in
/// the output directory. Missing files are a usage error.
pub fn resolve_input(
    context: &Context,
    flag: Option<&Path>,
    default_name: &str,
) -> CliResult<PathBuf> {
    let path = flag
        .map(Path::to_path_buf)
        .unwrap_or_else(|| context.out_path(default_name));
    if !path.exists() {
        return Err(config_error(format!(
            "input file {} does not exist (run the upstream stage first or pass a path)",
            path.display()
        )));
    }
    Ok(path)
}

/// Loads and validates a generated-texts dataset.
pub fn load_generated_texts(context: &mut Context, path: &Path) -> CliResult<Vec<GeneratedText>> {
    let texts: Vec<GeneratedText> = read_jsonl(path)?;
    for text in &texts {
        text.validate()
            .map_err(|e| run_error(format!("{}: record {}: {e}", path.display(), text.id)))?;
    }
    context.inputs.push(crate::config::InputRecord {
        path: path.display().to_string(),
        sha256: crate::fsio::file_digest(path)?,
    });
    Ok(texts)
}

/// Loads classifier outputs (schema validation happens in deserialization).
pub fn load_classifier_outputs(
    context: &mut Context,
    path: &Path,
) -> CliResult<Vec<ClassifierOutput>> {
    let outputs: Vec<ClassifierOutput> = read_jsonl(path)?;
    context.inputs.push(crate::config::InputRecord {
        path: path.display().to_string(),
        sha256: crate::fsio::file_digest(path)?,
    });
    Ok(outputs)
}
