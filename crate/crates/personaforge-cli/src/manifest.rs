//! Run manifests: every output file traceable to the exact configuration
//! and inputs that produced it.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{Context, InputRecord};
use crate::fsio::{file_digest, sha256_hex, write_json_pretty};
use crate::CliResult;

/// One produced file with its content digest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub timestamp_unix: u64,
    pub timestamp: String,
    pub subcommand: String,
    pub provider: String,
    pub model: String,
    pub seed: u64,
    pub workers: usize,
    pub config: serde_json::Value,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<OutputRecord>,
    pub provider_calls: u64,
    pub cache_hits: u64,
}

/// Wall-clock seconds, overridable through `SOURCE_DATE_EPOCH` so manifest
/// timestamps can be pinned for reproducible runs.
pub fn current_unix_time() -> u64 {
    if let Ok(pinned) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(seconds) = pinned.trim().parse() {
            return seconds;
        }
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// RFC 3339 UTC formatting of a unix timestamp (civil-from-days algorithm).
pub fn format_rfc3339(unix: u64) -> String {
    let days = unix / 86_400;
    let seconds_of_day = unix % 86_400;
    let (year, month, day) = civil_from_days(days as i64);
    format!(
        "{year:04}-{month:02}-{day:02}T{:02}:{:02}:{:02}Z",
        seconds_of_day / 3600,
        (seconds_of_day % 3600) / 60,
        seconds_of_day % 60
    )
}

fn civil_from_days(days_since_epoch: i64) -> (i64, u32, u32) {
    let z = days_since_epoch + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1_460 + doe / 36_524 - doe / 146_096) / 365;
    let year = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let month = (if mp < 10 { mp + 3 } else { mp - 9 }) as u32;
    (if month <= 2 { year + 1 } else { year }, month, day)
}

/// Builds and writes `manifest_<subcommand>.json`, digesting every listed
/// output file. The run id hashes the subcommand, configuration snapshot,
/// and input digests, so identical runs share an id.
pub fn write_manifest(
    context: &Context,
    subcommand: &str,
    model: &str,
    output_files: &[&Path],
    provider_calls: u64,
    cache_hits: u64,
) -> CliResult<()> {
    let config_snapshot = serde_json::to_value(&context.config)
        .map_err(|e| crate::run_error(format!("serializing config: {e}")))?;
    let mut outputs = Vec::with_capacity(output_files.len());
    for path in output_files {
        outputs.push(OutputRecord {
            path: path.display().to_string(),
            sha256: file_digest(path)?,
        });
    }
    let mut id_material = String::new();
    id_material.push_str(subcommand);
    id_material.push('\n');
    id_material.push_str(&config_snapshot.to_string());
    for input in &context.inputs {
        id_material.push('\n');
        id_material.push_str(&input.sha256);
    }
    let unix = current_unix_time();
    let manifest = RunManifest {
        run_id: sha256_hex(id_material.as_bytes())[..16].to_string(),
        timestamp_unix: unix,
        timestamp: format_rfc3339(unix),
        subcommand: subcommand.to_string(),
        provider: context.provider_name.clone(),
        model: model.to_string(),
        seed: context.seed,
        workers: context.workers,
        config: config_snapshot,
        inputs: context.inputs.clone(),
        outputs,
        provider_calls,
        cache_hits,
    };
    write_json_pretty(
        &context.out_path(&format!("manifest_{subcommand}.json")),
        &manifest,
    )
}
