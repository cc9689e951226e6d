//! File I/O helpers: JSONL datasets, CSV tables, and content digests.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{config_error, run_error, CliError, CliResult};

/// Reads a JSONL file into records, with line numbers in error messages.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let file = fs::File::open(path)
        .map_err(|e| config_error(format!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| run_error(format!("reading {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line)
            .map_err(|e| run_error(format!("{}:{}: {e}", path.display(), index + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// Writes records as one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> CliResult<()> {
    let mut buffer = String::new();
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| run_error(format!("serializing for {}: {e}", path.display())))?;
        buffer.push_str(&line);
        buffer.push('\n');
    }
    write_file(path, buffer.as_bytes())
}

/// Writes a value as pretty-printed JSON with a trailing newline.
pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| run_error(format!("serializing for {}: {e}", path.display())))?;
    body.push('\n');
    write_file(path, body.as_bytes())
}

/// Writes a CSV with a fixed header and row order.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(header)
        .map_err(|e| run_error(format!("writing {}: {e}", path.display())))?;
    for row in rows {
        writer
            .write_record(row)
            .map_err(|e| run_error(format!("writing {}: {e}", path.display())))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| run_error(format!("writing {}: {e}", path.display())))?;
    write_file(path, &bytes)
}

/// Fixed-precision cell format for CSV floats so diffs stay meaningful.
pub fn csv_float(value: f64) -> String {
    format!("{value:.6}")
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| run_error(format!("creating {}: {e}", parent.display())))?;
    }
    let mut file = fs::File::create(path)
        .map_err(|e| run_error(format!("creating {}: {e}", path.display())))?;
    file.write_all(bytes)
        .map_err(|e| run_error(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Hex SHA-256 of a file on disk.
pub fn file_digest(path: &Path) -> CliResult<String> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Run(format!("digesting {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}
