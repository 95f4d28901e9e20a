//! Line-delimited JSON artifacts.
//!
//! Every stage writes its records one object per line. Each line carries a
//! `schema_version` field next to the record's own fields so that readers can
//! reject files written by an incompatible build.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    record: T,
}

#[derive(Serialize)]
struct VersionedRef<'a, T> {
    schema_version: u32,
    #[serde(flatten)]
    record: &'a T,
}

/// Serializes one record as a single versioned JSON line (without newline).
pub fn to_line<T: Serialize>(record: &T) -> Result<String> {
    Ok(serde_json::to_string(&VersionedRef {
        schema_version: SCHEMA_VERSION,
        record,
    })?)
}

pub fn from_line<T: DeserializeOwned>(line: &str) -> std::result::Result<T, String> {
    let v: Versioned<T> = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if v.schema_version != SCHEMA_VERSION {
        return Err(format!(
            "schema_version {} (expected {})",
            v.schema_version, SCHEMA_VERSION
        ));
    }
    Ok(v.record)
}

pub fn write_jsonl<'a, T, I>(path: &Path, records: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    // Write to a sibling temp file first so an interrupted stage never leaves
    // a truncated artifact behind.
    let tmp = path.with_extension("jsonl.partial");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        for record in records {
            out.write_all(to_line(record)?.as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path)?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = from_line(&line).map_err(|reason| Error::Artifact {
            path: path.to_path_buf(),
            line: idx + 1,
            reason,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Writes a pretty-printed JSON document (summaries, bundles).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
