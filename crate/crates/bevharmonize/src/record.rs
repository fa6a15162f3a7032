//! Versioned newline-delimited record files.
//!
//! Every file this crate reads or writes (manifests, detections, PDIR
//! stats, splits, weights, evaluation reports) is a stream of JSON
//! records, one per line. Line 1 must be the header record
//! `{"format":"bevharmonize/1"}`; writers also echo the resolved run
//! configuration into the header's `config` field so output artifacts
//! carry their own provenance.
//!
//! Writes go through a temporary file in the destination directory
//! followed by a rename, so a crash never leaves a partially written
//! file behind.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Format tag required in the header record of every file.
pub const FORMAT: &str = "bevharmonize/1";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: empty file, expected a header record")]
    MissingHeader { path: String },
    #[error("{path}: unsupported format '{found}', expected '{FORMAT}'")]
    UnsupportedFormat { path: String, found: String },
    #[error("{path}:{line}: malformed record: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl RecordError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        RecordError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl Header {
    pub fn new(config: Option<serde_json::Value>) -> Self {
        Self {
            format: FORMAT.to_string(),
            config,
        }
    }
}

/// Read a record file: validated header plus one typed record per line.
///
/// Returned records are paired with their 1-based line number so callers
/// can report a locus for semantic errors of their own.
pub fn read_records<T: DeserializeOwned>(
    path: &Path,
) -> Result<(Header, Vec<(usize, T)>), RecordError> {
    let file = File::open(path).map_err(|e| RecordError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let header = loop {
        match lines.next() {
            None => {
                return Err(RecordError::MissingHeader {
                    path: path.display().to_string(),
                })
            }
            Some((_, Err(e))) => return Err(RecordError::io(path, e)),
            Some((idx, Ok(text))) => {
                if text.trim().is_empty() {
                    continue;
                }
                let header: Header =
                    serde_json::from_str(&text).map_err(|e| RecordError::Parse {
                        path: path.display().to_string(),
                        line: idx + 1,
                        message: e.to_string(),
                    })?;
                if header.format != FORMAT {
                    return Err(RecordError::UnsupportedFormat {
                        path: path.display().to_string(),
                        found: header.format,
                    });
                }
                break header;
            }
        }
    };

    let mut records = Vec::new();
    for (idx, line) in lines {
        let text = line.map_err(|e| RecordError::io(path, e))?;
        if text.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&text).map_err(|e| RecordError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push((idx + 1, record));
    }
    Ok((header, records))
}

/// Write a record file atomically: header first, then one record per line.
pub fn write_records<T: Serialize>(
    path: &Path,
    config: Option<serde_json::Value>,
    records: &[T],
) -> Result<(), RecordError> {
    let serialize_failed = |e: serde_json::Error| RecordError::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    };
    let mut buf = Vec::new();
    buf.extend_from_slice(
        serde_json::to_string(&Header::new(config))
            .map_err(serialize_failed)?
            .as_bytes(),
    );
    buf.push(b'\n');
    for record in records {
        buf.extend_from_slice(
            serde_json::to_string(record)
                .map_err(serialize_failed)?
                .as_bytes(),
        );
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Write bytes to `path` via a temp file + rename in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RecordError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| RecordError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| RecordError::io(path, e))?;
    tmp.flush().map_err(|e| RecordError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| RecordError::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        id: String,
        value: f64,
    }

    #[test]
    fn round_trip_preserves_records_and_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.bhz");
        let rows = vec![
            Row {
                id: "a".into(),
                value: 1.5,
            },
            Row {
                id: "b".into(),
                value: -2.0,
            },
        ];
        let config = serde_json::json!({"subcommand": "test", "seed": 7});
        write_records(&path, Some(config.clone()), &rows).unwrap();

        let (header, got) = read_records::<Row>(&path).unwrap();
        assert_eq!(header.format, FORMAT);
        assert_eq!(header.config, Some(config));
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].1, rows[0]);
        assert_eq!((got[0].0, got[1].0), (2, 3)); // line numbers after the header
    }

    #[test]
    fn missing_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.bhz");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(
            read_records::<Row>(&path),
            Err(RecordError::MissingHeader { .. })
        ));
    }

    #[test]
    fn wrong_format_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bhz");
        std::fs::write(&path, "{\"format\":\"other/9\"}\n").unwrap();
        assert!(matches!(
            read_records::<Row>(&path),
            Err(RecordError::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn malformed_record_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bhz");
        std::fs::write(
            &path,
            format!("{{\"format\":\"{FORMAT}\"}}\n{{\"id\":\"a\",\"value\":1.0}}\nnot json\n"),
        )
        .unwrap();
        match read_records::<Row>(&path) {
            Err(RecordError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn atomic_write_replaces_existing_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bhz");
        std::fs::write(&path, "old").unwrap();
        write_atomic(&path, b"new contents").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"new contents");
    }
}
