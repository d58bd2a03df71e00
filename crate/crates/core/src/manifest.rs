//! Utterance manifest: the batch-processing index consumed by the pipeline
//! front-end.
//!
//! Tab-separated, five columns: id, audio, alignment, posteriorgram, speaker.
//! Empty fields mean "absent"; every entry needs an alignment or a
//! posteriorgram (or both). Lines starting with `#` are comments.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("could not read manifest {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: malformed manifest row: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate utterance id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: entry {id:?} has neither alignment nor posteriorgram")]
    MissingReference { line: usize, id: String },
    #[error("referenced files not found:\n{}", paths.join("\n"))]
    FileNotFound { paths: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub audio: PathBuf,
    pub alignment: Option<PathBuf>,
    pub posteriorgram: Option<PathBuf>,
    pub speaker: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn speakers(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.speaker.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }
}

/// Parse manifest text; paths are interpreted relative to `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Manifest, ManifestError> {
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.trim_end_matches('\r');
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 5 {
            return Err(ManifestError::Malformed {
                line,
                reason: format!("expected 5 tab-separated fields, got {}", fields.len()),
            });
        }
        let id = fields[0];
        if id.is_empty() {
            return Err(ManifestError::Malformed {
                line,
                reason: "empty id".into(),
            });
        }
        if !seen.insert(id.to_string()) {
            return Err(ManifestError::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
        if fields[1].is_empty() {
            return Err(ManifestError::Malformed {
                line,
                reason: "empty audio path".into(),
            });
        }
        let opt_path = |s: &str| {
            if s.is_empty() {
                None
            } else {
                Some(base_dir.join(s))
            }
        };
        let alignment = opt_path(fields[2]);
        let posteriorgram = opt_path(fields[3]);
        if alignment.is_none() && posteriorgram.is_none() {
            return Err(ManifestError::MissingReference {
                line,
                id: id.to_string(),
            });
        }
        entries.push(ManifestEntry {
            id: id.to_string(),
            audio: base_dir.join(fields[1]),
            alignment,
            posteriorgram,
            speaker: fields[4].to_string(),
        });
    }
    Ok(Manifest { entries })
}

/// Read, parse and validate a manifest: all referenced files must exist, and
/// missing paths are reported as one batch.
pub fn validate_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let manifest = parse_manifest(&text, base)?;

    let mut missing = Vec::new();
    for entry in &manifest.entries {
        let mut check = |p: &Path| {
            if !p.is_file() {
                missing.push(p.display().to_string());
            }
        };
        check(&entry.audio);
        if let Some(p) = &entry.alignment {
            check(p);
        }
        if let Some(p) = &entry.posteriorgram {
            check(p);
        }
    }
    if !missing.is_empty() {
        return Err(ManifestError::FileNotFound { paths: missing });
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows_in_order() {
        let text = "# corpus\n\
                    utt1\ta/1.wav\ta/1.lab\t\tspk_a\n\
                    utt2\ta/2.wav\t\ta/2.pg.csv\tspk_a\n\
                    utt3\tb/3.wav\tb/3.lab\tb/3.pg.csv\tspk_b\n";
        let m = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(m.entries.len(), 3);
        assert_eq!(m.entries[0].id, "utt1");
        assert_eq!(m.entries[0].audio, Path::new("/data/a/1.wav"));
        assert!(m.entries[0].posteriorgram.is_none());
        assert!(m.entries[1].alignment.is_none());
        assert_eq!(m.speakers(), vec!["spk_a", "spk_b"]);
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = "u\ta.wav\ta.lab\t\ts\nu\tb.wav\tb.lab\t\ts\n";
        assert!(matches!(
            parse_manifest(text, Path::new(".")),
            Err(ManifestError::DuplicateId { line: 2, .. })
        ));
    }

    #[test]
    fn entry_needs_some_reference() {
        let text = "u\ta.wav\t\t\ts\n";
        assert!(matches!(
            parse_manifest(text, Path::new(".")),
            Err(ManifestError::MissingReference { line: 1, .. })
        ));
    }

    #[test]
    fn wrong_column_count_rejected() {
        let text = "u\ta.wav\ta.lab\ts\n";
        assert!(matches!(
            parse_manifest(text, Path::new(".")),
            Err(ManifestError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn missing_files_reported_as_batch() {
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = dir.path().join("m.tsv");
        std::fs::write(
            &manifest_path,
            "u1\tu1.wav\tu1.lab\t\ts\nu2\tu2.wav\tu2.lab\t\ts\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("u1.wav"), b"x").unwrap();
        match validate_manifest(&manifest_path) {
            Err(ManifestError::FileNotFound { paths }) => {
                assert_eq!(paths.len(), 3); // u1.lab, u2.wav, u2.lab
            }
            other => panic!("expected FileNotFound, got {other:?}"),
        }
    }

    #[test]
    fn valid_manifest_passes_file_checks() {
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = dir.path().join("m.tsv");
        std::fs::write(&manifest_path, "u1\tu1.wav\tu1.lab\t\ts\n").unwrap();
        std::fs::write(dir.path().join("u1.wav"), b"x").unwrap();
        std::fs::write(dir.path().join("u1.lab"), b"x").unwrap();
        let m = validate_manifest(&manifest_path).unwrap();
        assert_eq!(m.entries.len(), 1);
    }
}
