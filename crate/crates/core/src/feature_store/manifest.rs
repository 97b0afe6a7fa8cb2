use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "NC")]
    Nc,
    #[serde(rename = "MCI")]
    Mci,
}

impl Label {
    /// Class index used by the classifier head: NC = 0, MCI = 1.
    pub fn index(self) -> usize {
        match self {
            Label::Nc => 0,
            Label::Mci => 1,
        }
    }

    pub fn from_index(index: usize) -> Self {
        if index == 0 {
            Label::Nc
        } else {
            Label::Mci
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Nc => "NC",
            Label::Mci => "MCI",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MCI" => Ok(Label::Mci),
            "NC" => Ok(Label::Nc),
            other => Err(Error::InvalidArgument(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "en")]
    En,
    #[serde(rename = "zh")]
    Zh,
}

impl std::str::FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            other => Err(Error::InvalidArgument(format!("unknown language {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub path: PathBuf,
    pub patient_id: String,
    pub recording_id: String,
    pub language: Language,
    pub label: Label,
}

impl UtteranceRecord {
    /// Unique identifier of the recording within a manifest.
    pub fn key(&self) -> String {
        format!("{}/{}", self.patient_id, self.recording_id)
    }

    /// Resolves `path` against `base` when it is relative.
    pub fn resolve(&self, base: &Path) -> PathBuf {
        if self.path.is_absolute() {
            self.path.clone()
        } else {
            base.join(&self.path)
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    path: Option<String>,
    patient_id: Option<String>,
    recording_id: Option<String>,
    language: Option<String>,
    label: Option<String>,
}

fn required(field: Option<String>, name: &str, line: usize) -> Result<String> {
    field.ok_or_else(|| Error::Manifest {
        line,
        message: format!("missing field {name:?}"),
    })
}

/// Parses JSON-Lines manifest text. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_manifest(text: &str) -> Result<Vec<UtteranceRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(raw_line).map_err(|e| Error::Manifest {
            line,
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Manifest { line, message };
        let record = UtteranceRecord {
            path: PathBuf::from(required(raw.path, "path", line)?),
            patient_id: required(raw.patient_id, "patient_id", line)?,
            recording_id: required(raw.recording_id, "recording_id", line)?,
            language: required(raw.language, "language", line)?
                .parse()
                .map_err(|e: Error| bad(e.to_string()))?,
            label: required(raw.label, "label", line)?
                .parse()
                .map_err(|e: Error| bad(e.to_string()))?,
        };
        if !seen.insert((record.patient_id.clone(), record.recording_id.clone())) {
            return Err(Error::DuplicateKey {
                patient_id: record.patient_id,
                recording_id: record.recording_id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn write_manifest(records: &[UtteranceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
