//! Evaluation manifests: one JSON object per line.
//!
//! Each record names a heatmap image, the referring expression it was
//! produced for, the annotated target box, and a difficulty bucket. Parse
//! errors carry the 1-based line number so a bad record in a large
//! manifest can be found quickly.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Annotation difficulty bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(&self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(Error::validation(format!(
                "unknown difficulty {other:?}; expected easy, medium, or hard"
            ))),
        }
    }
}

/// One manifest line: a heatmap with its target annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Stable identifier used in reports and error messages.
    pub image_id: String,
    /// Path to the heatmap PNG; relative paths are resolved by the caller
    /// (the CLI resolves against the manifest's directory).
    pub heatmap_path: String,
    /// The referring expression the heatmap was generated for
    /// (informational; the pipeline never reads it).
    pub expression: String,
    /// Annotated ground-truth box, inclusive corners.
    pub target_box: BoundingBox,
    pub difficulty: Difficulty,
}

/// Parses JSONL text. Whitespace-only lines are skipped so trailing
/// newlines are harmless; any other unparsable line is an error naming
/// its 1-based line number.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(line).map_err(|e| Error::ManifestParse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Reads and parses a manifest file.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(&text)
}

/// Serialises entries back to JSONL (one object per line, trailing
/// newline). `parse_manifest(&serialize_manifest(e)) == e` for all
/// well-formed entries.
pub fn serialize_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::new();
    for entry in entries {
        // Serialisation of a plain struct cannot fail.
        out.push_str(&serde_json::to_string(entry).expect("manifest entry serialises"));
        out.push('\n');
    }
    out
}
