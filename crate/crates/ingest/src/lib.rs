//! Pulls bug summaries, severities and attachment references from a
//! Bugzilla REST endpoint and joins them with a story-point annotation file
//! to produce a records file.
//!
//! Bugzilla has no story-point field, so points come from a CSV sidecar with
//! header `id,story_point`. Attachments are kept as URLs only.

mod annotations;
mod client;

pub use annotations::parse_annotations;
pub use client::{parse_attachment_response, parse_bug_response, BugzillaClient, ClientConfig};

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use spforge::dataset::{write_records, SeverityLabel, SeverityScale, StoryRecord};

/// Environment variable holding the Bugzilla base URL.
pub const BASE_URL_ENV: &str = "SPFORGE_BUGZILLA_URL";

/// Bugzilla's stock severity values, least severe first.
pub const BUGZILLA_SEVERITIES: [&str; 7] = ["enhancement", "trivial", "minor", "normal", "major", "critical", "blocker"];

/// A named scale over [`BUGZILLA_SEVERITIES`].
pub fn bugzilla_severity_scale() -> SeverityScale {
    SeverityScale::named(BUGZILLA_SEVERITIES).expect("stock severities are unique")
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("bug id must be positive, got {0}")]
    InvalidId(u64),
    #[error("bug {0} does not exist")]
    NotFound(u64),
    #[error("request to {url} failed after {attempts} attempt(s): {message}")]
    Transport { url: String, attempts: u32, message: String },
    #[error("request to {url} returned HTTP {status}")]
    Http { url: String, status: u16 },
    #[error("unexpected response from {url}: {message}")]
    Malformed { url: String, message: String },
    #[error("annotation line {line}: {message}")]
    Annotation { line: usize, message: String },
    #[error("writing records failed: {0}")]
    Write(#[from] std::io::Error),
}

impl IngestError {
    /// Network-level failures, as opposed to bad data.
    pub fn is_transport(&self) -> bool {
        matches!(self, IngestError::Transport { .. } | IngestError::Http { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentRef {
    pub id: u64,
    pub content_type: String,
    pub filename: String,
    pub url: String,
}

impl AttachmentRef {
    pub fn is_image(&self) -> bool {
        self.content_type.starts_with("image/")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteBug {
    pub id: u64,
    pub summary: String,
    /// Severity exactly as reported by the tracker.
    pub severity: String,
    pub attachment_refs: Vec<AttachmentRef>,
}

impl RemoteBug {
    /// URL of the first image attachment, if any.
    pub fn image_ref(&self) -> Option<&str> {
        self.attachment_refs.iter().find(|a| a.is_image()).map(|a| a.url.as_str())
    }

    fn into_record(self, story_point: u32) -> StoryRecord {
        let image_ref = self.image_ref().map(str::to_string);
        StoryRecord {
            story_id: self.id.to_string(),
            story_text: self.summary,
            severity: SeverityLabel::Name(self.severity),
            story_point,
            image_ref,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AssembleSummary {
    pub written: usize,
    /// Bugs with no story-point annotation.
    pub skipped: Vec<u64>,
}

/// Writes one record per annotated bug, ordered by bug id.
pub fn assemble_records<W: Write>(
    bugs: &[RemoteBug],
    annotations: &BTreeMap<u64, u32>,
    out: W,
) -> Result<AssembleSummary, IngestError> {
    let mut sorted: Vec<&RemoteBug> = bugs.iter().collect();
    sorted.sort_by_key(|b| b.id);
    let mut summary = AssembleSummary::default();
    let mut records = Vec::with_capacity(sorted.len());
    for bug in sorted {
        match annotations.get(&bug.id) {
            Some(&sp) => records.push(bug.clone().into_record(sp)),
            None => summary.skipped.push(bug.id),
        }
    }
    write_records(out, &records)?;
    summary.written = records.len();
    Ok(summary)
}
