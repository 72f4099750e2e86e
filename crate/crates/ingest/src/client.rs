use std::time::Duration;

use serde::Deserialize;
use serde_json::Value;

use crate::{AttachmentRef, IngestError, RemoteBug};

#[derive(Clone, Debug)]
pub struct ClientConfig {
    /// Base URL without a trailing `/rest`, e.g. `https://bugzilla.mozilla.org`.
    pub base_url: String,
    /// Attempts per request for transport failures and 5xx responses.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub backoff: Duration,
    pub timeout: Duration,
}

impl ClientConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            max_attempts: 3,
            backoff: Duration::from_millis(250),
            timeout: Duration::from_secs(30),
        }
    }
}

pub struct BugzillaClient {
    config: ClientConfig,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct BugJson {
    id: u64,
    #[serde(default)]
    summary: String,
    #[serde(default)]
    severity: String,
}

#[derive(Deserialize)]
struct AttachmentJson {
    id: u64,
    #[serde(default)]
    content_type: String,
    #[serde(default)]
    file_name: String,
    #[serde(default)]
    is_obsolete: u8,
}

fn malformed(url: &str, message: impl ToString) -> IngestError {
    IngestError::Malformed { url: url.to_string(), message: message.to_string() }
}

fn api_error(body: &Value) -> Option<i64> {
    (body.get("error").and_then(Value::as_bool) == Some(true)).then(|| body.get("code").and_then(Value::as_i64).unwrap_or(0))
}

/// Parses a `GET /rest/bug?id=N` body into `(summary, severity)`.
pub fn parse_bug_response(id: u64, url: &str, body: &Value) -> Result<(String, String), IngestError> {
    if let Some(code) = api_error(body) {
        // 101: bug does not exist; 102: access denied, which looks the same to us.
        return Err(if code == 101 || code == 102 { IngestError::NotFound(id) } else { malformed(url, body) });
    }
    let bugs: Vec<BugJson> = serde_json::from_value(body.get("bugs").cloned().ok_or_else(|| malformed(url, "no `bugs` field"))?)
        .map_err(|e| malformed(url, e))?;
    let bug = bugs.into_iter().find(|b| b.id == id).ok_or(IngestError::NotFound(id))?;
    if bug.summary.trim().is_empty() {
        return Err(malformed(url, format!("bug {id} has an empty summary")));
    }
    Ok((bug.summary, bug.severity))
}

/// Parses a `GET /rest/bug/N/attachment` body. Obsolete attachments are dropped.
pub fn parse_attachment_response(id: u64, base_url: &str, url: &str, body: &Value) -> Result<Vec<AttachmentRef>, IngestError> {
    if let Some(code) = api_error(body) {
        return Err(if code == 101 { IngestError::NotFound(id) } else { malformed(url, body) });
    }
    let list = body
        .get("bugs")
        .and_then(|b| b.get(id.to_string()))
        .cloned()
        .unwrap_or(Value::Array(Vec::new()));
    let attachments: Vec<AttachmentJson> = serde_json::from_value(list).map_err(|e| malformed(url, e))?;
    let mut refs: Vec<AttachmentRef> = attachments
        .into_iter()
        .filter(|a| a.is_obsolete == 0)
        .map(|a| AttachmentRef {
            id: a.id,
            content_type: a.content_type,
            filename: a.file_name,
            url: format!("{base_url}/attachment.cgi?id={}", a.id),
        })
        .collect();
    refs.sort_by_key(|a| a.id);
    Ok(refs)
}

enum Attempt {
    Done(Value),
    Missing,
    Retry(String),
    Fail(IngestError),
}

impl BugzillaClient {
    pub fn new(config: ClientConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        Self { config, agent }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    fn attempt(&self, url: &str) -> Attempt {
        match self.agent.get(url).set("Accept", "application/json").call() {
            Ok(resp) => match resp.into_string() {
                Ok(text) => match serde_json::from_str(&text) {
                    Ok(v) => Attempt::Done(v),
                    Err(e) => Attempt::Fail(malformed(url, e)),
                },
                Err(e) => Attempt::Retry(e.to_string()),
            },
            Err(ureq::Error::Status(404, _)) => Attempt::Missing,
            Err(ureq::Error::Status(status, resp)) if status < 500 => {
                // Bugzilla reports a missing bug as 4xx with a JSON error body.
                match resp.into_string().ok().and_then(|t| serde_json::from_str::<Value>(&t).ok()) {
                    Some(v) if api_error(&v).is_some() => Attempt::Done(v),
                    _ => Attempt::Fail(IngestError::Http { url: url.to_string(), status }),
                }
            }
            Err(ureq::Error::Status(status, _)) => Attempt::Retry(format!("HTTP {status}")),
            Err(e) => Attempt::Retry(e.to_string()),
        }
    }

    fn get_json(&self, id: u64, url: &str) -> Result<Value, IngestError> {
        let attempts = self.config.max_attempts.max(1);
        let mut delay = self.config.backoff;
        let mut last = String::new();
        for n in 1..=attempts {
            match self.attempt(url) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Missing => return Err(IngestError::NotFound(id)),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(msg) => last = msg,
            }
            if n < attempts {
                std::thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(IngestError::Transport { url: url.to_string(), attempts, message: last })
    }

    /// Fetches summary, severity and attachment metadata for one bug.
    pub fn fetch_bug(&self, id: u64) -> Result<RemoteBug, IngestError> {
        if id == 0 {
            return Err(IngestError::InvalidId(id));
        }
        let base = &self.config.base_url;
        let url = format!("{base}/rest/bug?id={id}&include_fields=id,summary,severity");
        let (summary, severity) = parse_bug_response(id, &url, &self.get_json(id, &url)?)?;
        let url = format!("{base}/rest/bug/{id}/attachment?exclude_fields=data");
        let attachment_refs = parse_attachment_response(id, base, &url, &self.get_json(id, &url)?)?;
        Ok(RemoteBug { id, summary, severity, attachment_refs })
    }

    /// Fetches many bugs with up to `parallelism` requests in flight.
    /// Results come back in the order of `ids`.
    pub fn fetch_bugs(&self, ids: &[u64], parallelism: usize) -> Vec<(u64, Result<RemoteBug, IngestError>)> {
        let workers = parallelism.clamp(1, ids.len().max(1));
        let chunk = ids.len().div_ceil(workers).max(1);
        std::thread::scope(|s| {
            let handles: Vec<_> = ids
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(|&id| (id, self.fetch_bug(id))).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("fetch worker panicked")).collect()
        })
    }
}
