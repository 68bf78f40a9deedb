//! HTTP client for the artifact store service.

use std::time::Duration;

use serde::Deserialize;
use ureq::Agent;

use super::{check_namespace, ArtifactStore, ListEntry, StoreError};
use crate::artifact::{encode_segment, ArtifactEnvelope, ArtifactKind};
use crate::context::ModelContext;

#[derive(Debug, Clone)]
pub struct RemoteStore {
    base_url: String,
    agent: Agent,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
    #[serde(default)]
    detail: String,
}

#[derive(Deserialize)]
struct SaveResponse {
    revision: u64,
}

/// What the request was about, so error bodies can be mapped back to the
/// same [`StoreError`] a local store would return.
struct Subject<'a> {
    kind: ArtifactKind,
    identifier: &'a str,
    revision: Option<u64>,
}

impl RemoteStore {
    /// `base_url` is `http://host:port` without a trailing slash.
    pub fn new(base_url: impl Into<String>) -> RemoteStore {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .proxy(None)
            .timeout_connect(Some(Duration::from_secs(5)))
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        RemoteStore {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn namespace_url(&self, context: &ModelContext) -> String {
        format!(
            "{}/api/v1/models/{}/versions/{}",
            self.base_url,
            encode_segment(context.model_name()),
            encode_segment(context.model_version())
        )
    }

    fn artifact_url(&self, context: &ModelContext, kind: ArtifactKind, identifier: &str) -> String {
        format!(
            "{}/{}/{}",
            self.namespace_url(context),
            kind.collection(),
            encode_segment(identifier)
        )
    }

    fn transport(&self, err: ureq::Error) -> StoreError {
        StoreError::StoreUnavailable(format!("{}: {err}", self.base_url))
    }

    /// Sends a request and returns the body of a 2xx response.
    fn exchange(
        &self,
        result: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
        subject: Option<Subject<'_>>,
    ) -> Result<Vec<u8>, StoreError> {
        let mut response = result.map_err(|e| self.transport(e))?;
        let status = response.status();
        let body = response
            .body_mut()
            .read_to_vec()
            .map_err(|e| self.transport(e))?;
        if status.is_success() {
            return Ok(body);
        }
        let parsed: Option<ErrorBody> = serde_json::from_slice(&body).ok();
        let (code, detail) = match parsed {
            Some(e) => (e.error, e.detail),
            None => (String::new(), String::from_utf8_lossy(&body).into_owned()),
        };
        Err(match (code.as_str(), subject) {
            ("not_found", Some(s)) => StoreError::not_found(s.kind, s.identifier, s.revision),
            ("schema_violation", _) => StoreError::SchemaViolation(detail),
            _ => StoreError::StoreUnavailable(format!(
                "{} answered {status}: {code} {detail}",
                self.base_url
            )),
        })
    }
}

impl ArtifactStore for RemoteStore {
    fn save(&self, context: &ModelContext, envelope: &ArtifactEnvelope) -> Result<u64, StoreError> {
        check_namespace(context, envelope)?;
        let url = self.artifact_url(context, envelope.kind(), envelope.identifier());
        let bytes = envelope.to_canonical_bytes();
        let result = self
            .agent
            .put(&url)
            .header("content-type", "application/json")
            .send(&bytes[..]);
        let body = self.exchange(result, None)?;
        let response: SaveResponse = serde_json::from_slice(&body)
            .map_err(|e| StoreError::StoreUnavailable(format!("unexpected save response: {e}")))?;
        Ok(response.revision)
    }

    fn load(
        &self,
        context: &ModelContext,
        kind: ArtifactKind,
        identifier: &str,
        revision: Option<u64>,
    ) -> Result<ArtifactEnvelope, StoreError> {
        let mut url = self.artifact_url(context, kind, identifier);
        if let Some(r) = revision {
            url.push_str(&format!("?revision={r}"));
        }
        let result = self.agent.get(&url).call();
        let body = self.exchange(
            result,
            Some(Subject {
                kind,
                identifier,
                revision,
            }),
        )?;
        Ok(ArtifactEnvelope::from_slice(&body)?)
    }

    fn list(
        &self,
        context: &ModelContext,
        kind: Option<ArtifactKind>,
    ) -> Result<Vec<ListEntry>, StoreError> {
        let mut url = format!("{}/artifacts", self.namespace_url(context));
        if let Some(k) = kind {
            url.push_str(&format!("?kind={k}"));
        }
        let result = self.agent.get(&url).call();
        let body = self.exchange(result, None)?;
        serde_json::from_slice(&body)
            .map_err(|e| StoreError::StoreUnavailable(format!("unexpected listing: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::StoreLocator;

    #[test]
    fn unreachable_server_is_unavailable() {
        // Port 9 (discard) is essentially never listening on loopback.
        let store = RemoteStore::new("http://127.0.0.1:9");
        let ctx = ModelContext::with_locator(
            "m",
            "v1",
            StoreLocator::Http {
                host: "127.0.0.1".into(),
                port: 9,
            },
        )
        .unwrap();
        assert!(matches!(
            store.list(&ctx, None),
            Err(StoreError::StoreUnavailable(_))
        ));
    }

    #[test]
    fn urls_are_percent_encoded() {
        let store = RemoteStore::new("http://localhost:8080/");
        let ctx = ModelContext::new("Model Name", "v0.0.1", "localhost:8080").unwrap();
        assert_eq!(
            store.artifact_url(&ctx, ArtifactKind::Value, "cpu stats"),
            "http://localhost:8080/api/v1/models/Model%20Name/versions/v0.0.1/values/cpu%20stats"
        );
    }
}
