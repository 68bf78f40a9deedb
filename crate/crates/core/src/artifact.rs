//! The persisted artifact envelope and its canonical JSON form.
//!
//! Every artifact is stored as a UTF-8 JSON object with exactly the keys
//! `schema_version, kind, model, model_version, identifier, revision,
//! timestamp, body`, serialized with sorted keys and no insignificant
//! whitespace, so equal envelopes always produce identical bytes.

use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDateTime, Utc};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::context::{validate_name, ModelContext};
use crate::evidence::{Value, ValueBody};
use crate::report::Report;
use crate::spec::Spec;

/// Envelope schema version written by this crate. Documents carrying any
/// other version are rejected.
pub const SCHEMA_VERSION: &str = "0.1";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";
const MAX_ENCODED_SEGMENT: usize = 200;

const SEGMENT: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

const ENVELOPE_KEYS: [&str; 8] = [
    "body",
    "identifier",
    "kind",
    "model",
    "model_version",
    "revision",
    "schema_version",
    "timestamp",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArtifactError {
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("invalid identifier {identifier:?}: {reason}")]
    InvalidIdentifier {
        identifier: String,
        reason: &'static str,
    },
}

fn violation(msg: impl Into<String>) -> ArtifactError {
    ArtifactError::SchemaViolation(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Spec,
    Value,
    Report,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 3] = [
        ArtifactKind::Spec,
        ArtifactKind::Value,
        ArtifactKind::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Spec => "spec",
            ArtifactKind::Value => "value",
            ArtifactKind::Report => "report",
        }
    }

    /// Plural form used in store paths and URLs (`specs`, `values`, `reports`).
    pub fn collection(self) -> &'static str {
        match self {
            ArtifactKind::Spec => "specs",
            ArtifactKind::Value => "values",
            ArtifactKind::Report => "reports",
        }
    }

    pub fn from_collection(s: &str) -> Option<ArtifactKind> {
        ArtifactKind::ALL.into_iter().find(|k| k.collection() == s)
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArtifactKind {
    type Err = ArtifactError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArtifactKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| violation(format!("unknown artifact kind {s:?}")))
    }
}

/// Kind-specific document carried in an envelope.
#[derive(Debug, Clone, PartialEq)]
pub enum ArtifactBody {
    Spec(Spec),
    Value(ValueBody),
    Report(Report),
}

impl ArtifactBody {
    pub fn kind(&self) -> ArtifactKind {
        match self {
            ArtifactBody::Spec(_) => ArtifactKind::Spec,
            ArtifactBody::Value(_) => ArtifactKind::Value,
            ArtifactBody::Report(_) => ArtifactKind::Report,
        }
    }

    pub fn to_json(&self) -> Json {
        let json = match self {
            ArtifactBody::Spec(s) => serde_json::to_value(s),
            ArtifactBody::Value(v) => serde_json::to_value(v),
            ArtifactBody::Report(r) => serde_json::to_value(r),
        };
        canonicalize(json.expect("artifact bodies always serialize"))
    }

    pub fn from_json(kind: ArtifactKind, json: Json) -> Result<ArtifactBody, ArtifactError> {
        let body = match kind {
            ArtifactKind::Spec => serde_json::from_value(json).map(ArtifactBody::Spec),
            ArtifactKind::Value => serde_json::from_value(json).map(ArtifactBody::Value),
            ArtifactKind::Report => serde_json::from_value(json).map(ArtifactBody::Report),
        };
        body.map_err(|e| violation(format!("invalid {kind} body: {e}")))
    }
}

/// Uniform wrapper around every persisted artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactEnvelope {
    model: String,
    model_version: String,
    identifier: String,
    revision: u64,
    timestamp: String,
    body: ArtifactBody,
}

impl ArtifactEnvelope {
    /// A revision-1 envelope stamped with the current time. Stores assign the
    /// real revision on save.
    pub fn new(
        context: &ModelContext,
        identifier: impl Into<String>,
        body: ArtifactBody,
    ) -> Result<Self, ArtifactError> {
        Self::from_parts(
            context.model_name(),
            context.model_version(),
            identifier,
            1,
            now_timestamp(),
            body,
        )
    }

    pub fn from_parts(
        model: impl Into<String>,
        model_version: impl Into<String>,
        identifier: impl Into<String>,
        revision: u64,
        timestamp: impl Into<String>,
        body: ArtifactBody,
    ) -> Result<Self, ArtifactError> {
        let model = model.into();
        let model_version = model_version.into();
        let identifier = identifier.into();
        let timestamp = timestamp.into();
        validate_name("model", &model).map_err(|e| violation(e.to_string()))?;
        validate_name("model_version", &model_version).map_err(|e| violation(e.to_string()))?;
        check_segment_length("model", &model)?;
        check_segment_length("model_version", &model_version)?;
        validate_identifier(&identifier)?;
        if revision == 0 {
            return Err(violation("revision must be positive"));
        }
        validate_timestamp(&timestamp)?;
        Ok(Self {
            model,
            model_version,
            identifier,
            revision,
            timestamp,
            body,
        })
    }

    /// Wraps a value; the envelope takes the value's identifier and timestamp.
    pub fn for_value(context: &ModelContext, value: &Value) -> Result<Self, ArtifactError> {
        Self::from_parts(
            context.model_name(),
            context.model_version(),
            value.identifier(),
            1,
            value.timestamp(),
            ArtifactBody::Value(value.body().clone()),
        )
    }

    pub fn schema_version(&self) -> &str {
        SCHEMA_VERSION
    }

    pub fn kind(&self) -> ArtifactKind {
        self.body.kind()
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn model_version(&self) -> &str {
        &self.model_version
    }

    pub fn identifier(&self) -> &str {
        &self.identifier
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn timestamp(&self) -> &str {
        &self.timestamp
    }

    pub fn body(&self) -> &ArtifactBody {
        &self.body
    }

    pub fn into_body(self) -> ArtifactBody {
        self.body
    }

    pub fn with_revision(mut self, revision: u64) -> Self {
        assert!(revision > 0, "revisions start at 1");
        self.revision = revision;
        self
    }

    /// Rebuilds the [`Value`] held by a value envelope.
    pub fn to_value(&self) -> Result<Value, ArtifactError> {
        match &self.body {
            ArtifactBody::Value(body) => {
                Value::from_parts(&self.identifier, &self.timestamp, body.clone())
                    .map_err(|e| violation(e.to_string()))
            }
            other => Err(violation(format!(
                "expected a value artifact, found {}",
                other.kind()
            ))),
        }
    }

    pub fn to_json(&self) -> Json {
        let mut map = Map::new();
        map.insert("body".into(), self.body.to_json());
        map.insert("identifier".into(), Json::String(self.identifier.clone()));
        map.insert("kind".into(), Json::String(self.kind().as_str().into()));
        map.insert("model".into(), Json::String(self.model.clone()));
        map.insert(
            "model_version".into(),
            Json::String(self.model_version.clone()),
        );
        map.insert("revision".into(), Json::from(self.revision));
        map.insert("schema_version".into(), Json::String(SCHEMA_VERSION.into()));
        map.insert("timestamp".into(), Json::String(self.timestamp.clone()));
        Json::Object(map)
    }

    /// Canonical bytes: sorted keys, compact.
    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_json()).expect("JSON values always serialize")
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, ArtifactError> {
        let json: Json =
            serde_json::from_slice(bytes).map_err(|e| violation(format!("invalid JSON: {e}")))?;
        Self::from_json(json)
    }

    pub fn from_json(json: Json) -> Result<Self, ArtifactError> {
        let Json::Object(mut map) = json else {
            return Err(violation("envelope must be a JSON object"));
        };
        for key in ENVELOPE_KEYS {
            if !map.contains_key(key) {
                return Err(violation(format!("missing field {key:?}")));
            }
        }
        if let Some(extra) = map.keys().find(|k| !ENVELOPE_KEYS.contains(&k.as_str())) {
            return Err(violation(format!("unknown field {extra:?}")));
        }
        let mut take_str = |key: &str| match map.remove(key) {
            Some(Json::String(s)) => Ok(s),
            _ => Err(violation(format!("field {key:?} must be a string"))),
        };
        let schema_version = take_str("schema_version")?;
        if schema_version != SCHEMA_VERSION {
            return Err(violation(format!(
                "unsupported schema_version {schema_version:?} (this build reads {SCHEMA_VERSION:?})"
            )));
        }
        let kind: ArtifactKind = take_str("kind")?.parse()?;
        let model = take_str("model")?;
        let model_version = take_str("model_version")?;
        let identifier = take_str("identifier")?;
        let timestamp = take_str("timestamp")?;
        let revision = map
            .remove("revision")
            .and_then(|r| r.as_u64())
            .ok_or_else(|| violation("field \"revision\" must be a positive integer"))?;
        let body = ArtifactBody::from_json(kind, map.remove("body").unwrap_or(Json::Null))?;
        Self::from_parts(model, model_version, identifier, revision, timestamp, body)
    }
}

/// Rebuilds a JSON value with object keys in lexicographic order at every
/// depth, independent of how `serde_json::Map` is configured.
pub fn canonicalize(json: Json) -> Json {
    match json {
        Json::Object(map) => {
            let mut entries: Vec<(String, Json)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Json::Object(
                entries
                    .into_iter()
                    .map(|(k, v)| (k, canonicalize(v)))
                    .collect(),
            )
        }
        Json::Array(items) => Json::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

/// Canonical compact JSON for any serializable document.
pub fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    let json = serde_json::to_value(value).expect("document serializes");
    serde_json::to_vec(&canonicalize(json)).expect("JSON values always serialize")
}

/// Identifiers use `[A-Za-z0-9 ._-]`, must contain a non-space character and
/// cannot consist solely of dots.
pub fn validate_identifier(identifier: &str) -> Result<(), ArtifactError> {
    let invalid = |reason| ArtifactError::InvalidIdentifier {
        identifier: identifier.to_string(),
        reason,
    };
    if identifier.is_empty() {
        return Err(invalid("must not be empty"));
    }
    if !identifier
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, ' ' | '.' | '_' | '-'))
    {
        return Err(invalid("allowed characters are A-Z a-z 0-9 space . _ -"));
    }
    if identifier.trim().is_empty() {
        return Err(invalid("must contain a non-space character"));
    }
    if identifier.chars().all(|c| c == '.') {
        return Err(invalid("must not consist only of dots"));
    }
    if encode_segment(identifier).len() > MAX_ENCODED_SEGMENT {
        return Err(invalid("too long"));
    }
    Ok(())
}

fn check_segment_length(field: &str, value: &str) -> Result<(), ArtifactError> {
    if encode_segment(value).len() > MAX_ENCODED_SEGMENT {
        return Err(violation(format!("{field} is too long")));
    }
    Ok(())
}

/// Percent-encodes a string for use as one path or URL segment.
pub fn encode_segment(s: &str) -> String {
    utf8_percent_encode(s, SEGMENT).to_string()
}

pub fn decode_segment(s: &str) -> Option<String> {
    percent_encoding::percent_decode_str(s)
        .decode_utf8()
        .ok()
        .map(|c| c.into_owned())
}

/// Current UTC time with second precision, e.g. `2024-05-01T12:00:00Z`.
pub fn now_timestamp() -> String {
    Utc::now().format(TIMESTAMP_FORMAT).to_string()
}

pub fn validate_timestamp(timestamp: &str) -> Result<(), ArtifactError> {
    let parsed = NaiveDateTime::parse_from_str(timestamp, TIMESTAMP_FORMAT)
        .map_err(|e| violation(format!("timestamp {timestamp:?} is not UTC ISO-8601: {e}")))?;
    if parsed.format(TIMESTAMP_FORMAT).to_string() != timestamp {
        return Err(violation(format!(
            "timestamp {timestamp:?} is not in canonical form"
        )));
    }
    Ok(())
}
