//! Versioned artifact persistence.
//!
//! Artifacts are keyed by `(model, model_version, kind, identifier)`. Each
//! save of an existing key creates the next revision; earlier revisions stay
//! readable. Two backends implement [`ArtifactStore`]: [`FsStore`] over a
//! local directory and [`RemoteStore`] speaking the HTTP protocol served by
//! [`server`].

mod fs;
mod remote;
pub mod server;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fs::FsStore;
pub use remote::RemoteStore;

use crate::artifact::{ArtifactBody, ArtifactEnvelope, ArtifactError, ArtifactKind};
use crate::context::{ModelContext, StoreLocator};
use crate::evidence::Value;
use crate::report::Report;
use crate::spec::Spec;

/// Identifier used for specs and reports when none is given.
pub const DEFAULT_IDENTIFIER: &str = "default";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("{kind} {identifier:?}{} not found", .revision.map(|r| format!(" revision {r}")).unwrap_or_default())]
    NotFound {
        kind: ArtifactKind,
        identifier: String,
        revision: Option<u64>,
    },
    #[error("artifact store unavailable: {0}")]
    StoreUnavailable(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

impl StoreError {
    /// Wire error code.
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::NotFound { .. } => "not_found",
            StoreError::StoreUnavailable(_) => "store_unavailable",
            StoreError::SchemaViolation(_) => "schema_violation",
        }
    }

    pub(crate) fn not_found(kind: ArtifactKind, identifier: &str, revision: Option<u64>) -> Self {
        StoreError::NotFound {
            kind,
            identifier: identifier.to_string(),
            revision,
        }
    }
}

impl From<ArtifactError> for StoreError {
    fn from(e: ArtifactError) -> Self {
        StoreError::SchemaViolation(e.to_string())
    }
}

/// One row of an artifact listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListEntry {
    pub kind: ArtifactKind,
    pub identifier: String,
    pub latest_revision: u64,
    pub timestamp: String,
}

pub trait ArtifactStore: Send + Sync {
    /// Persists `envelope` as the next revision of its key and returns that
    /// revision. The envelope's own revision field is ignored.
    fn save(&self, context: &ModelContext, envelope: &ArtifactEnvelope) -> Result<u64, StoreError>;

    /// Latest revision when `revision` is `None`.
    fn load(
        &self,
        context: &ModelContext,
        kind: ArtifactKind,
        identifier: &str,
        revision: Option<u64>,
    ) -> Result<ArtifactEnvelope, StoreError>;

    /// Artifacts in the context's namespace, sorted by kind then identifier.
    fn list(
        &self,
        context: &ModelContext,
        kind: Option<ArtifactKind>,
    ) -> Result<Vec<ListEntry>, StoreError>;

    fn save_spec(
        &self,
        context: &ModelContext,
        identifier: &str,
        spec: &Spec,
    ) -> Result<u64, StoreError> {
        let envelope =
            ArtifactEnvelope::new(context, identifier, ArtifactBody::Spec(spec.clone()))?;
        self.save(context, &envelope)
    }

    fn load_spec(&self, context: &ModelContext, identifier: &str) -> Result<Spec, StoreError> {
        match self
            .load(context, ArtifactKind::Spec, identifier, None)?
            .into_body()
        {
            ArtifactBody::Spec(spec) => Ok(spec),
            other => Err(StoreError::SchemaViolation(format!(
                "expected spec, found {}",
                other.kind()
            ))),
        }
    }

    fn save_value(&self, context: &ModelContext, value: &Value) -> Result<u64, StoreError> {
        self.save(context, &ArtifactEnvelope::for_value(context, value)?)
    }

    fn load_value(&self, context: &ModelContext, identifier: &str) -> Result<Value, StoreError> {
        Ok(self
            .load(context, ArtifactKind::Value, identifier, None)?
            .to_value()?)
    }

    fn save_report(
        &self,
        context: &ModelContext,
        identifier: &str,
        report: &Report,
    ) -> Result<u64, StoreError> {
        let envelope =
            ArtifactEnvelope::new(context, identifier, ArtifactBody::Report(report.clone()))?;
        self.save(context, &envelope)
    }

    fn load_report(&self, context: &ModelContext, identifier: &str) -> Result<Report, StoreError> {
        match self
            .load(context, ArtifactKind::Report, identifier, None)?
            .into_body()
        {
            ArtifactBody::Report(report) => Ok(report),
            other => Err(StoreError::SchemaViolation(format!(
                "expected report, found {}",
                other.kind()
            ))),
        }
    }
}

pub(crate) fn check_namespace(
    context: &ModelContext,
    envelope: &ArtifactEnvelope,
) -> Result<(), StoreError> {
    if envelope.model() != context.model_name()
        || envelope.model_version() != context.model_version()
    {
        return Err(StoreError::SchemaViolation(format!(
            "artifact belongs to {}/{} but the session is {}/{}",
            envelope.model(),
            envelope.model_version(),
            context.model_name(),
            context.model_version()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum Backend {
    Filesystem(FsStore),
    Remote(RemoteStore),
}

/// A store opened from a [`StoreLocator`]; every call goes to that one
/// location.
#[derive(Debug, Clone)]
pub struct StoreHandle {
    locator: StoreLocator,
    backend: Backend,
}

impl StoreHandle {
    /// No I/O happens until the first operation.
    pub fn open(locator: &StoreLocator) -> StoreHandle {
        let backend = match locator {
            StoreLocator::Local(root) => Backend::Filesystem(FsStore::new(root)),
            StoreLocator::Http { .. } => Backend::Remote(RemoteStore::new(
                locator.base_url().expect("http locator has a base URL"),
            )),
        };
        StoreHandle {
            locator: locator.clone(),
            backend,
        }
    }

    pub fn for_context(context: &ModelContext) -> StoreHandle {
        Self::open(context.store())
    }

    pub fn locator(&self) -> &StoreLocator {
        &self.locator
    }

    pub fn is_remote(&self) -> bool {
        matches!(self.backend, Backend::Remote(_))
    }

    fn inner(&self) -> &dyn ArtifactStore {
        match &self.backend {
            Backend::Filesystem(fs) => fs,
            Backend::Remote(remote) => remote,
        }
    }
}

impl ArtifactStore for StoreHandle {
    fn save(&self, context: &ModelContext, envelope: &ArtifactEnvelope) -> Result<u64, StoreError> {
        self.inner().save(context, envelope)
    }

    fn load(
        &self,
        context: &ModelContext,
        kind: ArtifactKind,
        identifier: &str,
        revision: Option<u64>,
    ) -> Result<ArtifactEnvelope, StoreError> {
        self.inner().load(context, kind, identifier, revision)
    }

    fn list(
        &self,
        context: &ModelContext,
        kind: Option<ArtifactKind>,
    ) -> Result<Vec<ListEntry>, StoreError> {
        self.inner().list(context, kind)
    }
}
