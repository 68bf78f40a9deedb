//! Machine-readable requirement specifications for ML models, typed
//! measurement evidence, validation against thresholds, a versioned artifact
//! store (local directory or HTTP service) and reports that bind validated
//! evidence to requirements.
//!
//! The usual flow:
//!
//! 1. Build a [`ModelContext`] naming the model, its version and the store.
//! 2. Define a [`Spec`] of properties and save it.
//! 3. Collect [`Value`]s, either wrapped from external metrics or produced
//!    by [`harness::run_measured`], and save them.
//! 4. Evaluate [`Condition`]s over the values and [`bind`] the results to
//!    the spec, producing a [`Report`].

pub mod artifact;
pub mod context;
pub mod evidence;
pub mod harness;
pub mod report;
pub mod spec;
pub mod store;

#[cfg(feature = "testing")]
pub mod testing;

pub use artifact::{ArtifactBody, ArtifactEnvelope, ArtifactError, ArtifactKind, SCHEMA_VERSION};
pub use context::{parse_store_uri, ContextError, ModelContext, StoreLocator, UriError};
pub use evidence::{
    evaluate_condition, project_stat, Condition, EvidenceError, Payload, ProcessStats, Scalar,
    StatField, Status, ValidationResult, Value, ValueKind,
};
pub use report::{
    bind, render_report, BindError, BindOptions, Binding, RenderFormat, Report, ReportMetadata,
    ReportStatus,
};
pub use spec::{
    property_catalog, PropertyCatalog, PropertyCategory, PropertySpec, Spec, SpecError,
};
pub use store::{ArtifactStore, ListEntry, StoreError, StoreHandle};
