//! Proptest strategies for artifacts, for round-trip and store tests.

use proptest::collection::{btree_map, vec};
use proptest::option;
use proptest::prelude::*;

use crate::artifact::{ArtifactBody, ArtifactEnvelope, ArtifactKind};
use crate::context::ModelContext;
use crate::evidence::{Condition, Payload, ProcessStats, Scalar, ValidationResult, ValueBody};
use crate::harness::{summarize, Sample};
use crate::report::{bind, BindOptions, Binding, Report, ReportMetadata};
use crate::spec::{PropertyCategory, PropertySpec, Spec};
use crate::store::{ArtifactStore, ListEntry, StoreError};

pub fn identifier() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_-][A-Za-z0-9 ._-]{0,23}"
}

pub fn text() -> impl Strategy<Value = String> {
    "[\\PC]{0,40}"
}

pub fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e9f64..1e9,
        any::<f64>().prop_filter("finite", |f| f.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(0.85),
    ]
}

pub fn timestamp() -> impl Strategy<Value = String> {
    (
        1970u32..2100,
        1u32..=12,
        1u32..=28,
        0u32..24,
        0u32..60,
        0u32..60,
    )
        .prop_map(|(y, mo, d, h, mi, s)| format!("{y:04}-{mo:02}-{d:02}T{h:02}:{mi:02}:{s:02}Z"))
}

pub fn category() -> impl Strategy<Value = PropertyCategory> {
    prop_oneof![
        Just(PropertyCategory::Functionality),
        Just(PropertyCategory::Robustness),
        Just(PropertyCategory::Costs),
    ]
}

pub fn spec() -> impl Strategy<Value = Spec> {
    btree_map(
        "[A-Z][A-Za-z]{0,15}",
        (category(), text(), option::of(text())),
        1..6,
    )
    .prop_map(|props| {
        let properties = props
            .into_iter()
            .map(|(name, (category, description, rationale))| PropertySpec {
                name,
                category,
                description,
                rationale,
            })
            .collect();
        Spec::new(properties).expect("generated names are distinct")
    })
}

pub fn scalar() -> impl Strategy<Value = Scalar> {
    prop_oneof![
        any::<i64>().prop_map(Scalar::Integer),
        finite().prop_map(Scalar::Real),
        any::<bool>().prop_map(Scalar::Bool),
        text().prop_map(Scalar::Text),
    ]
}

pub fn process_stats() -> impl Strategy<Value = ProcessStats> {
    (
        vec((0f64..400.0, 0u64..1 << 24), 0..30),
        -255i64..256,
        0.001f64..1e5,
        1u64..10_000,
    )
        .prop_map(|(samples, exit, wall, interval)| {
            let samples: Vec<Sample> = samples
                .into_iter()
                .enumerate()
                .map(|(i, (cpu, mem))| Sample {
                    at_ms: (i + 1) as f64 * interval as f64,
                    cpu_percent: cpu,
                    resident_memory_kib: mem,
                })
                .collect();
            summarize(&samples, exit, wall, interval)
        })
}

pub fn payload() -> impl Strategy<Value = Payload> {
    prop_oneof![
        finite().prop_map(Payload::Real),
        any::<i64>().prop_map(Payload::Integer),
        btree_map("[a-z_]{1,8}", scalar(), 0..6).prop_map(Payload::Opaque),
        process_stats().prop_map(Payload::ProcessStats),
    ]
}

pub fn value_body() -> impl Strategy<Value = ValueBody> {
    (payload(), "[A-Za-z]{1,24}").prop_map(|(payload, measurement_type)| ValueBody {
        payload,
        measurement_type,
    })
}

pub fn condition() -> impl Strategy<Value = Condition> {
    prop_oneof![
        finite().prop_map(Condition::greater_than),
        finite().prop_map(Condition::less_than),
        (finite(), 0f64..10.0).prop_map(|(t, tol)| Condition::equal_to(t, tol)),
        (-1e6f64..1e6, 0f64..1e6).prop_map(|(low, w)| Condition::between(low, low + w)),
        Just(Condition::AlwaysSucceed),
        Just(Condition::AlwaysInform),
    ]
}

fn observed() -> impl Strategy<Value = Scalar> {
    prop_oneof![
        finite().prop_map(Scalar::Real),
        any::<i64>().prop_map(Scalar::Integer),
    ]
}

pub fn metadata() -> impl Strategy<Value = ReportMetadata> {
    (
        vec(text(), 0..3),
        option::of(text()),
        vec(text(), 0..3),
        option::of(text()),
    )
        .prop_map(
            |(authors, system_context, dataset_refs, intended_use)| ReportMetadata {
                authors,
                system_context,
                dataset_refs,
                intended_use,
            },
        )
}

/// Reports over a random spec with a random subset of properties bound, so
/// both complete and incomplete reports occur.
pub fn report() -> impl Strategy<Value = Report> {
    spec()
        .prop_flat_map(|spec| {
            let n = spec.properties().len();
            (
                Just(spec),
                vec((any::<bool>(), vec(identifier(), 1..3)), n),
                vec((condition(), observed()), 0..6),
                metadata(),
            )
        })
        .prop_map(|(spec, picks, results, metadata)| {
            let mut binding = Binding::new();
            for (property, (bound, ids)) in spec.properties().iter().zip(picks) {
                if bound {
                    for id in ids {
                        binding.insert(property.name.clone(), id);
                    }
                }
            }
            let ids: Vec<String> = binding
                .evidence_ids()
                .into_iter()
                .map(str::to_string)
                .collect();
            let mut validations = Vec::new();
            if !ids.is_empty() {
                for (i, (condition, observed)) in results.into_iter().enumerate() {
                    let id = &ids[i % ids.len()];
                    validations.push(
                        ValidationResult::from_observation(id.clone(), condition, observed)
                            .expect("numeric observations support every condition"),
                    );
                }
            }
            bind(
                &spec,
                binding,
                validations,
                BindOptions {
                    allow_incomplete: true,
                },
            )
            .expect("generated bindings are consistent")
            .with_metadata(metadata)
        })
}

pub fn body(kind: ArtifactKind) -> BoxedStrategy<ArtifactBody> {
    match kind {
        ArtifactKind::Spec => spec().prop_map(ArtifactBody::Spec).boxed(),
        ArtifactKind::Value => value_body().prop_map(ArtifactBody::Value).boxed(),
        ArtifactKind::Report => report().prop_map(ArtifactBody::Report).boxed(),
    }
}

pub fn envelope(kind: ArtifactKind) -> impl Strategy<Value = ArtifactEnvelope> {
    (
        "[A-Za-z][A-Za-z0-9 _.-]{0,12}",
        "v[0-9]{1,2}\\.[0-9]{1,2}\\.[0-9]{1,2}",
        identifier(),
        1u64..1_000_000,
        timestamp(),
        body(kind),
    )
        .prop_map(|(model, version, id, revision, ts, body)| {
            ArtifactEnvelope::from_parts(model, version, id, revision, ts, body)
                .expect("generated envelope is valid")
        })
}

/// One step of a store workload.
#[derive(Debug, Clone)]
pub enum StoreOp {
    Save(ArtifactBody, String),
    Load(ArtifactKind, String, Option<u64>),
    List(Option<ArtifactKind>),
}

/// Outcome of a [`StoreOp`], comparable across backends.
#[derive(Debug, Clone, PartialEq)]
pub enum StoreOutcome {
    Saved(Result<u64, StoreError>),
    Loaded(Result<Box<ArtifactEnvelope>, StoreError>),
    Listed(Result<Vec<ListEntry>, StoreError>),
}

fn kind() -> impl Strategy<Value = ArtifactKind> {
    prop_oneof![
        Just(ArtifactKind::Spec),
        Just(ArtifactKind::Value),
        Just(ArtifactKind::Report),
    ]
}

/// Operations over a small key pool so saves, reloads and misses all occur.
pub fn store_op() -> impl Strategy<Value = StoreOp> {
    let key = prop_oneof![
        Just("default".to_string()),
        Just("cpu stats".to_string()),
        Just("a.b-c_1".to_string())
    ];
    prop_oneof![
        4 => (kind().prop_flat_map(body), key.clone()).prop_map(|(b, id)| StoreOp::Save(b, id)),
        4 => (kind(), key, option::of(0u64..5)).prop_map(|(k, id, r)| StoreOp::Load(k, id, r)),
        1 => option::of(kind()).prop_map(StoreOp::List),
    ]
}

/// Applies `op`. Saved envelopes carry the fixed timestamp `timestamp` so
/// that two backends see identical documents.
pub fn apply(
    store: &dyn ArtifactStore,
    context: &ModelContext,
    op: &StoreOp,
    timestamp: &str,
) -> StoreOutcome {
    match op {
        StoreOp::Save(body, id) => {
            let envelope = ArtifactEnvelope::from_parts(
                context.model_name(),
                context.model_version(),
                id.clone(),
                1,
                timestamp,
                body.clone(),
            )
            .expect("generated envelope is valid");
            StoreOutcome::Saved(store.save(context, &envelope))
        }
        StoreOp::Load(kind, id, revision) => {
            StoreOutcome::Loaded(store.load(context, *kind, id, *revision).map(Box::new))
        }
        StoreOp::List(kind) => StoreOutcome::Listed(store.list(context, *kind)),
    }
}
