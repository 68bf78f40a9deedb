//! Typed measurement results, validator conditions and validation outcomes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{self, ArtifactError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvidenceError {
    #[error("value identifier must not be empty")]
    EmptyIdentifier,
    #[error(transparent)]
    InvalidIdentifier(#[from] ArtifactError),
    #[error("payload does not match value kind {kind}: {reason}")]
    PayloadMismatch { kind: ValueKind, reason: String },
    #[error("condition {condition} cannot be applied to a {kind} value; project a scalar first")]
    UnsupportedKind { kind: ValueKind, condition: String },
    #[error("unknown process stats field {0:?}")]
    UnknownField(String),
    #[error("invalid condition: {0}")]
    InvalidCondition(String),
    #[error("invalid process stats: {0}")]
    InvalidProcessStats(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Real,
    Integer,
    Opaque,
    ProcessStats,
}

impl ValueKind {
    pub const ALL: [ValueKind; 4] = [
        ValueKind::Real,
        ValueKind::Integer,
        ValueKind::Opaque,
        ValueKind::ProcessStats,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Real => "real",
            ValueKind::Integer => "integer",
            ValueKind::Opaque => "opaque",
            ValueKind::ProcessStats => "process_stats",
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ValueKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown value kind {s:?} (expected real, integer, opaque or process_stats)"
                )
            })
    }
}

/// A leaf of an opaque payload, also used as the observed snapshot in a
/// [`ValidationResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Integer(i64),
    Real(f64),
    Bool(bool),
    Text(String),
}

impl Scalar {
    fn is_finite(&self) -> bool {
        !matches!(self, Scalar::Real(r) if !r.is_finite())
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Integer(i) => write!(f, "{i}"),
            Scalar::Real(r) => write!(f, "{r}"),
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Text(s) => f.write_str(s),
        }
    }
}

/// Aggregated resource usage of one measured child process.
///
/// CPU percentages are relative to a single core, so a multithreaded child
/// can exceed 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessStats {
    pub cpu_avg_percent: f64,
    pub cpu_min_percent: f64,
    pub cpu_max_percent: f64,
    pub peak_memory_kib: u64,
    pub wall_time_s: f64,
    pub exit_code: i64,
    pub sample_count: u64,
    pub sampling_interval_ms: u64,
}

impl ProcessStats {
    pub fn validate(&self) -> Result<(), EvidenceError> {
        let bad = |m: &str| Err(EvidenceError::InvalidProcessStats(m.to_string()));
        let cpu = [
            self.cpu_min_percent,
            self.cpu_avg_percent,
            self.cpu_max_percent,
        ];
        if cpu.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return bad("cpu percentages must be finite and non-negative");
        }
        if !(self.cpu_min_percent <= self.cpu_avg_percent
            && self.cpu_avg_percent <= self.cpu_max_percent)
        {
            return bad("cpu_min_percent <= cpu_avg_percent <= cpu_max_percent violated");
        }
        if !self.wall_time_s.is_finite() || self.wall_time_s <= 0.0 {
            return bad("wall_time_s must be positive");
        }
        if self.sampling_interval_ms == 0 {
            return bad("sampling_interval_ms must be positive");
        }
        Ok(())
    }

    pub fn field(&self, field: StatField) -> f64 {
        match field {
            StatField::CpuAvgPercent => self.cpu_avg_percent,
            StatField::CpuMinPercent => self.cpu_min_percent,
            StatField::CpuMaxPercent => self.cpu_max_percent,
            StatField::PeakMemoryKib => self.peak_memory_kib as f64,
            StatField::WallTimeS => self.wall_time_s,
            StatField::ExitCode => self.exit_code as f64,
            StatField::SampleCount => self.sample_count as f64,
            StatField::SamplingIntervalMs => self.sampling_interval_ms as f64,
        }
    }
}

/// Names of the [`ProcessStats`] fields that can be projected to a real value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatField {
    CpuAvgPercent,
    CpuMinPercent,
    CpuMaxPercent,
    PeakMemoryKib,
    WallTimeS,
    ExitCode,
    SampleCount,
    SamplingIntervalMs,
}

impl StatField {
    pub const ALL: [StatField; 8] = [
        StatField::CpuAvgPercent,
        StatField::CpuMinPercent,
        StatField::CpuMaxPercent,
        StatField::PeakMemoryKib,
        StatField::WallTimeS,
        StatField::ExitCode,
        StatField::SampleCount,
        StatField::SamplingIntervalMs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StatField::CpuAvgPercent => "cpu_avg_percent",
            StatField::CpuMinPercent => "cpu_min_percent",
            StatField::CpuMaxPercent => "cpu_max_percent",
            StatField::PeakMemoryKib => "peak_memory_kib",
            StatField::WallTimeS => "wall_time_s",
            StatField::ExitCode => "exit_code",
            StatField::SampleCount => "sample_count",
            StatField::SamplingIntervalMs => "sampling_interval_ms",
        }
    }
}

impl FromStr for StatField {
    type Err = EvidenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StatField::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| EvidenceError::UnknownField(s.to_string()))
    }
}

/// The measured quantity. Its variant determines the value kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Real(f64),
    Integer(i64),
    Opaque(BTreeMap<String, Scalar>),
    ProcessStats(ProcessStats),
}

impl Payload {
    pub fn kind(&self) -> ValueKind {
        match self {
            Payload::Real(_) => ValueKind::Real,
            Payload::Integer(_) => ValueKind::Integer,
            Payload::Opaque(_) => ValueKind::Opaque,
            Payload::ProcessStats(_) => ValueKind::ProcessStats,
        }
    }

    fn check(&self) -> Result<(), EvidenceError> {
        let mismatch = |reason: &str| EvidenceError::PayloadMismatch {
            kind: self.kind(),
            reason: reason.to_string(),
        };
        match self {
            Payload::Real(r) if !r.is_finite() => Err(mismatch("real payload must be finite")),
            Payload::Opaque(map) if !map.values().all(Scalar::is_finite) => {
                Err(mismatch("opaque payload numbers must be finite"))
            }
            Payload::ProcessStats(stats) => stats.validate(),
            _ => Ok(()),
        }
    }

    /// Interprets a JSON document as a payload of the given kind.
    pub fn from_json(kind: ValueKind, json: serde_json::Value) -> Result<Payload, EvidenceError> {
        let mismatch = |reason: String| EvidenceError::PayloadMismatch { kind, reason };
        let payload = match kind {
            ValueKind::Real => match json.as_f64() {
                Some(r) if json.is_number() => Payload::Real(r),
                _ => return Err(mismatch(format!("expected a number, found {json}"))),
            },
            ValueKind::Integer => match json.as_i64() {
                Some(i) => Payload::Integer(i),
                None => return Err(mismatch(format!("expected an integer, found {json}"))),
            },
            ValueKind::Opaque => {
                let map: BTreeMap<String, Scalar> = serde_json::from_value(json)
                    .map_err(|e| mismatch(format!("expected a map of scalars: {e}")))?;
                Payload::Opaque(map)
            }
            ValueKind::ProcessStats => {
                let stats: ProcessStats = serde_json::from_value(json)
                    .map_err(|e| mismatch(format!("expected process stats: {e}")))?;
                Payload::ProcessStats(stats)
            }
        };
        payload.check()?;
        Ok(payload)
    }

    /// Parses a command-line literal: a number for real/integer, a JSON
    /// object for opaque and process_stats.
    pub fn parse_literal(kind: ValueKind, literal: &str) -> Result<Payload, EvidenceError> {
        let literal = literal.trim();
        let mismatch = |reason: String| EvidenceError::PayloadMismatch { kind, reason };
        match kind {
            ValueKind::Real => {
                let r: f64 = literal
                    .parse()
                    .map_err(|_| mismatch(format!("{literal:?} is not a real number")))?;
                let payload = Payload::Real(r);
                payload.check()?;
                Ok(payload)
            }
            ValueKind::Integer => literal
                .parse::<i64>()
                .map(Payload::Integer)
                .map_err(|_| mismatch(format!("{literal:?} is not an integer"))),
            ValueKind::Opaque | ValueKind::ProcessStats => {
                let json: serde_json::Value = serde_json::from_str(literal)
                    .map_err(|e| mismatch(format!("invalid JSON: {e}")))?;
                Payload::from_json(kind, json)
            }
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Payload::Real(r) => serde_json::json!(r),
            Payload::Integer(i) => serde_json::json!(i),
            Payload::Opaque(map) => serde_json::to_value(map).expect("scalar map serializes"),
            Payload::ProcessStats(stats) => serde_json::to_value(stats).expect("stats serialize"),
        }
    }
}

/// Body of a persisted value artifact: `{value_kind, payload, measurement_type}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawValueBody", into = "RawValueBody")]
pub struct ValueBody {
    pub payload: Payload,
    pub measurement_type: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValueBody {
    value_kind: ValueKind,
    payload: serde_json::Value,
    measurement_type: String,
}

impl TryFrom<RawValueBody> for ValueBody {
    type Error = EvidenceError;

    fn try_from(raw: RawValueBody) -> Result<Self, Self::Error> {
        Ok(ValueBody {
            payload: Payload::from_json(raw.value_kind, raw.payload)?,
            measurement_type: raw.measurement_type,
        })
    }
}

impl From<ValueBody> for RawValueBody {
    fn from(body: ValueBody) -> Self {
        RawValueBody {
            value_kind: body.payload.kind(),
            payload: body.payload.to_json(),
            measurement_type: body.measurement_type,
        }
    }
}

/// A typed, identified measurement result.
#[derive(Debug, Clone, PartialEq)]
pub struct Value {
    identifier: String,
    body: ValueBody,
    timestamp: String,
}

impl Value {
    /// Wraps a payload, checking it matches `kind`. The timestamp is the
    /// current UTC time.
    pub fn new(
        identifier: impl Into<String>,
        kind: ValueKind,
        payload: Payload,
        measurement_type: impl Into<String>,
    ) -> Result<Value, EvidenceError> {
        if payload.kind() != kind {
            return Err(EvidenceError::PayloadMismatch {
                kind,
                reason: format!("got a {} payload", payload.kind()),
            });
        }
        Value::from_parts(
            identifier,
            artifact::now_timestamp(),
            ValueBody {
                payload,
                measurement_type: measurement_type.into(),
            },
        )
    }

    /// A real value from an external metric library.
    pub fn real(identifier: impl Into<String>, value: f64) -> Result<Value, EvidenceError> {
        Value::new(
            identifier,
            ValueKind::Real,
            Payload::Real(value),
            EXTERNAL_MEASUREMENT,
        )
    }

    pub fn integer(identifier: impl Into<String>, value: i64) -> Result<Value, EvidenceError> {
        Value::new(
            identifier,
            ValueKind::Integer,
            Payload::Integer(value),
            EXTERNAL_MEASUREMENT,
        )
    }

    pub fn opaque(
        identifier: impl Into<String>,
        map: BTreeMap<String, Scalar>,
    ) -> Result<Value, EvidenceError> {
        Value::new(
            identifier,
            ValueKind::Opaque,
            Payload::Opaque(map),
            EXTERNAL_MEASUREMENT,
        )
    }

    pub fn from_parts(
        identifier: impl Into<String>,
        timestamp: impl Into<String>,
        body: ValueBody,
    ) -> Result<Value, EvidenceError> {
        let identifier = identifier.into();
        if identifier.is_empty() {
            return Err(EvidenceError::EmptyIdentifier);
        }
        artifact::validate_identifier(&identifier)?;
        let timestamp = timestamp.into();
        artifact::validate_timestamp(&timestamp)?;
        body.payload.check()?;
        Ok(Value {
            identifier,
            body,
            timestamp,
        })
    }

    pub fn identifier(&self) -> &str {
        &self.identifier
    }

    pub fn kind(&self) -> ValueKind {
        self.body.payload.kind()
    }

    pub fn payload(&self) -> &Payload {
        &self.body.payload
    }

    pub fn measurement_type(&self) -> &str {
        &self.body.measurement_type
    }

    pub fn timestamp(&self) -> &str {
        &self.timestamp
    }

    pub fn body(&self) -> &ValueBody {
        &self.body
    }

    pub fn into_body(self) -> ValueBody {
        self.body
    }

    pub fn process_stats(&self) -> Option<&ProcessStats> {
        match &self.body.payload {
            Payload::ProcessStats(s) => Some(s),
            _ => None,
        }
    }
}

/// Measurement type recorded for values wrapped from outside the toolkit.
pub const EXTERNAL_MEASUREMENT: &str = "ExternalMeasurement";

/// A validator predicate over a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCondition", into = "RawCondition")]
pub enum Condition {
    /// Strict: observed > threshold.
    GreaterThan {
        threshold: f64,
    },
    /// Strict: observed < threshold.
    LessThan {
        threshold: f64,
    },
    /// |observed - threshold| <= tolerance.
    EqualTo {
        threshold: f64,
        tolerance: f64,
    },
    /// Inclusive: low <= observed <= high.
    Between {
        low: f64,
        high: f64,
    },
    AlwaysSucceed,
    AlwaysInform,
}

impl Condition {
    pub fn greater_than(threshold: f64) -> Condition {
        Condition::GreaterThan { threshold }
    }

    pub fn less_than(threshold: f64) -> Condition {
        Condition::LessThan { threshold }
    }

    pub fn equal_to(threshold: f64, tolerance: f64) -> Condition {
        Condition::EqualTo {
            threshold,
            tolerance,
        }
    }

    pub fn between(low: f64, high: f64) -> Condition {
        Condition::Between { low, high }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Condition::GreaterThan { .. } => "greater_than",
            Condition::LessThan { .. } => "less_than",
            Condition::EqualTo { .. } => "equal_to",
            Condition::Between { .. } => "between",
            Condition::AlwaysSucceed => "always_succeed",
            Condition::AlwaysInform => "always_inform",
        }
    }

    fn needs_scalar(&self) -> bool {
        !matches!(self, Condition::AlwaysSucceed | Condition::AlwaysInform)
    }

    pub fn validate(&self) -> Result<(), EvidenceError> {
        let invalid = |m: String| Err(EvidenceError::InvalidCondition(m));
        match *self {
            Condition::GreaterThan { threshold } | Condition::LessThan { threshold }
                if !threshold.is_finite() =>
            {
                invalid(format!("{} threshold must be finite", self.name()))
            }
            Condition::EqualTo {
                threshold,
                tolerance,
            } => {
                if !threshold.is_finite() {
                    invalid("equal_to threshold must be finite".into())
                } else if !tolerance.is_finite() || tolerance < 0.0 {
                    invalid("equal_to tolerance must be finite and non-negative".into())
                } else {
                    Ok(())
                }
            }
            Condition::Between { low, high } => {
                if !low.is_finite() || !high.is_finite() {
                    invalid("between bounds must be finite".into())
                } else if low > high {
                    invalid(format!("between requires low <= high, got [{low}, {high}]"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn operator(&self) -> String {
        match *self {
            Condition::GreaterThan { threshold } => format!("> {threshold}"),
            Condition::LessThan { threshold } => format!("< {threshold}"),
            Condition::EqualTo {
                threshold,
                tolerance,
            } => format!("== {threshold} ± {tolerance}"),
            Condition::Between { low, high } => format!("in [{low}, {high}]"),
            Condition::AlwaysSucceed => "always_succeed".into(),
            Condition::AlwaysInform => "always_inform".into(),
        }
    }

    fn holds(&self, observed: f64) -> bool {
        match *self {
            Condition::GreaterThan { threshold } => observed > threshold,
            Condition::LessThan { threshold } => observed < threshold,
            Condition::EqualTo {
                threshold,
                tolerance,
            } => (observed - threshold).abs() <= tolerance,
            Condition::Between { low, high } => low <= observed && observed <= high,
            Condition::AlwaysSucceed | Condition::AlwaysInform => true,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.operator())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCondition {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    high: Option<f64>,
}

impl TryFrom<RawCondition> for Condition {
    type Error = EvidenceError;

    fn try_from(raw: RawCondition) -> Result<Self, Self::Error> {
        let present = [
            ("threshold", raw.threshold.is_some()),
            ("tolerance", raw.tolerance.is_some()),
            ("low", raw.low.is_some()),
            ("high", raw.high.is_some()),
        ];
        let expect = |required: &[&str]| -> Result<(), EvidenceError> {
            for (name, is_present) in present {
                let wanted = required.contains(&name);
                if wanted && !is_present {
                    return Err(EvidenceError::InvalidCondition(format!(
                        "{} requires parameter {name}",
                        raw.kind
                    )));
                }
                if !wanted && is_present {
                    return Err(EvidenceError::InvalidCondition(format!(
                        "{} does not take parameter {name}",
                        raw.kind
                    )));
                }
            }
            Ok(())
        };
        let condition = match raw.kind.as_str() {
            "greater_than" => {
                expect(&["threshold"])?;
                Condition::GreaterThan {
                    threshold: raw.threshold.unwrap(),
                }
            }
            "less_than" => {
                expect(&["threshold"])?;
                Condition::LessThan {
                    threshold: raw.threshold.unwrap(),
                }
            }
            "equal_to" => {
                expect(&["threshold", "tolerance"])?;
                Condition::EqualTo {
                    threshold: raw.threshold.unwrap(),
                    tolerance: raw.tolerance.unwrap(),
                }
            }
            "between" => {
                expect(&["low", "high"])?;
                Condition::Between {
                    low: raw.low.unwrap(),
                    high: raw.high.unwrap(),
                }
            }
            "always_succeed" => {
                expect(&[])?;
                Condition::AlwaysSucceed
            }
            "always_inform" => {
                expect(&[])?;
                Condition::AlwaysInform
            }
            other => {
                return Err(EvidenceError::InvalidCondition(format!(
                    "unknown condition kind {other:?}"
                )))
            }
        };
        condition.validate()?;
        Ok(condition)
    }
}

impl From<Condition> for RawCondition {
    fn from(c: Condition) -> Self {
        let mut raw = RawCondition {
            kind: c.name().to_string(),
            threshold: None,
            tolerance: None,
            low: None,
            high: None,
        };
        match c {
            Condition::GreaterThan { threshold } | Condition::LessThan { threshold } => {
                raw.threshold = Some(threshold);
            }
            Condition::EqualTo {
                threshold,
                tolerance,
            } => {
                raw.threshold = Some(threshold);
                raw.tolerance = Some(tolerance);
            }
            Condition::Between { low, high } => {
                raw.low = Some(low);
                raw.high = Some(high);
            }
            Condition::AlwaysSucceed | Condition::AlwaysInform => {}
        }
        raw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Success,
    Failure,
    Info,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Success => "Success",
            Status::Failure => "Failure",
            Status::Info => "Info",
        })
    }
}

/// Outcome of applying a [`Condition`] to one piece of evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationResult {
    pub condition: Condition,
    pub evidence_identifier: String,
    pub status: Status,
    pub message: String,
    pub observed: Scalar,
}

impl ValidationResult {
    /// Builds a result and its message from an observed scalar. The status
    /// is a function of the condition and the observation only.
    pub fn from_observation(
        evidence_identifier: impl Into<String>,
        condition: Condition,
        observed: Scalar,
    ) -> Result<ValidationResult, EvidenceError> {
        condition.validate()?;
        let status = match (&condition, &observed) {
            (Condition::AlwaysInform, _) => Status::Info,
            (Condition::AlwaysSucceed, _) => Status::Success,
            (c, Scalar::Real(r)) => pass_fail(c.holds(*r)),
            (c, Scalar::Integer(i)) => pass_fail(c.holds(*i as f64)),
            (c, _) => {
                return Err(EvidenceError::UnsupportedKind {
                    kind: ValueKind::Opaque,
                    condition: c.name().to_string(),
                })
            }
        };
        let evidence_identifier = evidence_identifier.into();
        let message = format!(
            "{evidence_identifier}: observed {observed} {} → {status}",
            condition.operator()
        );
        Ok(ValidationResult {
            condition,
            evidence_identifier,
            status,
            message,
            observed,
        })
    }
}

fn pass_fail(ok: bool) -> Status {
    if ok {
        Status::Success
    } else {
        Status::Failure
    }
}

/// Applies `condition` to `value`.
///
/// Threshold conditions need a real or integer value; process stats must be
/// narrowed with [`project_stat`] first.
pub fn evaluate_condition(
    value: &Value,
    condition: &Condition,
) -> Result<ValidationResult, EvidenceError> {
    condition.validate()?;
    let observed = match value.payload() {
        Payload::Real(r) => Scalar::Real(*r),
        Payload::Integer(i) => Scalar::Integer(*i),
        other => {
            if condition.needs_scalar() {
                return Err(EvidenceError::UnsupportedKind {
                    kind: value.kind(),
                    condition: condition.name().to_string(),
                });
            }
            Scalar::Text(other.to_json().to_string())
        }
    };
    ValidationResult::from_observation(value.identifier(), condition.clone(), observed)
}

/// Narrows a process-stats value to one real field, identified as
/// `<parent-id>.<field>`.
pub fn project_stat(value: &Value, field: &str) -> Result<Value, EvidenceError> {
    let field: StatField = field.parse()?;
    let Some(stats) = value.process_stats() else {
        return Err(EvidenceError::UnsupportedKind {
            kind: value.kind(),
            condition: format!("project_stat({})", field.as_str()),
        });
    };
    Value::from_parts(
        format!("{}.{}", value.identifier(), field.as_str()),
        value.timestamp(),
        ValueBody {
            payload: Payload::Real(stats.field(field)),
            measurement_type: value.measurement_type().to_string(),
        },
    )
}
