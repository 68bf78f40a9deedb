//! Binding validated evidence to spec properties, and rendering the
//! resulting report.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::canonical_json;
use crate::evidence::{Status, ValidationResult};
use crate::spec::Spec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindError {
    #[error("binding names property {0:?}, which is not in the spec")]
    UnknownProperty(String),
    #[error("property {0:?} is bound to an empty evidence list")]
    EmptyBinding(String),
    #[error("validation result for {0:?} does not correspond to any bound evidence")]
    OrphanResult(String),
    #[error("{}", coverage_message(.unbound_properties, .unvalidated_evidence))]
    CoverageError {
        unbound_properties: Vec<String>,
        unvalidated_evidence: Vec<String>,
    },
}

fn coverage_message(unbound: &[String], unvalidated: &[String]) -> String {
    let mut parts = Vec::new();
    if !unbound.is_empty() {
        parts.push(format!(
            "properties without evidence: {}",
            unbound.join(", ")
        ));
    }
    if !unvalidated.is_empty() {
        parts.push(format!(
            "evidence without validation: {}",
            unvalidated.join(", ")
        ));
    }
    format!("incomplete coverage ({})", parts.join("; "))
}

/// Property name → identifiers of the evidence supporting it. One evidence
/// identifier may support several properties.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<String, Vec<String>>",
    into = "BTreeMap<String, Vec<String>>"
)]
pub struct Binding(BTreeMap<String, Vec<String>>);

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an evidence identifier to a property, ignoring repeats.
    pub fn insert(&mut self, property: impl Into<String>, evidence_identifier: impl Into<String>) {
        let ids = self.0.entry(property.into()).or_default();
        let id = evidence_identifier.into();
        if !ids.contains(&id) {
            ids.push(id);
        }
    }

    pub fn with(
        mut self,
        property: impl Into<String>,
        ids: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        let property = property.into();
        for id in ids {
            self.insert(property.clone(), id);
        }
        self
    }

    pub fn get(&self, property: &str) -> Option<&[String]> {
        self.0.get(property).map(Vec::as_slice)
    }

    pub fn properties(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Every evidence identifier appearing anywhere in the binding.
    pub fn evidence_ids(&self) -> BTreeSet<&str> {
        self.0.values().flatten().map(String::as_str).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<BTreeMap<String, Vec<String>>> for Binding {
    type Error = BindError;

    fn try_from(map: BTreeMap<String, Vec<String>>) -> Result<Self, Self::Error> {
        for (property, ids) in &map {
            let unique: HashSet<&String> = ids.iter().collect();
            if ids.is_empty() || unique.len() != ids.len() {
                return Err(BindError::EmptyBinding(property.clone()));
            }
        }
        Ok(Binding(map))
    }
}

impl From<Binding> for BTreeMap<String, Vec<String>> {
    fn from(b: Binding) -> Self {
        b.0
    }
}

impl<K: Into<String>, I: IntoIterator<Item = V>, V: Into<String>> FromIterator<(K, I)> for Binding {
    fn from_iter<T: IntoIterator<Item = (K, I)>>(iter: T) -> Self {
        iter.into_iter()
            .fold(Binding::new(), |b, (k, ids)| b.with(k, ids))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportStatus {
    Complete,
    Incomplete,
}

/// Optional context describing the model and the system it serves.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportMetadata {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_context: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dataset_refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intended_use: Option<String>,
}

impl ReportMetadata {
    pub fn is_empty(&self) -> bool {
        self == &ReportMetadata::default()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BindOptions {
    /// Accept properties without evidence and evidence without validation,
    /// marking the report incomplete instead of failing.
    pub allow_incomplete: bool,
}

/// A spec snapshot with the validated evidence bound to its properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReport")]
pub struct Report {
    spec_snapshot: Spec,
    binding: Binding,
    validation_results: Vec<ValidationResult>,
    status: ReportStatus,
    metadata: ReportMetadata,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReport {
    spec_snapshot: Spec,
    binding: Binding,
    validation_results: Vec<ValidationResult>,
    status: ReportStatus,
    #[serde(default)]
    metadata: ReportMetadata,
}

impl TryFrom<RawReport> for Report {
    type Error = String;

    fn try_from(raw: RawReport) -> Result<Self, Self::Error> {
        let coverage = check_binding(&raw.spec_snapshot, &raw.binding, &raw.validation_results)
            .map_err(|e| e.to_string())?;
        let expected = coverage.status();
        if raw.status != expected {
            return Err(format!(
                "report status {:?} contradicts its coverage ({expected:?})",
                raw.status
            ));
        }
        for r in &raw.validation_results {
            let recomputed = ValidationResult::from_observation(
                &r.evidence_identifier,
                r.condition.clone(),
                r.observed.clone(),
            )
            .map_err(|e| e.to_string())?;
            if recomputed.status != r.status {
                return Err(format!(
                    "validation of {:?} records {} but its observation yields {}",
                    r.evidence_identifier, r.status, recomputed.status
                ));
            }
        }
        Ok(Report {
            spec_snapshot: raw.spec_snapshot,
            binding: raw.binding,
            validation_results: raw.validation_results,
            status: raw.status,
            metadata: raw.metadata,
        })
    }
}

impl Report {
    pub fn spec_snapshot(&self) -> &Spec {
        &self.spec_snapshot
    }

    pub fn binding(&self) -> &Binding {
        &self.binding
    }

    pub fn validation_results(&self) -> &[ValidationResult] {
        &self.validation_results
    }

    pub fn status(&self) -> ReportStatus {
        self.status
    }

    pub fn metadata(&self) -> &ReportMetadata {
        &self.metadata
    }

    pub fn with_metadata(mut self, metadata: ReportMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn count(&self, status: Status) -> usize {
        self.validation_results
            .iter()
            .filter(|r| r.status == status)
            .count()
    }

    /// Results recorded for one evidence identifier, in input order.
    pub fn results_for<'a>(
        &'a self,
        evidence_identifier: &'a str,
    ) -> impl Iterator<Item = &'a ValidationResult> + 'a {
        self.validation_results
            .iter()
            .filter(move |r| r.evidence_identifier == evidence_identifier)
    }
}

struct Coverage {
    unbound_properties: Vec<String>,
    unvalidated_evidence: Vec<String>,
}

impl Coverage {
    fn status(&self) -> ReportStatus {
        if self.unbound_properties.is_empty() && self.unvalidated_evidence.is_empty() {
            ReportStatus::Complete
        } else {
            ReportStatus::Incomplete
        }
    }
}

fn check_binding(
    spec: &Spec,
    binding: &Binding,
    results: &[ValidationResult],
) -> Result<Coverage, BindError> {
    for (property, ids) in binding.iter() {
        if !spec.contains(property) {
            return Err(BindError::UnknownProperty(property.to_string()));
        }
        if ids.is_empty() {
            return Err(BindError::EmptyBinding(property.to_string()));
        }
    }
    let bound = binding.evidence_ids();
    if let Some(orphan) = results
        .iter()
        .find(|r| !bound.contains(r.evidence_identifier.as_str()))
    {
        return Err(BindError::OrphanResult(orphan.evidence_identifier.clone()));
    }
    let validated: HashSet<&str> = results
        .iter()
        .map(|r| r.evidence_identifier.as_str())
        .collect();
    Ok(Coverage {
        unbound_properties: spec
            .names()
            .filter(|name| binding.get(name).is_none())
            .map(str::to_string)
            .collect(),
        unvalidated_evidence: bound
            .into_iter()
            .filter(|id| !validated.contains(id))
            .map(str::to_string)
            .collect(),
    })
}

/// Joins validation results to the spec through `binding`.
///
/// A report is complete when every property has bound evidence and every
/// bound evidence identifier has at least one validation result. Anything
/// less is a [`BindError::CoverageError`] unless `allow_incomplete` is set.
pub fn bind(
    spec: &Spec,
    binding: Binding,
    results: Vec<ValidationResult>,
    options: BindOptions,
) -> Result<Report, BindError> {
    let coverage = check_binding(spec, &binding, &results)?;
    let status = coverage.status();
    if status == ReportStatus::Incomplete && !options.allow_incomplete {
        return Err(BindError::CoverageError {
            unbound_properties: coverage.unbound_properties,
            unvalidated_evidence: coverage.unvalidated_evidence,
        });
    }
    Ok(Report {
        spec_snapshot: spec.clone(),
        binding,
        validation_results: results,
        status,
        metadata: ReportMetadata::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Json,
    Html,
}

impl std::str::FromStr for RenderFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(RenderFormat::Json),
            "html" => Ok(RenderFormat::Html),
            other => Err(format!(
                "unknown report format {other:?} (expected json or html)"
            )),
        }
    }
}

pub fn render_report(report: &Report, format: RenderFormat) -> Vec<u8> {
    match format {
        RenderFormat::Json => canonical_json(report),
        RenderFormat::Html => render_html(report).into_bytes(),
    }
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:system-ui,sans-serif;max-width:60rem;margin:2rem auto;padding:0 1rem;color:#222}\
.banner{padding:1rem;border-radius:6px;margin-bottom:1.5rem}\
.banner.complete{background:#e6f4ea}.banner.incomplete{background:#fff4e5}\
.property{border-top:1px solid #ddd;padding-top:1rem}\
.category{text-transform:uppercase;font-size:.8rem;color:#666}\
.result.success{color:#1e7e34}.result.failure{color:#b00020}.result.info{color:#0b5394}\
code{background:#f4f4f4;padding:0 .2rem}";

fn render_html(report: &Report) -> String {
    let mut html = String::new();
    let status = match report.status {
        ReportStatus::Complete => "complete",
        ReportStatus::Incomplete => "incomplete",
    };
    let _ = write!(
        html,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <title>Evaluation report</title>\n<style>{STYLE}</style>\n</head>\n<body>\n"
    );
    let _ = writeln!(
        html,
        "<header class=\"banner {status}\"><h1>Evaluation report</h1>\
         <p>Status: <strong>{status}</strong> · {} Success · {} Failure · {} Info</p></header>",
        report.count(Status::Success),
        report.count(Status::Failure),
        report.count(Status::Info),
    );

    if !report.metadata.is_empty() {
        let m = &report.metadata;
        html.push_str("<section class=\"metadata\"><h2>Context</h2><dl>\n");
        let mut item = |label: &str, value: &str| {
            let _ = writeln!(html, "<dt>{label}</dt><dd>{}</dd>", escape_html(value));
        };
        if !m.authors.is_empty() {
            item("Authors", &m.authors.join(", "));
        }
        if let Some(ctx) = &m.system_context {
            item("System context", ctx);
        }
        if !m.dataset_refs.is_empty() {
            item("Datasets", &m.dataset_refs.join(", "));
        }
        if let Some(usage) = &m.intended_use {
            item("Intended use", usage);
        }
        html.push_str("</dl></section>\n");
    }

    for property in report.spec_snapshot.properties() {
        let _ = writeln!(
            html,
            "<section class=\"property\"><h2>{}</h2>\n<p class=\"category\">{}</p>\n<p>{}</p>",
            escape_html(&property.name),
            property.category,
            escape_html(&property.description),
        );
        if let Some(rationale) = &property.rationale {
            let _ = writeln!(
                html,
                "<p><em>Rationale:</em> {}</p>",
                escape_html(rationale)
            );
        }
        match report.binding.get(&property.name) {
            None => html.push_str("<p class=\"unbound\">No evidence bound.</p>\n"),
            Some(ids) => {
                html.push_str("<ul class=\"evidence\">\n");
                for id in ids {
                    let _ = writeln!(html, "<li><code>{}</code><ul>", escape_html(id));
                    let mut any = false;
                    for r in report.results_for(id) {
                        any = true;
                        let class = r.status.to_string().to_lowercase();
                        let _ = writeln!(
                            html,
                            "<li class=\"result {class}\"><strong>{}</strong>: {}</li>",
                            r.status,
                            escape_html(&r.message)
                        );
                    }
                    if !any {
                        html.push_str("<li class=\"result unvalidated\">Not validated</li>\n");
                    }
                    html.push_str("</ul></li>\n");
                }
                html.push_str("</ul>\n");
            }
        }
        html.push_str("</section>\n");
    }
    html.push_str("</body>\n</html>\n");
    html
}
