//! Requirement specifications: named properties grouped into functionality,
//! robustness and cost categories.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("a spec needs at least one property")]
    EmptySpec,
    #[error("property {0:?} appears more than once")]
    DuplicateProperty(String),
    #[error("property names must not be blank")]
    BlankPropertyName,
    #[error("unknown property category {0:?} (expected functionality, robustness or costs)")]
    UnknownCategory(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyCategory {
    Functionality,
    Robustness,
    Costs,
}

impl PropertyCategory {
    pub const ALL: [PropertyCategory; 3] = [
        PropertyCategory::Functionality,
        PropertyCategory::Robustness,
        PropertyCategory::Costs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PropertyCategory::Functionality => "functionality",
            PropertyCategory::Robustness => "robustness",
            PropertyCategory::Costs => "costs",
        }
    }
}

impl fmt::Display for PropertyCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PropertyCategory {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PropertyCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| SpecError::UnknownCategory(s.to_string()))
    }
}

/// One quality a model must exhibit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertySpec {
    pub name: String,
    pub category: PropertyCategory,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

impl PropertySpec {
    pub fn new(
        name: impl Into<String>,
        category: PropertyCategory,
        description: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            category,
            description: description.into(),
            rationale: None,
        }
    }

    pub fn with_rationale(mut self, rationale: impl Into<String>) -> Self {
        self.rationale = Some(rationale.into());
        self
    }
}

/// An ordered, non-empty set of uniquely named properties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct Spec {
    properties: Vec<PropertySpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    properties: Vec<PropertySpec>,
}

impl TryFrom<RawSpec> for Spec {
    type Error = SpecError;

    fn try_from(raw: RawSpec) -> Result<Self, Self::Error> {
        Spec::new(raw.properties)
    }
}

impl Spec {
    pub fn new(properties: Vec<PropertySpec>) -> Result<Spec, SpecError> {
        if properties.is_empty() {
            return Err(SpecError::EmptySpec);
        }
        let mut seen = HashSet::new();
        for p in &properties {
            if p.name.trim().is_empty() {
                return Err(SpecError::BlankPropertyName);
            }
            if !seen.insert(p.name.as_str()) {
                return Err(SpecError::DuplicateProperty(p.name.clone()));
            }
        }
        Ok(Spec { properties })
    }

    pub fn properties(&self) -> &[PropertySpec] {
        &self.properties
    }

    pub fn property(&self, name: &str) -> Option<&PropertySpec> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.property(name).is_some()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.properties.iter().map(|p| p.name.as_str())
    }

    /// Appends a property, keeping names unique.
    pub fn push(&mut self, property: PropertySpec) -> Result<(), SpecError> {
        if property.name.trim().is_empty() {
            return Err(SpecError::BlankPropertyName);
        }
        if self.contains(&property.name) {
            return Err(SpecError::DuplicateProperty(property.name));
        }
        self.properties.push(property);
        Ok(())
    }
}

/// Property templates teams pick from when writing a spec. The built-in
/// entries can be extended with project-specific ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyCatalog {
    entries: Vec<PropertySpec>,
}

impl PropertyCatalog {
    pub fn builtin() -> Self {
        let entry = |name: &str, category, description: &str| {
            PropertySpec::new(name, category, description)
        };
        Self {
            entries: vec![
                entry(
                    "TaskEfficacy",
                    PropertyCategory::Functionality,
                    "The model performs the task it was built for at a level the system requires. \
                     Evidence is usually a task metric such as accuracy, F1 or mean average precision \
                     computed on a held-out dataset that reflects operational data, compared against \
                     a baseline agreed with the system owners.",
                ),
                entry(
                    "Robustness",
                    PropertyCategory::Robustness,
                    "Model quality holds up when inputs deviate from the training distribution, \
                     whether through natural corruption, distribution shift or adversarial \
                     perturbation. Evidence compares a task metric on perturbed inputs with the \
                     same metric on clean inputs.",
                ),
                entry(
                    "TrainingComputeCost",
                    PropertyCategory::Costs,
                    "The compute consumed to train the model stays within budget. Evidence is the \
                     CPU utilization and wall time of the training job; their product approximates \
                     core-seconds of compute.",
                ),
                entry(
                    "TrainingMemoryCost",
                    PropertyCategory::Costs,
                    "The memory needed to train the model fits the available hardware. Evidence is \
                     the peak resident memory of the training job.",
                ),
                entry(
                    "InferenceLatencyCost",
                    PropertyCategory::Costs,
                    "Producing predictions is fast enough for the system's response-time \
                     requirements. Evidence is the wall time of a representative inference \
                     workload, optionally divided by the number of requests it served.",
                ),
            ],
        }
    }

    pub fn entries(&self) -> &[PropertySpec] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&PropertySpec> {
        self.entries.iter().find(|p| p.name == name)
    }

    /// Adds or replaces a template.
    pub fn register(&mut self, template: PropertySpec) {
        match self.entries.iter_mut().find(|p| p.name == template.name) {
            Some(existing) => *existing = template,
            None => self.entries.push(template),
        }
    }
}

impl Default for PropertyCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

/// The shipped property templates.
pub fn property_catalog() -> Vec<PropertySpec> {
    PropertyCatalog::builtin().entries
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog(name: &str) -> PropertySpec {
        PropertyCatalog::builtin().get(name).unwrap().clone()
    }

    #[test]
    fn new_spec_preserves_order() {
        let spec = Spec::new(vec![
            catalog("TaskEfficacy"),
            catalog("TrainingComputeCost"),
        ])
        .unwrap();
        assert_eq!(
            spec.names().collect::<Vec<_>>(),
            ["TaskEfficacy", "TrainingComputeCost"]
        );
        assert_eq!(
            spec.properties()[0].category,
            PropertyCategory::Functionality
        );
        assert_eq!(spec.properties()[1].category, PropertyCategory::Costs);
    }

    #[test]
    fn empty_and_duplicate_rejected() {
        assert_eq!(Spec::new(vec![]).unwrap_err(), SpecError::EmptySpec);
        assert_eq!(
            Spec::new(vec![catalog("TaskEfficacy"), catalog("TaskEfficacy")]).unwrap_err(),
            SpecError::DuplicateProperty("TaskEfficacy".into())
        );
        let mut spec = Spec::new(vec![catalog("TaskEfficacy")]).unwrap();
        assert!(spec.push(catalog("TaskEfficacy")).is_err());
        spec.push(catalog("Robustness")).unwrap();
        assert_eq!(spec.properties().len(), 2);
    }

    #[test]
    fn catalog_contents() {
        let entries = property_catalog();
        for name in [
            "TaskEfficacy",
            "Robustness",
            "TrainingComputeCost",
            "TrainingMemoryCost",
            "InferenceLatencyCost",
        ] {
            assert!(entries.iter().any(|p| p.name == name), "{name}");
        }
        assert!(entries
            .iter()
            .all(|p| PropertyCategory::ALL.contains(&p.category)));
        assert!(entries.iter().all(|p| !p.description.is_empty()));
        assert_eq!(catalog("Robustness").category, PropertyCategory::Robustness);
    }

    #[test]
    fn catalog_is_extensible() {
        let mut cat = PropertyCatalog::builtin();
        cat.register(PropertySpec::new(
            "Fairness",
            PropertyCategory::Robustness,
            "equal error rates",
        ));
        assert!(cat.get("Fairness").is_some());
        let n = cat.entries().len();
        cat.register(PropertySpec::new(
            "Fairness",
            PropertyCategory::Functionality,
            "changed",
        ));
        assert_eq!(cat.entries().len(), n);
        assert_eq!(cat.get("Fairness").unwrap().description, "changed");
    }

    #[test]
    fn deserialize_enforces_invariants() {
        assert!(serde_json::from_str::<Spec>(r#"{"properties":[]}"#).is_err());
        assert!(serde_json::from_str::<Spec>(
            r#"{"properties":[{"name":"A","category":"speed","description":""}]}"#
        )
        .is_err());
        let spec: Spec = serde_json::from_str(
            r#"{"properties":[{"name":"A","category":"costs","description":"d","rationale":"r"}]}"#,
        )
        .unwrap();
        assert_eq!(spec.properties()[0].rationale.as_deref(), Some("r"));
    }
}
