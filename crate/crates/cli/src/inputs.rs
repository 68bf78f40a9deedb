//! Declarative input files: specs and bindings, in JSON or YAML.

use std::collections::BTreeMap;
use std::path::Path;

use mlte::{Condition, PropertyCatalog, PropertyCategory, PropertySpec, Spec};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;

/// Parses by extension: `.json` as JSON, anything else as YAML.
pub fn read_document<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        serde_yaml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    properties: Vec<PropertyEntry>,
}

/// A property as written by hand. Category and description may be left out
/// for properties the catalog knows.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropertyEntry {
    name: String,
    category: Option<PropertyCategory>,
    description: Option<String>,
    rationale: Option<String>,
}

pub fn load_spec(path: &Path, catalog: &PropertyCatalog) -> Result<Spec, CliError> {
    let file: SpecFile = read_document(path)?;
    let mut properties = Vec::with_capacity(file.properties.len());
    for entry in file.properties {
        let known = catalog.get(&entry.name);
        let category = entry
            .category
            .or(known.map(|k| k.category))
            .ok_or_else(|| {
                CliError::input(format!(
                    "property {:?} is not in the catalog and has no category",
                    entry.name
                ))
            })?;
        let description = entry
            .description
            .or_else(|| known.map(|k| k.description.clone()))
            .ok_or_else(|| {
                CliError::input(format!(
                    "property {:?} is not in the catalog and has no description",
                    entry.name
                ))
            })?;
        properties.push(PropertySpec {
            name: entry.name,
            category,
            description,
            rationale: entry.rationale,
        });
    }
    Ok(Spec::new(properties)?)
}

/// One validation to run: a stored value, optionally narrowed to a stats
/// field, checked against a condition.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub value_id: String,
    #[serde(deserialize_with = "condition")]
    pub condition: Condition,
    #[serde(default)]
    pub stat_field: Option<String>,
}

impl Check {
    /// Identifier of the evidence the result is about.
    pub fn evidence_id(&self) -> String {
        match &self.stat_field {
            Some(field) => format!("{}.{field}", self.value_id),
            None => self.value_id.clone(),
        }
    }
}

/// Property name to the checks backing it.
pub type Bindings = BTreeMap<String, Vec<Check>>;

pub fn load_bindings(path: &Path) -> Result<Bindings, CliError> {
    let bindings: Bindings = read_document(path)?;
    if bindings.is_empty() {
        return Err(CliError::input(format!(
            "{}: no properties are bound",
            path.display()
        )));
    }
    if let Some((property, _)) = bindings.iter().find(|(_, checks)| checks.is_empty()) {
        return Err(CliError::input(format!(
            "{}: property {property:?} has no checks",
            path.display()
        )));
    }
    Ok(bindings)
}

/// Accepts `{kind, params: {...}}` or the flat `{kind, threshold, ...}`.
fn condition<'de, D: serde::Deserializer<'de>>(deserializer: D) -> Result<Condition, D::Error> {
    use serde::de::Error;

    #[derive(Deserialize)]
    struct Nested {
        kind: String,
        #[serde(default)]
        params: serde_json::Map<String, serde_json::Value>,
    }

    let raw = serde_json::Value::deserialize(deserializer)?;
    let flat = match serde_json::from_value::<Nested>(raw.clone()) {
        Ok(nested) if raw.get("params").is_some() => {
            let mut map = nested.params;
            map.insert("kind".into(), nested.kind.into());
            serde_json::Value::Object(map)
        }
        _ => raw,
    };
    serde_json::from_value(flat).map_err(D::Error::custom)
}
