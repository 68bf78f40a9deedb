//! Session settings: flags, then `MLTE_*` environment, then `mlte.toml`.

use std::path::Path;

use mlte::ModelContext;
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_CONFIG_FILE: &str = "mlte.toml";

#[derive(Debug, Default, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub model: Option<String>,
    pub version: Option<String>,
    pub store: Option<String>,
}

impl Settings {
    /// Fills unset fields from `fallback`.
    pub fn or(self, fallback: Settings) -> Settings {
        Settings {
            model: self.model.or(fallback.model),
            version: self.version.or(fallback.version),
            store: self.store.or(fallback.store),
        }
    }

    /// A missing file is an empty configuration; an unreadable or invalid
    /// one is an error.
    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Settings::default()),
            Err(e) => {
                return Err(CliError::input(format!(
                    "cannot read {}: {e}",
                    path.display()
                )))
            }
        };
        toml::from_str(&text)
            .map_err(|e| CliError::input(format!("invalid {}: {e}", path.display())))
    }

    pub fn context(&self) -> Result<ModelContext, CliError> {
        let missing = |what: &str, flag: &str, env: &str| {
            CliError::input(format!(
                "no {what} configured; pass {flag}, set {env} or add `{what}` to {DEFAULT_CONFIG_FILE}"
            ))
        };
        let model = self
            .model
            .as_deref()
            .ok_or_else(|| missing("model", "--model", "MLTE_MODEL"))?;
        let version = self
            .version
            .as_deref()
            .ok_or_else(|| missing("version", "--model-version", "MLTE_VERSION"))?;
        let store = self
            .store
            .as_deref()
            .ok_or_else(|| missing("store", "--store", "MLTE_STORE"))?;
        Ok(ModelContext::new(model, version, store)?)
    }
}
