//! Session context: which model and version artifacts belong to, and where
//! the artifact store lives.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// A store URI that could not be parsed. `position` is the byte offset at
/// which parsing failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed store URI at byte {position}: {reason}")]
pub struct UriError {
    pub position: usize,
    pub reason: String,
}

impl UriError {
    fn new(position: usize, reason: impl Into<String>) -> Self {
        Self {
            position,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
    #[error("invalid {field} {value:?}: {reason}")]
    InvalidName {
        field: &'static str,
        value: String,
        reason: &'static str,
    },
    #[error(transparent)]
    MalformedUri(#[from] UriError),
}

/// Where artifacts are persisted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StoreLocator {
    /// A directory on the local filesystem, created on first write.
    Local(PathBuf),
    /// An artifact store service reachable over HTTP.
    Http { host: String, port: u16 },
}

impl StoreLocator {
    /// Base URL of an HTTP store, `None` for local stores.
    pub fn base_url(&self) -> Option<String> {
        match self {
            StoreLocator::Local(_) => None,
            StoreLocator::Http { host, port } => Some(format!("http://{host}:{port}")),
        }
    }
}

impl fmt::Display for StoreLocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoreLocator::Local(path) => write!(f, "local://{}", path.display()),
            StoreLocator::Http { host, port } => write!(f, "http://{host}:{port}"),
        }
    }
}

impl std::str::FromStr for StoreLocator {
    type Err = UriError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_store_uri(s)
    }
}

const LOCAL_PREFIX: &str = "local://";
const HTTP_PREFIX: &str = "http://";

/// Parses `local://<path>`, `http://<host>:<port>` or a bare `<host>:<port>`
/// (which is treated as http).
pub fn parse_store_uri(uri: &str) -> Result<StoreLocator, UriError> {
    if uri.is_empty() {
        return Err(UriError::new(0, "empty URI"));
    }
    if let Some(pos) = uri.find(char::is_whitespace) {
        return Err(UriError::new(pos, "whitespace is not allowed"));
    }
    if let Some(path) = uri.strip_prefix(LOCAL_PREFIX) {
        if path.is_empty() {
            return Err(UriError::new(LOCAL_PREFIX.len(), "missing directory path"));
        }
        return Ok(StoreLocator::Local(PathBuf::from(path)));
    }
    if let Some(rest) = uri.strip_prefix(HTTP_PREFIX) {
        return parse_host_port(rest, HTTP_PREFIX.len());
    }
    if let Some(idx) = uri.find("://") {
        return Err(UriError::new(
            0,
            format!(
                "unsupported scheme {:?} (expected local or http)",
                &uri[..idx]
            ),
        ));
    }
    parse_host_port(uri, 0)
}

fn parse_host_port(s: &str, offset: usize) -> Result<StoreLocator, UriError> {
    let s = s.strip_suffix('/').unwrap_or(s);
    if s.is_empty() {
        return Err(UriError::new(offset, "missing host"));
    }
    let Some((host, port)) = s.rsplit_once(':') else {
        return Err(UriError::new(offset + s.len(), "expected <host>:<port>"));
    };
    let port_offset = offset + host.len() + 1;
    validate_host(host, offset)?;
    if port.is_empty() {
        return Err(UriError::new(port_offset, "missing port"));
    }
    if let Some(bad) = port.find(|c: char| !c.is_ascii_digit()) {
        return Err(UriError::new(
            port_offset + bad,
            "port must be decimal digits",
        ));
    }
    let port = match port.parse::<u32>() {
        Ok(p) if (1..=65535).contains(&p) => p as u16,
        _ => return Err(UriError::new(port_offset, "port must be in 1..=65535")),
    };
    Ok(StoreLocator::Http {
        host: host.to_string(),
        port,
    })
}

fn validate_host(host: &str, offset: usize) -> Result<(), UriError> {
    if host.is_empty() {
        return Err(UriError::new(offset, "missing host"));
    }
    if let Some(inner) = host.strip_prefix('[') {
        let Some(inner) = inner.strip_suffix(']') else {
            return Err(UriError::new(offset, "unterminated IPv6 literal"));
        };
        if inner.is_empty() {
            return Err(UriError::new(offset + 1, "empty IPv6 literal"));
        }
        if let Some(bad) = inner.find(|c: char| !(c.is_ascii_hexdigit() || c == ':' || c == '.')) {
            return Err(UriError::new(
                offset + 1 + bad,
                "invalid character in IPv6 literal",
            ));
        }
        return Ok(());
    }
    if let Some(bad) = host.find(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '.')) {
        return Err(UriError::new(offset + bad, "invalid character in host"));
    }
    Ok(())
}

/// The model and version every saved artifact is namespaced under, plus the
/// store they go to. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelContext {
    model_name: String,
    model_version: String,
    store: StoreLocator,
}

impl ModelContext {
    /// Validates the names and parses `store_uri`. No I/O is performed.
    pub fn new(
        model_name: impl Into<String>,
        model_version: impl Into<String>,
        store_uri: &str,
    ) -> Result<Self, ContextError> {
        let store = parse_store_uri(store_uri)?;
        Self::with_locator(model_name, model_version, store)
    }

    pub fn with_locator(
        model_name: impl Into<String>,
        model_version: impl Into<String>,
        store: StoreLocator,
    ) -> Result<Self, ContextError> {
        let model_name = model_name.into();
        let model_version = model_version.into();
        validate_name("model_name", &model_name)?;
        validate_name("model_version", &model_version)?;
        Ok(Self {
            model_name,
            model_version,
            store,
        })
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn model_version(&self) -> &str {
        &self.model_version
    }

    pub fn store(&self) -> &StoreLocator {
        &self.store
    }
}

/// Model names and versions become path segments in the store.
pub(crate) fn validate_name(field: &'static str, value: &str) -> Result<(), ContextError> {
    if value.is_empty() {
        return Err(ContextError::EmptyField(field));
    }
    let invalid = |reason| ContextError::InvalidName {
        field,
        value: value.to_string(),
        reason,
    };
    if value.trim().is_empty() {
        return Err(invalid("whitespace only"));
    }
    if value.contains(['/', '\\']) {
        return Err(invalid("contains a path separator"));
    }
    if value == "." || value == ".." {
        return Err(invalid("reserved path component"));
    }
    if value.chars().any(char::is_control) {
        return Err(invalid("contains a control character"));
    }
    Ok(())
}
