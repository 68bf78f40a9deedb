//! Filesystem backend.
//!
//! Layout: `<root>/<model>/<version>/<kind>s/<id>.<revision>.json`, plus an
//! `<id>.latest` pointer per key. All path segments are percent-encoded.
//!
//! A revision file is published by hard-linking a fully written temporary
//! file into place, which fails if the revision already exists. That makes
//! each revision write-once and gives concurrent writers of one key
//! consecutive revisions without a lock. The pointer is a hint: readers probe
//! past it, so a crash between publishing a revision and updating the
//! pointer loses nothing.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use super::{check_namespace, ArtifactStore, ListEntry, StoreError};
use crate::artifact::{decode_segment, encode_segment, ArtifactEnvelope, ArtifactKind};
use crate::context::ModelContext;

const POINTER_SUFFIX: &str = ".latest";
const REVISION_SUFFIX: &str = ".json";
const TEMP_PREFIX: &str = ".tmp-";

#[derive(Debug, Clone)]
pub struct FsStore {
    root: PathBuf,
}

fn unavailable(what: &str, path: &Path, err: io::Error) -> StoreError {
    StoreError::StoreUnavailable(format!("{what} {}: {err}", path.display()))
}

impl FsStore {
    pub fn new(root: impl Into<PathBuf>) -> FsStore {
        FsStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn namespace_dir(&self, context: &ModelContext) -> PathBuf {
        self.root
            .join(encode_segment(context.model_name()))
            .join(encode_segment(context.model_version()))
    }

    fn kind_dir(&self, context: &ModelContext, kind: ArtifactKind) -> PathBuf {
        self.namespace_dir(context).join(kind.collection())
    }

    fn revision_path(dir: &Path, encoded_id: &str, revision: u64) -> PathBuf {
        dir.join(format!("{encoded_id}.{revision}{REVISION_SUFFIX}"))
    }

    fn pointer_path(dir: &Path, encoded_id: &str) -> PathBuf {
        dir.join(format!("{encoded_id}{POINTER_SUFFIX}"))
    }

    fn read_pointer(dir: &Path, encoded_id: &str) -> u64 {
        fs::read_to_string(Self::pointer_path(dir, encoded_id))
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(0)
    }

    /// Highest published revision, starting from the pointer and probing
    /// forward.
    fn latest_revision(dir: &Path, encoded_id: &str) -> Option<u64> {
        let mut revision = Self::read_pointer(dir, encoded_id);
        if revision > 0 && !Self::revision_path(dir, encoded_id, revision).exists() {
            revision = 0;
        }
        while Self::revision_path(dir, encoded_id, revision + 1).exists() {
            revision += 1;
        }
        (revision > 0).then_some(revision)
    }

    /// Writes `bytes` to a synced temporary file next to its destination.
    fn stage(dir: &Path, bytes: &[u8]) -> Result<NamedTempFile, StoreError> {
        let mut tmp = tempfile::Builder::new()
            .prefix(TEMP_PREFIX)
            .tempfile_in(dir)
            .map_err(|e| unavailable("cannot create temporary file in", dir, e))?;
        tmp.write_all(bytes)
            .and_then(|_| tmp.as_file().sync_all())
            .map_err(|e| unavailable("cannot write temporary file in", dir, e))?;
        Ok(tmp)
    }

    fn update_pointer(dir: &Path, encoded_id: &str, revision: u64) -> Result<(), StoreError> {
        if Self::read_pointer(dir, encoded_id) >= revision {
            return Ok(());
        }
        let tmp = Self::stage(dir, revision.to_string().as_bytes())?;
        let path = Self::pointer_path(dir, encoded_id);
        tmp.persist(&path)
            .map_err(|e| unavailable("cannot update pointer", &path, e.error))?;
        Ok(())
    }

    /// Reads the canonical bytes of one stored revision along with the
    /// parsed envelope.
    pub fn load_raw(
        &self,
        context: &ModelContext,
        kind: ArtifactKind,
        identifier: &str,
        revision: Option<u64>,
    ) -> Result<(Vec<u8>, ArtifactEnvelope), StoreError> {
        let dir = self.kind_dir(context, kind);
        let encoded = encode_segment(identifier);
        let revision = match revision {
            Some(0) => return Err(StoreError::not_found(kind, identifier, Some(0))),
            Some(r) => r,
            None => Self::latest_revision(&dir, &encoded)
                .ok_or_else(|| StoreError::not_found(kind, identifier, None))?,
        };
        let path = Self::revision_path(&dir, &encoded, revision);
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::not_found(kind, identifier, Some(revision)))
            }
            Err(e) => return Err(unavailable("cannot read", &path, e)),
        };
        let envelope = ArtifactEnvelope::from_slice(&bytes)
            .map_err(|e| StoreError::SchemaViolation(format!("{}: {e}", path.display())))?;
        let matches_key = envelope.kind() == kind
            && envelope.identifier() == identifier
            && envelope.revision() == revision
            && envelope.model() == context.model_name()
            && envelope.model_version() == context.model_version();
        if !matches_key {
            return Err(StoreError::SchemaViolation(format!(
                "{} does not hold the artifact its path names",
                path.display()
            )));
        }
        Ok((bytes, envelope))
    }

    fn identifiers_in(dir: &Path) -> Result<BTreeSet<String>, StoreError> {
        let entries = match fs::read_dir(dir) {
            Ok(entries) => entries,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(BTreeSet::new()),
            Err(e) => return Err(unavailable("cannot list", dir, e)),
        };
        let mut ids = BTreeSet::new();
        for entry in entries {
            let entry = entry.map_err(|e| unavailable("cannot list", dir, e))?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if name.starts_with(TEMP_PREFIX) {
                continue;
            }
            let encoded = if let Some(stem) = name.strip_suffix(POINTER_SUFFIX) {
                stem
            } else if let Some(stem) = name.strip_suffix(REVISION_SUFFIX) {
                match stem.rsplit_once('.') {
                    Some((id, rev)) if rev.parse::<u64>().is_ok() => id,
                    _ => continue,
                }
            } else {
                continue;
            };
            if let Some(id) = decode_segment(encoded) {
                ids.insert(id);
            }
        }
        Ok(ids)
    }
}

impl ArtifactStore for FsStore {
    fn save(&self, context: &ModelContext, envelope: &ArtifactEnvelope) -> Result<u64, StoreError> {
        check_namespace(context, envelope)?;
        let dir = self.kind_dir(context, envelope.kind());
        fs::create_dir_all(&dir).map_err(|e| unavailable("cannot create", &dir, e))?;
        let encoded = encode_segment(envelope.identifier());
        let mut revision = Self::latest_revision(&dir, &encoded).map_or(1, |r| r + 1);
        loop {
            let bytes = envelope
                .clone()
                .with_revision(revision)
                .to_canonical_bytes();
            let tmp = Self::stage(&dir, &bytes)?;
            let target = Self::revision_path(&dir, &encoded, revision);
            match tmp.persist_noclobber(&target) {
                Ok(_) => break,
                Err(e) if e.error.kind() == io::ErrorKind::AlreadyExists => revision += 1,
                Err(e) => return Err(unavailable("cannot publish", &target, e.error)),
            }
        }
        Self::update_pointer(&dir, &encoded, revision)?;
        tracing::debug!(kind = %envelope.kind(), identifier = envelope.identifier(), revision, "saved artifact");
        Ok(revision)
    }

    fn load(
        &self,
        context: &ModelContext,
        kind: ArtifactKind,
        identifier: &str,
        revision: Option<u64>,
    ) -> Result<ArtifactEnvelope, StoreError> {
        self.load_raw(context, kind, identifier, revision)
            .map(|(_, env)| env)
    }

    fn list(
        &self,
        context: &ModelContext,
        kind: Option<ArtifactKind>,
    ) -> Result<Vec<ListEntry>, StoreError> {
        let kinds = match kind {
            Some(k) => vec![k],
            None => ArtifactKind::ALL.to_vec(),
        };
        let mut listing = Vec::new();
        for kind in kinds {
            let dir = self.kind_dir(context, kind);
            for identifier in Self::identifiers_in(&dir)? {
                // Keys whose first revision is still being written have no
                // published revision yet.
                let Some(latest) = Self::latest_revision(&dir, &encode_segment(&identifier)) else {
                    continue;
                };
                let envelope = self.load(context, kind, &identifier, Some(latest))?;
                listing.push(ListEntry {
                    kind,
                    identifier,
                    latest_revision: latest,
                    timestamp: envelope.timestamp().to_string(),
                });
            }
        }
        listing.sort_by(|a, b| (a.kind, &a.identifier).cmp(&(b.kind, &b.identifier)));
        Ok(listing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::ArtifactBody;
    use crate::evidence::Value;
    use crate::spec::{PropertyCategory, PropertySpec, Spec};

    fn ctx(root: &Path, model: &str, version: &str) -> ModelContext {
        ModelContext::with_locator(
            model,
            version,
            crate::StoreLocator::Local(root.to_path_buf()),
        )
        .unwrap()
    }

    fn spec(desc: &str) -> Spec {
        Spec::new(vec![PropertySpec::new(
            "TaskEfficacy",
            PropertyCategory::Functionality,
            desc,
        )])
        .unwrap()
    }

    #[test]
    fn revisions_increment_and_are_retained() {
        let dir = tempfile::tempdir().unwrap();
        let store = FsStore::new(dir.path());
        let c = ctx(dir.path(), "ModelName", "v0.0.1");
        assert_eq!(store.save_spec(&c, "default", &spec("first")).unwrap(), 1);
        assert_eq!(store.save_spec(&c, "default", &spec("second")).unwrap(), 2);
        assert_eq!(store.load_spec(&c, "default").unwrap(), spec("second"));
        let first = store
            .load(&c, ArtifactKind::Spec, "default", Some(1))
            .unwrap();
        assert_eq!(first.body(), &ArtifactBody::Spec(spec("first")));
        assert_eq!(first.revision(), 1);
        assert!(dir
            .path()
            .join("ModelName/v0.0.1/specs/default.2.json")
            .exists());
        assert_eq!(
            fs::read_to_string(dir.path().join("ModelName/v0.0.1/specs/default.latest")).unwrap(),
            "2"
        );
    }

    #[test]
    fn missing_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let store = FsStore::new(dir.path());
        let c = ctx(dir.path(), "m", "v1");
        assert_eq!(
            store
                .load(&c, ArtifactKind::Value, "missing", None)
                .unwrap_err(),
            StoreError::not_found(ArtifactKind::Value, "missing", None)
        );
        store
            .save_value(&c, &Value::real("accuracy", 0.9).unwrap())
            .unwrap();
        assert!(matches!(
            store.load(&c, ArtifactKind::Value, "accuracy", Some(2)),
            Err(StoreError::NotFound {
                revision: Some(2),
                ..
            })
        ));
        assert!(store.list(&c, None).unwrap().len() == 1);
    }

    #[test]
    fn namespace_guard_and_isolation() {
        let dir = tempfile::tempdir().unwrap();
        let store = FsStore::new(dir.path());
        let a1 = ctx(dir.path(), "A", "v1");
        let a2 = ctx(dir.path(), "A", "v2");
        let b1 = ctx(dir.path(), "B", "v1");
        let v = Value::real("accuracy", 0.9).unwrap();
        let envelope = ArtifactEnvelope::for_value(&a1, &v).unwrap();
        assert!(matches!(
            store.save(&a2, &envelope),
            Err(StoreError::SchemaViolation(_))
        ));
        store.save(&a1, &envelope).unwrap();
        assert!(store.load_value(&a2, "accuracy").is_err());
        assert!(store.load_value(&b1, "accuracy").is_err());
        assert!(store.list(&b1, None).unwrap().is_empty());
    }

    #[test]
    fn crash_before_commit_leaves_previous_revision() {
        let dir = tempfile::tempdir().unwrap();
        let store = FsStore::new(dir.path());
        let c = ctx(dir.path(), "m", "v1");
        store.save_spec(&c, "default", &spec("first")).unwrap();
        let kind_dir = store.kind_dir(&c, ArtifactKind::Spec);

        // A writer dies after staging revision 2 but before publishing it.
        let env = ArtifactEnvelope::new(&c, "default", ArtifactBody::Spec(spec("lost"))).unwrap();
        let staged = FsStore::stage(&kind_dir, &env.with_revision(2).to_canonical_bytes()).unwrap();
        staged.into_temp_path().keep().unwrap();
        // And another dies mid-write.
        fs::write(kind_dir.join(".tmp-partial"), b"{\"body\":").unwrap();

        assert_eq!(store.load_spec(&c, "default").unwrap(), spec("first"));
        assert_eq!(store.list(&c, None).unwrap()[0].latest_revision, 1);
        assert_eq!(store.save_spec(&c, "default", &spec("next")).unwrap(), 2);
        assert_eq!(store.load_spec(&c, "default").unwrap(), spec("next"));
    }

    #[test]
    fn stale_or_missing_pointer_is_repaired_by_probing() {
        let dir = tempfile::tempdir().unwrap();
        let store = FsStore::new(dir.path());
        let c = ctx(dir.path(), "m", "v1");
        for i in 0..3 {
            store
                .save_spec(&c, "default", &spec(&i.to_string()))
                .unwrap();
        }
        let kind_dir = store.kind_dir(&c, ArtifactKind::Spec);
        fs::write(FsStore::pointer_path(&kind_dir, "default"), "1").unwrap();
        assert_eq!(
            store
                .load(&c, ArtifactKind::Spec, "default", None)
                .unwrap()
                .revision(),
            3
        );
        fs::remove_file(FsStore::pointer_path(&kind_dir, "default")).unwrap();
        assert_eq!(
            store.list(&c, Some(ArtifactKind::Spec)).unwrap()[0].latest_revision,
            3
        );
        assert_eq!(store.save_spec(&c, "default", &spec("3")).unwrap(), 4);
    }

    #[test]
    fn identifiers_with_spaces_and_dots() {
        let dir = tempfile::tempdir().unwrap();
        let store = FsStore::new(dir.path());
        let c = ctx(dir.path(), "Model Name", "v0.0.1");
        for id in ["cpu stats", "cpu stats.cpu_avg_percent", "a.latest", "x.1"] {
            store
                .save_value(&c, &Value::real(id, 1.0).unwrap())
                .unwrap();
        }
        let ids: Vec<_> = store
            .list(&c, None)
            .unwrap()
            .into_iter()
            .map(|e| e.identifier)
            .collect();
        assert_eq!(
            ids,
            ["a.latest", "cpu stats", "cpu stats.cpu_avg_percent", "x.1"]
        );
        assert!(dir
            .path()
            .join("Model%20Name/v0.0.1/values/cpu%20stats.1.json")
            .exists());
    }

    #[test]
    fn corrupt_document_is_schema_violation() {
        let dir = tempfile::tempdir().unwrap();
        let store = FsStore::new(dir.path());
        let c = ctx(dir.path(), "m", "v1");
        store.save_spec(&c, "default", &spec("x")).unwrap();
        let path = store
            .kind_dir(&c, ArtifactKind::Spec)
            .join("default.1.json");
        fs::write(&path, b"{}").unwrap();
        assert!(matches!(
            store.load_spec(&c, "default"),
            Err(StoreError::SchemaViolation(_))
        ));
    }

    #[cfg(unix)]
    #[test]
    fn unwritable_root_is_unavailable() {
        let c = ctx(Path::new("/proc/definitely/not"), "m", "v1");
        let store = FsStore::new("/proc/definitely/not");
        assert!(matches!(
            store.save_spec(&c, "default", &spec("x")),
            Err(StoreError::StoreUnavailable(_))
        ));
    }
}
