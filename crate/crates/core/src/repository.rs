//! Component repository: stores uploaded software/data packages and enforces
//! the required ZIP archive layout.
//!
//! Accepted archives contain exactly one top-level root directory. A software
//! package carries `appcode/` and `WEB-INF/web.xml` beneath the root; a data
//! package carries `data/data.sql`. `lib/` and `classes/` are optional.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::PrincipalId;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId(pub String);

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackageKind {
    Software,
    Data,
}

impl fmt::Display for PackageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PackageKind::Software => write!(f, "software"),
            PackageKind::Data => write!(f, "data"),
        }
    }
}

/// A stored component package plus the manifest it was validated against.
#[derive(Debug, Clone)]
pub struct ComponentPackage {
    pub component_id: ComponentId,
    pub provider: PrincipalId,
    pub kind: PackageKind,
    pub archive: Vec<u8>,
    /// Entry paths from the ZIP central directory, in archive order.
    pub manifest: Vec<String>,
    /// The single top-level root directory name.
    pub root: String,
    /// Hex SHA-256 of the archive bytes.
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayoutViolation {
    /// Zero or more than one top-level root, or loose top-level files.
    NotMonolayerRoot { roots: Vec<String> },
    MissingAppcode { root: String },
    MissingWebXml { root: String },
    MissingDataSql { root: String },
}

impl fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutViolation::NotMonolayerRoot { roots } => {
                write!(f, "archive must contain a monolayer root, found [{}]", roots.join(", "))
            }
            LayoutViolation::MissingAppcode { root } => {
                write!(f, "software layout: missing {root}/appcode/")
            }
            LayoutViolation::MissingWebXml { root } => {
                write!(f, "software layout: missing {root}/WEB-INF/web.xml")
            }
            LayoutViolation::MissingDataSql { root } => {
                write!(f, "data layout: missing {root}/data/data.sql")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    /// The archive satisfies both the software and the data layout; rejected
    /// rather than guessed.
    #[error("ambiguous archive: matches both software and data layouts")]
    Ambiguous,
    #[error("layout violations: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Violations(Vec<LayoutViolation>),
}

#[derive(Debug, Error)]
pub enum UploadError {
    #[error("empty archive payload")]
    EmptyArchive,
    #[error("not a ZIP container: {0}")]
    MalformedArchive(String),
    #[error(transparent)]
    Layout(#[from] ClassifyError),
    #[error("duplicate component: provider {provider} already uploaded root {root}")]
    DuplicateComponent { provider: PrincipalId, root: String },
    #[error("storage: {0}")]
    Storage(String),
}

#[derive(Debug, Error)]
#[error("component not found: {0}")]
pub struct NotFound(pub ComponentId);

/// Classifies an archive manifest as software or data, or reports every
/// layout violation found.
pub fn classify_manifest(manifest: &[String]) -> Result<PackageKind, ClassifyError> {
    let root = monolayer_root(manifest)
        .map_err(|v| ClassifyError::Violations(vec![v]))?;
    classify_under_root(manifest, &root)
}

/// Returns the single top-level directory, or the monolayer-root violation.
fn monolayer_root(manifest: &[String]) -> Result<String, LayoutViolation> {
    let mut roots: Vec<String> = Vec::new();
    for entry in manifest {
        let trimmed = entry.trim_start_matches('/');
        match trimmed.split_once('/') {
            Some((top, _)) => {
                if !roots.iter().any(|r| r == top) {
                    roots.push(top.to_string());
                }
            }
            // top-level plain file: not a directory root
            None => {
                if !trimmed.is_empty() {
                    roots.push(format!("{trimmed} (file)"));
                }
            }
        }
    }
    match roots.as_slice() {
        [single] if !single.ends_with("(file)") => Ok(single.clone()),
        _ => Err(LayoutViolation::NotMonolayerRoot { roots }),
    }
}

fn classify_under_root(manifest: &[String], root: &str) -> Result<PackageKind, ClassifyError> {
    let has_prefix = |p: &str| manifest.iter().any(|e| e.starts_with(p) && e.len() > p.len() || e == p);
    let has_entry = |p: &str| manifest.iter().any(|e| e == p);

    let appcode = has_prefix(&format!("{root}/appcode/"));
    let web_xml = has_entry(&format!("{root}/WEB-INF/web.xml"));
    let data_sql = has_entry(&format!("{root}/data/data.sql"));

    let software = appcode && web_xml;
    let data = data_sql;

    match (software, data) {
        (true, true) => Err(ClassifyError::Ambiguous),
        (true, false) => Ok(PackageKind::Software),
        (false, true) => Ok(PackageKind::Data),
        (false, false) => {
            let mut violations = Vec::new();
            if !appcode {
                violations.push(LayoutViolation::MissingAppcode { root: root.to_string() });
            }
            if !web_xml {
                violations.push(LayoutViolation::MissingWebXml { root: root.to_string() });
            }
            violations.push(LayoutViolation::MissingDataSql { root: root.to_string() });
            Err(ClassifyError::Violations(violations))
        }
    }
}

/// Reads the entry paths out of a ZIP payload without decompressing contents.
pub fn read_manifest(archive: &[u8]) -> Result<Vec<String>, UploadError> {
    let mut zip = zip::ZipArchive::new(Cursor::new(archive))
        .map_err(|e| UploadError::MalformedArchive(e.to_string()))?;
    let mut manifest = Vec::with_capacity(zip.len());
    for i in 0..zip.len() {
        let entry = zip
            .by_index_raw(i)
            .map_err(|e| UploadError::MalformedArchive(e.to_string()))?;
        manifest.push(entry.name().to_string());
    }
    Ok(manifest)
}

/// Validates a ZIP payload end to end: container integrity plus layout.
pub fn validate_archive(archive: &[u8]) -> Result<(PackageKind, Vec<String>, String), UploadError> {
    if archive.is_empty() {
        return Err(UploadError::EmptyArchive);
    }
    let manifest = read_manifest(archive)?;
    let root = monolayer_root(&manifest)
        .map_err(|v| ClassifyError::Violations(vec![v]))?;
    let kind = classify_under_root(&manifest, &root)?;
    Ok((kind, manifest, root))
}

/// The platform package store. Mutations go through `upload`; stored packages
/// are immutable and retrievable bit-identically.
#[derive(Debug, Default)]
pub struct Repository {
    packages: BTreeMap<ComponentId, ComponentPackage>,
    by_provider_root: BTreeMap<(PrincipalId, String), ComponentId>,
    storage_dir: Option<PathBuf>,
}

impl Repository {
    pub fn new() -> Self {
        Self::default()
    }

    /// A repository that mirrors accepted packages to
    /// `<dir>/<component_id>/package.zip` plus a metadata sidecar.
    pub fn with_storage_dir(dir: impl Into<PathBuf>) -> Self {
        Repository {
            storage_dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn upload(
        &mut self,
        provider: &PrincipalId,
        archive: Vec<u8>,
    ) -> Result<ComponentId, UploadError> {
        let (kind, manifest, root) = validate_archive(&archive)?;

        let key = (provider.clone(), root.clone());
        if self.by_provider_root.contains_key(&key) {
            return Err(UploadError::DuplicateComponent {
                provider: provider.clone(),
                root,
            });
        }

        let content_hash = hex_digest(&archive);
        let component_id = ComponentId(format!(
            "cmp-{}",
            hex_digest_with_prefix(provider.0.as_bytes(), &archive)
                .chars()
                .take(12)
                .collect::<String>()
        ));

        let package = ComponentPackage {
            component_id: component_id.clone(),
            provider: provider.clone(),
            kind,
            archive,
            manifest,
            root,
            content_hash,
        };
        if let Some(dir) = self.storage_dir.clone() {
            self.persist(&dir, &package)
                .map_err(|e| UploadError::Storage(e.to_string()))?;
        }
        self.by_provider_root.insert(key, component_id.clone());
        self.packages.insert(component_id.clone(), package);
        Ok(component_id)
    }

    pub fn fetch(&self, id: &ComponentId) -> Result<&ComponentPackage, NotFound> {
        self.packages.get(id).ok_or_else(|| NotFound(id.clone()))
    }

    pub fn contains(&self, id: &ComponentId) -> bool {
        self.packages.contains_key(id)
    }

    pub fn packages(&self) -> impl Iterator<Item = &ComponentPackage> {
        self.packages.values()
    }

    fn persist(&self, dir: &Path, package: &ComponentPackage) -> std::io::Result<()> {
        let pkg_dir = dir.join(&package.component_id.0);
        fs::create_dir_all(&pkg_dir)?;
        fs::write(pkg_dir.join("package.zip"), &package.archive)?;
        let meta = format!(
            "id\t{}\nprovider\t{}\nkind\t{}\nhash\t{}\nroot\t{}\n",
            package.component_id, package.provider, package.kind, package.content_hash, package.root
        );
        fs::write(pkg_dir.join("meta.tsv"), meta)
    }

    /// Rebuilds a repository from a storage directory previously written by
    /// [`Repository::with_storage_dir`].
    pub fn load_from_dir(dir: impl Into<PathBuf>) -> Result<Self, UploadError> {
        let dir = dir.into();
        let mut repo = Repository::with_storage_dir(dir.clone());
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(_) => return Ok(repo), // nothing stored yet
        };
        let mut dirs: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        for pkg_dir in dirs {
            let meta = fs::read_to_string(pkg_dir.join("meta.tsv"))
                .map_err(|e| UploadError::Storage(e.to_string()))?;
            let fields: BTreeMap<&str, &str> = meta
                .lines()
                .filter_map(|l| l.split_once('\t'))
                .collect();
            let provider = PrincipalId::new(*fields.get("provider").unwrap_or(&""));
            let archive = fs::read(pkg_dir.join("package.zip"))
                .map_err(|e| UploadError::Storage(e.to_string()))?;
            // storage_dir temporarily cleared so the re-insert does not rewrite
            let dir_backup = repo.storage_dir.take();
            repo.upload(&provider, archive)?;
            repo.storage_dir = dir_backup;
        }
        Ok(repo)
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex_encode(&h.finalize())
}

fn hex_digest_with_prefix(prefix: &[u8], bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(prefix);
    h.update([0u8]);
    h.update(bytes);
    hex_encode(&h.finalize())
}

fn hex_encode(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds an in-memory ZIP with the given entries. Directory entries end with
/// `/`; timestamps are fixed so identical inputs give identical bytes.
pub fn build_zip(entries: &[(&str, &[u8])]) -> Vec<u8> {
    use std::io::Write;
    use zip::write::SimpleFileOptions;

    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = zip::ZipWriter::new(&mut cursor);
        let opts = SimpleFileOptions::default()
            .compression_method(zip::CompressionMethod::Stored)
            .last_modified_time(zip::DateTime::default());
        for (path, contents) in entries {
            if path.ends_with('/') {
                writer.add_directory(*path, opts).expect("zip dir");
            } else {
                writer.start_file(*path, opts).expect("zip file");
                writer.write_all(contents).expect("zip write");
            }
        }
        writer.finish().expect("zip finish");
    }
    cursor.into_inner()
}

/// Canonical minimal software package used by scenarios and tests.
pub fn software_fixture(root: &str) -> Vec<u8> {
    build_zip(&[
        (&format!("{root}/appcode/"), b"".as_slice()),
        (&format!("{root}/appcode/Main.class"), b"\xca\xfe\xba\xbe".as_slice()),
        (&format!("{root}/WEB-INF/web.xml"), b"<web-app/>".as_slice()),
        (&format!("{root}/WEB-INF/lib/"), b"".as_slice()),
        (&format!("{root}/index.jsp"), b"<html/>".as_slice()),
    ])
}

/// Canonical minimal data package used by scenarios and tests.
pub fn data_fixture(root: &str) -> Vec<u8> {
    build_zip(&[(
        &format!("{root}/data/data.sql"),
        b"CREATE TABLE orders (id INT);".as_slice(),
    )])
}
