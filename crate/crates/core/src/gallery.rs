//! Durable, consent-aware artifact storage.
//!
//! Layout under the store root:
//!
//! ```text
//! index.jsonl          one JSON object per line, append-only
//! meta/{id}.json       full artifact record
//! img/{digest}.png     content-addressed image bytes
//! ```
//!
//! Writers are serialized through one lock; every file lands via temp file and
//! rename, and the in-memory index is only extended after the index line is on
//! disk, so readers never see a partial record. Public reads only ever return
//! records with `consent == true`.

use std::cmp::Reverse;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::ImageDigest;
use crate::latent::{BlendMode, BlendSpec, Gene};

pub const MAX_PAGE_SIZE: usize = 100;
const BUNDLE_FORMAT: &str = "geneblend-bundle/1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{op} {path}: {source}")]
    Io {
        op: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("image bytes hash to {actual}, record claims {expected}")]
    DigestMismatch { expected: String, actual: String },
    #[error("artifact not found")]
    NotFound,
    #[error("artifact {0:?} already exists")]
    DuplicateId(String),
    #[error("invalid artifact id {0:?}")]
    InvalidId(String),
    #[error("page_size must be in 1..={MAX_PAGE_SIZE}, got {0}")]
    InvalidPageSize(usize),
    #[error("page numbers start at 1")]
    InvalidPage,
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

impl StoreError {
    fn io<'a>(op: &'static str, path: &'a Path) -> impl FnOnce(std::io::Error) -> StoreError + 'a {
        move |source| StoreError::Io {
            op,
            path: path.to_owned(),
            source,
        }
    }

    /// Failures of the storage medium rather than of the request.
    pub fn is_storage_failure(&self) -> bool {
        matches!(self, StoreError::Io { .. } | StoreError::Corrupt(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Utopia,
    Dystopia,
}

impl std::str::FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "utopia" => Ok(Tag::Utopia),
            "dystopia" => Ok(Tag::Dystopia),
            other => Err(format!("unknown tag {other:?}; expected utopia or dystopia")),
        }
    }
}

/// Everything needed to re-render an artifact from the pool and backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    pub source_ids: Vec<String>,
    pub raw_weights: Vec<f64>,
    pub mode: BlendMode,
    pub truncation: f64,
    pub backend_id: String,
    pub width: u32,
    pub height: u32,
}

impl Lineage {
    pub fn spec(&self) -> BlendSpec {
        BlendSpec::new(self.raw_weights.clone(), self.mode, self.truncation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub artifact_id: String,
    pub gene: Gene,
    pub tag: Tag,
    pub lineage: Lineage,
    pub prompt: String,
    pub consent: bool,
    pub created_at: DateTime<Utc>,
    pub image_digest: ImageDigest,
    /// Reserved for deployments with login; unused otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<String>,
}

impl Artifact {
    pub fn new_id() -> String {
        uuid::Uuid::new_v4().simple().to_string()
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    artifact_id: String,
    created_at: DateTime<Utc>,
    tag: Tag,
    consent: bool,
    prompt: String,
    image_digest: ImageDigest,
}

impl From<&Artifact> for IndexEntry {
    fn from(a: &Artifact) -> Self {
        Self {
            artifact_id: a.artifact_id.clone(),
            created_at: a.created_at,
            tag: a.tag,
            consent: a.consent,
            prompt: a.prompt.clone(),
            image_digest: a.image_digest.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListFilter {
    pub tag: Option<Tag>,
    pub prompt: Option<String>,
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
}

impl Default for ListFilter {
    fn default() -> Self {
        Self {
            tag: None,
            prompt: None,
            page: 1,
            page_size: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub items: Vec<Artifact>,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleManifest {
    format: String,
    count: usize,
    artifacts: Vec<BundleEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleEntry {
    artifact_id: String,
    meta: String,
    image: String,
}

#[derive(Debug)]
pub struct GalleryStore {
    root: PathBuf,
    writer: Mutex<()>,
    index: RwLock<Vec<IndexEntry>>,
}

impl GalleryStore {
    /// Opens or creates a store. A torn final index line from an interrupted
    /// append is ignored.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for dir in [root.join("meta"), root.join("img")] {
            fs::create_dir_all(&dir).map_err(StoreError::io("creating", &dir))?;
        }
        let index_path = root.join("index.jsonl");
        let mut index = Vec::new();
        if index_path.exists() {
            let file = File::open(&index_path).map_err(StoreError::io("opening", &index_path))?;
            let lines: Vec<String> = BufReader::new(file)
                .lines()
                .collect::<Result<_, _>>()
                .map_err(StoreError::io("reading", &index_path))?;
            let last = lines.len().saturating_sub(1);
            let mut torn = false;
            for (n, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<IndexEntry>(line) {
                    Ok(entry) => index.push(entry),
                    Err(_) if n == last => torn = true,
                    Err(e) => {
                        return Err(StoreError::Corrupt(format!("index line {}: {e}", n + 1)));
                    }
                }
            }
            if torn {
                let mut clean = String::new();
                for entry in &index {
                    clean.push_str(&serde_json::to_string(entry).map_err(|e| StoreError::Corrupt(e.to_string()))?);
                    clean.push('\n');
                }
                write_atomic(&index_path, clean.as_bytes())?;
            }
        }
        Ok(Self {
            root,
            writer: Mutex::new(()),
            index: RwLock::new(index),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn meta_path(&self, id: &str) -> PathBuf {
        self.root.join("meta").join(format!("{id}.json"))
    }

    fn image_path(&self, digest: &ImageDigest) -> PathBuf {
        self.root.join("img").join(format!("{digest}.png"))
    }

    fn read_index(&self) -> std::sync::RwLockReadGuard<'_, Vec<IndexEntry>> {
        self.index.read().unwrap_or_else(|e| e.into_inner())
    }

    /// Stores an artifact and its image. Nothing is written when the bytes do
    /// not hash to `artifact.image_digest`.
    pub fn put(&self, artifact: &Artifact, image_bytes: &[u8]) -> Result<String, StoreError> {
        let actual = ImageDigest::of(image_bytes);
        if actual != artifact.image_digest {
            return Err(StoreError::DigestMismatch {
                expected: artifact.image_digest.to_string(),
                actual: actual.to_string(),
            });
        }
        if !valid_id(&artifact.artifact_id) {
            return Err(StoreError::InvalidId(artifact.artifact_id.clone()));
        }
        let _w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let meta = self.meta_path(&artifact.artifact_id);
        if meta.exists() {
            return Err(StoreError::DuplicateId(artifact.artifact_id.clone()));
        }

        let img = self.image_path(&actual);
        if !img.exists() {
            write_atomic(&img, image_bytes)?;
        }
        let record = serde_json::to_vec_pretty(artifact).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        write_atomic(&meta, &record)?;

        let entry = IndexEntry::from(artifact);
        let mut line = serde_json::to_string(&entry).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        line.push('\n');
        let index_path = self.root.join("index.jsonl");
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&index_path)
            .map_err(StoreError::io("opening", &index_path))?;
        f.write_all(line.as_bytes())
            .and_then(|_| f.sync_data())
            .map_err(StoreError::io("appending", &index_path))?;

        self.index.write().unwrap_or_else(|e| e.into_inner()).push(entry);
        Ok(artifact.artifact_id.clone())
    }

    fn load(&self, id: &str) -> Result<(Artifact, Vec<u8>), StoreError> {
        let meta = self.meta_path(id);
        let text = fs::read(&meta).map_err(StoreError::io("reading", &meta))?;
        let artifact: Artifact =
            serde_json::from_slice(&text).map_err(|e| StoreError::Corrupt(format!("{}: {e}", meta.display())))?;
        let img = self.image_path(&artifact.image_digest);
        let bytes = fs::read(&img).map_err(StoreError::io("reading", &img))?;
        if ImageDigest::of(&bytes) != artifact.image_digest {
            return Err(StoreError::Corrupt(format!(
                "{} does not match its digest",
                img.display()
            )));
        }
        Ok((artifact, bytes))
    }

    /// Fetches a record and its image. Without `include_private`, records
    /// lacking consent are reported exactly like absent ids.
    pub fn get(&self, artifact_id: &str, include_private: bool) -> Result<(Artifact, Vec<u8>), StoreError> {
        let visible = self
            .read_index()
            .iter()
            .any(|e| e.artifact_id == artifact_id && (include_private || e.consent));
        if !visible {
            return Err(StoreError::NotFound);
        }
        self.load(artifact_id)
    }

    /// Public listing: consented records only, newest first, ties by id.
    pub fn list(&self, filter: &ListFilter) -> Result<Page, StoreError> {
        if !(1..=MAX_PAGE_SIZE).contains(&filter.page_size) {
            return Err(StoreError::InvalidPageSize(filter.page_size));
        }
        if filter.page == 0 {
            return Err(StoreError::InvalidPage);
        }
        let (ids, total) = {
            let index = self.read_index();
            let mut hits: Vec<&IndexEntry> = index
                .iter()
                .filter(|e| e.consent)
                .filter(|e| filter.tag.is_none_or(|t| e.tag == t))
                .filter(|e| filter.prompt.as_ref().is_none_or(|p| &e.prompt == p))
                .collect();
            hits.sort_by(|a, b| newest_first(a, b));
            let total = hits.len();
            let start = (filter.page - 1).saturating_mul(filter.page_size).min(total);
            let end = (start + filter.page_size).min(total);
            let ids: Vec<String> = hits[start..end].iter().map(|e| e.artifact_id.clone()).collect();
            (ids, total)
        };
        let items = ids
            .iter()
            .map(|id| self.load(id).map(|(a, _)| a))
            .collect::<Result<_, _>>()?;
        Ok(Page {
            items,
            total,
            page: filter.page,
            page_size: filter.page_size,
        })
    }

    /// Image bytes for a digest, if some consented artifact uses it.
    pub fn public_image(&self, digest: &str) -> Option<Vec<u8>> {
        if !ImageDigest::is_well_formed(digest) {
            return None;
        }
        let public = self
            .read_index()
            .iter()
            .any(|e| e.consent && e.image_digest.as_str() == digest);
        if !public {
            return None;
        }
        fs::read(self.image_path(&ImageDigest(digest.to_string()))).ok()
    }

    /// All ids in insertion order, private ones included. Operator use only.
    pub fn all_ids(&self) -> Vec<String> {
        self.read_index().iter().map(|e| e.artifact_id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.read_index().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes every consented artifact to `dest` as `meta/{id}.json` plus
    /// `img/{digest}.png`, and a `bundle.json` manifest listing them.
    pub fn export_bundle(&self, dest: impl AsRef<Path>) -> Result<usize, StoreError> {
        let dest = dest.as_ref();
        for dir in [dest.join("meta"), dest.join("img")] {
            fs::create_dir_all(&dir).map_err(StoreError::io("creating", &dir))?;
        }
        let mut public: Vec<IndexEntry> = self.read_index().iter().filter(|e| e.consent).cloned().collect();
        public.sort_by(newest_first);

        let mut entries = Vec::with_capacity(public.len());
        for e in &public {
            let (artifact, bytes) = self.load(&e.artifact_id)?;
            let meta_rel = format!("meta/{}.json", artifact.artifact_id);
            let img_rel = format!("img/{}.png", artifact.image_digest);
            let record = serde_json::to_vec_pretty(&artifact).map_err(|e| StoreError::Corrupt(e.to_string()))?;
            write_atomic(&dest.join(&meta_rel), &record)?;
            write_atomic(&dest.join(&img_rel), &bytes)?;
            entries.push(BundleEntry {
                artifact_id: artifact.artifact_id,
                meta: meta_rel,
                image: img_rel,
            });
        }
        let manifest = BundleManifest {
            format: BUNDLE_FORMAT.to_string(),
            count: entries.len(),
            artifacts: entries,
        };
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        write_atomic(&dest.join("bundle.json"), &json)?;
        Ok(manifest.count)
    }

    /// Loads a bundle written by [`export_bundle`](Self::export_bundle).
    pub fn import_bundle(&self, src: impl AsRef<Path>) -> Result<usize, StoreError> {
        let src = src.as_ref();
        let manifest_path = src.join("bundle.json");
        let text = fs::read(&manifest_path).map_err(StoreError::io("reading", &manifest_path))?;
        let manifest: BundleManifest =
            serde_json::from_slice(&text).map_err(|e| StoreError::Corrupt(format!("bundle manifest: {e}")))?;
        if manifest.format != BUNDLE_FORMAT {
            return Err(StoreError::Corrupt(format!(
                "unknown bundle format {:?}",
                manifest.format
            )));
        }
        // Oldest first so insertion order matches the original store.
        for entry in manifest.artifacts.iter().rev() {
            let meta = safe_join(src, &entry.meta)?;
            let img = safe_join(src, &entry.image)?;
            let record = fs::read(&meta).map_err(StoreError::io("reading", &meta))?;
            let artifact: Artifact = serde_json::from_slice(&record).map_err(|e| StoreError::Corrupt(e.to_string()))?;
            let bytes = fs::read(&img).map_err(StoreError::io("reading", &img))?;
            self.put(&artifact, &bytes)?;
        }
        Ok(manifest.artifacts.len())
    }
}

fn newest_first(a: &IndexEntry, b: &IndexEntry) -> std::cmp::Ordering {
    (Reverse(a.created_at), &a.artifact_id).cmp(&(Reverse(b.created_at), &b.artifact_id))
}

fn safe_join(base: &Path, rel: &str) -> Result<PathBuf, StoreError> {
    let p = Path::new(rel);
    if p.is_absolute() || p.components().any(|c| !matches!(c, std::path::Component::Normal(_))) {
        return Err(StoreError::Corrupt(format!("bundle path {rel:?} escapes the bundle")));
    }
    Ok(base.join(p))
}

/// Write to a sibling temp file, sync, then rename into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("file"),
        uuid::Uuid::new_v4().simple()
    ));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(StoreError::io("writing", path))
}
