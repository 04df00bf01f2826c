//! Data model and ingestion for embeddings, grayscale images and landmark sidecars.
//!
//! Everything downstream (search, lineups, features) reads from a [`CorpusHandle`],
//! which is immutable once built and can be shared freely between worker threads.

mod binary;
mod curate;
mod landmarks;
mod pgm;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use binary::{read_binary, write_binary, BinaryContents, BINARY_MAGIC};
pub use curate::{curate, CurationConfig, CurationReport, RemovalReason};
pub use landmarks::{ingest_landmarks, LandmarkSet, LandmarkTable, LANDMARK_COUNT};
pub use pgm::{load_grayscale_image, write_pgm, ImageGray};

/// Opaque image identifier, unique within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageId(String);

impl ImageId {
    pub fn new(value: impl Into<String>) -> Result<Self> {
        let value = value.into();
        if value.is_empty() {
            return Err(Error::InvalidArgument("image id must be non-empty".into()));
        }
        Ok(ImageId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ImageId {
    /// Panics on an empty string; use [`ImageId::new`] for untrusted input.
    fn from(s: &str) -> Self {
        ImageId::new(s).expect("empty image id")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub image_id: ImageId,
    pub identity_id: String,
    pub vector: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn new(image_id: impl Into<ImageId>, identity_id: impl Into<String>, vector: Vec<f32>) -> Self {
        EmbeddingRecord {
            image_id: image_id.into(),
            identity_id: identity_id.into(),
            vector,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sources: Vec<PathBuf>,
    pub dim: usize,
    pub count: usize,
    /// Set when the vectors were persisted already L2-normalized (index files).
    pub normalized: bool,
}

/// Validated, immutable collection of embedding records.
#[derive(Debug, Clone)]
pub struct CorpusHandle {
    records: Vec<EmbeddingRecord>,
    by_id: HashMap<ImageId, usize>,
    identity_index: BTreeMap<String, Vec<ImageId>>,
    manifest: Manifest,
}

impl CorpusHandle {
    /// Validates records: non-empty ids, uniform dimension, finite components,
    /// unique ids.
    pub fn from_records(
        records: Vec<EmbeddingRecord>,
        expected_dim: Option<usize>,
        sources: Vec<PathBuf>,
    ) -> Result<Self> {
        let dim = match (expected_dim, records.first()) {
            (Some(d), _) => d,
            (None, Some(r)) => r.vector.len(),
            (None, None) => 0,
        };
        let mut by_id = HashMap::with_capacity(records.len());
        let mut identity_index: BTreeMap<String, Vec<ImageId>> = BTreeMap::new();
        for (i, rec) in records.iter().enumerate() {
            if rec.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    id: rec.image_id.to_string(),
                    expected: dim,
                    found: rec.vector.len(),
                });
            }
            if rec.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(rec.image_id.to_string()));
            }
            if by_id.insert(rec.image_id.clone(), i).is_some() {
                return Err(Error::DuplicateId(rec.image_id.to_string()));
            }
            identity_index
                .entry(rec.identity_id.clone())
                .or_default()
                .push(rec.image_id.clone());
        }
        let manifest = Manifest {
            sources,
            dim,
            count: records.len(),
            normalized: false,
        };
        Ok(CorpusHandle {
            records,
            by_id,
            identity_index,
            manifest,
        })
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.manifest.dim
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn get(&self, id: &ImageId) -> Option<&EmbeddingRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, id: &ImageId) -> bool {
        self.by_id.contains_key(id)
    }

    /// Images of one identity, in corpus order.
    pub fn identity_images(&self, identity: &str) -> &[ImageId] {
        self.identity_index.get(identity).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn identity_index(&self) -> &BTreeMap<String, Vec<ImageId>> {
        &self.identity_index
    }

    /// New handle holding only records accepted by `keep`, corpus order preserved.
    pub fn filter(&self, mut keep: impl FnMut(&EmbeddingRecord) -> bool) -> CorpusHandle {
        let records: Vec<_> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        let mut out = CorpusHandle::from_records(records, Some(self.dim()), self.manifest.sources.clone())
            .expect("subset of a valid corpus is valid");
        out.manifest.normalized = self.manifest.normalized;
        out
    }

    pub(crate) fn mark_normalized(&mut self, normalized: bool) {
        self.manifest.normalized = normalized;
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    image_id: String,
    identity_id: String,
    vector: Vec<f64>,
}

/// Loads an embedding file, detecting the binary container by its magic bytes
/// and falling back to JSONL otherwise.
pub fn ingest_embeddings(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<CorpusHandle> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 4];
    let n = read_up_to(&mut file, &mut magic).map_err(|e| Error::io(path, e))?;
    drop(file);
    if n == 4 && magic == BINARY_MAGIC {
        let contents = read_binary(path)?;
        if let Some(d) = expected_dim {
            if d != contents.dim {
                return Err(Error::DimensionMismatch {
                    id: path.display().to_string(),
                    expected: d,
                    found: contents.dim,
                });
            }
        }
        let mut handle = CorpusHandle::from_records(contents.records, Some(contents.dim), vec![path.to_path_buf()])?;
        handle.mark_normalized(contents.normalized);
        return Ok(handle);
    }
    let records = read_jsonl(path)?;
    CorpusHandle::from_records(records, expected_dim, vec![path.to_path_buf()])
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

fn read_jsonl(path: &Path) -> Result<Vec<EmbeddingRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonlRecord = serde_json::from_str(&line).map_err(|e| Error::malformed(path, i + 1, e.to_string()))?;
        let image_id = ImageId::new(raw.image_id).map_err(|e| Error::malformed(path, i + 1, e.to_string()))?;
        if raw.vector.iter().any(|x| !x.is_finite() || !(*x as f32).is_finite()) {
            return Err(Error::NonFinite(image_id.to_string()));
        }
        records.push(EmbeddingRecord {
            image_id,
            identity_id: raw.identity_id,
            vector: raw.vector.iter().map(|&x| x as f32).collect(),
        });
    }
    Ok(records)
}

/// Writes records as JSONL, one object per line.
pub fn write_jsonl(path: impl AsRef<Path>, records: &[EmbeddingRecord]) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
