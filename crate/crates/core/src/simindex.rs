//! Exact top-k inner-product search over L2-normalized embeddings.
//!
//! The index is a flat row-major matrix. Queries are scored in batches against
//! blocks of rows, and a bounded heap keeps the best `k` hits per query. Scores
//! are accumulated in f64 by one shared kernel, so the batched path and the
//! brute-force oracle produce bit-identical scores.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, CorpusHandle, EmbeddingRecord, ImageId};
use crate::error::{Error, Result};

pub const DEFAULT_BATCH_SIZE: usize = 256;
const ROW_BLOCK: usize = 1024;
const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f32>);

impl UnitVector {
    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Wraps an already-normalized vector, checking the norm.
    pub fn from_normalized(v: Vec<f32>) -> Result<Self> {
        let norm = dot(&v, &v).sqrt();
        if v.is_empty() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("vector norm {norm} is not 1")));
        }
        Ok(UnitVector(v))
    }
}

pub fn l2_normalize(v: &[f32]) -> Result<UnitVector> {
    if v.is_empty() {
        return Err(Error::Empty("vector has no components".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("vector to normalize".into()));
    }
    let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector(None));
    }
    Ok(UnitVector(v.iter().map(|&x| (x as f64 / norm) as f32).collect()))
}

/// Inner product with f64 accumulation. Every scoring path goes through here.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] as f64 * b[j] as f64;
        acc[1] += a[j + 1] as f64 * b[j + 1] as f64;
        acc[2] += a[j + 2] as f64 * b[j + 2] as f64;
        acc[3] += a[j + 3] as f64 * b[j + 3] as f64;
    }
    let mut tail = 0f64;
    for j in chunks * 4..a.len() {
        tail += a[j] as f64 * b[j] as f64;
    }
    // + 0.0 folds -0.0 into 0.0 so equal scores compare equal under total_cmp
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail + 0.0
}

/// Which rows a query may not return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionRule {
    #[default]
    None,
    /// Skip the row whose id equals the query id.
    SelfId,
    /// Skip every row sharing the query's identity label.
    Identity,
}

#[derive(Debug, Clone)]
pub struct Query {
    pub id: ImageId,
    pub identity: Option<String>,
    pub vector: UnitVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub image_id: ImageId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKResult {
    pub query_id: ImageId,
    pub hits: Vec<Hit>,
}

#[derive(Debug, Clone)]
pub struct SearchIndex {
    dim: usize,
    matrix: Vec<f32>,
    row_ids: Vec<ImageId>,
    row_identity: Vec<u32>,
    identities: Vec<String>,
    identity_codes: HashMap<String, u32>,
    identity_sizes: Vec<usize>,
    // position of each row in ascending-ImageId order, used for tie-breaks
    id_rank: Vec<u32>,
    id_rows: HashMap<ImageId, usize>,
}

impl SearchIndex {
    /// Normalizes every corpus vector and inserts it in corpus order.
    pub fn build(corpus: &CorpusHandle) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("corpus".into()));
        }
        let rows = corpus
            .records()
            .par_iter()
            .map(|rec| {
                l2_normalize(&rec.vector).map_err(|e| match e {
                    Error::ZeroVector(_) => Error::ZeroVector(Some(rec.image_id.to_string())),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_rows(corpus, rows))
    }

    /// Builds from a corpus whose vectors are already unit length (a persisted
    /// index); vectors are checked, not renormalized.
    pub fn from_normalized(corpus: &CorpusHandle) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("corpus".into()));
        }
        let rows = corpus
            .records()
            .iter()
            .map(|rec| {
                UnitVector::from_normalized(rec.vector.clone())
                    .map_err(|_| Error::InvalidArgument(format!("{} is not unit length", rec.image_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_rows(corpus, rows))
    }

    fn from_rows(corpus: &CorpusHandle, rows: Vec<UnitVector>) -> Self {
        let dim = corpus.dim();
        let n = rows.len();
        let mut matrix = Vec::with_capacity(n * dim);
        for r in &rows {
            matrix.extend_from_slice(r.as_slice());
        }
        let mut identity_codes = HashMap::new();
        let mut identities = Vec::new();
        let mut identity_sizes = Vec::new();
        let mut row_identity = Vec::with_capacity(n);
        let mut row_ids = Vec::with_capacity(n);
        for rec in corpus.records() {
            let code = *identity_codes.entry(rec.identity_id.clone()).or_insert_with(|| {
                identities.push(rec.identity_id.clone());
                identity_sizes.push(0);
                (identities.len() - 1) as u32
            });
            identity_sizes[code as usize] += 1;
            row_identity.push(code);
            row_ids.push(rec.image_id.clone());
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| row_ids[a].cmp(&row_ids[b]));
        let mut id_rank = vec![0u32; n];
        for (rank, &row) in order.iter().enumerate() {
            id_rank[row] = rank as u32;
        }
        let id_rows = row_ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
        SearchIndex {
            dim,
            matrix,
            row_ids,
            row_identity,
            identities,
            identity_codes,
            identity_sizes,
            id_rank,
            id_rows,
        }
    }

    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_id(&self, i: usize) -> &ImageId {
        &self.row_ids[i]
    }

    pub fn row_identity(&self, i: usize) -> &str {
        &self.identities[self.row_identity[i] as usize]
    }

    pub fn row_of(&self, id: &ImageId) -> Option<usize> {
        self.id_rows.get(id).copied()
    }

    /// Query for an indexed row, carrying its id and identity.
    pub fn query_for_row(&self, i: usize) -> Query {
        Query {
            id: self.row_ids[i].clone(),
            identity: Some(self.row_identity(i).to_string()),
            vector: UnitVector(self.row(i).to_vec()),
        }
    }

    /// Persists the normalized rows in the binary container with the
    /// normalized flag set.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let records: Vec<EmbeddingRecord> = (0..self.len())
            .map(|i| EmbeddingRecord {
                image_id: self.row_ids[i].clone(),
                identity_id: self.row_identity(i).to_string(),
                vector: self.row(i).to_vec(),
            })
            .collect();
        corpus::write_binary(path, self.dim, true, &records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let corpus = corpus::ingest_embeddings(path, None)?;
        if corpus.manifest().normalized {
            Self::from_normalized(&corpus)
        } else {
            Self::build(&corpus)
        }
    }

    fn excluded_code(&self, q: &Query, rule: ExclusionRule) -> Result<Option<u32>> {
        match rule {
            ExclusionRule::Identity => {
                let label = q.identity.as_ref().ok_or_else(|| {
                    Error::InvalidArgument(format!("query {} has no identity for identity exclusion", q.id))
                })?;
                // u32::MAX never matches a row: the identity is not indexed
                Ok(Some(self.identity_codes.get(label).copied().unwrap_or(u32::MAX)))
            }
            _ => Ok(None),
        }
    }

    fn eligible(&self, q: &Query, rule: ExclusionRule) -> Result<usize> {
        Ok(match rule {
            ExclusionRule::None => self.len(),
            ExclusionRule::SelfId => self.len() - usize::from(self.id_rows.contains_key(&q.id)),
            ExclusionRule::Identity => match self.excluded_code(q, rule)? {
                Some(code) if code != u32::MAX => self.len() - self.identity_sizes[code as usize],
                _ => self.len(),
            },
        })
    }

    fn check_query(&self, q: &Query, k: usize, rule: ExclusionRule) -> Result<()> {
        if q.vector.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                id: q.id.to_string(),
                expected: self.dim,
                found: q.vector.dim(),
            });
        }
        let eligible = self.eligible(q, rule)?;
        if k == 0 || k > eligible {
            return Err(Error::KTooLarge {
                query: q.id.to_string(),
                k,
                eligible,
            });
        }
        Ok(())
    }

    #[inline]
    fn is_excluded(&self, row: usize, q: &Query, rule: ExclusionRule, code: Option<u32>) -> bool {
        match rule {
            ExclusionRule::None => false,
            ExclusionRule::SelfId => self.row_ids[row] == q.id,
            ExclusionRule::Identity => Some(self.row_identity[row]) == code,
        }
    }

    fn to_result(&self, q: &Query, mut cands: Vec<Candidate>) -> TopKResult {
        cands.sort();
        TopKResult {
            query_id: q.id.clone(),
            hits: cands
                .into_iter()
                .map(|c| Hit {
                    image_id: self.row_ids[c.row as usize].clone(),
                    score: c.score,
                })
                .collect(),
        }
    }
}

/// Ordered so that "greater" means "worse": lower score, then larger id.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    id_rank: u32,
    row: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.id_rank.cmp(&other.id_rank))
    }
}

struct TopK {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if c < *worst {
                *worst = c;
            }
        }
    }
}

/// Exact top-k for every query, processed in batches of `batch_size` queries.
/// Output order follows input order; each result is independent of batching.
pub fn search_batch(
    index: &SearchIndex,
    queries: &[Query],
    k: usize,
    rule: ExclusionRule,
    batch_size: usize,
) -> Result<Vec<TopKResult>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let codes = queries
        .iter()
        .map(|q| {
            index.check_query(q, k, rule)?;
            index.excluded_code(q, rule)
        })
        .collect::<Result<Vec<_>>>()?;

    let batches: Vec<Vec<TopKResult>> = queries
        .par_chunks(batch_size)
        .zip(codes.par_chunks(batch_size))
        .map(|(batch, codes)| search_one_batch(index, batch, codes, k, rule))
        .collect();
    Ok(batches.into_iter().flatten().collect())
}

fn search_one_batch(
    index: &SearchIndex,
    batch: &[Query],
    codes: &[Option<u32>],
    k: usize,
    rule: ExclusionRule,
) -> Vec<TopKResult> {
    let mut tops: Vec<TopK> = batch.iter().map(|_| TopK::new(k)).collect();
    let n = index.len();
    let mut start = 0;
    while start < n {
        let end = (start + ROW_BLOCK).min(n);
        for (qi, q) in batch.iter().enumerate() {
            let qv = q.vector.as_slice();
            let top = &mut tops[qi];
            for row in start..end {
                if index.is_excluded(row, q, rule, codes[qi]) {
                    continue;
                }
                top.offer(Candidate {
                    score: dot(qv, index.row(row)),
                    id_rank: index.id_rank[row],
                    row: row as u32,
                });
            }
        }
        start = end;
    }
    batch
        .iter()
        .zip(tops)
        .map(|(q, top)| index.to_result(q, top.heap.into_vec()))
        .collect()
}

/// Full scan and full sort; the reference the batched search must match.
pub fn brute_force_topk(index: &SearchIndex, query: &Query, k: usize, rule: ExclusionRule) -> Result<TopKResult> {
    index.check_query(query, k, rule)?;
    let code = index.excluded_code(query, rule)?;
    let mut all: Vec<Candidate> = (0..index.len())
        .filter(|&row| !index.is_excluded(row, query, rule, code))
        .map(|row| Candidate {
            score: dot(query.vector.as_slice(), index.row(row)),
            id_rank: index.id_rank[row],
            row: row as u32,
        })
        .collect();
    all.sort();
    all.truncate(k);
    Ok(index.to_result(query, all))
}
