//! Embedding index over document chunks, top-k search and the answerability
//! verdict.
//!
//! The index is a value: [`EmbeddingIndex::refresh`] builds a new index aside
//! and the caller swaps it in, so readers always see one complete revision.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc_store::{CommitRecord, DocChunk, RepoSnapshot, Revision};
use crate::ids::ChunkId;
use crate::provider::{cosine, Provider, ProviderError, Vector};

pub const DEFAULT_THETA: f64 = 0.25;
pub const REFERENCE_CAP: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("index is at revision {indexed} but commit {commit} is not its successor; rebuild the index")]
    RevisionGap { indexed: Revision, commit: Revision },
    #[error("snapshot revision {snapshot} does not match commit {commit}")]
    SnapshotMismatch {
        snapshot: Revision,
        commit: Revision,
    },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub chunk: DocChunk,
    pub vector: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk: DocChunk,
    pub score: f64,
}

/// Descending score, then `(path, span.start)` ascending.
pub fn rank_order(a: &ScoredChunk, b: &ScoredChunk) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.chunk.path.cmp(&b.chunk.path))
        .then_with(|| a.chunk.span.start.cmp(&b.chunk.span.start))
}

/// Heap wrapper whose maximum is the *worst* ranked candidate, so the heap
/// can evict it when a better one arrives.
struct Worst(ScoredChunk);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        rank_order(&self.0, &other.0) == Ordering::Equal
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "chunks", rename_all = "snake_case")]
pub enum Verdict {
    Answerable(Vec<ScoredChunk>),
    Abstain(Vec<ScoredChunk>),
}

impl Verdict {
    pub fn is_answerable(&self) -> bool {
        matches!(self, Verdict::Answerable(_))
    }

    pub fn chunks(&self) -> &[ScoredChunk] {
        match self {
            Verdict::Answerable(c) | Verdict::Abstain(c) => c,
        }
    }
}

/// Answerable with the top `min(3, n)` if the best score reaches `theta`,
/// otherwise Abstain with up to three chunks scoring at least `theta / 2`.
pub fn judge(scored: &[ScoredChunk], theta: f64) -> Verdict {
    judge_capped(scored, theta, REFERENCE_CAP)
}

pub fn judge_capped(scored: &[ScoredChunk], theta: f64, cap: usize) -> Verdict {
    match scored.first() {
        Some(best) if best.score >= theta => {
            Verdict::Answerable(scored.iter().take(cap).cloned().collect())
        }
        _ => Verdict::Abstain(
            scored
                .iter()
                .filter(|s| s.score >= theta / 2.0)
                .take(cap)
                .cloned()
                .collect(),
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingIndex {
    entries: BTreeMap<ChunkId, IndexEntry>,
    indexed_revision: Revision,
    max_chars: usize,
}

impl EmbeddingIndex {
    /// One entry per chunk of `snapshot`.
    pub fn build(
        snapshot: &RepoSnapshot,
        provider: &dyn Provider,
        max_chars: usize,
    ) -> Result<Self, RetrievalError> {
        let mut entries = BTreeMap::new();
        for chunk in snapshot.chunks(max_chars) {
            let vector = provider.embed(&chunk.body)?;
            entries.insert(chunk.chunk_id.clone(), IndexEntry { chunk, vector });
        }
        tracing::debug!(
            revision = snapshot.revision,
            chunks = entries.len(),
            "index built"
        );
        Ok(Self {
            entries,
            indexed_revision: snapshot.revision,
            max_chars,
        })
    }

    pub fn empty(max_chars: usize) -> Self {
        Self {
            entries: BTreeMap::new(),
            indexed_revision: 0,
            max_chars,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn indexed_revision(&self) -> Revision {
        self.indexed_revision
    }

    pub fn max_chars(&self) -> usize {
        self.max_chars
    }

    pub fn entry(&self, id: &ChunkId) -> Option<&IndexEntry> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &IndexEntry> {
        self.entries.values()
    }

    /// Top `k` chunks by cosine similarity to `query`'s embedding.
    pub fn search(
        &self,
        provider: &dyn Provider,
        query: &str,
        k: usize,
    ) -> Result<Vec<ScoredChunk>, RetrievalError> {
        if self.entries.is_empty() {
            return Ok(Vec::new());
        }
        let q = provider.embed(query)?;
        Ok(self.search_vector(&q, k))
    }

    pub fn search_vector(&self, query: &Vector, k: usize) -> Vec<ScoredChunk> {
        self.top_k(self.entries.values(), query, k)
    }

    /// Top `k` chunks restricted to one file.
    pub fn search_file(&self, query: &Vector, path: &str, k: usize) -> Vec<ScoredChunk> {
        self.top_k(
            self.entries.values().filter(|e| e.chunk.path == path),
            query,
            k,
        )
    }

    fn top_k<'a>(
        &self,
        candidates: impl Iterator<Item = &'a IndexEntry>,
        query: &Vector,
        k: usize,
    ) -> Vec<ScoredChunk> {
        let k = k.max(1);
        let mut heap: BinaryHeap<Worst> = BinaryHeap::with_capacity(k + 1);
        for entry in candidates {
            let candidate = ScoredChunk {
                chunk: entry.chunk.clone(),
                score: cosine(query, &entry.vector),
            };
            if heap.len() < k {
                heap.push(Worst(candidate));
            } else if let Some(worst) = heap.peek() {
                if rank_order(&candidate, &worst.0) == Ordering::Less {
                    heap.pop();
                    heap.push(Worst(candidate));
                }
            }
        }
        let mut out: Vec<ScoredChunk> = heap.into_iter().map(|w| w.0).collect();
        out.sort_by(rank_order);
        out
    }

    /// Index for `snapshot`, which must be the result of applying `commit`
    /// to the indexed revision. Only chunks of touched files are re-embedded.
    pub fn refresh(
        &self,
        commit: &CommitRecord,
        snapshot: &RepoSnapshot,
        provider: &dyn Provider,
    ) -> Result<Self, RetrievalError> {
        if commit.commit_id != self.indexed_revision + 1 {
            return Err(RetrievalError::RevisionGap {
                indexed: self.indexed_revision,
                commit: commit.commit_id,
            });
        }
        if snapshot.revision != commit.commit_id {
            return Err(RetrievalError::SnapshotMismatch {
                snapshot: snapshot.revision,
                commit: commit.commit_id,
            });
        }
        let touched = commit.files();
        let mut entries: BTreeMap<ChunkId, IndexEntry> = self
            .entries
            .iter()
            .filter(|(_, e)| !touched.contains(&e.chunk.path))
            .map(|(id, e)| {
                let mut e = e.clone();
                e.chunk.revision = snapshot.revision;
                (id.clone(), e)
            })
            .collect();
        for path in &touched {
            for chunk in snapshot.chunks_of(path, self.max_chars) {
                let vector = provider.embed(&chunk.body)?;
                entries.insert(chunk.chunk_id.clone(), IndexEntry { chunk, vector });
            }
        }
        Ok(Self {
            entries,
            indexed_revision: snapshot.revision,
            max_chars: self.max_chars,
        })
    }
}
