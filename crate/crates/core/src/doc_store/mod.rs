//! Versioned Markdown store: a directory of `.md` files plus an append-only
//! commit journal (`.om-journal`, one JSON record per line).
//!
//! The working files always hold the latest revision. The first commit
//! copies the pre-history bodies into `.om-base/`, so replaying the journal
//! over `.om-base/` (or over the working files when no commit has been made
//! yet) reproduces the current snapshot.

mod chunk;
mod diff;
mod sync;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunk::{anchor_link, chunk_document, is_heading_line, slugify, MIN_CHUNK_CHARS};
pub use diff::{count_words, word_diff, DiffSegment, SegmentKind, WordDiff};
pub use sync::{HttpSync, NoopSync, RemoteSync};

use crate::ids::{ChunkId, UserId};

pub const JOURNAL_FILE: &str = ".om-journal";
pub const BASE_DIR: &str = ".om-base";

pub type Revision = u64;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("corrupt journal at line {line}: {reason}")]
    CorruptJournal { line: usize, reason: String },
    #[error("empty changeset")]
    EmptyChangeSet,
    #[error("stale changeset: based on revision {based_on}, store is at {current}")]
    StaleRevision {
        based_on: Revision,
        current: Revision,
    },
    #[error("no such file: {0}")]
    UnknownFile(String),
    #[error("file already exists: {0}")]
    FileExists(String),
    #[error("invalid document path: {0}")]
    InvalidPath(String),
    #[error("span {start}..{end} out of bounds for {path} ({len} chars)")]
    SpanOutOfBounds {
        path: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("overlapping edits in {0}")]
    OverlappingEdits(String),
    #[error("unknown revision {0}")]
    UnknownRevision(Revision),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Half-open interval of character (not byte) offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    fn overlaps(&self, other: &Span) -> bool {
        if self.is_empty() || other.is_empty() {
            // two insertions at the same point collide; an insertion strictly
            // inside a replaced range does as well
            return self.start == other.start
                || (self.start > other.start && self.start < other.end)
                || (other.start > self.start && other.start < self.end);
        }
        self.start < other.end && other.start < self.end
    }
}

/// Byte range of a char span, or `None` if the span is out of bounds.
pub fn byte_range(text: &str, span: Span) -> Option<std::ops::Range<usize>> {
    if span.start > span.end {
        return None;
    }
    let mut indices = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()));
    let start = indices.nth(span.start)?;
    let end = if span.is_empty() {
        start
    } else {
        indices.nth(span.len() - 1)?
    };
    Some(start..end)
}

/// Substring at a char span.
pub fn slice_chars(text: &str, span: Span) -> Option<&str> {
    byte_range(text, span).map(|r| &text[r])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentFile {
    pub path: String,
    pub body: String,
    pub revision: Revision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocChunk {
    pub chunk_id: ChunkId,
    pub path: String,
    /// Enclosing heading titles, outermost first; empty for a preamble.
    pub heading_path: Vec<String>,
    pub body: String,
    pub span: Span,
    pub revision: Revision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    ReplaceSpan {
        path: String,
        span: Span,
        new_text: String,
    },
    AppendSection {
        path: String,
        heading_title: String,
        new_text: String,
    },
    CreateFile {
        path: String,
        body: String,
    },
}

impl Edit {
    pub fn path(&self) -> &str {
        match self {
            Edit::ReplaceSpan { path, .. }
            | Edit::AppendSection { path, .. }
            | Edit::CreateFile { path, .. } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSet {
    /// Revision the spans and paths refer to.
    pub base_revision: Revision,
    pub edits: Vec<Edit>,
}

/// One journal line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub commit_id: Revision,
    pub author: UserId,
    pub timestamp: DateTime<Utc>,
    pub message: String,
    pub edits: Vec<Edit>,
    pub words_added: usize,
    pub words_deleted: usize,
}

impl CommitRecord {
    pub fn changeset(&self) -> ChangeSet {
        ChangeSet {
            base_revision: self.commit_id - 1,
            edits: self.edits.clone(),
        }
    }

    /// Distinct paths touched, sorted.
    pub fn files(&self) -> Vec<String> {
        self.edits
            .iter()
            .map(|e| e.path().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Immutable view of the repository at one revision.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoSnapshot {
    pub revision: Revision,
    pub files: BTreeMap<String, String>,
    pub history: Vec<CommitRecord>,
}

impl RepoSnapshot {
    pub fn file(&self, path: &str) -> Option<DocumentFile> {
        self.files.get(path).map(|body| DocumentFile {
            path: path.to_string(),
            body: body.clone(),
            revision: self.revision,
        })
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Chunks of every file, in path order.
    pub fn chunks(&self, max_chars: usize) -> Vec<DocChunk> {
        self.files
            .keys()
            .filter_map(|p| self.file(p))
            .flat_map(|f| chunk_document(&f, max_chars))
            .collect()
    }

    pub fn chunks_of(&self, path: &str, max_chars: usize) -> Vec<DocChunk> {
        self.file(path)
            .map(|f| chunk_document(&f, max_chars))
            .unwrap_or_default()
    }
}

pub fn is_markdown_path(path: &str) -> bool {
    path.ends_with(".md") || path.ends_with(".markdown")
}

fn validate_new_path(path: &str) -> Result<(), StoreError> {
    let ok = is_markdown_path(path)
        && !path.starts_with('/')
        && !path.contains('\\')
        && path
            .split('/')
            .all(|part| !part.is_empty() && part != ".." && !part.starts_with('.'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidPath(path.to_string()))
    }
}

/// Text appended by an `AppendSection` edit to `body`.
pub fn section_suffix(body: &str, heading_title: &str, new_text: &str) -> String {
    let mut out = String::new();
    if !body.is_empty() {
        if !body.ends_with('\n') {
            out.push('\n');
        }
        if !body.ends_with("\n\n") {
            out.push('\n');
        }
    }
    out.push_str("## ");
    out.push_str(heading_title.trim());
    out.push_str("\n\n");
    out.push_str(new_text.trim_end());
    out.push('\n');
    out
}

/// Applies `edits` to `files`, returning the new bodies of every touched path.
///
/// Replacements are interpreted against the input bodies; creates happen
/// before section appends, so a file may be created and extended in one
/// changeset.
pub fn apply_edits(
    files: &BTreeMap<String, String>,
    edits: &[Edit],
) -> Result<BTreeMap<String, String>, StoreError> {
    if edits.is_empty() {
        return Err(StoreError::EmptyChangeSet);
    }
    let mut replacements: BTreeMap<&str, Vec<(Span, &str)>> = BTreeMap::new();
    let mut created: BTreeMap<String, String> = BTreeMap::new();
    for edit in edits {
        match edit {
            Edit::ReplaceSpan {
                path,
                span,
                new_text,
            } => {
                let body = files
                    .get(path)
                    .ok_or_else(|| StoreError::UnknownFile(path.clone()))?;
                let len = body.chars().count();
                if span.start > span.end || span.end > len {
                    return Err(StoreError::SpanOutOfBounds {
                        path: path.clone(),
                        start: span.start,
                        end: span.end,
                        len,
                    });
                }
                let list = replacements.entry(path).or_default();
                if list.iter().any(|(s, _)| s.overlaps(span)) {
                    return Err(StoreError::OverlappingEdits(path.clone()));
                }
                list.push((*span, new_text));
            }
            Edit::CreateFile { path, body } => {
                validate_new_path(path)?;
                if files.contains_key(path) || created.contains_key(path) {
                    return Err(StoreError::FileExists(path.clone()));
                }
                created.insert(path.clone(), body.clone());
            }
            Edit::AppendSection { path, .. } => {
                if !files.contains_key(path)
                    && !edits
                        .iter()
                        .any(|e| matches!(e, Edit::CreateFile { path: p, .. } if p == path))
                {
                    return Err(StoreError::UnknownFile(path.clone()));
                }
            }
        }
    }

    let mut touched: BTreeMap<String, String> = BTreeMap::new();
    for (path, mut list) in replacements {
        let mut body = files[path].clone();
        list.sort_by(|a, b| b.0.start.cmp(&a.0.start).then(b.0.end.cmp(&a.0.end)));
        for (span, text) in list {
            let range = byte_range(&body, span).expect("span validated against base body");
            body.replace_range(range, text);
        }
        touched.insert(path.to_string(), body);
    }
    touched.extend(created);
    for edit in edits {
        if let Edit::AppendSection {
            path,
            heading_title,
            new_text,
        } = edit
        {
            let body = touched
                .entry(path.clone())
                .or_insert_with(|| files[path].clone());
            let suffix = section_suffix(body, heading_title, new_text);
            body.push_str(&suffix);
        }
    }
    Ok(touched)
}

/// Sum of word diffs between the pre- and post-bodies of touched files.
fn word_delta(
    before: &BTreeMap<String, String>,
    after: &BTreeMap<String, String>,
) -> (usize, usize) {
    after.iter().fold((0, 0), |(a, d), (path, new)| {
        let old = before.get(path).map(String::as_str).unwrap_or("");
        let diff = word_diff(old, new);
        (a + diff.added, d + diff.deleted)
    })
}

fn replay(
    base: &BTreeMap<String, String>,
    history: &[CommitRecord],
) -> Result<BTreeMap<String, String>, StoreError> {
    let mut files = base.clone();
    for (idx, record) in history.iter().enumerate() {
        let touched =
            apply_edits(&files, &record.edits).map_err(|e| StoreError::CorruptJournal {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        files.extend(touched);
    }
    Ok(files)
}

fn read_markdown_tree(root: &Path) -> Result<BTreeMap<String, String>, StoreError> {
    let mut files = BTreeMap::new();
    if !root.exists() {
        return Ok(files);
    }
    let walker = walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'));
    for entry in walker {
        let entry = entry.map_err(|e| StoreError::Io {
            path: root.to_path_buf(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields children of root");
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if !is_markdown_path(&rel) {
            continue;
        }
        let body = fs::read_to_string(entry.path()).map_err(io_err(entry.path()))?;
        files.insert(rel, body);
    }
    Ok(files)
}

fn read_journal(path: &Path) -> Result<Vec<CommitRecord>, StoreError> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut records: Vec<CommitRecord> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CommitRecord =
            serde_json::from_str(&line).map_err(|e| StoreError::CorruptJournal {
                line: line_no,
                reason: e.to_string(),
            })?;
        let expected = records.last().map_or(1, |r| r.commit_id + 1);
        if record.commit_id != expected {
            return Err(StoreError::CorruptJournal {
                line: line_no,
                reason: format!(
                    "commit_id {} where {expected} was expected",
                    record.commit_id
                ),
            });
        }
        records.push(record);
    }
    Ok(records)
}

struct Loaded {
    base: BTreeMap<String, String>,
    snapshot: RepoSnapshot,
    working: BTreeMap<String, String>,
}

fn load(root: &Path) -> Result<Loaded, StoreError> {
    let meta = fs::metadata(root).map_err(io_err(root))?;
    if !meta.is_dir() {
        return Err(StoreError::NotADirectory(root.to_path_buf()));
    }
    let working = read_markdown_tree(root)?;
    let base_dir = root.join(BASE_DIR);
    let base = if base_dir.is_dir() {
        read_markdown_tree(&base_dir)?
    } else {
        working.clone()
    };
    let history = read_journal(&root.join(JOURNAL_FILE))?;

    let mut files = base.clone();
    for (idx, record) in history.iter().enumerate() {
        let corrupt = |reason: String| StoreError::CorruptJournal {
            line: idx + 1,
            reason,
        };
        let touched = apply_edits(&files, &record.edits).map_err(|e| corrupt(e.to_string()))?;
        let delta = word_delta(&files, &touched);
        if delta != (record.words_added, record.words_deleted) {
            return Err(corrupt(format!(
                "recorded word counts (+{}, -{}) do not match the edits (+{}, -{})",
                record.words_added, record.words_deleted, delta.0, delta.1
            )));
        }
        files.extend(touched);
    }
    let snapshot = RepoSnapshot {
        revision: history.last().map_or(0, |r| r.commit_id),
        files,
        history,
    };
    Ok(Loaded {
        base,
        snapshot,
        working,
    })
}

/// Reads the latest snapshot of the repository at `root`.
pub fn load_snapshot(root: &Path) -> Result<RepoSnapshot, StoreError> {
    load(root).map(|l| l.snapshot)
}

/// Single-writer handle on a repository; hands out immutable snapshots.
pub struct DocStore {
    root: Option<PathBuf>,
    base: Arc<BTreeMap<String, String>>,
    snapshot: Arc<RepoSnapshot>,
    drift: Vec<String>,
    sync: Box<dyn RemoteSync>,
}

impl std::fmt::Debug for DocStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DocStore")
            .field("root", &self.root)
            .field("revision", &self.snapshot.revision)
            .finish()
    }
}

impl DocStore {
    /// Opens a directory-backed store.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let loaded = load(&root)?;
        let mut drift: BTreeSet<String> = loaded
            .working
            .iter()
            .filter(|(p, body)| loaded.snapshot.files.get(*p) != Some(*body))
            .map(|(p, _)| p.clone())
            .collect();
        drift.extend(
            loaded
                .snapshot
                .files
                .keys()
                .filter(|p| !loaded.working.contains_key(*p))
                .cloned(),
        );
        Ok(Self {
            root: Some(root),
            base: Arc::new(loaded.base),
            snapshot: Arc::new(loaded.snapshot),
            drift: drift.into_iter().collect(),
            sync: Box::new(NoopSync),
        })
    }

    /// Store with no backing directory, starting at revision 0.
    pub fn in_memory(files: BTreeMap<String, String>) -> Self {
        Self {
            root: None,
            base: Arc::new(files.clone()),
            snapshot: Arc::new(RepoSnapshot {
                revision: 0,
                files,
                history: Vec::new(),
            }),
            drift: Vec::new(),
            sync: Box::new(NoopSync),
        }
    }

    /// An in-memory copy sharing this store's history; later commits to the
    /// copy never touch disk.
    pub fn detached(&self) -> Self {
        Self {
            root: None,
            base: Arc::clone(&self.base),
            snapshot: Arc::clone(&self.snapshot),
            drift: Vec::new(),
            sync: Box::new(NoopSync),
        }
    }

    pub fn with_sync(mut self, sync: Box<dyn RemoteSync>) -> Self {
        self.sync = sync;
        self
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn snapshot(&self) -> Arc<RepoSnapshot> {
        Arc::clone(&self.snapshot)
    }

    pub fn revision(&self) -> Revision {
        self.snapshot.revision
    }

    /// Working-tree files whose contents differ from the journal replay.
    pub fn external_changes(&self) -> &[String] {
        &self.drift
    }

    /// Reconstructs the repository as it was at `revision`.
    pub fn snapshot_at(&self, revision: Revision) -> Result<RepoSnapshot, StoreError> {
        if revision > self.snapshot.revision {
            return Err(StoreError::UnknownRevision(revision));
        }
        if revision == self.snapshot.revision {
            return Ok((*self.snapshot).clone());
        }
        let history = self.snapshot.history[..revision as usize].to_vec();
        Ok(RepoSnapshot {
            revision,
            files: replay(&self.base, &history)?,
            history,
        })
    }

    /// Validates and commits `changeset`, advancing the store one revision.
    pub fn apply_changeset(
        &mut self,
        changeset: &ChangeSet,
        author: &UserId,
        message: &str,
        timestamp: DateTime<Utc>,
    ) -> Result<CommitRecord, StoreError> {
        if changeset.edits.is_empty() {
            return Err(StoreError::EmptyChangeSet);
        }
        if changeset.base_revision != self.snapshot.revision {
            return Err(StoreError::StaleRevision {
                based_on: changeset.base_revision,
                current: self.snapshot.revision,
            });
        }
        let touched = apply_edits(&self.snapshot.files, &changeset.edits)?;
        let (words_added, words_deleted) = word_delta(&self.snapshot.files, &touched);
        let record = CommitRecord {
            commit_id: self.snapshot.revision + 1,
            author: author.clone(),
            timestamp,
            message: message.to_string(),
            edits: changeset.edits.clone(),
            words_added,
            words_deleted,
        };

        if let Some(root) = &self.root {
            self.persist(root, &record, &touched)?;
        }

        let mut next = (*self.snapshot).clone();
        next.files.extend(touched);
        next.history.push(record.clone());
        next.revision = record.commit_id;
        self.snapshot = Arc::new(next);

        if let Err(err) = self.sync.push(&record) {
            tracing::warn!(commit = record.commit_id, %err, "remote sync failed");
        }
        Ok(record)
    }

    /// Commits working-tree edits made outside the journal as whole-file
    /// replacements (or creations). Files removed from disk are left alone.
    pub fn adopt_external_changes(
        &mut self,
        author: &UserId,
        message: &str,
        timestamp: DateTime<Utc>,
    ) -> Result<Option<CommitRecord>, StoreError> {
        let Some(root) = self.root.clone() else {
            return Ok(None);
        };
        let working = read_markdown_tree(&root)?;
        let mut edits = Vec::new();
        for (path, body) in &working {
            match self.snapshot.files.get(path) {
                Some(current) if current == body => {}
                Some(current) => edits.push(Edit::ReplaceSpan {
                    path: path.clone(),
                    span: Span::new(0, current.chars().count()),
                    new_text: body.clone(),
                }),
                None => edits.push(Edit::CreateFile {
                    path: path.clone(),
                    body: body.clone(),
                }),
            }
        }
        if edits.is_empty() {
            return Ok(None);
        }
        let changeset = ChangeSet {
            base_revision: self.snapshot.revision,
            edits,
        };
        let record = self.apply_changeset(&changeset, author, message, timestamp)?;
        self.drift.clear();
        Ok(Some(record))
    }

    /// Records the initial bodies under [`BASE_DIR`] if they are not there
    /// yet, so that later direct edits show up as drift. Until then the
    /// working tree itself is the baseline. Returns whether anything was
    /// written; detached and in-memory stores never write.
    pub fn pin_baseline(&self) -> Result<bool, StoreError> {
        let Some(root) = &self.root else {
            return Ok(false);
        };
        let base_dir = root.join(BASE_DIR);
        if base_dir.exists() {
            return Ok(false);
        }
        for (path, body) in self.base.iter() {
            write_file(&base_dir.join(path), body)?;
        }
        fs::create_dir_all(&base_dir).map_err(io_err(&base_dir))?;
        Ok(true)
    }

    fn persist(
        &self,
        root: &Path,
        record: &CommitRecord,
        touched: &BTreeMap<String, String>,
    ) -> Result<(), StoreError> {
        self.pin_baseline()?;
        let journal_path = root.join(JOURNAL_FILE);
        let mut journal = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&journal_path)
            .map_err(io_err(&journal_path))?;
        let line = serde_json::to_string(record).expect("commit records serialize");
        writeln!(journal, "{line}").map_err(io_err(&journal_path))?;
        journal.sync_data().map_err(io_err(&journal_path))?;
        for (path, body) in touched {
            write_file(&root.join(path), body)?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), StoreError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let tmp = path.with_extension("md.tmp");
    fs::write(&tmp, body).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}
