//! Append-only audit log: one JSON record per line, the sole input to stats.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Action, ChatEvent};
use crate::ids::{ConversationId, ExchangeId, SessionId, UserId};
use crate::privacy::Role;
use crate::share::ShareMode;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("audit log {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("audit log line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitMethod {
    /// Through an approved update session.
    Assisted,
    /// Adopted from edits made directly in the repository.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginKind {
    Channel,
    Dm,
}

impl OriginKind {
    pub fn of(conversation: &ConversationId) -> Self {
        if conversation.is_dm() {
            OriginKind::Dm
        } else {
            OriginKind::Channel
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditRecord {
    Event {
        event: ChatEvent,
    },
    Action {
        action: Action,
    },
    ProviderCall {
        op: String,
        payload: serde_json::Value,
    },
    Question {
        exchange_id: ExchangeId,
        questioner: UserId,
        role: Role,
        origin: OriginKind,
        answered: bool,
    },
    Share {
        exchange_id: ExchangeId,
        mode: ShareMode,
        anonymous: bool,
        conversation: ConversationId,
    },
    Session {
        session_id: SessionId,
        actor: UserId,
        command: String,
        from: String,
        to: String,
    },
    Commit {
        commit_id: u64,
        author: UserId,
        method: CommitMethod,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session_id: Option<SessionId>,
        files: Vec<String>,
        words_added: usize,
        words_deleted: usize,
    },
    Note {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    /// Time of the event being processed; `None` for records written outside
    /// event processing (startup indexing).
    pub at: Option<DateTime<Utc>>,
    pub record: AuditRecord,
}

/// In-memory log, optionally mirrored to a JSON-lines file.
#[derive(Debug, Default)]
pub struct AuditLog {
    entries: Vec<AuditEntry>,
    sink: Option<(PathBuf, BufWriter<File>)>,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Appends to `path`, continuing the sequence of any records already
    /// there.
    pub fn open(path: &Path) -> Result<Self, AuditError> {
        let io_err = |source| AuditError::Io {
            path: path.to_path_buf(),
            source,
        };
        let entries = if path.exists() {
            read_log(path)?
        } else {
            Vec::new()
        };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        Ok(Self {
            entries,
            sink: Some((path.to_path_buf(), BufWriter::new(file))),
        })
    }

    /// Truncates `path` and writes a fresh log there.
    pub fn create(path: &Path) -> Result<Self, AuditError> {
        let io_err = |source| AuditError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
        let file = File::create(path).map_err(io_err)?;
        Ok(Self {
            entries: Vec::new(),
            sink: Some((path.to_path_buf(), BufWriter::new(file))),
        })
    }

    pub fn append(
        &mut self,
        at: Option<DateTime<Utc>>,
        record: AuditRecord,
    ) -> Result<u64, AuditError> {
        let entry = AuditEntry {
            seq: self.entries.len() as u64 + 1,
            at,
            record,
        };
        if let Some((path, sink)) = &mut self.sink {
            let line = serde_json::to_string(&entry).expect("audit entries serialize");
            writeln!(sink, "{line}").map_err(|source| AuditError::Io {
                path: path.clone(),
                source,
            })?;
        }
        let seq = entry.seq;
        self.entries.push(entry);
        Ok(seq)
    }

    pub fn flush(&mut self) -> Result<(), AuditError> {
        if let Some((path, sink)) = &mut self.sink {
            sink.flush().map_err(|source| AuditError::Io {
                path: path.clone(),
                source,
            })?;
        }
        Ok(())
    }

    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Drop for AuditLog {
    fn drop(&mut self) {
        if let Err(err) = self.flush() {
            tracing::error!(%err, "failed to flush audit log");
        }
    }
}

pub fn read_log(path: &Path) -> Result<Vec<AuditEntry>, AuditError> {
    let file = File::open(path).map_err(|source| AuditError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| AuditError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|source| AuditError::Parse {
            line: i + 1,
            source,
        })?;
        out.push(entry);
    }
    Ok(out)
}
