//! Persistent workspace state and the per-event processing context shared by
//! the qa, share, extraction and update-flow handlers.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::doc_store::{ChangeSet, CommitRecord, DocStore, StoreError};
use crate::extraction::SuggestionDraft;
use crate::gateway::audit::{AuditRecord, CommitMethod};
use crate::gateway::{Action, ActionKind, ErrorCode, Payload, Target, WorkspaceConfig};
use crate::ids::{ConversationId, DraftId, ExchangeId, SessionId, UserId};
use crate::provider::Provider;
use crate::qa::QAExchange;
use crate::retrieval::EmbeddingIndex;
use crate::share::{RelayRoute, ShareRecord, SharedAnchor};
use crate::update_flow::UpdateSession;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub action: u64,
    pub exchange: u64,
    pub draft: u64,
    pub session: u64,
    pub group: u64,
}

/// A human-authored message as remembered for extraction windows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryMessage {
    pub event_id: String,
    pub author: UserId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread: Option<String>,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceState {
    pub seen_events: BTreeSet<String>,
    pub counters: Counters,
    pub exchanges: BTreeMap<ExchangeId, QAExchange>,
    pub shares: Vec<ShareRecord>,
    /// Shared exchange per conversation (`conv`) or channel thread
    /// (`conv/thread`).
    pub anchors: BTreeMap<String, SharedAnchor>,
    /// Anonymous-share relay routes, keyed like `anchors`.
    pub routes: BTreeMap<String, RelayRoute>,
    /// Members of bot-created group conversations, bot included.
    pub groups: BTreeMap<ConversationId, Vec<UserId>>,
    pub history: BTreeMap<ConversationId, Vec<HistoryMessage>>,
    pub drafts: BTreeMap<DraftId, SuggestionDraft>,
    pub sessions: BTreeMap<SessionId, UpdateSession>,
}

impl WorkspaceState {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Writes atomically via a temporary file.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let tmp = path.with_extension("json.tmp");
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(
            &tmp,
            serde_json::to_vec_pretty(self).expect("state serializes"),
        )?;
        std::fs::rename(tmp, path)
    }

    pub fn next_exchange_id(&mut self) -> ExchangeId {
        self.counters.exchange += 1;
        ExchangeId::new(format!("qa-{}", self.counters.exchange))
    }

    pub fn next_draft_id(&mut self) -> DraftId {
        self.counters.draft += 1;
        DraftId::new(format!("draft-{}", self.counters.draft))
    }

    pub fn next_session_id(&mut self) -> SessionId {
        self.counters.session += 1;
        SessionId::new(format!("sess-{}", self.counters.session))
    }

    pub fn next_group_id(&mut self) -> ConversationId {
        self.counters.group += 1;
        ConversationId::new(format!("grp-{}", self.counters.group))
    }
}

/// Key for per-conversation or per-thread registries.
pub fn scope_key(conversation: &ConversationId, thread: Option<&str>) -> String {
    match thread {
        Some(t) => format!("{conversation}/{t}"),
        None => conversation.to_string(),
    }
}

/// Everything a handler needs while processing one event. Emitted actions
/// and audit records are collected here and logged by the gateway.
pub struct Turn<'a> {
    pub config: &'a WorkspaceConfig,
    pub provider: &'a dyn Provider,
    pub store: &'a mut DocStore,
    pub index: &'a mut Arc<EmbeddingIndex>,
    pub state: &'a mut WorkspaceState,
    pub now: DateTime<Utc>,
    pub actions: Vec<Action>,
    pub records: Vec<AuditRecord>,
}

impl<'a> Turn<'a> {
    pub fn new(
        config: &'a WorkspaceConfig,
        provider: &'a dyn Provider,
        store: &'a mut DocStore,
        index: &'a mut Arc<EmbeddingIndex>,
        state: &'a mut WorkspaceState,
        now: DateTime<Utc>,
    ) -> Self {
        Self {
            config,
            provider,
            store,
            index,
            state,
            now,
            actions: Vec::new(),
            records: Vec::new(),
        }
    }

    /// Queues an action and returns its id.
    pub fn emit(&mut self, kind: ActionKind, target: Target, payload: Payload) -> String {
        self.state.counters.action += 1;
        let action_id = format!("act-{}", self.state.counters.action);
        self.actions.push(Action {
            action_id: action_id.clone(),
            kind,
            target,
            payload,
        });
        action_id
    }

    pub fn dm(&mut self, user: &UserId, payload: Payload) -> String {
        self.emit(
            ActionKind::DmUser,
            Target::user(ConversationId::dm(user), user.clone()),
            payload,
        )
    }

    pub fn ephemeral(
        &mut self,
        conversation: &ConversationId,
        user: &UserId,
        payload: Payload,
    ) -> String {
        self.emit(
            ActionKind::PostEphemeral,
            Target::user(conversation.clone(), user.clone()),
            payload,
        )
    }

    pub fn post(
        &mut self,
        conversation: &ConversationId,
        thread: Option<&str>,
        payload: Payload,
    ) -> String {
        match thread {
            Some(t) => self.emit(
                ActionKind::PostThreadReply,
                Target::thread(conversation.clone(), t),
                payload,
            ),
            None => self.emit(
                ActionKind::PostMessage,
                Target::conversation(conversation.clone()),
                payload,
            ),
        }
    }

    pub fn error(
        &mut self,
        conversation: &ConversationId,
        user: &UserId,
        code: ErrorCode,
        message: impl Into<String>,
    ) {
        self.ephemeral(
            conversation,
            user,
            Payload::Error {
                code,
                message: message.into(),
            },
        );
    }

    pub fn record(&mut self, record: AuditRecord) -> usize {
        self.records.push(record);
        self.records.len() - 1
    }

    pub fn note(&mut self, message: impl Into<String>) {
        self.records.push(AuditRecord::Note {
            message: message.into(),
        });
    }

    /// Commits through the store's single writer, audits the commit and
    /// swaps in a refreshed index before returning.
    pub fn commit(
        &mut self,
        changeset: &ChangeSet,
        author: &UserId,
        message: &str,
        method: CommitMethod,
        session_id: Option<&SessionId>,
    ) -> Result<CommitRecord, StoreError> {
        let record = self
            .store
            .apply_changeset(changeset, author, message, self.now)?;
        self.records.push(AuditRecord::Commit {
            commit_id: record.commit_id,
            author: author.clone(),
            method,
            session_id: session_id.cloned(),
            files: record.files(),
            words_added: record.words_added,
            words_deleted: record.words_deleted,
        });
        self.refresh_index(&record);
        Ok(record)
    }

    pub fn refresh_index(&mut self, record: &CommitRecord) {
        let snapshot = self.store.snapshot();
        let refreshed = self
            .index
            .refresh(record, &snapshot, self.provider)
            .or_else(|err| {
                tracing::warn!(%err, "incremental refresh failed; rebuilding index");
                EmbeddingIndex::build(&snapshot, self.provider, self.config.max_chars)
            });
        match refreshed {
            Ok(index) => *self.index = Arc::new(index),
            Err(err) => {
                tracing::error!(%err, "index rebuild failed; keeping previous index");
                self.note(format!(
                    "index refresh failed after commit {}: {err}",
                    record.commit_id
                ));
            }
        }
    }
}
