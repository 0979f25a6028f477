//! Platform-neutral front door: normalized events in, normalized actions
//! out. Every event, provider call and action is written to the audit log.

mod action;
pub mod adapter;
pub mod audit;
pub mod config;
mod event;
pub mod protocol;
pub mod stats;

use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use action::{
    Action, ActionKind, AnswerOutcome, Button, ErrorCode, FileChoice, Payload, Target,
};
pub use config::{BotIdentity, ConfigError, WorkspaceConfig};
pub use event::{ChatEvent, EventKind, Interaction};

use crate::doc_store::{CommitRecord, DocStore, HttpSync, StoreError};
use crate::extraction::{self, DraftError};
use crate::ids::UserId;
use crate::provider::{strip_leading_mentions, GuardedProvider, Intent, Provider, ProviderError};
use crate::qa::{self, APOLOGY};
use crate::retrieval::{EmbeddingIndex, RetrievalError};
use crate::share::{self, ShareError};
use crate::update_flow::{self, FlowError};
use crate::workspace::{Turn, WorkspaceState};
use audit::{AuditError, AuditLog, AuditRecord, CommitMethod};
use stats::StatsReport;

pub const CHATTER_REPLY: &str = "Hi! Ask me anything about the lab documents, or mention me with \"document this\" after a discussion to suggest an update.";
const SYNC_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error("workspace state {path}: {source}")]
    State {
        path: String,
        source: std::io::Error,
    },
}

pub fn share_error_code(err: &ShareError) -> ErrorCode {
    match err {
        ShareError::UnknownExchange(_) | ShareError::UnknownRecipient(_) => ErrorCode::NotFound,
        ShareError::NotQuestioner => ErrorCode::Unauthorized,
        ShareError::NoQaChannel | ShareError::NoRecipients => ErrorCode::InvalidState,
        ShareError::Duplicate => ErrorCode::Duplicate,
    }
}

pub fn draft_error_code(err: &DraftError) -> ErrorCode {
    match err {
        DraftError::UnknownDraft(_) => ErrorCode::NotFound,
        DraftError::NotContributor => ErrorCode::Unauthorized,
        DraftError::NotEditable(_) => ErrorCode::InvalidState,
        DraftError::EmptyText => ErrorCode::Protocol,
    }
}

pub fn flow_error_code(err: &FlowError) -> ErrorCode {
    match err {
        FlowError::NotManager | FlowError::ClaimedByOther(_) => ErrorCode::Unauthorized,
        FlowError::UnknownSession(_) | FlowError::UnknownFile(_) | FlowError::NoFiles => {
            ErrorCode::NotFound
        }
        FlowError::IllegalAction { .. } | FlowError::AlreadySubmitted(_) | FlowError::Stale(_) => {
            ErrorCode::InvalidState
        }
        FlowError::Draft(d) => draft_error_code(d),
        FlowError::EmptyText => ErrorCode::Protocol,
        FlowError::Store(_) => ErrorCode::Store,
        FlowError::Provider(_) => ErrorCode::Provider,
    }
}

pub struct Gateway {
    config: WorkspaceConfig,
    store: DocStore,
    index: Arc<EmbeddingIndex>,
    provider: GuardedProvider,
    state: WorkspaceState,
    audit: AuditLog,
    persist_state: bool,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("store", &self.store)
            .field("indexed", &self.index.len())
            .finish_non_exhaustive()
    }
}

impl Gateway {
    /// Opens the repository, audit log and saved state named by `config`,
    /// with the provider the config selects.
    pub fn open(config: WorkspaceConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let provider = config.provider.build(config.dimension)?;
        Self::open_with_provider(config, provider)
    }

    pub fn open_with_provider(
        config: WorkspaceConfig,
        provider: Box<dyn Provider>,
    ) -> Result<Self, GatewayError> {
        let mut store = DocStore::open(&config.repo_root)?;
        if let Some(endpoint) = &config.sync_endpoint {
            store = store.with_sync(Box::new(HttpSync::new(endpoint.clone(), SYNC_TIMEOUT)));
        }
        store.pin_baseline()?;
        if !store.external_changes().is_empty() {
            tracing::warn!(files = ?store.external_changes(), "repository has edits outside the journal; run reindex to adopt them");
        }
        let state_path = config.state_path();
        let state = WorkspaceState::load(&state_path).map_err(|source| GatewayError::State {
            path: state_path.display().to_string(),
            source,
        })?;
        let audit = AuditLog::open(&config.audit_path())?;
        Self::assemble(config, store, provider, state, audit, true)
    }

    /// A gateway with no files on disk: in-memory store, state and audit log.
    pub fn in_memory(
        config: WorkspaceConfig,
        store: DocStore,
        provider: Box<dyn Provider>,
    ) -> Result<Self, GatewayError> {
        Self::with_audit(config, store, provider, AuditLog::in_memory())
    }

    /// Fresh state that is never saved, logging to `audit`. Used for replay.
    pub fn with_audit(
        config: WorkspaceConfig,
        store: DocStore,
        provider: Box<dyn Provider>,
        audit: AuditLog,
    ) -> Result<Self, GatewayError> {
        Self::assemble(
            config,
            store,
            provider,
            WorkspaceState::default(),
            audit,
            false,
        )
    }

    fn assemble(
        config: WorkspaceConfig,
        store: DocStore,
        provider: Box<dyn Provider>,
        state: WorkspaceState,
        mut audit: AuditLog,
        persist_state: bool,
    ) -> Result<Self, GatewayError> {
        let provider = GuardedProvider::new(provider, &config.roster);
        let index = EmbeddingIndex::build(&store.snapshot(), &provider, config.max_chars)?;
        for call in provider.drain_calls() {
            audit.append(
                None,
                AuditRecord::ProviderCall {
                    op: call.op,
                    payload: call.payload,
                },
            )?;
        }
        audit.flush()?;
        tracing::info!(
            chunks = index.len(),
            revision = index.indexed_revision(),
            "index built"
        );
        Ok(Self {
            config,
            store,
            index: Arc::new(index),
            provider,
            state,
            audit,
            persist_state,
        })
    }

    pub fn config(&self) -> &WorkspaceConfig {
        &self.config
    }

    pub fn store(&self) -> &DocStore {
        &self.store
    }

    pub fn index(&self) -> Arc<EmbeddingIndex> {
        Arc::clone(&self.index)
    }

    pub fn state(&self) -> &WorkspaceState {
        &self.state
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn stats(&self) -> StatsReport {
        stats::stats(self.audit.entries())
    }

    /// Processes one event and returns the actions it produced. Duplicate
    /// event ids are ignored.
    pub fn ingest(&mut self, event: &ChatEvent) -> Result<Vec<Action>, GatewayError> {
        self.process(event, dispatch)
    }

    /// Treats a message event as a question without classifying it first.
    pub fn ingest_question(&mut self, event: &ChatEvent) -> Result<Vec<Action>, GatewayError> {
        self.process(event, |turn, event| {
            qa::handle_question(turn, event, strip_leading_mentions(&event.text));
            remember(turn, event);
        })
    }

    fn process(
        &mut self,
        event: &ChatEvent,
        handler: impl FnOnce(&mut Turn<'_>, &ChatEvent),
    ) -> Result<Vec<Action>, GatewayError> {
        if !self.state.seen_events.insert(event.event_id.clone()) {
            tracing::debug!(event = %event.event_id, "duplicate event ignored");
            return Ok(Vec::new());
        }
        let mut turn = Turn::new(
            &self.config,
            &self.provider,
            &mut self.store,
            &mut self.index,
            &mut self.state,
            event.timestamp,
        );
        handler(&mut turn, event);
        let Turn {
            actions, records, ..
        } = turn;

        let at = Some(event.timestamp);
        self.audit.append(
            at,
            AuditRecord::Event {
                event: event.clone(),
            },
        )?;
        for record in records {
            self.audit.append(at, record)?;
        }
        for call in self.provider.drain_calls() {
            self.audit.append(
                at,
                AuditRecord::ProviderCall {
                    op: call.op,
                    payload: call.payload,
                },
            )?;
        }
        for action in &actions {
            self.audit.append(
                at,
                AuditRecord::Action {
                    action: action.clone(),
                },
            )?;
        }
        self.audit.flush()?;
        self.save_state()?;
        Ok(actions)
    }

    /// Adopts edits made directly in the repository as one commit and
    /// refreshes the index.
    pub fn reindex(
        &mut self,
        author: &UserId,
        now: DateTime<Utc>,
    ) -> Result<Option<CommitRecord>, GatewayError> {
        let Some(record) =
            self.store
                .adopt_external_changes(author, "Adopt direct repository edits", now)?
        else {
            return Ok(None);
        };
        let mut turn = Turn::new(
            &self.config,
            &self.provider,
            &mut self.store,
            &mut self.index,
            &mut self.state,
            now,
        );
        turn.record(AuditRecord::Commit {
            commit_id: record.commit_id,
            author: author.clone(),
            method: CommitMethod::Direct,
            session_id: None,
            files: record.files(),
            words_added: record.words_added,
            words_deleted: record.words_deleted,
        });
        turn.refresh_index(&record);
        let records = std::mem::take(&mut turn.records);
        for rec in records {
            self.audit.append(Some(now), rec)?;
        }
        for call in self.provider.drain_calls() {
            self.audit.append(
                Some(now),
                AuditRecord::ProviderCall {
                    op: call.op,
                    payload: call.payload,
                },
            )?;
        }
        self.audit.flush()?;
        self.save_state()?;
        Ok(Some(record))
    }

    fn save_state(&self) -> Result<(), GatewayError> {
        if !self.persist_state {
            return Ok(());
        }
        let path = self.config.state_path();
        self.state
            .save(&path)
            .map_err(|source| GatewayError::State {
                path: path.display().to_string(),
                source,
            })
    }
}

fn dispatch(turn: &mut Turn<'_>, event: &ChatEvent) {
    match event.kind {
        EventKind::DmMessage | EventKind::Mention => {
            share::relay_followup(turn, event);
            converse(turn, event);
            remember(turn, event);
        }
        EventKind::ChannelMessage => {
            share::relay_followup(turn, event);
            remember(turn, event);
        }
        EventKind::ButtonClick | EventKind::ModalSubmit => match &event.payload {
            Some(interaction) => interact(turn, event, interaction),
            None => turn.error(
                &event.conversation,
                &event.author,
                ErrorCode::Protocol,
                "interaction events need a payload",
            ),
        },
        EventKind::Unknown => turn.error(
            &event.conversation,
            &event.author,
            ErrorCode::Protocol,
            "unsupported event kind",
        ),
    }
}

/// Human messages are remembered for extraction windows.
fn remember(turn: &mut Turn<'_>, event: &ChatEvent) {
    if event.author == turn.config.bot.id {
        return;
    }
    turn.state
        .history
        .entry(event.conversation.clone())
        .or_default()
        .push(extraction::history_message(event));
}

fn converse(turn: &mut Turn<'_>, event: &ChatEvent) {
    let text = strip_leading_mentions(&event.text);
    let intent = match turn.provider.classify_intent(text) {
        Ok(intent) => intent,
        Err(err) => {
            tracing::warn!(%err, event = %event.event_id, "intent classification failed");
            turn.note(format!(
                "classification of {} failed: {err}",
                event.event_id
            ));
            turn.post(
                &event.conversation,
                event.thread.as_deref(),
                Payload::Error {
                    code: ErrorCode::Provider,
                    message: APOLOGY.into(),
                },
            );
            return;
        }
    };
    tracing::debug!(event = %event.event_id, ?intent, "classified");
    match intent {
        Intent::Question => {
            qa::handle_question(turn, event, text);
        }
        Intent::UpdateRequest => {
            extraction::draft_suggestion(turn, event);
        }
        Intent::Chatter => {
            let reply = match event.kind {
                EventKind::Mention => extraction::USAGE_HELP,
                _ => CHATTER_REPLY,
            };
            turn.post(
                &event.conversation,
                event.thread.as_deref(),
                Payload::Text { text: reply.into() },
            );
        }
    }
}

fn interact(turn: &mut Turn<'_>, event: &ChatEvent, interaction: &Interaction) {
    let actor = &event.author;
    if interaction.is_manager_only() && !turn.config.roster.is_manager(actor) {
        tracing::info!(%actor, interaction = interaction.name(), "manager-only interaction rejected");
        turn.error(
            &event.conversation,
            actor,
            ErrorCode::Unauthorized,
            FlowError::NotManager.to_string(),
        );
        return;
    }
    let failure: Option<(ErrorCode, String)> = match interaction {
        Interaction::OpenShare { exchange_id, mode } => {
            share::open_share_modal(turn, event, exchange_id, *mode)
                .err()
                .map(|e| (share_error_code(&e), e.to_string()))
        }
        Interaction::SubmitShare(request) => share::post_share(turn, event, request)
            .err()
            .map(|e| (share_error_code(&e), e.to_string())),
        Interaction::OpenDraftEditor { draft_id } => extraction::open_editor(turn, event, draft_id)
            .err()
            .map(|e| (draft_error_code(&e), e.to_string())),
        Interaction::EditDraft { draft_id, text } => {
            extraction::edit_draft(turn, actor, draft_id, text)
                .err()
                .map(|e| (draft_error_code(&e), e.to_string()))
        }
        Interaction::WithdrawDraft { draft_id } => {
            extraction::withdraw_draft(turn, actor, draft_id)
                .err()
                .map(|e| (draft_error_code(&e), e.to_string()))
        }
        Interaction::SubmitDraft { draft_id } => {
            update_flow::submit_suggestion(turn, actor, draft_id)
                .err()
                .map(|e| (flow_error_code(&e), e.to_string()))
        }
        Interaction::Session {
            session_id,
            command,
        } => update_flow::manager_action(turn, session_id, actor, command)
            .err()
            .map(|e| (flow_error_code(&e), e.to_string())),
    };
    if let Some((code, message)) = failure {
        tracing::info!(%actor, interaction = interaction.name(), ?code, %message, "interaction refused");
        turn.error(&event.conversation, actor, code, message);
    }
}
