//! Manager-gated update sessions: a submitted suggestion becomes diff
//! proposals against one file, and each approved proposal becomes a commit.
//!
//! ```text
//! Pending --Start--> Selecting --SelectFile|AutoSelect--> Proposing(0)
//!    |                   |                                  | Apply|Skip -> Proposing(i+1) | Done
//!    +--Decline--> Declined  +--CreateFile--> Done               | CreateNewSection -> Done
//!                                                                | Stop -> Stopped
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc_store::{
    is_markdown_path, slugify, word_diff, ChangeSet, DocChunk, Edit, Revision, Span, StoreError,
    WordDiff,
};
use crate::extraction::{DraftError, DraftState, SuggestionDraft};
use crate::gateway::audit::{AuditRecord, CommitMethod};
use crate::gateway::{Button, FileChoice, Interaction, Payload};
use crate::ids::{DraftId, SessionId, UserId};
use crate::provider::{cosine, ProviderError, Vector};
use crate::retrieval::{rank_order, ScoredChunk};
use crate::workspace::{scope_key, Turn};

/// Proposals generated per file.
pub const MAX_PROPOSALS: usize = 3;
pub const DEFAULT_SECTION_HEADING: &str = "Additional notes";

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("only managers can review suggestions")]
    NotManager,
    #[error("this session is being handled by {0}")]
    ClaimedByOther(UserId),
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("{action} is not possible while the session is {state}")]
    IllegalAction {
        state: SessionState,
        action: &'static str,
    },
    #[error("draft {0} was already submitted")]
    AlreadySubmitted(DraftId),
    #[error(transparent)]
    Draft(#[from] DraftError),
    #[error("{0} is not a file in the repository")]
    UnknownFile(String),
    #[error("the repository has no files to choose from")]
    NoFiles,
    #[error("text must not be empty")]
    EmptyText,
    #[error("{0} changed since the proposals were made; skip or stop and start again")]
    Stale(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "index", rename_all = "snake_case")]
pub enum SessionState {
    Pending,
    Declined,
    Selecting,
    Proposing(usize),
    Done,
    Stopped,
}

impl SessionState {
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            SessionState::Declined | SessionState::Done | SessionState::Stopped
        )
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionState::Pending => f.write_str("pending"),
            SessionState::Declined => f.write_str("declined"),
            SessionState::Selecting => f.write_str("selecting"),
            SessionState::Proposing(i) => write!(f, "proposing({i})"),
            SessionState::Done => f.write_str("done"),
            SessionState::Stopped => f.write_str("stopped"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ManagerAction {
    EditSuggestion { text: String },
    Decline,
    Start,
    SelectFile { path: String },
    AutoSelect,
    CreateFile { path: String },
    EditProposal { text: String },
    Apply,
    Skip,
    Stop,
    CreateNewSection { heading: String, text: String },
}

impl ManagerAction {
    pub fn name(&self) -> &'static str {
        match self {
            ManagerAction::EditSuggestion { .. } => "edit_suggestion",
            ManagerAction::Decline => "decline",
            ManagerAction::Start => "start",
            ManagerAction::SelectFile { .. } => "select_file",
            ManagerAction::AutoSelect => "auto_select",
            ManagerAction::CreateFile { .. } => "create_file",
            ManagerAction::EditProposal { .. } => "edit_proposal",
            ManagerAction::Apply => "apply",
            ManagerAction::Skip => "skip",
            ManagerAction::Stop => "stop",
            ManagerAction::CreateNewSection { .. } => "create_new_section",
        }
    }

    /// Commands that may produce a commit.
    pub fn commits(&self) -> bool {
        matches!(
            self,
            ManagerAction::Apply
                | ManagerAction::CreateFile { .. }
                | ManagerAction::CreateNewSection { .. }
        )
    }
}

/// Whether `action` is accepted in `state`.
pub fn is_legal(state: SessionState, action: &ManagerAction) -> bool {
    use ManagerAction as A;
    use SessionState as S;
    matches!(
        (state, action),
        (S::Pending, A::EditSuggestion { .. } | A::Decline | A::Start)
            | (
                S::Selecting,
                A::SelectFile { .. } | A::AutoSelect | A::CreateFile { .. }
            )
            | (
                S::Proposing(_),
                A::EditProposal { .. } | A::Apply | A::Skip | A::Stop | A::CreateNewSection { .. }
            )
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffProposal {
    pub path: String,
    pub heading_path: Vec<String>,
    /// Char span replaced in the file at the session's base revision.
    pub base_span: Span,
    pub old_text: String,
    pub proposed_text: String,
    pub diff: WordDiff,
    pub score: f64,
}

impl DiffProposal {
    fn new(
        path: &str,
        heading_path: Vec<String>,
        base_span: Span,
        old_text: String,
        proposed_text: String,
        score: f64,
    ) -> Self {
        Self {
            diff: word_diff(&old_text, &proposed_text),
            path: path.to_string(),
            heading_path,
            base_span,
            old_text,
            proposed_text,
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateSession {
    pub session_id: SessionId,
    /// Working copy of the submitted suggestion.
    pub suggestion: SuggestionDraft,
    /// The manager driving the session, once one has acted.
    pub manager: Option<UserId>,
    pub state: SessionState,
    pub target: Option<String>,
    /// Revision the proposal spans refer to.
    pub base_revision: Revision,
    pub start_revision: Revision,
    pub proposals: Vec<DiffProposal>,
    pub applied: Vec<Revision>,
}

fn session_button(session_id: &SessionId, label: &str, command: ManagerAction) -> Button {
    Button::new(
        label,
        Interaction::Session {
            session_id: session_id.clone(),
            command,
        },
    )
}

fn review_card(turn: &Turn<'_>, session: &UpdateSession) -> Payload {
    let id = &session.session_id;
    let contributor = &session.suggestion.contributor;
    Payload::ReviewCard {
        session_id: id.clone(),
        contributor: turn.config.name_of(contributor),
        contributor_avatar: turn
            .config
            .roster
            .get(contributor)
            .and_then(|e| e.avatar.clone()),
        source: scope_key(&session.suggestion.source, Some(&session.suggestion.thread)),
        text: session.suggestion.text.clone(),
        buttons: vec![
            session_button(
                id,
                "Edit",
                ManagerAction::EditSuggestion {
                    text: session.suggestion.text.clone(),
                },
            ),
            session_button(id, "Start", ManagerAction::Start),
            session_button(id, "Decline", ManagerAction::Decline),
        ],
    }
}

fn proposal_card(session: &UpdateSession, index: usize) -> Payload {
    let p = &session.proposals[index];
    let id = &session.session_id;
    Payload::Proposal {
        session_id: id.clone(),
        index,
        total: session.proposals.len(),
        path: p.path.clone(),
        heading_path: p.heading_path.clone(),
        score: p.score,
        marked: p.diff.render_marked(),
        segments: p.diff.segments.clone(),
        buttons: vec![
            session_button(
                id,
                "Edit",
                ManagerAction::EditProposal {
                    text: p.proposed_text.clone(),
                },
            ),
            session_button(id, "Apply", ManagerAction::Apply),
            session_button(id, "Skip", ManagerAction::Skip),
            session_button(id, "Stop", ManagerAction::Stop),
            session_button(
                id,
                "Create New Section",
                ManagerAction::CreateNewSection {
                    heading: DEFAULT_SECTION_HEADING.into(),
                    text: session.suggestion.text.clone(),
                },
            ),
        ],
    }
}

/// A path for a new file derived from the suggestion's first words.
pub fn suggested_file_name(turn: &Turn<'_>, text: &str) -> String {
    let head: String = text
        .split_whitespace()
        .take(5)
        .collect::<Vec<_>>()
        .join(" ");
    let stem = match slugify(&head) {
        s if s.is_empty() => "notes".to_string(),
        s => s,
    };
    let snapshot = turn.store.snapshot();
    let mut candidate = format!("{stem}.md");
    let mut n = 2;
    while snapshot.files.contains_key(&candidate) {
        candidate = format!("{stem}-{n}.md");
        n += 1;
    }
    candidate
}

/// Chunks of `path` at the store's current revision, scored against `query`
/// and ranked. Index vectors are reused when the index is current.
fn score_file(
    turn: &Turn<'_>,
    query: &Vector,
    path: &str,
) -> Result<Vec<ScoredChunk>, ProviderError> {
    let snapshot = turn.store.snapshot();
    let current = turn.index.indexed_revision() == snapshot.revision;
    let mut scored = Vec::new();
    for chunk in snapshot.chunks_of(path, turn.config.max_chars) {
        let indexed = if current {
            turn.index.entry(&chunk.chunk_id)
        } else {
            None
        };
        let score = match indexed {
            Some(e) => cosine(query, &e.vector),
            None => cosine(query, &turn.provider.embed(&chunk.body)?),
        };
        scored.push(ScoredChunk { chunk, score });
    }
    scored.sort_by(rank_order);
    Ok(scored)
}

/// Files ranked by the mean similarity of their best chunks.
pub fn rank_files(turn: &Turn<'_>, suggestion: &str) -> Result<Vec<FileChoice>, ProviderError> {
    let query = turn.provider.embed(suggestion)?;
    let top = turn.config.autoselect_top.max(1);
    let paths: Vec<String> = turn.store.snapshot().paths().map(str::to_string).collect();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let scored = score_file(turn, &query, &path)?;
        let best: Vec<f64> = scored.iter().take(top).map(|s| s.score).collect();
        let score = if best.is_empty() {
            0.0
        } else {
            best.iter().sum::<f64>() / best.len() as f64
        };
        out.push(FileChoice { path, score });
    }
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.path.cmp(&b.path))
    });
    Ok(out)
}

/// One proposal per best-matching chunk of `path` scoring at least θ/2 (at
/// most three), or a single end-of-file insertion when none qualifies.
pub fn generate_proposals(
    turn: &Turn<'_>,
    path: &str,
    suggestion: &str,
) -> Result<Vec<DiffProposal>, FlowError> {
    let snapshot = turn.store.snapshot();
    let body = snapshot
        .files
        .get(path)
        .ok_or_else(|| FlowError::UnknownFile(path.to_string()))?;
    let query = turn.provider.embed(suggestion)?;
    let scored = score_file(turn, &query, path)?;
    let mut proposals = Vec::new();
    for hit in scored
        .iter()
        .filter(|s| s.score >= turn.config.theta / 2.0)
        .take(MAX_PROPOSALS)
    {
        let trimmed = hit.chunk.body.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        let span = Span::new(
            hit.chunk.span.start,
            hit.chunk.span.start + trimmed.chars().count(),
        );
        let section = DocChunk {
            body: trimmed.to_string(),
            span,
            ..hit.chunk.clone()
        };
        let proposed = turn.provider.propose_edit(&section, suggestion)?;
        proposals.push(DiffProposal::new(
            path,
            hit.chunk.heading_path.clone(),
            span,
            section.body,
            proposed,
            hit.score,
        ));
    }
    if proposals.is_empty() {
        if suggestion.trim().is_empty() {
            return Err(ProviderError::NothingToPropose.into());
        }
        let end = body.chars().count();
        let separator = if body.is_empty() || body.ends_with("\n\n") {
            ""
        } else if body.ends_with('\n') {
            "\n"
        } else {
            "\n\n"
        };
        let insertion = format!("{separator}{}\n", suggestion.trim());
        let score = scored.first().map_or(0.0, |s| s.score);
        proposals.push(DiffProposal::new(
            path,
            Vec::new(),
            Span::new(end, end),
            String::new(),
            insertion,
            score,
        ));
    }
    Ok(proposals)
}

/// Submits a draft for review: DM a review card to every manager and post a
/// notice where the suggestion came from.
pub fn submit_suggestion(
    turn: &mut Turn<'_>,
    actor: &UserId,
    draft_id: &DraftId,
) -> Result<SessionId, FlowError> {
    let draft = turn
        .state
        .drafts
        .get_mut(draft_id)
        .ok_or_else(|| DraftError::UnknownDraft(draft_id.clone()))?;
    if draft.contributor != *actor {
        return Err(DraftError::NotContributor.into());
    }
    match draft.state {
        DraftState::Draft => {}
        DraftState::Submitted => return Err(FlowError::AlreadySubmitted(draft_id.clone())),
        DraftState::Withdrawn => return Err(DraftError::NotEditable(draft_id.clone()).into()),
    }
    draft.state = DraftState::Submitted;
    let suggestion = draft.clone();
    let session_id = turn.state.next_session_id();
    let revision = turn.store.revision();
    let session = UpdateSession {
        session_id: session_id.clone(),
        suggestion,
        manager: None,
        state: SessionState::Pending,
        target: None,
        base_revision: revision,
        start_revision: revision,
        proposals: Vec::new(),
        applied: Vec::new(),
    };
    for manager in turn.config.managers() {
        let card = review_card(turn, &session);
        turn.dm(&manager, card);
    }
    let contributor = turn.config.name_of(actor);
    turn.post(
        &session.suggestion.source,
        Some(&session.suggestion.thread),
        Payload::Notice {
            text: format!("{contributor}'s suggestion has been sent to a manager for review."),
        },
    );
    turn.state.sessions.insert(session_id.clone(), session);
    Ok(session_id)
}

/// Applies one manager command. On error the session is left unchanged.
pub fn manager_action(
    turn: &mut Turn<'_>,
    session_id: &SessionId,
    actor: &UserId,
    action: &ManagerAction,
) -> Result<SessionState, FlowError> {
    if !turn.config.roster.is_manager(actor) {
        return Err(FlowError::NotManager);
    }
    let session = turn
        .state
        .sessions
        .get(session_id)
        .ok_or_else(|| FlowError::UnknownSession(session_id.clone()))?;
    if !is_legal(session.state, action) {
        return Err(FlowError::IllegalAction {
            state: session.state,
            action: action.name(),
        });
    }
    if let Some(owner) = &session.manager {
        if owner != actor {
            return Err(FlowError::ClaimedByOther(owner.clone()));
        }
    }
    let mut session = session.clone();
    let from = session.state;
    let record = turn.record(AuditRecord::Session {
        session_id: session_id.clone(),
        actor: actor.clone(),
        command: action.name().to_string(),
        from: from.to_string(),
        to: from.to_string(),
    });
    session.manager = Some(actor.clone());
    execute(turn, &mut session, actor, action)?;
    if let AuditRecord::Session { to, .. } = &mut turn.records[record] {
        *to = session.state.to_string();
    }
    tracing::info!(%session_id, %from, to = %session.state, command = action.name(), "session transition");
    let state = session.state;
    turn.state.sessions.insert(session_id.clone(), session);
    Ok(state)
}

fn origin_notice(turn: &mut Turn<'_>, session: &UpdateSession, text: String) {
    turn.post(
        &session.suggestion.source,
        Some(&session.suggestion.thread),
        Payload::Notice { text },
    );
}

fn enter_proposing(
    turn: &mut Turn<'_>,
    session: &mut UpdateSession,
    actor: &UserId,
    path: String,
) -> Result<(), FlowError> {
    let proposals = generate_proposals(turn, &path, &session.suggestion.text)?;
    session.target = Some(path);
    session.proposals = proposals;
    session.base_revision = turn.store.revision();
    session.state = SessionState::Proposing(0);
    let card = proposal_card(session, 0);
    turn.dm(actor, card);
    Ok(())
}

fn advance(turn: &mut Turn<'_>, session: &mut UpdateSession, actor: &UserId, index: usize) {
    if index + 1 < session.proposals.len() {
        session.state = SessionState::Proposing(index + 1);
        let card = proposal_card(session, index + 1);
        turn.dm(actor, card);
    } else {
        finish(turn, session, actor);
    }
}

fn finish(turn: &mut Turn<'_>, session: &mut UpdateSession, actor: &UserId) {
    session.state = SessionState::Done;
    let target = session.target.clone();
    let text = match (&target, session.applied.as_slice()) {
        (Some(path), [_, ..]) => {
            let ids: Vec<String> = session.applied.iter().map(u64::to_string).collect();
            format!(
                "The suggested update has been added to {path} (commit {}). Thank you, {}!",
                ids.join(", "),
                turn.config.name_of(&session.suggestion.contributor)
            )
        }
        _ => "The suggestion was reviewed; no changes were needed.".to_string(),
    };
    let editor_url = target
        .filter(|_| !session.applied.is_empty())
        .map(|p| turn.config.editor_url(&p));
    turn.post(
        &session.suggestion.source,
        Some(&session.suggestion.thread),
        Payload::Ack {
            session_id: session.session_id.clone(),
            text: text.clone(),
            editor_url: editor_url.clone(),
            commits: session.applied.clone(),
        },
    );
    turn.dm(
        actor,
        Payload::Ack {
            session_id: session.session_id.clone(),
            text,
            editor_url,
            commits: session.applied.clone(),
        },
    );
}

/// Fails if a commit since `base` touched `path`; returns the revision the
/// proposal spans are valid at.
fn valid_base(turn: &Turn<'_>, base: Revision, path: &str) -> Result<Revision, FlowError> {
    let snapshot = turn.store.snapshot();
    let touched = snapshot.history[base as usize..]
        .iter()
        .any(|c| c.edits.iter().any(|e| e.path() == path));
    if touched {
        return Err(FlowError::Stale(path.to_string()));
    }
    Ok(snapshot.revision)
}

fn execute(
    turn: &mut Turn<'_>,
    session: &mut UpdateSession,
    actor: &UserId,
    action: &ManagerAction,
) -> Result<(), FlowError> {
    let message = |what: &str| {
        format!(
            "{what} from {} ({})",
            session.suggestion.draft_id, session.session_id
        )
    };
    match (session.state, action) {
        (SessionState::Pending, ManagerAction::EditSuggestion { text }) => {
            if text.trim().is_empty() {
                return Err(FlowError::EmptyText);
            }
            session.suggestion.text = text.trim().to_string();
            let card = review_card(turn, session);
            turn.dm(actor, card);
        }
        (SessionState::Pending, ManagerAction::Decline) => {
            session.state = SessionState::Declined;
            origin_notice(
                turn,
                session,
                "The suggestion was reviewed and declined.".into(),
            );
        }
        (SessionState::Pending, ManagerAction::Start) => {
            let files = rank_files(turn, &session.suggestion.text)?;
            let id = session.session_id.clone();
            let mut buttons: Vec<Button> = files
                .iter()
                .map(|f| {
                    session_button(
                        &id,
                        &f.path,
                        ManagerAction::SelectFile {
                            path: f.path.clone(),
                        },
                    )
                })
                .collect();
            if !files.is_empty() {
                buttons.push(session_button(
                    &id,
                    "Auto-select",
                    ManagerAction::AutoSelect,
                ));
            }
            let new_path = suggested_file_name(turn, &session.suggestion.text);
            buttons.push(session_button(
                &id,
                "Create New File",
                ManagerAction::CreateFile { path: new_path },
            ));
            session.state = SessionState::Selecting;
            turn.dm(
                actor,
                Payload::FilePicker {
                    session_id: id,
                    files,
                    buttons,
                },
            );
        }
        (SessionState::Selecting, ManagerAction::SelectFile { path }) => {
            if !turn.store.snapshot().files.contains_key(path) {
                return Err(FlowError::UnknownFile(path.clone()));
            }
            enter_proposing(turn, session, actor, path.clone())?;
        }
        (SessionState::Selecting, ManagerAction::AutoSelect) => {
            let best = rank_files(turn, &session.suggestion.text)?
                .into_iter()
                .next()
                .ok_or(FlowError::NoFiles)?;
            enter_proposing(turn, session, actor, best.path)?;
        }
        (SessionState::Selecting, ManagerAction::CreateFile { path }) => {
            if !is_markdown_path(path) {
                return Err(StoreError::InvalidPath(path.clone()).into());
            }
            let changeset = ChangeSet {
                base_revision: turn.store.revision(),
                edits: vec![Edit::CreateFile {
                    path: path.clone(),
                    body: format!("{}\n", session.suggestion.text.trim_end()),
                }],
            };
            let record = turn.commit(
                &changeset,
                actor,
                &message("New file"),
                CommitMethod::Assisted,
                Some(&session.session_id),
            )?;
            session.applied.push(record.commit_id);
            session.target = Some(path.clone());
            finish(turn, session, actor);
        }
        (SessionState::Proposing(i), ManagerAction::EditProposal { text }) => {
            if text.trim().is_empty() {
                return Err(FlowError::EmptyText);
            }
            let p = &mut session.proposals[i];
            p.proposed_text = text.clone();
            p.diff = word_diff(&p.old_text, &p.proposed_text);
            let card = proposal_card(session, i);
            turn.dm(actor, card);
        }
        (SessionState::Proposing(i), ManagerAction::Apply) => {
            let p = session.proposals[i].clone();
            let base = valid_base(turn, session.base_revision, &p.path)?;
            let changeset = ChangeSet {
                base_revision: base,
                edits: vec![Edit::ReplaceSpan {
                    path: p.path.clone(),
                    span: p.base_span,
                    new_text: p.proposed_text.clone(),
                }],
            };
            let record = turn.commit(
                &changeset,
                actor,
                &message("Update"),
                CommitMethod::Assisted,
                Some(&session.session_id),
            )?;
            session.applied.push(record.commit_id);
            session.base_revision = record.commit_id;
            // later proposals sit in disjoint spans; shift those after this one
            let delta = p.proposed_text.chars().count() as isize - p.base_span.len() as isize;
            for later in session.proposals.iter_mut().skip(i + 1) {
                if later.path == p.path && later.base_span.start >= p.base_span.end {
                    later.base_span = Span::new(
                        (later.base_span.start as isize + delta) as usize,
                        (later.base_span.end as isize + delta) as usize,
                    );
                }
            }
            advance(turn, session, actor, i);
        }
        (SessionState::Proposing(i), ManagerAction::Skip) => advance(turn, session, actor, i),
        (SessionState::Proposing(_), ManagerAction::Stop) => {
            session.state = SessionState::Stopped;
            origin_notice(
                turn,
                session,
                "The update was stopped by the reviewer.".into(),
            );
        }
        (SessionState::Proposing(_), ManagerAction::CreateNewSection { heading, text }) => {
            if heading.trim().is_empty() || text.trim().is_empty() {
                return Err(FlowError::EmptyText);
            }
            let path = session.target.clone().expect("proposing implies a target");
            let changeset = ChangeSet {
                base_revision: turn.store.revision(),
                edits: vec![Edit::AppendSection {
                    path,
                    heading_title: heading.clone(),
                    new_text: text.clone(),
                }],
            };
            let record = turn.commit(
                &changeset,
                actor,
                &message("New section"),
                CommitMethod::Assisted,
                Some(&session.session_id),
            )?;
            session.applied.push(record.commit_id);
            finish(turn, session, actor);
        }
        (state, action) => {
            return Err(FlowError::IllegalAction {
                state,
                action: action.name(),
            })
        }
    }
    Ok(())
}
