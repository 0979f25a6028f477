//! Knowledge extraction: turn the conversation around a bot mention into an
//! editable suggestion draft.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Button, ChatEvent, ErrorCode, Interaction, Payload, WorkspaceConfig};
use crate::ids::{ConversationId, DraftId, UserId};
use crate::provider::{AnchorPayload, WindowMessage, WindowPayload, UPDATE_MARKERS};
use crate::share::SharedAnchor;
use crate::workspace::{scope_key, HistoryMessage, Turn, WorkspaceState};

/// Messages preceding the mention that are considered.
pub const WINDOW_SIZE: usize = 10;
pub const NOTHING_FOUND: &str = "nothing documentable found";
pub const USAGE_HELP: &str = "Mention me with \"document this\" after a discussion and I will draft a documentation update from the last few messages.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DraftError {
    #[error("unknown draft {0}")]
    UnknownDraft(DraftId),
    #[error("only the contributor can change this draft")]
    NotContributor,
    #[error("draft {0} was already submitted or withdrawn")]
    NotEditable(DraftId),
    #[error("a draft cannot be empty")]
    EmptyText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DraftState {
    Draft,
    Submitted,
    Withdrawn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionDraft {
    pub draft_id: DraftId,
    pub text: String,
    /// The user who mentioned the bot.
    pub contributor: UserId,
    pub source: ConversationId,
    /// Thread the draft card was posted in.
    pub thread: String,
    pub state: DraftState,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationWindow {
    pub anchor: Option<SharedAnchor>,
    /// Chronological, at most [`WINDOW_SIZE`].
    pub messages: Vec<HistoryMessage>,
    pub mention: HistoryMessage,
}

impl ConversationWindow {
    pub fn to_payload(&self, config: &WorkspaceConfig) -> WindowPayload {
        let message = |m: &HistoryMessage| WindowMessage {
            author: config.name_of(&m.author),
            from_bot: m.author == config.bot.id,
            text: m.text.clone(),
        };
        WindowPayload {
            anchor: self.anchor.as_ref().map(|a| AnchorPayload {
                question: a.question.clone(),
                answer: a.answer.clone(),
            }),
            messages: self.messages.iter().map(message).collect(),
            mention: message(&self.mention),
        }
    }
}

pub fn history_message(event: &ChatEvent) -> HistoryMessage {
    HistoryMessage {
        event_id: event.event_id.clone(),
        author: event.author.clone(),
        text: event.text.clone(),
        thread: event.thread.clone(),
        timestamp: event.timestamp,
    }
}

/// The shared exchange for the mention's thread, else its conversation.
pub fn anchor_for(
    state: &WorkspaceState,
    conversation: &ConversationId,
    thread: Option<&str>,
) -> Option<SharedAnchor> {
    thread
        .and_then(|t| state.anchors.get(&scope_key(conversation, Some(t))))
        .or_else(|| state.anchors.get(conversation.as_str()))
        .cloned()
}

/// Up to ten messages of the conversation preceding `mention`, plus the
/// shared exchange if any. `mention` must not yet be in the history.
pub fn collect_window(state: &WorkspaceState, mention: &ChatEvent) -> ConversationWindow {
    let messages = state
        .history
        .get(&mention.conversation)
        .map(|h| h[h.len().saturating_sub(WINDOW_SIZE)..].to_vec())
        .unwrap_or_default();
    ConversationWindow {
        anchor: anchor_for(state, &mention.conversation, mention.thread.as_deref()),
        messages,
        mention: history_message(mention),
    }
}

/// Text of a mention beyond mention tokens, update markers and punctuation.
fn substantive(text: &str) -> String {
    let mut lower: String = text
        .split_whitespace()
        .filter(|w| !(w.starts_with("<@") && w.ends_with('>')))
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    for marker in UPDATE_MARKERS {
        lower = lower.replace(marker, " ");
    }
    lower.chars().filter(|c| c.is_alphanumeric()).collect()
}

fn draft_buttons(draft_id: &DraftId) -> Vec<Button> {
    vec![
        Button::new(
            "Edit",
            Interaction::OpenDraftEditor {
                draft_id: draft_id.clone(),
            },
        ),
        Button::new(
            "Suggest Update",
            Interaction::SubmitDraft {
                draft_id: draft_id.clone(),
            },
        ),
    ]
}

pub fn draft_card(draft: &SuggestionDraft) -> Payload {
    Payload::DraftCard {
        draft_id: draft.draft_id.clone(),
        state: draft.state,
        text: draft.text.clone(),
        buttons: if draft.state == DraftState::Draft {
            draft_buttons(&draft.draft_id)
        } else {
            Vec::new()
        },
    }
}

/// Handles an update-request mention: collects the window, asks the
/// provider for documentable content and posts the draft card in-thread.
pub fn draft_suggestion(turn: &mut Turn<'_>, event: &ChatEvent) -> Option<DraftId> {
    let window = collect_window(turn.state, event);
    let thread = event
        .thread
        .clone()
        .unwrap_or_else(|| event.event_id.clone());
    if window.messages.is_empty() && window.anchor.is_none() && substantive(&event.text).is_empty()
    {
        turn.post(
            &event.conversation,
            Some(&thread),
            Payload::Text {
                text: USAGE_HELP.into(),
            },
        );
        return None;
    }
    let payload = window.to_payload(turn.config);
    let text = match turn.provider.extract_knowledge(&payload) {
        Ok(t) => t.trim().to_string(),
        Err(err) => {
            tracing::warn!(%err, event = %event.event_id, "extraction failed");
            turn.note(format!("extraction for {} failed: {err}", event.event_id));
            turn.post(
                &event.conversation,
                Some(&thread),
                Payload::Error {
                    code: ErrorCode::Provider,
                    message:
                        "Sorry, I could not draft a suggestion right now. Please try again later."
                            .into(),
                },
            );
            return None;
        }
    };
    if text.is_empty() {
        turn.post(
            &event.conversation,
            Some(&thread),
            Payload::Text {
                text: NOTHING_FOUND.into(),
            },
        );
        return None;
    }
    let draft = SuggestionDraft {
        draft_id: turn.state.next_draft_id(),
        text,
        contributor: event.author.clone(),
        source: event.conversation.clone(),
        thread: thread.clone(),
        state: DraftState::Draft,
        created_at: event.timestamp,
    };
    turn.post(&event.conversation, Some(&thread), draft_card(&draft));
    let id = draft.draft_id.clone();
    turn.state.drafts.insert(id.clone(), draft);
    Some(id)
}

fn editable<'s>(
    state: &'s mut WorkspaceState,
    actor: &UserId,
    draft_id: &DraftId,
) -> Result<&'s mut SuggestionDraft, DraftError> {
    let draft = state
        .drafts
        .get_mut(draft_id)
        .ok_or_else(|| DraftError::UnknownDraft(draft_id.clone()))?;
    if draft.contributor != *actor {
        return Err(DraftError::NotContributor);
    }
    if draft.state != DraftState::Draft {
        return Err(DraftError::NotEditable(draft_id.clone()));
    }
    Ok(draft)
}

pub fn open_editor(
    turn: &mut Turn<'_>,
    event: &ChatEvent,
    draft_id: &DraftId,
) -> Result<(), DraftError> {
    let draft = editable(turn.state, &event.author, draft_id)?;
    let payload = Payload::Editor {
        title: "Edit suggestion".into(),
        text: draft.text.clone(),
        submit: Interaction::EditDraft {
            draft_id: draft_id.clone(),
            text: String::new(),
        },
    };
    turn.emit(
        crate::gateway::ActionKind::OpenModal,
        crate::gateway::Target::user(event.conversation.clone(), event.author.clone()),
        payload,
    );
    Ok(())
}

/// Replaces the draft text and reposts the card in its thread.
pub fn edit_draft(
    turn: &mut Turn<'_>,
    actor: &UserId,
    draft_id: &DraftId,
    text: &str,
) -> Result<(), DraftError> {
    if text.trim().is_empty() {
        return Err(DraftError::EmptyText);
    }
    let draft = editable(turn.state, actor, draft_id)?;
    draft.text = text.trim().to_string();
    let draft = draft.clone();
    turn.post(&draft.source, Some(&draft.thread), draft_card(&draft));
    Ok(())
}

pub fn withdraw_draft(
    turn: &mut Turn<'_>,
    actor: &UserId,
    draft_id: &DraftId,
) -> Result<(), DraftError> {
    let draft = editable(turn.state, actor, draft_id)?;
    draft.state = DraftState::Withdrawn;
    let draft = draft.clone();
    turn.post(&draft.source, Some(&draft.thread), draft_card(&draft));
    Ok(())
}
