use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ids::{ConversationId, DraftId, ExchangeId, SessionId, UserId};
use crate::share::{ShareMode, ShareRequest};
use crate::update_flow::ManagerAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    DmMessage,
    ChannelMessage,
    Mention,
    ButtonClick,
    ModalSubmit,
    #[serde(other)]
    Unknown,
}

/// Platform-neutral inbound event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatEvent {
    pub event_id: String,
    pub kind: EventKind,
    pub conversation: ConversationId,
    /// Id of the message this event replies under, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread: Option<String>,
    pub author: UserId,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Interaction>,
    pub timestamp: DateTime<Utc>,
}

impl ChatEvent {
    pub fn message(
        event_id: impl Into<String>,
        kind: EventKind,
        conversation: ConversationId,
        author: UserId,
        text: impl Into<String>,
        timestamp: DateTime<Utc>,
    ) -> Self {
        Self {
            event_id: event_id.into(),
            kind,
            conversation,
            thread: None,
            author,
            text: text.into(),
            payload: None,
            timestamp,
        }
    }

    pub fn interaction(
        event_id: impl Into<String>,
        kind: EventKind,
        conversation: ConversationId,
        author: UserId,
        payload: Interaction,
        timestamp: DateTime<Utc>,
    ) -> Self {
        Self {
            event_id: event_id.into(),
            kind,
            conversation,
            thread: None,
            author,
            text: String::new(),
            payload: Some(payload),
            timestamp,
        }
    }

    pub fn in_thread(mut self, thread: impl Into<String>) -> Self {
        self.thread = Some(thread.into());
        self
    }
}

/// Payload of a button click or modal submission. Buttons carry the exact
/// interaction a click should send back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Interaction {
    OpenShare {
        exchange_id: ExchangeId,
        mode: ShareMode,
    },
    SubmitShare(ShareRequest),
    /// Opens the draft editor for the contributor.
    OpenDraftEditor {
        draft_id: DraftId,
    },
    EditDraft {
        draft_id: DraftId,
        text: String,
    },
    SubmitDraft {
        draft_id: DraftId,
    },
    WithdrawDraft {
        draft_id: DraftId,
    },
    /// Manager-only: drives an update session.
    Session {
        session_id: SessionId,
        command: ManagerAction,
    },
}

impl Interaction {
    pub fn is_manager_only(&self) -> bool {
        matches!(self, Interaction::Session { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Interaction::OpenShare { .. } => "open_share",
            Interaction::SubmitShare(_) => "submit_share",
            Interaction::OpenDraftEditor { .. } => "open_draft_editor",
            Interaction::EditDraft { .. } => "edit_draft",
            Interaction::SubmitDraft { .. } => "submit_draft",
            Interaction::WithdrawDraft { .. } => "withdraw_draft",
            Interaction::Session { .. } => "session",
        }
    }
}
