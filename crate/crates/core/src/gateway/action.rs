use serde::{Deserialize, Serialize};

use crate::doc_store::DiffSegment;
use crate::extraction::DraftState;
use crate::gateway::Interaction;
use crate::ids::{ConversationId, DraftId, ExchangeId, SessionId, UserId};
use crate::qa::Reference;
use crate::share::{ShareModal, SharedPost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    PostMessage,
    PostThreadReply,
    /// Visible only to `target.user`.
    PostEphemeral,
    OpenModal,
    DmUser,
    CreateGroupConversation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conversation: Option<ConversationId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<UserId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<UserId>,
}

impl Target {
    pub fn conversation(conversation: ConversationId) -> Self {
        Self {
            conversation: Some(conversation),
            ..Self::default()
        }
    }

    pub fn thread(conversation: ConversationId, thread: impl Into<String>) -> Self {
        Self {
            conversation: Some(conversation),
            thread: Some(thread.into()),
            ..Self::default()
        }
    }

    pub fn user(conversation: ConversationId, user: UserId) -> Self {
        Self {
            conversation: Some(conversation),
            user: Some(user),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Button {
    pub label: String,
    pub interaction: Interaction,
}

impl Button {
    pub fn new(label: impl Into<String>, interaction: Interaction) -> Self {
        Self {
            label: label.into(),
            interaction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerOutcome {
    Answered,
    Abstained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Malformed or unknown event.
    Protocol,
    /// Actor lacks the role or ownership the interaction needs.
    Unauthorized,
    /// Interaction not legal in the current state.
    InvalidState,
    NotFound,
    Duplicate,
    Provider,
    Store,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileChoice {
    pub path: String,
    /// Mean of the file's best chunk similarities to the suggestion.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Text {
        text: String,
    },
    Answer {
        exchange_id: ExchangeId,
        outcome: AnswerOutcome,
        text: String,
        anchors: Vec<String>,
    },
    Evidence {
        exchange_id: ExchangeId,
        title: String,
        references: Vec<Reference>,
    },
    ShareBanner {
        exchange_id: ExchangeId,
        text: String,
        buttons: Vec<Button>,
    },
    ShareModal(ShareModal),
    SharedPost {
        post: SharedPost,
        rendered: String,
    },
    Relay {
        conversation: ConversationId,
        from: String,
        text: String,
    },
    DraftCard {
        draft_id: DraftId,
        state: DraftState,
        text: String,
        buttons: Vec<Button>,
    },
    /// Editable text field whose submission sends `submit` with the text.
    Editor {
        title: String,
        text: String,
        submit: Interaction,
    },
    ReviewCard {
        session_id: SessionId,
        contributor: String,
        contributor_avatar: Option<String>,
        source: String,
        text: String,
        buttons: Vec<Button>,
    },
    FilePicker {
        session_id: SessionId,
        files: Vec<FileChoice>,
        buttons: Vec<Button>,
    },
    Proposal {
        session_id: SessionId,
        index: usize,
        total: usize,
        path: String,
        heading_path: Vec<String>,
        score: f64,
        marked: String,
        segments: Vec<DiffSegment>,
        buttons: Vec<Button>,
    },
    Notice {
        text: String,
    },
    Ack {
        session_id: SessionId,
        text: String,
        editor_url: Option<String>,
        commits: Vec<u64>,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl Payload {
    /// Human-readable text of the payload, if it has a primary text.
    pub fn text(&self) -> Option<&str> {
        match self {
            Payload::Text { text }
            | Payload::Answer { text, .. }
            | Payload::ShareBanner { text, .. }
            | Payload::Relay { text, .. }
            | Payload::DraftCard { text, .. }
            | Payload::Editor { text, .. }
            | Payload::ReviewCard { text, .. }
            | Payload::Notice { text }
            | Payload::Ack { text, .. } => Some(text),
            Payload::SharedPost { rendered, .. } => Some(rendered),
            Payload::Proposal { marked, .. } => Some(marked),
            Payload::Error { message, .. } => Some(message),
            Payload::Evidence { .. } | Payload::ShareModal(_) | Payload::FilePicker { .. } => None,
        }
    }
}

/// Outbound effect crossing the adapter boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub action_id: String,
    pub kind: ActionKind,
    pub target: Target,
    pub payload: Payload,
}
