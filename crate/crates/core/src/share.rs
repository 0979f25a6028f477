//! Sharing Q&A exchanges to the Q&A channel or privately, with anonymous
//! rendering and follow-up relay to a hidden questioner.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::audit::AuditRecord;
use crate::gateway::{ActionKind, ChatEvent, Payload, Target, WorkspaceConfig};
use crate::ids::{ConversationId, ExchangeId, UserId};
use crate::privacy::scrub_person;
use crate::qa::QAExchange;
use crate::workspace::{scope_key, Turn};

pub const ANONYMOUS_AUTHOR: &str = "A team member";
const ANONYMOUS_INLINE: &str = "a team member";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShareError {
    #[error("unknown exchange {0}")]
    UnknownExchange(ExchangeId),
    #[error("only the person who asked can share this exchange")]
    NotQuestioner,
    #[error("no Q&A channel is configured")]
    NoQaChannel,
    #[error("choose at least one recipient")]
    NoRecipients,
    #[error("{0} is not an active workspace member")]
    UnknownRecipient(UserId),
    #[error("this exchange was already shared there")]
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareMode {
    ToChannel,
    ToPrivate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareRequest {
    pub exchange_id: ExchangeId,
    pub mode: ShareMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    #[serde(default)]
    pub anonymous: bool,
    /// Private mode only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recipients: Vec<UserId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedPost {
    pub author: String,
    /// Profile image reference; `None` renders a generic avatar.
    pub avatar: Option<String>,
    pub question: String,
    pub answer: String,
    pub comment: Option<String>,
    pub exchange_id: ExchangeId,
    pub conversation: Option<ConversationId>,
}

impl SharedPost {
    /// The post as recipients see it; the modal preview uses the same text.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{} asked: {}\n\n{}",
            self.author, self.question, self.answer
        );
        if let Some(comment) = self.comment.as_deref().filter(|c| !c.trim().is_empty()) {
            out.push_str("\n\nComment: ");
            out.push_str(comment.trim());
        }
        out
    }
}

/// Share dialog model sent to the questioner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareModal {
    pub exchange_id: ExchangeId,
    pub mode: ShareMode,
    pub title: String,
    pub comment: String,
    pub anonymous: bool,
    /// Pre-selected recipients (private mode): the managers.
    pub recipients: Vec<UserId>,
    /// Everyone who may be picked.
    pub candidates: Vec<UserId>,
    /// Rendering with the current (default) settings.
    pub preview: String,
    /// Rendering with anonymity checked.
    pub preview_anonymous: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayRoute {
    pub questioner: UserId,
    pub exchange_id: ExchangeId,
}

/// Exchange text as it was shared, used as extraction context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedAnchor {
    pub exchange_id: ExchangeId,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareRecord {
    pub exchange_id: ExchangeId,
    pub mode: ShareMode,
    /// Channel id or sorted recipient list.
    pub target: String,
    pub conversation: ConversationId,
    pub post_id: String,
    pub anonymous: bool,
}

/// Renders `exchange` for sharing. Anonymous posts carry no trace of the
/// questioner's name or id.
pub fn build_post(
    config: &WorkspaceConfig,
    exchange: &QAExchange,
    anonymous: bool,
    comment: Option<&str>,
    conversation: Option<ConversationId>,
) -> SharedPost {
    let comment = comment
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(str::to_string);
    if anonymous {
        let name = config.name_of(&exchange.questioner);
        let scrub = |t: &str| scrub_person(t, &exchange.questioner, &name, ANONYMOUS_INLINE);
        SharedPost {
            author: ANONYMOUS_AUTHOR.to_string(),
            avatar: None,
            question: scrub(&exchange.question),
            answer: scrub(exchange.outcome.text()),
            comment: comment.map(|c| scrub(&c)),
            exchange_id: exchange.exchange_id.clone(),
            conversation,
        }
    } else {
        SharedPost {
            author: config.name_of(&exchange.questioner),
            avatar: config
                .roster
                .get(&exchange.questioner)
                .and_then(|e| e.avatar.clone()),
            question: exchange.question.clone(),
            answer: exchange.outcome.text().to_string(),
            comment,
            exchange_id: exchange.exchange_id.clone(),
            conversation,
        }
    }
}

fn owned_exchange<'s>(
    turn: &'s Turn<'_>,
    exchange_id: &ExchangeId,
    requester: &UserId,
) -> Result<&'s QAExchange, ShareError> {
    let exchange = turn
        .state
        .exchanges
        .get(exchange_id)
        .ok_or_else(|| ShareError::UnknownExchange(exchange_id.clone()))?;
    if exchange.questioner != *requester {
        return Err(ShareError::NotQuestioner);
    }
    Ok(exchange)
}

/// Managers other than the questioner.
pub fn default_recipients(config: &WorkspaceConfig, questioner: &UserId) -> Vec<UserId> {
    config
        .managers()
        .into_iter()
        .filter(|m| m != questioner)
        .collect()
}

pub fn share_modal(
    turn: &Turn<'_>,
    exchange_id: &ExchangeId,
    mode: ShareMode,
    requester: &UserId,
) -> Result<ShareModal, ShareError> {
    let exchange = owned_exchange(turn, exchange_id, requester)?;
    if mode == ShareMode::ToChannel && turn.config.qa_channel.is_none() {
        return Err(ShareError::NoQaChannel);
    }
    let config = turn.config;
    let (title, recipients, candidates) = match mode {
        ShareMode::ToChannel => ("Share with Q&A".to_string(), Vec::new(), Vec::new()),
        ShareMode::ToPrivate => (
            "Ask in Private".to_string(),
            default_recipients(config, requester),
            config
                .roster
                .entries
                .iter()
                .filter(|(id, e)| e.active && *id != requester)
                .map(|(id, _)| id.clone())
                .collect(),
        ),
    };
    Ok(ShareModal {
        exchange_id: exchange_id.clone(),
        mode,
        title,
        comment: String::new(),
        anonymous: false,
        recipients,
        candidates,
        preview: build_post(config, exchange, false, None, None).render(),
        preview_anonymous: build_post(config, exchange, true, None, None).render(),
    })
}

/// Opens the share dialog for the questioner.
pub fn open_share_modal(
    turn: &mut Turn<'_>,
    event: &ChatEvent,
    exchange_id: &ExchangeId,
    mode: ShareMode,
) -> Result<(), ShareError> {
    let modal = share_modal(turn, exchange_id, mode, &event.author)?;
    turn.emit(
        ActionKind::OpenModal,
        Target::user(event.conversation.clone(), event.author.clone()),
        Payload::ShareModal(modal),
    );
    Ok(())
}

pub fn post_share(
    turn: &mut Turn<'_>,
    event: &ChatEvent,
    request: &ShareRequest,
) -> Result<SharedPost, ShareError> {
    let exchange = owned_exchange(turn, &request.exchange_id, &event.author)?.clone();
    let questioner = exchange.questioner.clone();
    let config = turn.config;
    let bot = config.bot.id.clone();

    let (target_key, recipients) = match request.mode {
        ShareMode::ToChannel => {
            let channel = config.qa_channel.clone().ok_or(ShareError::NoQaChannel)?;
            (channel.to_string(), Vec::new())
        }
        ShareMode::ToPrivate => {
            let mut recipients: Vec<UserId> = request
                .recipients
                .iter()
                .filter(|r| **r != questioner)
                .cloned()
                .collect();
            recipients.sort();
            recipients.dedup();
            if let Some(unknown) = recipients
                .iter()
                .find(|r| !config.roster.get(r).is_some_and(|e| e.active))
            {
                return Err(ShareError::UnknownRecipient(unknown.clone()));
            }
            if recipients.is_empty() {
                return Err(ShareError::NoRecipients);
            }
            let key = recipients
                .iter()
                .map(UserId::as_str)
                .collect::<Vec<_>>()
                .join(",");
            (key, recipients)
        }
    };
    if turn.state.shares.iter().any(|s| {
        s.exchange_id == request.exchange_id && s.mode == request.mode && s.target == target_key
    }) {
        return Err(ShareError::Duplicate);
    }

    let (conversation, post, post_id, scope) = match request.mode {
        ShareMode::ToChannel => {
            let channel = config.qa_channel.clone().expect("checked above");
            let post = build_post(
                config,
                &exchange,
                request.anonymous,
                request.comment.as_deref(),
                Some(channel.clone()),
            );
            let rendered = post.render();
            let post_id = turn.post(
                &channel,
                None,
                Payload::SharedPost {
                    post: post.clone(),
                    rendered,
                },
            );
            let scope = scope_key(&channel, Some(&post_id));
            (channel, post, post_id, scope)
        }
        ShareMode::ToPrivate => {
            let group = turn.state.next_group_id();
            let mut members = recipients.clone();
            members.push(bot.clone());
            if !request.anonymous {
                members.push(questioner.clone());
            }
            members.sort();
            let post = build_post(
                config,
                &exchange,
                request.anonymous,
                request.comment.as_deref(),
                Some(group.clone()),
            );
            turn.emit(
                ActionKind::CreateGroupConversation,
                Target {
                    conversation: Some(group.clone()),
                    members: members.clone(),
                    ..Target::default()
                },
                Payload::Notice {
                    text: format!("{} shared a question with you.", post.author),
                },
            );
            turn.state.groups.insert(group.clone(), members);
            let rendered = post.render();
            let post_id = turn.post(
                &group,
                None,
                Payload::SharedPost {
                    post: post.clone(),
                    rendered,
                },
            );
            let scope = group.to_string();
            (group, post, post_id, scope)
        }
    };

    turn.state.anchors.insert(
        scope.clone(),
        SharedAnchor {
            exchange_id: exchange.exchange_id.clone(),
            question: post.question.clone(),
            answer: post.answer.clone(),
        },
    );
    if request.anonymous {
        turn.state.routes.insert(
            scope,
            RelayRoute {
                questioner: questioner.clone(),
                exchange_id: exchange.exchange_id.clone(),
            },
        );
    }
    turn.state.shares.push(ShareRecord {
        exchange_id: exchange.exchange_id.clone(),
        mode: request.mode,
        target: target_key,
        conversation: conversation.clone(),
        post_id,
        anonymous: request.anonymous,
    });
    turn.record(AuditRecord::Share {
        exchange_id: exchange.exchange_id.clone(),
        mode: request.mode,
        anonymous: request.anonymous,
        conversation: conversation.clone(),
    });
    let where_ = match request.mode {
        ShareMode::ToChannel => format!("Shared in {conversation}."),
        ShareMode::ToPrivate => "Shared privately.".to_string(),
    };
    turn.ephemeral(
        &event.conversation,
        &event.author,
        Payload::Notice { text: where_ },
    );
    Ok(post)
}

/// Relay route covering a message in `conversation` (and `thread`).
pub fn route_for<'s>(
    turn: &'s Turn<'_>,
    conversation: &ConversationId,
    thread: Option<&str>,
) -> Option<&'s RelayRoute> {
    thread
        .and_then(|t| turn.state.routes.get(&scope_key(conversation, Some(t))))
        .or_else(|| turn.state.routes.get(conversation.as_str()))
}

/// Forwards a reply in an anonymous conversation to the hidden questioner.
/// Returns whether a relay DM was sent.
pub fn relay_followup(turn: &mut Turn<'_>, event: &ChatEvent) -> bool {
    let Some(route) = route_for(turn, &event.conversation, event.thread.as_deref()).cloned() else {
        if turn.state.groups.contains_key(&event.conversation) {
            turn.note(format!(
                "no relay route for {}; reply {} not forwarded",
                event.conversation, event.event_id
            ));
        }
        return false;
    };
    if event.author == route.questioner || event.author == turn.config.bot.id {
        return false;
    }
    let from = turn.config.name_of(&event.author);
    turn.dm(
        &route.questioner,
        Payload::Relay {
            conversation: event.conversation.clone(),
            from,
            text: event.text.clone(),
        },
    );
    true
}
