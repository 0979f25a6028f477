//! In-process chat platform: routes actions to the users who would see them.
//! Used by the CLI's socket server, transcript replay and tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Action, ActionKind, ChatEvent, EventKind, Gateway, GatewayError, WorkspaceConfig};
use crate::ids::{ConversationId, UserId};
use crate::workspace::WorkspaceState;

fn members_of(
    config: &WorkspaceConfig,
    state: &WorkspaceState,
    conversation: &ConversationId,
) -> Vec<UserId> {
    if conversation.is_dm() {
        return vec![UserId::new(&conversation.as_str()[3..])];
    }
    match state.groups.get(conversation) {
        Some(members) => members.clone(),
        None => config
            .roster
            .entries
            .iter()
            .filter(|(_, e)| e.active)
            .map(|(id, _)| id.clone())
            .collect(),
    }
}

/// Users who see `action`: the target user for ephemeral, modal and DM
/// actions; the members of a group conversation; every active roster member
/// for a channel. The bot never receives its own actions.
pub fn recipients(
    config: &WorkspaceConfig,
    state: &WorkspaceState,
    action: &Action,
) -> Vec<UserId> {
    let target = &action.target;
    let mut out: Vec<UserId> = match (action.kind, &target.user, &target.conversation) {
        (ActionKind::CreateGroupConversation, _, _) => target.members.clone(),
        (ActionKind::PostEphemeral | ActionKind::OpenModal | ActionKind::DmUser, Some(user), _) => {
            vec![user.clone()]
        }
        (_, _, Some(conv)) => members_of(config, state, conv),
        (_, Some(user), None) => vec![user.clone()],
        (_, None, None) => Vec::new(),
    };
    out.retain(|u| *u != config.bot.id);
    out.sort();
    out.dedup();
    out
}

/// Users who see a human message event: the members of its conversation.
/// Interactions are private to the platform and reach nobody.
pub fn event_audience(
    config: &WorkspaceConfig,
    state: &WorkspaceState,
    event: &ChatEvent,
) -> Vec<UserId> {
    match event.kind {
        EventKind::DmMessage | EventKind::ChannelMessage | EventKind::Mention => {
            let mut out = members_of(config, state, &event.conversation);
            out.retain(|u| *u != config.bot.id);
            out
        }
        EventKind::ButtonClick | EventKind::ModalSubmit | EventKind::Unknown => Vec::new(),
    }
}

/// One item of a user's view: a human message or a bot action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TimelineEntry {
    Event { event: ChatEvent },
    Action { action: Action },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub recipient: UserId,
    pub entry: TimelineEntry,
}

impl Delivery {
    pub fn action(&self) -> Option<&Action> {
        match &self.entry {
            TimelineEntry::Action { action } => Some(action),
            TimelineEntry::Event { .. } => None,
        }
    }
}

/// A gateway plus the timeline each user would see.
#[derive(Debug)]
pub struct SimulatedAdapter {
    gateway: Gateway,
    timelines: BTreeMap<UserId, Vec<TimelineEntry>>,
}

impl SimulatedAdapter {
    pub fn new(gateway: Gateway) -> Self {
        Self {
            gateway,
            timelines: BTreeMap::new(),
        }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn gateway_mut(&mut self) -> &mut Gateway {
        &mut self.gateway
    }

    pub fn into_gateway(self) -> Gateway {
        self.gateway
    }

    /// Ingests `event`, then delivers the event itself to the members of
    /// its conversation and the resulting actions to their recipients. The
    /// actions are in the audit log before they are delivered.
    pub fn send(&mut self, event: &ChatEvent) -> Result<Vec<Delivery>, GatewayError> {
        let fresh = !self.gateway.state().seen_events.contains(&event.event_id);
        let audience = event_audience(self.gateway.config(), self.gateway.state(), event);
        let actions = self.gateway.ingest(event)?;
        let mut deliveries = Vec::new();
        if fresh {
            for recipient in audience {
                deliveries.push(Delivery {
                    recipient,
                    entry: TimelineEntry::Event {
                        event: event.clone(),
                    },
                });
            }
        }
        for action in actions {
            for recipient in recipients(self.gateway.config(), self.gateway.state(), &action) {
                deliveries.push(Delivery {
                    recipient,
                    entry: TimelineEntry::Action {
                        action: action.clone(),
                    },
                });
            }
        }
        for d in &deliveries {
            self.timelines
                .entry(d.recipient.clone())
                .or_default()
                .push(d.entry.clone());
        }
        Ok(deliveries)
    }

    /// Everything `user` has seen so far, in order.
    pub fn timeline(&self, user: &UserId) -> &[TimelineEntry] {
        self.timelines.get(user).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Actions delivered to `user` so far, in order.
    pub fn inbox(&self, user: &UserId) -> Vec<&Action> {
        self.timeline(user)
            .iter()
            .filter_map(|e| match e {
                TimelineEntry::Action { action } => Some(action),
                TimelineEntry::Event { .. } => None,
            })
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error("transcript {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("transcript line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

/// Parses a transcript: one [`ChatEvent`] JSON object per line; blank lines
/// are skipped.
pub fn parse_transcript(text: &str) -> Result<Vec<ChatEvent>, TranscriptError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| TranscriptError::Parse {
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn read_transcript(path: &std::path::Path) -> Result<Vec<ChatEvent>, TranscriptError> {
    let text = std::fs::read_to_string(path).map_err(|source| TranscriptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_transcript(&text)
}
