//! JSON messages exchanged with socket clients (one message per frame).

use serde::{Deserialize, Serialize};

use super::adapter::{SimulatedAdapter, TimelineEntry};
use super::{Action, ChatEvent, ErrorCode};
use crate::ids::{ConversationId, UserId};
use crate::privacy::Role;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub id: UserId,
    pub name: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avatar: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProtocolMessage {
    /// Client → server: an inbound platform event.
    Event {
        event: ChatEvent,
    },
    /// Client → server: request the connected user's workspace view.
    SnapshotRequest {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        user: Option<UserId>,
    },
    /// Server → client.
    Snapshot {
        user: UserId,
        bot: Member,
        channels: Vec<ConversationId>,
        members: Vec<Member>,
        messages: Vec<TimelineEntry>,
        repo_files: Vec<String>,
        revision: u64,
    },
    /// Server → client: an action delivered to this client's user.
    Action {
        action: Action,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ProtocolMessage {
    /// The workspace as `user` sees it: configured channels plus the group
    /// conversations they belong to, and their timeline so far.
    pub fn snapshot(adapter: &SimulatedAdapter, user: &UserId) -> Self {
        let gateway = adapter.gateway();
        let config = gateway.config();
        let mut channels = config.all_channels();
        channels.extend(
            gateway
                .state()
                .groups
                .iter()
                .filter(|(_, members)| members.contains(user))
                .map(|(id, _)| id.clone()),
        );
        let members = config
            .roster
            .entries
            .iter()
            .filter(|(_, e)| e.active)
            .map(|(id, e)| Member {
                id: id.clone(),
                name: e.display_name.clone(),
                role: e.role,
                avatar: e.avatar.clone(),
            })
            .collect();
        let snapshot = gateway.store().snapshot();
        ProtocolMessage::Snapshot {
            user: user.clone(),
            bot: Member {
                id: config.bot.id.clone(),
                name: config.bot.name.clone(),
                role: Role::Member,
                avatar: None,
            },
            channels,
            members,
            messages: adapter.timeline(user).to_vec(),
            repo_files: snapshot.paths().map(str::to_string).collect(),
            revision: snapshot.revision,
        }
    }
}
