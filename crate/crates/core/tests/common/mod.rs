#![allow(dead_code)]

use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use orgmem_core::doc_store::DocStore;
use orgmem_core::gateway::adapter::{read_transcript, Delivery, SimulatedAdapter};
use orgmem_core::gateway::{
    Action, ChatEvent, EventKind, Gateway, Interaction, Payload, WorkspaceConfig,
};
use orgmem_core::ids::{ConversationId, UserId};
use orgmem_core::privacy::{Role, Roster, RosterEntry};
use orgmem_core::provider::MockProvider;

pub mod gate;

pub const BOT: &str = "u-bot";
pub const DANA: &str = "u-dana";
pub const ALEX: &str = "u-alex";
pub const PRIYA: &str = "u-priya";
pub const SAM: &str = "u-sam";
pub const LEE: &str = "u-lee";

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

pub fn demo_config() -> WorkspaceConfig {
    WorkspaceConfig::load(&demo_dir().join("config.toml")).expect("demo config loads")
}

/// The demo config with a second manager, Lee Chen.
pub fn two_manager_config() -> WorkspaceConfig {
    let mut config = demo_config();
    let mut entries: Vec<(UserId, RosterEntry)> =
        config.roster.entries.clone().into_iter().collect();
    entries.push((
        UserId::new(LEE),
        RosterEntry {
            display_name: "Lee Chen".into(),
            role: Role::Manager,
            active: true,
            avatar: None,
        },
    ));
    config.roster = Roster::new(entries).unwrap();
    config
}

pub fn demo_store(config: &WorkspaceConfig) -> DocStore {
    DocStore::open(&config.repo_root)
        .expect("demo repo opens")
        .detached()
}

pub fn gateway(config: WorkspaceConfig) -> Gateway {
    let store = demo_store(&config);
    let provider = Box::new(MockProvider::new(config.dimension));
    Gateway::in_memory(config, store, provider).unwrap()
}

pub fn adapter(config: WorkspaceConfig) -> SimulatedAdapter {
    SimulatedAdapter::new(gateway(config))
}

pub fn demo_transcript() -> Vec<ChatEvent> {
    read_transcript(&demo_dir().join("transcript.jsonl")).expect("demo transcript parses")
}

/// The demo transcript replayed through the simulated adapter.
pub fn replay_demo() -> (SimulatedAdapter, Vec<Delivery>) {
    let mut adapter = adapter(demo_config());
    let mut deliveries = Vec::new();
    for event in demo_transcript() {
        deliveries.extend(adapter.send(&event).unwrap());
    }
    (adapter, deliveries)
}

pub fn user(id: &str) -> UserId {
    UserId::new(id)
}

pub fn conv(id: &str) -> ConversationId {
    ConversationId::new(id)
}

pub fn at(minute: i64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, 2, 9, 0, 0).unwrap() + Duration::minutes(minute)
}

/// Builds events with sequential ids and timestamps.
#[derive(Debug, Default)]
pub struct Script {
    next: i64,
}

impl Script {
    fn id(&mut self) -> (String, DateTime<Utc>) {
        self.next += 1;
        (format!("t-{:03}", self.next), at(self.next))
    }

    pub fn dm(&mut self, author: &str, text: &str) -> ChatEvent {
        let (id, ts) = self.id();
        ChatEvent::message(
            id,
            EventKind::DmMessage,
            ConversationId::dm(&user(author)),
            user(author),
            text,
            ts,
        )
    }

    pub fn say(&mut self, conversation: &str, author: &str, text: &str) -> ChatEvent {
        let (id, ts) = self.id();
        ChatEvent::message(
            id,
            EventKind::ChannelMessage,
            conv(conversation),
            user(author),
            text,
            ts,
        )
    }

    pub fn mention(&mut self, conversation: &str, author: &str, text: &str) -> ChatEvent {
        let (id, ts) = self.id();
        ChatEvent::message(
            id,
            EventKind::Mention,
            conv(conversation),
            user(author),
            text,
            ts,
        )
    }

    pub fn click(
        &mut self,
        conversation: &str,
        author: &str,
        interaction: Interaction,
    ) -> ChatEvent {
        let (id, ts) = self.id();
        ChatEvent::interaction(
            id,
            EventKind::ButtonClick,
            conv(conversation),
            user(author),
            interaction,
            ts,
        )
    }

    pub fn submit(
        &mut self,
        conversation: &str,
        author: &str,
        interaction: Interaction,
    ) -> ChatEvent {
        let (id, ts) = self.id();
        ChatEvent::interaction(
            id,
            EventKind::ModalSubmit,
            conv(conversation),
            user(author),
            interaction,
            ts,
        )
    }
}

pub fn payloads(actions: &[Action]) -> Vec<&Payload> {
    actions.iter().map(|a| &a.payload).collect()
}

pub fn find(actions: &[Action], pred: impl Fn(&Payload) -> bool) -> Option<&Action> {
    actions.iter().find(|a| pred(&a.payload))
}

pub fn error_codes(actions: &[Action]) -> Vec<orgmem_core::gateway::ErrorCode> {
    actions
        .iter()
        .filter_map(|a| match &a.payload {
            Payload::Error { code, .. } => Some(*code),
            _ => None,
        })
        .collect()
}

pub const PARKING: &str = "Visitors can park their cars in lot B behind the building with a day permit from the front desk.";
