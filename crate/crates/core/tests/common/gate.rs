//! Approval-gate harness: an independent model of the update-session
//! workflow and a driver that compares it with the gateway.

use orgmem_core::gateway::audit::AuditRecord;
use orgmem_core::gateway::{Action, ChatEvent, ErrorCode, Gateway, Interaction};
use orgmem_core::ids::{DraftId, SessionId};
use orgmem_core::privacy::Role;
use orgmem_core::update_flow::{ManagerAction, SessionState};

use super::*;

/// Proposals the unedited parking suggestion yields against handbook.md.
pub const PARKING_PROPOSALS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Actor {
    Claimant,
    OtherManager,
    Member,
}

impl Actor {
    pub fn id(self) -> &'static str {
        match self {
            Actor::Claimant => DANA,
            Actor::OtherManager => LEE,
            Actor::Member => SAM,
        }
    }
}

pub fn all_actions() -> Vec<ManagerAction> {
    vec![
        ManagerAction::EditSuggestion {
            text: "Visitors park in lot B with a day permit.".into(),
        },
        ManagerAction::Decline,
        ManagerAction::Start,
        ManagerAction::SelectFile {
            path: "handbook.md".into(),
        },
        ManagerAction::AutoSelect,
        ManagerAction::CreateFile {
            path: "parking.md".into(),
        },
        ManagerAction::EditProposal {
            text: "## Visitors\n\nGuests park in lot B.".into(),
        },
        ManagerAction::Apply,
        ManagerAction::Skip,
        ManagerAction::Stop,
        ManagerAction::CreateNewSection {
            heading: "Parking".into(),
            text: PARKING.into(),
        },
    ]
}

/// Model of one session, written from the workflow description rather
/// than from the implementation.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub state: SessionState,
    pub claim: Option<&'static str>,
    pub revision: u64,
    /// Proposal count, as observed when the session entered proposing; how
    /// many sections match is retrieval's business, not the gate's.
    pub proposals: usize,
}

pub enum Outcome {
    Accepted { next: SessionState, commits: bool },
    Rejected(ErrorCode),
}

pub fn oracle(model: &Model, actor: Actor, action: &ManagerAction) -> Outcome {
    use ManagerAction as A;
    use SessionState as S;
    if actor == Actor::Member {
        return Outcome::Rejected(ErrorCode::Unauthorized);
    }
    let next = match (model.state, action) {
        (S::Pending, A::EditSuggestion { .. }) => Some((S::Pending, false)),
        (S::Pending, A::Decline) => Some((S::Declined, false)),
        (S::Pending, A::Start) => Some((S::Selecting, false)),
        (S::Selecting, A::SelectFile { .. } | A::AutoSelect) => Some((S::Proposing(0), false)),
        (S::Selecting, A::CreateFile { .. }) => Some((S::Done, true)),
        (S::Proposing(i), A::EditProposal { .. }) => Some((S::Proposing(i), false)),
        (S::Proposing(i), A::Apply) => Some((
            if i + 1 < model.proposals {
                S::Proposing(i + 1)
            } else {
                S::Done
            },
            true,
        )),
        (S::Proposing(i), A::Skip) => Some((
            if i + 1 < model.proposals {
                S::Proposing(i + 1)
            } else {
                S::Done
            },
            false,
        )),
        (S::Proposing(_), A::Stop) => Some((S::Stopped, false)),
        (S::Proposing(_), A::CreateNewSection { .. }) => Some((S::Done, true)),
        _ => None,
    };
    let Some((next, commits)) = next else {
        return Outcome::Rejected(ErrorCode::InvalidState);
    };
    match model.claim {
        Some(owner) if owner != actor.id() => Outcome::Rejected(ErrorCode::Unauthorized),
        _ => Outcome::Accepted { next, commits },
    }
}

pub fn apply_model(model: &mut Model, actor: Actor, action: &ManagerAction) {
    if let Outcome::Accepted { next, commits } = oracle(model, actor, action) {
        model.state = next;
        model.claim.get_or_insert(actor.id());
        if commits {
            model.revision += 1;
        }
    }
}

pub struct Harness {
    pub gw: Gateway,
    pub script: Script,
    pub model: Model,
}

impl Harness {
    pub fn new() -> Self {
        let mut gw = gateway(two_manager_config());
        let mut script = Script::default();
        gw.ingest(&script.say("general", SAM, PARKING)).unwrap();
        gw.ingest(&script.mention("general", SAM, "<@u-bot> document this"))
            .unwrap();
        let submit = script.click(
            "general",
            SAM,
            Interaction::SubmitDraft {
                draft_id: DraftId::new("draft-1"),
            },
        );
        gw.ingest(&submit).unwrap();
        Self {
            gw,
            script,
            model: Model {
                state: SessionState::Pending,
                claim: None,
                revision: 0,
                proposals: 0,
            },
        }
    }

    pub fn event(&mut self, actor: Actor, action: &ManagerAction) -> ChatEvent {
        let conversation = format!("dm:{}", actor.id());
        let interaction = Interaction::Session {
            session_id: SessionId::new("sess-1"),
            command: action.clone(),
        };
        self.script.click(&conversation, actor.id(), interaction)
    }

    pub fn send(&mut self, event: &ChatEvent) -> Vec<Action> {
        self.gw.ingest(event).unwrap()
    }

    /// Drives the session with the oracle's bookkeeping, asserting success.
    /// Sends a fresh event and advances the model alongside it.
    pub fn act(&mut self, actor: Actor, action: &ManagerAction) -> (ChatEvent, Vec<Action>) {
        let before = self.model.state;
        apply_model(&mut self.model, actor, action);
        let event = self.event(actor, action);
        let actions = self.send(&event);
        if before == SessionState::Selecting && self.model.state == SessionState::Proposing(0) {
            self.model.proposals = self.gw.state().sessions[&SessionId::new("sess-1")]
                .proposals
                .len();
            assert!(self.model.proposals > 0, "proposing with no proposals");
        }
        (event, actions)
    }

    /// Drives the session, asserting success.
    pub fn drive(&mut self, actor: Actor, action: ManagerAction) {
        let (_, actions) = self.act(actor, &action);
        assert!(error_codes(&actions).is_empty(), "{action:?}: {actions:?}");
    }

    pub fn session_state(&self) -> SessionState {
        self.gw.state().sessions[&SessionId::new("sess-1")].state
    }

    pub fn reach(state: &str) -> Self {
        let mut h = Self::new();
        let select = ManagerAction::SelectFile {
            path: "handbook.md".into(),
        };
        match state {
            "pending" => {}
            "declined" => h.drive(Actor::Claimant, ManagerAction::Decline),
            "selecting" => h.drive(Actor::Claimant, ManagerAction::Start),
            "proposing" => {
                h.drive(Actor::Claimant, ManagerAction::Start);
                h.drive(Actor::Claimant, select);
            }
            "done" => {
                h.drive(Actor::Claimant, ManagerAction::Start);
                h.drive(Actor::Claimant, select);
                h.drive(Actor::Claimant, ManagerAction::Apply);
                h.drive(Actor::Claimant, ManagerAction::Skip);
                h.drive(Actor::Claimant, ManagerAction::Skip);
            }
            "stopped" => {
                h.drive(Actor::Claimant, ManagerAction::Start);
                h.drive(Actor::Claimant, select);
                h.drive(Actor::Claimant, ManagerAction::Stop);
            }
            other => panic!("no such state {other}"),
        }
        assert_eq!(h.session_state().to_string().split('(').next(), Some(state));
        assert_eq!(h.model.state, h.session_state());
        if state != "pending" && state != "declined" && state != "selecting" {
            assert_eq!(h.model.proposals, PARKING_PROPOSALS);
        }
        h
    }
}

/// Every commit in the history is an Assisted commit recorded right after a
/// manager's Apply/CreateFile/CreateNewSection on the same session, by the
/// same person.
pub fn assert_commits_attributable(gw: &Gateway) {
    let entries = gw.audit().entries();
    for commit in &gw.store().snapshot().history {
        let pos = entries
            .iter()
            .position(|e| matches!(&e.record, AuditRecord::Commit { commit_id, .. } if *commit_id == commit.commit_id))
            .unwrap_or_else(|| panic!("commit {} missing from the audit log", commit.commit_id));
        let AuditRecord::Commit {
            author, session_id, ..
        } = &entries[pos].record
        else {
            unreachable!()
        };
        assert_eq!(*author, commit.author);
        let session_id = session_id.as_ref().expect("commit names its session");
        let cause = entries[..pos]
            .iter()
            .rev()
            .find_map(|e| match &e.record {
                AuditRecord::Session {
                    session_id: s,
                    actor,
                    command,
                    ..
                } if s == session_id => Some((actor, command)),
                _ => None,
            })
            .expect("a session command precedes the commit");
        assert!(
            ["apply", "create_file", "create_new_section"].contains(&cause.1.as_str()),
            "{cause:?}"
        );
        assert_eq!(*cause.0, commit.author);
        assert_eq!(gw.config().roster.role(cause.0), Some(Role::Manager));
    }
}

pub const STATES: [&str; 6] = [
    "pending",
    "declined",
    "selecting",
    "proposing",
    "done",
    "stopped",
];

/// Runs every (state, action, role) case; panics on the first mismatch and
/// returns the number of cases checked.
pub fn check_every_combination() -> usize {
    let mut cases = 0;
    for state in STATES {
        for action in all_actions() {
            for actor in [Actor::Claimant, Actor::OtherManager, Actor::Member] {
                let mut h = Harness::reach(state);
                let before_state = h.session_state();
                let before_rev = h.gw.store().revision();
                let expected = oracle(&h.model, actor, &action);
                let event = h.event(actor, &action);
                let actions = h.send(&event);
                let label = format!("{state} / {} / {actor:?}", action.name());
                match expected {
                    Outcome::Accepted { next, commits } => {
                        assert!(error_codes(&actions).is_empty(), "{label}: {actions:?}");
                        assert_eq!(h.session_state(), next, "{label}");
                        assert_eq!(
                            h.gw.store().revision(),
                            before_rev + u64::from(commits),
                            "{label}"
                        );
                    }
                    Outcome::Rejected(code) => {
                        assert_eq!(error_codes(&actions), [code], "{label}");
                        assert_eq!(actions.len(), 1, "{label}");
                        assert_eq!(actions[0].target.user, Some(user(actor.id())), "{label}");
                        assert_eq!(h.session_state(), before_state, "{label}");
                        assert_eq!(h.gw.store().revision(), before_rev, "{label}");
                    }
                }
                if matches!(action, ManagerAction::Decline | ManagerAction::Stop) {
                    assert_eq!(h.gw.store().revision(), before_rev, "{label}");
                }
                // a redelivered event changes nothing
                let rev = h.gw.store().revision();
                let state_after = h.session_state();
                assert!(h.send(&event).is_empty(), "{label}");
                assert_eq!(h.gw.store().revision(), rev, "{label}");
                assert_eq!(h.session_state(), state_after, "{label}");
                assert_commits_attributable(&h.gw);
                cases += 1;
            }
        }
    }
    cases
}
