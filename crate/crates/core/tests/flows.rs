mod common;

use std::collections::BTreeMap;

use common::*;
use orgmem_core::doc_store::DocChunk;
use orgmem_core::doc_store::DocStore;
use orgmem_core::extraction::{DraftState, NOTHING_FOUND, USAGE_HELP};
use orgmem_core::gateway::audit::AuditRecord;
use orgmem_core::gateway::{
    Action, ActionKind, AnswerOutcome, ErrorCode, Gateway, Interaction, Payload, CHATTER_REPLY,
};
use orgmem_core::ids::{DraftId, ExchangeId, SessionId};
use orgmem_core::provider::{
    AnswerDraft, Intent, MockProvider, Provider, ProviderError, Vector, WindowPayload,
};
use orgmem_core::qa::{ABSTAIN_NOTICE, APOLOGY, ASK_CHANNEL, ASK_PRIVATE};
use orgmem_core::share::{ShareMode, ShareRequest, ANONYMOUS_AUTHOR};
use orgmem_core::update_flow::{ManagerAction, SessionState};

fn run(gw: &mut Gateway, event: orgmem_core::gateway::ChatEvent) -> Vec<Action> {
    gw.ingest(&event).unwrap()
}

fn session(id: &str, command: ManagerAction) -> Interaction {
    Interaction::Session {
        session_id: SessionId::new(id),
        command,
    }
}

fn share(exchange: &str, mode: ShareMode, anonymous: bool, recipients: &[&str]) -> Interaction {
    Interaction::SubmitShare(ShareRequest {
        exchange_id: ExchangeId::new(exchange),
        mode,
        comment: None,
        anonymous,
        recipients: recipients.iter().map(|r| user(r)).collect(),
    })
}

/// Sam states the parking rule in `general`, asks for it to be documented
/// and submits the draft; returns the mention's event id.
fn submitted_parking_draft(gw: &mut Gateway, s: &mut Script) -> String {
    run(gw, s.say("general", SAM, PARKING));
    let mention = s.mention("general", SAM, "<@u-bot> document this");
    let thread = mention.event_id.clone();
    run(gw, mention);
    let submit = s
        .click(
            "general",
            SAM,
            Interaction::SubmitDraft {
                draft_id: DraftId::new("draft-1"),
            },
        )
        .in_thread(&thread);
    run(gw, submit);
    thread
}

#[test]
fn dm_question_gets_answer_evidence_and_private_banner() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    let actions = run(&mut gw, s.dm(ALEX, "How do I reserve the eye tracker?"));
    assert_eq!(actions.len(), 3);

    let answer = &actions[0];
    assert_eq!(answer.kind, ActionKind::PostMessage);
    assert_eq!(answer.target.conversation, Some(conv("dm:u-alex")));
    let Payload::Answer {
        outcome,
        text,
        anchors,
        ..
    } = &answer.payload
    else {
        panic!("{answer:?}")
    };
    assert_eq!(*outcome, AnswerOutcome::Answered);
    assert!(text.contains("room 305"), "{text}");
    assert_eq!(anchors[0], "equipment.md#eye-tracker");

    let evidence = &actions[1];
    assert_eq!(evidence.kind, ActionKind::PostThreadReply);
    assert_eq!(
        evidence.target.thread.as_deref(),
        Some(answer.action_id.as_str())
    );
    let Payload::Evidence { references, .. } = &evidence.payload else {
        panic!()
    };
    assert!(!references.is_empty() && references.len() <= 3);

    let banner = &actions[2];
    assert_eq!(banner.kind, ActionKind::PostEphemeral);
    assert_eq!(banner.target.user, Some(user(ALEX)));
    let Payload::ShareBanner { buttons, .. } = &banner.payload else {
        panic!()
    };
    let labels: Vec<&str> = buttons.iter().map(|b| b.label.as_str()).collect();
    assert_eq!(labels, [ASK_CHANNEL, ASK_PRIVATE]);
}

#[test]
fn channel_question_is_answered_in_the_channel_with_a_private_banner() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    let actions = run(
        &mut gw,
        s.mention("general", PRIYA, "<@u-bot> When are lab meetings held?"),
    );
    assert_eq!(actions[0].target.conversation, Some(conv("general")));
    let banner = find(&actions, |p| matches!(p, Payload::ShareBanner { .. })).unwrap();
    assert_eq!(banner.kind, ActionKind::PostEphemeral);
    assert_eq!(banner.target.user, Some(user(PRIYA)));
}

#[test]
fn empty_repository_abstains_without_evidence() {
    let config = demo_config();
    let provider = Box::new(MockProvider::new(config.dimension));
    let mut gw =
        Gateway::in_memory(config, DocStore::in_memory(BTreeMap::new()), provider).unwrap();
    let mut s = Script::default();
    let actions = run(&mut gw, s.dm(ALEX, "How do I book the conference room?"));
    let Payload::Answer {
        outcome,
        text,
        anchors,
        ..
    } = &actions[0].payload
    else {
        panic!()
    };
    assert_eq!(*outcome, AnswerOutcome::Abstained);
    assert_eq!(text, ABSTAIN_NOTICE);
    assert!(anchors.is_empty());
    assert!(find(&actions, |p| matches!(p, Payload::Evidence { .. })).is_none());
}

#[test]
fn question_about_a_missing_topic_abstains() {
    let config = demo_config();
    let files = BTreeMap::from([(
        "safety.md".to_string(),
        std::fs::read_to_string(demo_dir().join("repo/safety.md")).unwrap(),
    )]);
    let provider = Box::new(MockProvider::new(config.dimension));
    let mut gw = Gateway::in_memory(config, DocStore::in_memory(files), provider).unwrap();
    let mut s = Script::default();
    let actions = run(
        &mut gw,
        s.dm(
            ALEX,
            "How many hours is a student expected to work per week?",
        ),
    );
    let Payload::Answer { outcome, text, .. } = &actions[0].payload else {
        panic!()
    };
    assert_eq!(*outcome, AnswerOutcome::Abstained);
    assert!(text.starts_with(ABSTAIN_NOTICE));
}

/// Mock provider whose answer composition always fails.
struct NoAnswers(MockProvider);

impl Provider for NoAnswers {
    fn embed(&self, text: &str) -> Result<Vector, ProviderError> {
        self.0.embed(text)
    }
    fn classify_intent(&self, message: &str) -> Result<Intent, ProviderError> {
        self.0.classify_intent(message)
    }
    fn compose_answer(&self, _: &str, _: &[DocChunk]) -> Result<AnswerDraft, ProviderError> {
        Err(ProviderError::Timeout)
    }
    fn extract_knowledge(&self, window: &WindowPayload) -> Result<String, ProviderError> {
        self.0.extract_knowledge(window)
    }
    fn propose_edit(&self, section: &DocChunk, suggestion: &str) -> Result<String, ProviderError> {
        self.0.propose_edit(section, suggestion)
    }
}

#[test]
fn provider_failure_apologizes_and_records_no_exchange() {
    let config = demo_config();
    let store = demo_store(&config);
    let provider = Box::new(NoAnswers(MockProvider::new(config.dimension)));
    let mut gw = Gateway::in_memory(config, store, provider).unwrap();
    let mut s = Script::default();
    let actions = run(&mut gw, s.dm(ALEX, "How do I reserve the eye tracker?"));
    assert_eq!(actions.len(), 1);
    assert_eq!(actions[0].payload.text(), Some(APOLOGY));
    assert!(gw.state().exchanges.is_empty());
    assert_eq!(gw.stats().questions.total, 0);
}

#[test]
fn duplicate_event_ids_are_ignored() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    let event = s.dm(ALEX, "How do I reserve the eye tracker?");
    assert!(!run(&mut gw, event.clone()).is_empty());
    assert!(run(&mut gw, event).is_empty());
    assert_eq!(gw.state().exchanges.len(), 1);
}

#[test]
fn unknown_event_kind_is_a_protocol_error() {
    let mut gw = gateway(demo_config());
    let json = r#"{"event_id":"x1","kind":"reaction_added","conversation":"general","author":"u-alex","timestamp":"2026-03-02T09:00:00Z"}"#;
    let actions = run(&mut gw, serde_json::from_str(json).unwrap());
    assert_eq!(error_codes(&actions), [ErrorCode::Protocol]);
}

#[test]
fn chatter_gets_the_fallback_reply() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    let actions = run(&mut gw, s.dm(ALEX, "hi there"));
    assert_eq!(
        payloads(&actions),
        [&Payload::Text {
            text: CHATTER_REPLY.into()
        }]
    );
    assert!(gw.state().exchanges.is_empty());
}

#[test]
fn private_share_modal_preselects_managers_and_previews_both_renderings() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(&mut gw, s.dm(PRIYA, "Where can visitors park their cars?"));
    let open = Interaction::OpenShare {
        exchange_id: ExchangeId::new("qa-1"),
        mode: ShareMode::ToPrivate,
    };
    let actions = run(&mut gw, s.click("dm:u-priya", PRIYA, open));
    let Payload::ShareModal(modal) = &actions[0].payload else {
        panic!("{actions:?}")
    };
    assert_eq!(actions[0].kind, ActionKind::OpenModal);
    assert_eq!(modal.recipients, [user(DANA)]);
    assert!(!modal.candidates.contains(&user(PRIYA)));
    assert!(modal.preview.starts_with("Priya Natarajan asked:"));
    assert!(modal.preview_anonymous.starts_with("A team member asked:"));
    assert!(!modal.preview_anonymous.contains("Priya"));
}

#[test]
fn named_channel_share_shows_the_questioner() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(&mut gw, s.dm(PRIYA, "Where can visitors park their cars?"));
    let actions = run(
        &mut gw,
        s.submit(
            "dm:u-priya",
            PRIYA,
            share("qa-1", ShareMode::ToChannel, false, &[]),
        ),
    );
    let post = find(&actions, |p| matches!(p, Payload::SharedPost { .. })).unwrap();
    assert_eq!(post.target.conversation, Some(conv("qa")));
    let Payload::SharedPost {
        post: shared,
        rendered,
    } = &post.payload
    else {
        panic!()
    };
    assert_eq!(shared.author, "Priya Natarajan");
    assert!(rendered.starts_with("Priya Natarajan asked: Where can visitors park their cars?"));
}

#[test]
fn anonymous_channel_share_carries_no_trace_of_the_questioner() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(
        &mut gw,
        s.dm(
            PRIYA,
            "I am Priya Natarajan, where can visitors park their cars?",
        ),
    );
    let actions = run(
        &mut gw,
        s.submit(
            "dm:u-priya",
            PRIYA,
            share("qa-1", ShareMode::ToChannel, true, &[]),
        ),
    );
    let post = find(&actions, |p| matches!(p, Payload::SharedPost { .. })).unwrap();
    let Payload::SharedPost { post: shared, .. } = &post.payload else {
        panic!()
    };
    assert_eq!(shared.author, ANONYMOUS_AUTHOR);
    assert_eq!(shared.avatar, None);
    let json = serde_json::to_string(post).unwrap();
    assert!(!json.contains("Priya") && !json.contains(PRIYA), "{json}");
}

#[test]
fn sharing_twice_to_the_same_place_is_a_duplicate() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(&mut gw, s.dm(PRIYA, "Where can visitors park their cars?"));
    run(
        &mut gw,
        s.submit(
            "dm:u-priya",
            PRIYA,
            share("qa-1", ShareMode::ToChannel, false, &[]),
        ),
    );
    let again = run(
        &mut gw,
        s.submit(
            "dm:u-priya",
            PRIYA,
            share("qa-1", ShareMode::ToChannel, true, &[]),
        ),
    );
    assert_eq!(error_codes(&again), [ErrorCode::Duplicate]);
    assert_eq!(gw.state().shares.len(), 1);
}

#[test]
fn only_the_questioner_may_share() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(&mut gw, s.dm(PRIYA, "Where can visitors park their cars?"));
    let actions = run(
        &mut gw,
        s.submit(
            "dm:u-alex",
            ALEX,
            share("qa-1", ShareMode::ToChannel, false, &[]),
        ),
    );
    assert_eq!(error_codes(&actions), [ErrorCode::Unauthorized]);
    let unknown = run(
        &mut gw,
        s.submit(
            "dm:u-alex",
            ALEX,
            share("qa-9", ShareMode::ToChannel, false, &[]),
        ),
    );
    assert_eq!(error_codes(&unknown), [ErrorCode::NotFound]);
}

#[test]
fn private_share_needs_recipients() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(&mut gw, s.dm(PRIYA, "Where can visitors park their cars?"));
    let actions = run(
        &mut gw,
        s.submit(
            "dm:u-priya",
            PRIYA,
            share("qa-1", ShareMode::ToPrivate, true, &[]),
        ),
    );
    assert_eq!(error_codes(&actions), [ErrorCode::InvalidState]);
    let stranger = run(
        &mut gw,
        s.submit(
            "dm:u-priya",
            PRIYA,
            share("qa-1", ShareMode::ToPrivate, true, &["u-nobody"]),
        ),
    );
    assert_eq!(error_codes(&stranger), [ErrorCode::NotFound]);
}

#[test]
fn anonymous_private_group_excludes_the_questioner_and_relays_each_reply_once() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(&mut gw, s.dm(PRIYA, "Where can visitors park their cars?"));
    let actions = run(
        &mut gw,
        s.submit(
            "dm:u-priya",
            PRIYA,
            share("qa-1", ShareMode::ToPrivate, true, &[DANA, SAM]),
        ),
    );
    let group = find(&actions, |_| true).unwrap();
    assert_eq!(group.kind, ActionKind::CreateGroupConversation);
    assert_eq!(group.target.members, [user(BOT), user(DANA), user(SAM)]);

    for (author, text) in [(SAM, PARKING), (DANA, "Same as what I heard.")] {
        let replies = run(&mut gw, s.say("grp-1", author, text));
        let relays: Vec<&Action> = replies
            .iter()
            .filter(|a| matches!(a.payload, Payload::Relay { .. }))
            .collect();
        assert_eq!(relays.len(), 1);
        assert_eq!(relays[0].target.user, Some(user(PRIYA)));
        assert_eq!(relays[0].kind, ActionKind::DmUser);
    }
}

#[test]
fn named_private_group_includes_the_questioner_and_does_not_relay() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(&mut gw, s.dm(PRIYA, "Where can visitors park their cars?"));
    let actions = run(
        &mut gw,
        s.submit(
            "dm:u-priya",
            PRIYA,
            share("qa-1", ShareMode::ToPrivate, false, &[DANA]),
        ),
    );
    assert_eq!(
        actions[0].target.members,
        [user(BOT), user(DANA), user(PRIYA)]
    );
    let replies = run(&mut gw, s.say("grp-1", DANA, "Lot B, I think."));
    assert!(replies
        .iter()
        .all(|a| !matches!(a.payload, Payload::Relay { .. })));
}

#[test]
fn channel_mention_drafts_a_suggestion_in_the_thread() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    let mention = s.mention(
        "general",
        ALEX,
        "<@u-bot> please document this: lab meetings are Fridays",
    );
    let thread = mention.event_id.clone();
    let actions = run(&mut gw, mention);
    let card = find(&actions, |p| matches!(p, Payload::DraftCard { .. })).expect("draft card");
    assert_eq!(card.kind, ActionKind::PostThreadReply);
    assert_eq!(card.target.thread.as_deref(), Some(thread.as_str()));
    let Payload::DraftCard {
        text,
        state,
        buttons,
        ..
    } = &card.payload
    else {
        panic!()
    };
    assert_eq!(text, "please document this: lab meetings are Fridays");
    assert_eq!(*state, DraftState::Draft);
    let labels: Vec<&str> = buttons.iter().map(|b| b.label.as_str()).collect();
    assert!(labels.contains(&"Suggest Update") && labels.contains(&"Edit"));
}

#[test]
fn nothing_documentable_posts_the_notice() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(&mut gw, s.say("general", ALEX, "hello everyone"));
    let actions = run(&mut gw, s.mention("general", SAM, "<@u-bot> document this"));
    assert!(
        actions
            .iter()
            .any(|a| a.payload.text() == Some(NOTHING_FOUND)),
        "{actions:?}"
    );
    assert!(gw.state().drafts.is_empty());
}

#[test]
fn a_bare_mention_gets_usage_help() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    let actions = run(&mut gw, s.mention("general", SAM, "<@u-bot>"));
    assert!(
        actions.iter().any(|a| a.payload.text() == Some(USAGE_HELP)),
        "{actions:?}"
    );
}

#[test]
fn drafts_restore_real_names_but_providers_never_see_them() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(
        &mut gw,
        s.say(
            "general",
            SAM,
            "Purchases over 500 dollars need approval from Dana Whitfield first.",
        ),
    );
    let actions = run(&mut gw, s.mention("general", SAM, "<@u-bot> document this"));
    let card = find(&actions, |p| matches!(p, Payload::DraftCard { .. })).unwrap();
    assert!(card.payload.text().unwrap().contains("Dana Whitfield"));
    for entry in gw.audit().entries() {
        if let AuditRecord::ProviderCall { payload, .. } = &entry.record {
            assert!(!payload.to_string().contains("Dana Whitfield"), "{payload}");
        }
    }
}

#[test]
fn only_the_contributor_edits_or_withdraws_and_submitted_drafts_are_frozen() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(&mut gw, s.say("general", SAM, PARKING));
    run(&mut gw, s.mention("general", SAM, "<@u-bot> document this"));
    let draft = DraftId::new("draft-1");

    let edit = |text: &str| Interaction::EditDraft {
        draft_id: draft.clone(),
        text: text.into(),
    };
    let by_other = run(&mut gw, s.submit("general", ALEX, edit("Park anywhere.")));
    assert_eq!(error_codes(&by_other), [ErrorCode::Unauthorized]);
    let empty = run(&mut gw, s.submit("general", SAM, edit("   ")));
    assert_eq!(error_codes(&empty), [ErrorCode::Protocol]);

    let edited = run(
        &mut gw,
        s.submit(
            "general",
            SAM,
            edit("Visitors park in lot B with a day permit."),
        ),
    );
    assert!(error_codes(&edited).is_empty());
    assert_eq!(
        gw.state().drafts[&draft].text,
        "Visitors park in lot B with a day permit."
    );

    let editor = run(
        &mut gw,
        s.click(
            "general",
            SAM,
            Interaction::OpenDraftEditor {
                draft_id: draft.clone(),
            },
        ),
    );
    let Payload::Editor { text, .. } = &editor[0].payload else {
        panic!("{editor:?}")
    };
    assert_eq!(text, "Visitors park in lot B with a day permit.");

    let submit_other = run(
        &mut gw,
        s.click(
            "general",
            ALEX,
            Interaction::SubmitDraft {
                draft_id: draft.clone(),
            },
        ),
    );
    assert_eq!(error_codes(&submit_other), [ErrorCode::Unauthorized]);
    run(
        &mut gw,
        s.click(
            "general",
            SAM,
            Interaction::SubmitDraft {
                draft_id: draft.clone(),
            },
        ),
    );
    assert_eq!(gw.state().drafts[&draft].state, DraftState::Submitted);

    let late_edit = run(&mut gw, s.submit("general", SAM, edit("Too late.")));
    assert_eq!(error_codes(&late_edit), [ErrorCode::InvalidState]);
    let late_withdraw = run(
        &mut gw,
        s.click(
            "general",
            SAM,
            Interaction::WithdrawDraft {
                draft_id: draft.clone(),
            },
        ),
    );
    assert_eq!(error_codes(&late_withdraw), [ErrorCode::InvalidState]);
    let resubmit = run(
        &mut gw,
        s.click("general", SAM, Interaction::SubmitDraft { draft_id: draft }),
    );
    assert_eq!(error_codes(&resubmit), [ErrorCode::InvalidState]);
    assert_eq!(gw.state().sessions.len(), 1);
}

#[test]
fn withdrawn_drafts_never_reach_a_manager() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    run(&mut gw, s.say("general", SAM, PARKING));
    run(&mut gw, s.mention("general", SAM, "<@u-bot> document this"));
    let draft = DraftId::new("draft-1");
    run(
        &mut gw,
        s.click(
            "general",
            SAM,
            Interaction::WithdrawDraft {
                draft_id: draft.clone(),
            },
        ),
    );
    assert_eq!(gw.state().drafts[&draft].state, DraftState::Withdrawn);
    let submit = run(
        &mut gw,
        s.click("general", SAM, Interaction::SubmitDraft { draft_id: draft }),
    );
    assert_eq!(error_codes(&submit), [ErrorCode::InvalidState]);
    assert!(gw.state().sessions.is_empty());
}

#[test]
fn submission_sends_one_review_card_per_manager_and_a_notice() {
    let mut gw = gateway(two_manager_config());
    let mut s = Script::default();
    run(&mut gw, s.say("general", SAM, PARKING));
    let mention = s.mention("general", SAM, "<@u-bot> document this");
    let thread = mention.event_id.clone();
    run(&mut gw, mention);
    let actions = run(
        &mut gw,
        s.click(
            "general",
            SAM,
            Interaction::SubmitDraft {
                draft_id: DraftId::new("draft-1"),
            },
        ),
    );
    let cards: Vec<&Action> = actions
        .iter()
        .filter(|a| matches!(a.payload, Payload::ReviewCard { .. }))
        .collect();
    let mut reviewers: Vec<_> = cards
        .iter()
        .map(|a| a.target.user.clone().unwrap())
        .collect();
    reviewers.sort();
    assert_eq!(reviewers, [user(DANA), user(LEE)]);
    let notice = find(&actions, |p| matches!(p, Payload::Notice { .. })).unwrap();
    assert_eq!(notice.target.thread.as_deref(), Some(thread.as_str()));
    assert_eq!(
        notice.payload.text(),
        Some("Sam Okafor's suggestion has been sent to a manager for review.")
    );
}

#[test]
fn applying_every_proposal_rebases_later_spans() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    submitted_parking_draft(&mut gw, &mut s);
    let before = gw.store().snapshot().files["handbook.md"].clone();
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Start)),
    );
    run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session(
                "sess-1",
                ManagerAction::SelectFile {
                    path: "handbook.md".into(),
                },
            ),
        ),
    );
    let proposals = gw.state().sessions[&SessionId::new("sess-1")]
        .proposals
        .clone();
    assert_eq!(proposals.len(), 3);
    for _ in 0..3 {
        let actions = run(
            &mut gw,
            s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Apply)),
        );
        assert!(error_codes(&actions).is_empty(), "{actions:?}");
    }
    assert_eq!(gw.store().revision(), 3);
    assert_eq!(
        gw.state().sessions[&SessionId::new("sess-1")].state,
        SessionState::Done
    );

    // oracle: splice every proposal into the base text, rightmost first
    let mut chars: Vec<char> = before.chars().collect();
    let mut by_start = proposals.clone();
    by_start.sort_by_key(|p| std::cmp::Reverse(p.base_span.start));
    for p in &by_start {
        chars.splice(p.base_span.start..p.base_span.end, p.proposed_text.chars());
    }
    let expected: String = chars.into_iter().collect();
    assert_eq!(gw.store().snapshot().files["handbook.md"], expected);
    assert_eq!(expected.matches(PARKING).count(), 3);
}

#[test]
fn applied_update_is_acknowledged_and_answerable_immediately() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    let thread = submitted_parking_draft(&mut gw, &mut s);
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Start)),
    );
    run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session("sess-1", ManagerAction::AutoSelect),
        ),
    );
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Apply)),
    );
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Skip)),
    );
    let last = run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Skip)),
    );
    let ack = find(&last, |p| matches!(p, Payload::Ack { .. })).expect("ack");
    assert_eq!(ack.target.conversation, Some(conv("general")));
    assert_eq!(ack.target.thread.as_deref(), Some(thread.as_str()));
    let Payload::Ack {
        text,
        editor_url,
        commits,
        ..
    } = &ack.payload
    else {
        panic!()
    };
    assert_eq!(
        text,
        "The suggested update has been added to handbook.md (commit 1). Thank you, Sam Okafor!"
    );
    assert!(editor_url.as_deref().unwrap().ends_with("handbook.md"));
    assert_eq!(commits, &[1]);
    assert_eq!(gw.index().indexed_revision(), 1);

    let answer = run(&mut gw, s.dm(PRIYA, "Where can visitors park their cars?"));
    let Payload::Answer {
        outcome, anchors, ..
    } = &answer[0].payload
    else {
        panic!()
    };
    assert_eq!(*outcome, AnswerOutcome::Answered);
    assert_eq!(anchors[0], "handbook.md#visitors");
}

#[test]
fn create_file_and_create_new_section_commit_once() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    submitted_parking_draft(&mut gw, &mut s);
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Start)),
    );
    let exists = run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session(
                "sess-1",
                ManagerAction::CreateFile {
                    path: "handbook.md".into(),
                },
            ),
        ),
    );
    assert_eq!(error_codes(&exists), [ErrorCode::Store]);
    let bad = run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session(
                "sess-1",
                ManagerAction::CreateFile {
                    path: "../x.md".into(),
                },
            ),
        ),
    );
    assert_eq!(error_codes(&bad), [ErrorCode::Store]);
    assert_eq!(gw.store().revision(), 0);
    run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session(
                "sess-1",
                ManagerAction::CreateFile {
                    path: "parking.md".into(),
                },
            ),
        ),
    );
    assert_eq!(gw.store().revision(), 1);
    assert_eq!(
        gw.store().snapshot().files["parking.md"],
        format!("{PARKING}\n")
    );

    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    submitted_parking_draft(&mut gw, &mut s);
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Start)),
    );
    run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session(
                "sess-1",
                ManagerAction::SelectFile {
                    path: "handbook.md".into(),
                },
            ),
        ),
    );
    let section = ManagerAction::CreateNewSection {
        heading: "Parking".into(),
        text: PARKING.into(),
    };
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", section)),
    );
    assert_eq!(gw.store().revision(), 1);
    let body = &gw.store().snapshot().files["handbook.md"];
    assert!(
        body.trim_end()
            .ends_with(&format!("## Parking\n\n{PARKING}")),
        "{body}"
    );
    assert_eq!(
        gw.state().sessions[&SessionId::new("sess-1")].state,
        SessionState::Done
    );
}

#[test]
fn selecting_an_unknown_file_keeps_the_session_selecting() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    submitted_parking_draft(&mut gw, &mut s);
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Start)),
    );
    let actions = run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session(
                "sess-1",
                ManagerAction::SelectFile {
                    path: "nope.md".into(),
                },
            ),
        ),
    );
    assert_eq!(error_codes(&actions), [ErrorCode::NotFound]);
    assert_eq!(
        gw.state().sessions[&SessionId::new("sess-1")].state,
        SessionState::Selecting
    );
}

#[test]
fn edited_proposal_is_what_gets_committed() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    submitted_parking_draft(&mut gw, &mut s);
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Start)),
    );
    run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session(
                "sess-1",
                ManagerAction::SelectFile {
                    path: "handbook.md".into(),
                },
            ),
        ),
    );
    let text = "## Visitors\n\nGuests sign in at the front desk. Guests park in lot B.";
    let edited = run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session("sess-1", ManagerAction::EditProposal { text: text.into() }),
        ),
    );
    let Payload::Proposal { marked, .. } = &edited[0].payload else {
        panic!("{edited:?}")
    };
    assert!(
        marked.contains("*lot B.*") && marked.contains("~the building.~"),
        "{marked}"
    );
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Apply)),
    );
    assert!(gw.store().snapshot().files["handbook.md"].contains(text));
}

#[test]
fn second_manager_cannot_act_on_a_claimed_session() {
    let mut gw = gateway(two_manager_config());
    let mut s = Script::default();
    submitted_parking_draft(&mut gw, &mut s);
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Start)),
    );
    let actions = run(
        &mut gw,
        s.click(
            "dm:u-lee",
            LEE,
            session("sess-1", ManagerAction::AutoSelect),
        ),
    );
    assert_eq!(error_codes(&actions), [ErrorCode::Unauthorized]);
    assert_eq!(actions[0].target.user, Some(user(LEE)));
    assert_eq!(
        gw.state().sessions[&SessionId::new("sess-1")].manager,
        Some(user(DANA))
    );
}

#[test]
fn applying_after_another_commit_to_the_file_is_stale() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    submitted_parking_draft(&mut gw, &mut s);
    // a second suggestion, reviewed in parallel
    run(
        &mut gw,
        s.say(
            "general",
            ALEX,
            "Heads up, the lab printer has moved to room 214 next to the mail room.",
        ),
    );
    run(
        &mut gw,
        s.mention("general", ALEX, "<@u-bot> document this"),
    );
    run(
        &mut gw,
        s.click(
            "general",
            ALEX,
            Interaction::SubmitDraft {
                draft_id: DraftId::new("draft-2"),
            },
        ),
    );

    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Start)),
    );
    run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session(
                "sess-1",
                ManagerAction::SelectFile {
                    path: "handbook.md".into(),
                },
            ),
        ),
    );
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-2", ManagerAction::Start)),
    );
    run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session(
                "sess-2",
                ManagerAction::SelectFile {
                    path: "handbook.md".into(),
                },
            ),
        ),
    );
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-2", ManagerAction::Apply)),
    );
    assert_eq!(gw.store().revision(), 1);

    let stale = run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Apply)),
    );
    assert_eq!(error_codes(&stale), [ErrorCode::InvalidState]);
    assert_eq!(gw.store().revision(), 1);
    assert_eq!(
        gw.state().sessions[&SessionId::new("sess-1")].state,
        SessionState::Proposing(0)
    );
}

#[test]
fn a_commit_to_another_file_does_not_make_proposals_stale() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    submitted_parking_draft(&mut gw, &mut s);
    run(
        &mut gw,
        s.say(
            "general",
            ALEX,
            "Heads up, the lab printer has moved to room 214 next to the mail room.",
        ),
    );
    run(
        &mut gw,
        s.mention("general", ALEX, "<@u-bot> document this"),
    );
    run(
        &mut gw,
        s.click(
            "general",
            ALEX,
            Interaction::SubmitDraft {
                draft_id: DraftId::new("draft-2"),
            },
        ),
    );

    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Start)),
    );
    run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session(
                "sess-1",
                ManagerAction::SelectFile {
                    path: "handbook.md".into(),
                },
            ),
        ),
    );
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-2", ManagerAction::Start)),
    );
    run(
        &mut gw,
        s.click(
            "dm:u-dana",
            DANA,
            session(
                "sess-2",
                ManagerAction::SelectFile {
                    path: "equipment.md".into(),
                },
            ),
        ),
    );
    run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-2", ManagerAction::Apply)),
    );

    let applied = run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-1", ManagerAction::Apply)),
    );
    assert!(error_codes(&applied).is_empty(), "{applied:?}");
    assert_eq!(gw.store().revision(), 2);
    assert!(gw.store().snapshot().files["handbook.md"].contains(PARKING));
}

#[test]
fn members_cannot_drive_sessions() {
    let mut gw = gateway(demo_config());
    let mut s = Script::default();
    submitted_parking_draft(&mut gw, &mut s);
    let actions = run(
        &mut gw,
        s.click("dm:u-sam", SAM, session("sess-1", ManagerAction::Start)),
    );
    assert_eq!(error_codes(&actions), [ErrorCode::Unauthorized]);
    let unknown = run(
        &mut gw,
        s.click("dm:u-dana", DANA, session("sess-9", ManagerAction::Start)),
    );
    assert_eq!(error_codes(&unknown), [ErrorCode::NotFound]);
    assert_eq!(
        gw.state().sessions[&SessionId::new("sess-1")].state,
        SessionState::Pending
    );
}
