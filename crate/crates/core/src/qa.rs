//! Grounded question answering: retrieve, judge, compose, and post the
//! answer, its evidence thread and the questioner-only share banner.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::doc_store::{anchor_link, Revision};
use crate::gateway::audit::{AuditRecord, OriginKind};
use crate::gateway::{AnswerOutcome, Button, ChatEvent, ErrorCode, Interaction, Payload};
use crate::ids::{ChunkId, ConversationId, ExchangeId, UserId};
use crate::privacy::Role;
use crate::retrieval::{judge_capped, ScoredChunk, Verdict};
use crate::share::ShareMode;
use crate::workspace::Turn;

pub const SNIPPET_CHARS: usize = 240;
pub const ABSTAIN_NOTICE: &str = "I could not find this in the lab documents.";
pub const APOLOGY: &str =
    "Sorry, I could not reach the answering service just now. Please try again in a moment.";
pub const BANNER_TEXT: &str = "Want more input? Share this exchange with the team.";
pub const ASK_CHANNEL: &str = "Ask the Q&A Channel";
pub const ASK_PRIVATE: &str = "Ask in Private";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub chunk_id: ChunkId,
    pub anchor: String,
    /// First (at most) 240 characters of the chunk body, verbatim.
    pub snippet: String,
    pub score: f64,
    pub path: String,
    pub revision: Revision,
}

impl Reference {
    pub fn from_scored(scored: &ScoredChunk) -> Self {
        Self {
            chunk_id: scored.chunk.chunk_id.clone(),
            anchor: anchor_link(&scored.chunk),
            snippet: scored.chunk.body.chars().take(SNIPPET_CHARS).collect(),
            score: scored.score,
            path: scored.chunk.path.clone(),
            revision: scored.chunk.revision,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "text", rename_all = "snake_case")]
pub enum Outcome {
    Answered(String),
    Abstained(String),
}

impl Outcome {
    pub fn text(&self) -> &str {
        match self {
            Outcome::Answered(t) | Outcome::Abstained(t) => t,
        }
    }

    pub fn is_answered(&self) -> bool {
        matches!(self, Outcome::Answered(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAExchange {
    pub exchange_id: ExchangeId,
    pub questioner: UserId,
    pub question: String,
    pub outcome: Outcome,
    /// Cited chunks when answered; related passages when abstaining.
    pub references: Vec<Reference>,
    pub origin: ConversationId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread: Option<String>,
    pub timestamp: DateTime<Utc>,
}

/// Abstain notice listing related anchors, if any.
pub fn abstain_text(related: &[Reference]) -> String {
    if related.is_empty() {
        return ABSTAIN_NOTICE.to_string();
    }
    let mut text = format!("{ABSTAIN_NOTICE} These passages may be related:");
    for r in related {
        text.push_str("\n- ");
        text.push_str(&r.anchor);
    }
    text
}

fn dedup_anchors(references: &[Reference]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in references {
        if !out.contains(&r.anchor) {
            out.push(r.anchor.clone());
        }
    }
    out
}

/// Answers `question` from `event`. Returns the stored exchange id, or
/// `None` if the provider failed (an apology is posted instead).
pub fn handle_question(
    turn: &mut Turn<'_>,
    event: &ChatEvent,
    question: &str,
) -> Option<ExchangeId> {
    let conversation = &event.conversation;
    let thread = event.thread.as_deref();

    let scored = match turn.index.search(turn.provider, question, turn.config.k) {
        Ok(s) => s,
        Err(err) => return apologize(turn, event, &err.to_string()),
    };
    let verdict = judge_capped(&scored, turn.config.theta, turn.config.k);
    let references: Vec<Reference> = verdict
        .chunks()
        .iter()
        .map(Reference::from_scored)
        .collect();
    let outcome = match &verdict {
        Verdict::Answerable(chunks) => {
            let chunks: Vec<_> = chunks.iter().map(|s| s.chunk.clone()).collect();
            match turn.provider.compose_answer(question, &chunks) {
                Ok(draft) => Outcome::Answered(draft.text),
                Err(err) => return apologize(turn, event, &err.to_string()),
            }
        }
        Verdict::Abstain(_) => Outcome::Abstained(abstain_text(&references)),
    };

    let exchange_id = turn.state.next_exchange_id();
    let answered = outcome.is_answered();
    let answer_id = turn.post(
        conversation,
        thread,
        Payload::Answer {
            exchange_id: exchange_id.clone(),
            outcome: if answered {
                AnswerOutcome::Answered
            } else {
                AnswerOutcome::Abstained
            },
            text: outcome.text().to_string(),
            anchors: dedup_anchors(&references),
        },
    );
    if !references.is_empty() {
        // evidence hangs under the thread the answer lives in
        let evidence_thread = thread.map(str::to_string).unwrap_or(answer_id);
        turn.post(
            conversation,
            Some(&evidence_thread),
            Payload::Evidence {
                exchange_id: exchange_id.clone(),
                title: if answered {
                    "References"
                } else {
                    "Related passages"
                }
                .to_string(),
                references: references.clone(),
            },
        );
    }
    let mut buttons = Vec::with_capacity(2);
    if turn.config.qa_channel.is_some() {
        buttons.push(Button::new(
            ASK_CHANNEL,
            Interaction::OpenShare {
                exchange_id: exchange_id.clone(),
                mode: ShareMode::ToChannel,
            },
        ));
    }
    buttons.push(Button::new(
        ASK_PRIVATE,
        Interaction::OpenShare {
            exchange_id: exchange_id.clone(),
            mode: ShareMode::ToPrivate,
        },
    ));
    turn.ephemeral(
        conversation,
        &event.author,
        Payload::ShareBanner {
            exchange_id: exchange_id.clone(),
            text: BANNER_TEXT.to_string(),
            buttons,
        },
    );

    turn.record(AuditRecord::Question {
        exchange_id: exchange_id.clone(),
        questioner: event.author.clone(),
        role: turn
            .config
            .roster
            .role(&event.author)
            .unwrap_or(Role::Member),
        origin: OriginKind::of(conversation),
        answered,
    });
    tracing::info!(%exchange_id, answered, refs = references.len(), "question handled");
    turn.state.exchanges.insert(
        exchange_id.clone(),
        QAExchange {
            exchange_id: exchange_id.clone(),
            questioner: event.author.clone(),
            question: question.to_string(),
            outcome,
            references,
            origin: conversation.clone(),
            thread: event.thread.clone(),
            timestamp: event.timestamp,
        },
    );
    Some(exchange_id)
}

fn apologize(turn: &mut Turn<'_>, event: &ChatEvent, reason: &str) -> Option<ExchangeId> {
    tracing::warn!(event = %event.event_id, reason, "question failed");
    turn.note(format!("question {} failed: {reason}", event.event_id));
    turn.post(
        &event.conversation,
        event.thread.as_deref(),
        Payload::Error {
            code: ErrorCode::Provider,
            message: APOLOGY.to_string(),
        },
    );
    None
}
