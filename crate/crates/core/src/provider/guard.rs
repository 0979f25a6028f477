use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    AnchorPayload, AnswerDraft, Intent, Provider, ProviderError, Vector, WindowMessage,
    WindowPayload,
};
use crate::doc_store::DocChunk;
use crate::privacy::{deanonymize, PseudonymMap, Pseudonymizer, Roster};

/// One provider-bound request as it left the process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderCall {
    pub op: String,
    pub payload: serde_json::Value,
}

/// Wraps a provider so that every payload is pseudonymized (one map per
/// call) and every response is de-anonymized before it is returned.
pub struct GuardedProvider {
    inner: Box<dyn Provider>,
    names: Pseudonymizer,
    calls: Mutex<Vec<ProviderCall>>,
}

impl std::fmt::Debug for GuardedProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GuardedProvider").finish_non_exhaustive()
    }
}

impl GuardedProvider {
    pub fn new(inner: Box<dyn Provider>, roster: &Roster) -> Self {
        Self {
            inner,
            names: Pseudonymizer::new(roster),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Calls recorded since the last drain, oldest first.
    pub fn drain_calls(&self) -> Vec<ProviderCall> {
        std::mem::take(&mut *self.calls.lock().expect("call log poisoned"))
    }

    fn record(&self, op: &str, payload: serde_json::Value) {
        self.calls
            .lock()
            .expect("call log poisoned")
            .push(ProviderCall {
                op: op.to_string(),
                payload,
            });
    }

    fn pseudo_chunk(&self, map: &mut PseudonymMap, chunk: &DocChunk) -> DocChunk {
        DocChunk {
            chunk_id: chunk.chunk_id.clone(),
            path: self.names.apply(map, &chunk.path),
            heading_path: chunk
                .heading_path
                .iter()
                .map(|h| self.names.apply(map, h))
                .collect(),
            body: self.names.apply(map, &chunk.body),
            span: chunk.span,
            revision: chunk.revision,
        }
    }

    fn pseudo_message(&self, map: &mut PseudonymMap, m: &WindowMessage) -> WindowMessage {
        WindowMessage {
            author: self.names.apply(map, &m.author),
            from_bot: m.from_bot,
            text: self.names.apply(map, &m.text),
        }
    }
}

impl Provider for GuardedProvider {
    fn embed(&self, text: &str) -> Result<Vector, ProviderError> {
        let mut map = PseudonymMap::default();
        let text = self.names.apply(&mut map, text);
        self.record("embed", json!({ "input": text }));
        self.inner.embed(&text)
    }

    fn classify_intent(&self, message: &str) -> Result<Intent, ProviderError> {
        let mut map = PseudonymMap::default();
        let message = self.names.apply(&mut map, message);
        self.record("classify_intent", json!({ "message": message }));
        self.inner.classify_intent(&message)
    }

    fn compose_answer(
        &self,
        question: &str,
        chunks: &[DocChunk],
    ) -> Result<AnswerDraft, ProviderError> {
        let mut map = PseudonymMap::default();
        let question = self.names.apply(&mut map, question);
        let chunks: Vec<DocChunk> = chunks
            .iter()
            .map(|c| self.pseudo_chunk(&mut map, c))
            .collect();
        self.record(
            "compose_answer",
            json!({
                "question": question,
                "chunks": chunks.iter().map(|c| json!({"path": c.path, "heading_path": c.heading_path, "body": c.body})).collect::<Vec<_>>(),
            }),
        );
        let draft = self.inner.compose_answer(&question, &chunks)?;
        Ok(AnswerDraft {
            text: deanonymize(&draft.text, &map),
            chunk_ids: draft.chunk_ids,
        })
    }

    fn extract_knowledge(&self, window: &WindowPayload) -> Result<String, ProviderError> {
        let mut map = PseudonymMap::default();
        let anchor = window.anchor.as_ref().map(|a| AnchorPayload {
            question: self.names.apply(&mut map, &a.question),
            answer: self.names.apply(&mut map, &a.answer),
        });
        let messages: Vec<WindowMessage> = window
            .messages
            .iter()
            .map(|m| self.pseudo_message(&mut map, m))
            .collect();
        let mention = self.pseudo_message(&mut map, &window.mention);
        let payload = WindowPayload {
            anchor,
            messages,
            mention,
        };
        self.record(
            "extract_knowledge",
            serde_json::to_value(&payload).expect("window serializes"),
        );
        let draft = self.inner.extract_knowledge(&payload)?;
        Ok(deanonymize(&draft, &map))
    }

    fn propose_edit(&self, section: &DocChunk, suggestion: &str) -> Result<String, ProviderError> {
        let mut map = PseudonymMap::default();
        let section = self.pseudo_chunk(&mut map, section);
        let suggestion = self.names.apply(&mut map, suggestion);
        self.record(
            "propose_edit",
            json!({"section": section.body, "heading_path": section.heading_path, "suggestion": suggestion}),
        );
        let proposal = self.inner.propose_edit(&section, &suggestion)?;
        Ok(deanonymize(&proposal, &map))
    }
}
