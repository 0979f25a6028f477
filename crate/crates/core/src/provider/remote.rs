//! OpenAI-compatible HTTP provider.
//!
//! Wire format: `POST {endpoint}/embeddings` with `{model, input}` and
//! `POST {endpoint}/chat/completions` with `{model, messages}`, bearer-token
//! authenticated. Responses are read leniently; unknown fields are ignored.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::templates::fill;
use super::{
    AnswerDraft, Intent, PromptTemplates, Provider, ProviderError, RemoteProfile, Vector,
    WindowPayload,
};
use crate::doc_store::{anchor_link, DocChunk};

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct InFlight {
    available: Mutex<usize>,
    released: Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            available: Mutex::new(limit.max(1)),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("semaphore poisoned");
        while *n == 0 {
            n = self.released.wait(n).expect("semaphore poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a InFlight);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("semaphore poisoned") += 1;
        self.0.released.notify_one();
    }
}

#[derive(Debug)]
pub struct RemoteProvider {
    endpoint: String,
    embedding_model: String,
    chat_model: String,
    token: Option<String>,
    templates: PromptTemplates,
    agent: ureq::Agent,
    in_flight: InFlight,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f32>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

fn map_error(err: ureq::Error) -> ProviderError {
    match err {
        ureq::Error::Timeout(_) => ProviderError::Timeout,
        ureq::Error::StatusCode(code) => ProviderError::Transport {
            message: format!("http status {code}"),
            retryable: code == 429 || code >= 500,
        },
        ureq::Error::Json(e) => ProviderError::BadResponse(e.to_string()),
        other => ProviderError::Transport {
            message: other.to_string(),
            retryable: true,
        },
    }
}

impl RemoteProvider {
    pub fn new(profile: &RemoteProfile, templates: PromptTemplates, token: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(profile.timeout_secs)))
            .http_status_as_error(true)
            .build()
            .into();
        Self {
            endpoint: profile.endpoint.trim_end_matches('/').to_string(),
            embedding_model: profile.embedding_model.clone(),
            chat_model: profile.chat_model.clone(),
            token,
            templates,
            agent,
            in_flight: InFlight::new(profile.max_in_flight),
        }
    }

    fn post<T: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        body: serde_json::Value,
    ) -> Result<T, ProviderError> {
        let _permit = self.in_flight.acquire();
        let mut request = self.agent.post(format!("{}{path}", self.endpoint));
        if let Some(token) = &self.token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = request.send_json(body).map_err(map_error)?;
        response.body_mut().read_json::<T>().map_err(map_error)
    }

    fn chat(&self, prompt: String) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.chat_model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let response: ChatResponse = self.post("/chat/completions", body)?;
        response
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content.unwrap_or_default())
            .ok_or_else(|| ProviderError::BadResponse("no choices in completion".into()))
    }
}

pub(crate) fn render_window(window: &WindowPayload) -> String {
    let mut out = String::new();
    if let Some(anchor) = &window.anchor {
        out.push_str(&format!(
            "[shared Q&A]\nQ: {}\nA: {}\n\n",
            anchor.question, anchor.answer
        ));
    }
    for m in window
        .messages
        .iter()
        .chain(std::iter::once(&window.mention))
    {
        out.push_str(&format!("{}: {}\n", m.author, m.text));
    }
    out
}

fn render_chunks(chunks: &[DocChunk]) -> String {
    chunks
        .iter()
        .enumerate()
        .map(|(i, c)| format!("[{}] {}\n{}", i + 1, anchor_link(c), c.body.trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

impl Provider for RemoteProvider {
    fn embed(&self, text: &str) -> Result<Vector, ProviderError> {
        let body = json!({"model": self.embedding_model, "input": text});
        let response: EmbeddingResponse = self.post("/embeddings", body)?;
        let datum = response
            .data
            .into_iter()
            .next()
            .ok_or_else(|| ProviderError::BadResponse("no embedding in response".into()))?;
        Ok(Vector(datum.embedding).normalized())
    }

    fn classify_intent(&self, message: &str) -> Result<Intent, ProviderError> {
        let reply = self.chat(fill(&self.templates.classify, &[("question", message)]))?;
        let reply = reply.trim().to_lowercase();
        Ok(if reply.starts_with("update") {
            Intent::UpdateRequest
        } else if reply.starts_with("question") {
            Intent::Question
        } else {
            Intent::Chatter
        })
    }

    fn compose_answer(
        &self,
        question: &str,
        chunks: &[DocChunk],
    ) -> Result<AnswerDraft, ProviderError> {
        if chunks.is_empty() {
            return Err(ProviderError::NoChunks);
        }
        let prompt = fill(
            &self.templates.answer,
            &[("question", question), ("chunks", &render_chunks(chunks))],
        );
        Ok(AnswerDraft {
            text: self.chat(prompt)?.trim().to_string(),
            chunk_ids: chunks.iter().map(|c| c.chunk_id.clone()).collect(),
        })
    }

    fn extract_knowledge(&self, window: &WindowPayload) -> Result<String, ProviderError> {
        let prompt = fill(
            &self.templates.extract,
            &[("window", &render_window(window))],
        );
        Ok(self.chat(prompt)?.trim().to_string())
    }

    fn propose_edit(&self, section: &DocChunk, suggestion: &str) -> Result<String, ProviderError> {
        if suggestion.trim().is_empty() {
            return Err(ProviderError::NothingToPropose);
        }
        let prompt = fill(
            &self.templates.propose,
            &[("section", &section.body), ("suggestion", suggestion)],
        );
        Ok(self.chat(prompt)?.trim_end().to_string())
    }
}
