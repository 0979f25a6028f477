//! Language-model and embedding providers.
//!
//! [`MockProvider`] is a deterministic rule-based implementation used by the
//! tests and demo; [`RemoteProvider`] talks to an OpenAI-compatible HTTP
//! API. Callers inside the service always go through [`GuardedProvider`],
//! which pseudonymizes every payload and keeps a log of what was sent.

mod guard;
mod mock;
mod remote;
mod templates;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use guard::{GuardedProvider, ProviderCall};
pub use mock::{strip_leading_mentions, MockProvider, GREETINGS, QUESTION_WORDS, UPDATE_MARKERS};
pub use remote::RemoteProvider;
pub use templates::PromptTemplates;

use crate::doc_store::DocChunk;
use crate::ids::ChunkId;

pub const DEFAULT_DIMENSION: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("provider request timed out")]
    Timeout,
    #[error("unexpected provider response: {0}")]
    BadResponse(String),
    #[error("nothing to propose")]
    NothingToPropose,
    #[error("no chunks supplied for answer composition")]
    NoChunks,
    #[error("provider configuration: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport { retryable, .. } => *retryable,
            ProviderError::Timeout => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Question,
    UpdateRequest,
    Chatter,
}

/// Embedding vector; unit norm unless all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(pub Vec<f32>);

impl Vector {
    pub fn zeros(dimension: usize) -> Self {
        Self(vec![0.0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|c| f64::from(*c) * f64::from(*c))
            .sum::<f64>()
            .sqrt()
    }

    /// Scales to unit norm; the zero vector is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            for c in &mut self.0 {
                *c = (f64::from(*c) / norm) as f32;
            }
        }
        self
    }
}

/// Cosine similarity; 0 when either side is the zero vector.
pub fn cosine(a: &Vector, b: &Vector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 =
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| f64::from(*x) * f64::from(*y))
            .sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerDraft {
    pub text: String,
    /// Ids of every chunk supplied, in input order.
    pub chunk_ids: Vec<ChunkId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowMessage {
    pub author: String,
    pub from_bot: bool,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorPayload {
    pub question: String,
    pub answer: String,
}

/// Provider-facing form of a conversation window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPayload {
    pub anchor: Option<AnchorPayload>,
    pub messages: Vec<WindowMessage>,
    pub mention: WindowMessage,
}

pub trait Provider: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vector, ProviderError>;

    fn classify_intent(&self, message: &str) -> Result<Intent, ProviderError>;

    /// `chunks` must be non-empty and ranked best first.
    fn compose_answer(
        &self,
        question: &str,
        chunks: &[DocChunk],
    ) -> Result<AnswerDraft, ProviderError>;

    /// Documentable content of the window; may be empty.
    fn extract_knowledge(&self, window: &WindowPayload) -> Result<String, ProviderError>;

    /// New body for `section` incorporating `suggestion`.
    fn propose_edit(&self, section: &DocChunk, suggestion: &str) -> Result<String, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn embed(&self, text: &str) -> Result<Vector, ProviderError> {
        (**self).embed(text)
    }
    fn classify_intent(&self, message: &str) -> Result<Intent, ProviderError> {
        (**self).classify_intent(message)
    }
    fn compose_answer(
        &self,
        question: &str,
        chunks: &[DocChunk],
    ) -> Result<AnswerDraft, ProviderError> {
        (**self).compose_answer(question, chunks)
    }
    fn extract_knowledge(&self, window: &WindowPayload) -> Result<String, ProviderError> {
        (**self).extract_knowledge(window)
    }
    fn propose_edit(&self, section: &DocChunk, suggestion: &str) -> Result<String, ProviderError> {
        (**self).propose_edit(section, suggestion)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteProfile {
    /// Base URL; `/embeddings` and `/chat/completions` are appended.
    pub endpoint: String,
    pub embedding_model: String,
    pub chat_model: String,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Directory with `answer.txt`, `classify.txt`, `extract.txt` and
    /// `propose.txt`; missing files fall back to the built-in templates.
    #[serde(default)]
    pub prompts_dir: Option<PathBuf>,
}

fn default_token_env() -> String {
    "ORGMEM_PROVIDER_TOKEN".into()
}
fn default_timeout() -> u64 {
    30
}
fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderProfile {
    #[default]
    Mock,
    Remote(RemoteProfile),
}

impl ProviderProfile {
    pub fn build(&self, dimension: usize) -> Result<Box<dyn Provider>, ProviderError> {
        match self {
            ProviderProfile::Mock => Ok(Box::new(MockProvider::new(dimension))),
            ProviderProfile::Remote(remote) => {
                let templates = match &remote.prompts_dir {
                    Some(dir) => PromptTemplates::load_dir(dir)
                        .map_err(|e| ProviderError::Config(format!("{}: {e}", dir.display())))?,
                    None => PromptTemplates::default(),
                };
                let token = std::env::var(&remote.token_env).ok();
                Ok(Box::new(RemoteProvider::new(remote, templates, token)))
            }
        }
    }
}
