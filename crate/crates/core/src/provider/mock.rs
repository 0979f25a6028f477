//! Deterministic rule-based provider.

use super::{AnswerDraft, Intent, Provider, ProviderError, Vector, WindowMessage, WindowPayload};
use crate::doc_store::DocChunk;

pub const UPDATE_MARKERS: [&str; 4] = ["update", "save this", "document this", "add this"];
pub const QUESTION_WORDS: [&str; 13] = [
    "who", "what", "when", "where", "why", "how", "can", "could", "does", "do", "is", "are",
    "should",
];
pub const GREETINGS: [&str; 5] = ["hi", "hey", "hello", "thanks", "thank"];
const MIN_DOCUMENTABLE_TOKENS: usize = 8;
const ANSWER_PREFIX: &str = "Based on the documentation: ";

#[derive(Debug, Clone)]
pub struct MockProvider {
    dimension: usize,
}

impl MockProvider {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }
}

impl Default for MockProvider {
    fn default() -> Self {
        Self::new(super::DEFAULT_DIMENSION)
    }
}

/// Lowercase alphanumeric runs.
pub(crate) fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// First blank-line separated block that is not a heading line.
fn first_paragraph(body: &str) -> &str {
    let mut start: Option<usize> = None;
    let mut end = body.len();
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        let trimmed = line.trim();
        let is_heading = crate::doc_store::is_heading_line(line);
        match start {
            None if !trimmed.is_empty() && !is_heading => start = Some(offset),
            Some(_) if trimmed.is_empty() || is_heading => {
                end = offset;
                break;
            }
            _ => {}
        }
        offset += line.len();
    }
    match start {
        Some(s) => body[s..end].trim(),
        None => "",
    }
}

/// Removes leading `<@...>` mention tokens.
pub fn strip_leading_mentions(text: &str) -> &str {
    let mut rest = text.trim_start();
    while let Some(inner) = rest.strip_prefix("<@") {
        match inner.find('>') {
            Some(close) => rest = inner[close + 1..].trim_start(),
            None => break,
        }
    }
    rest.trim()
}

fn is_documentable(message: &WindowMessage) -> bool {
    if message.from_bot {
        return false;
    }
    let Some(first) = message
        .text
        .split_whitespace()
        .find(|w| !w.starts_with("<@"))
    else {
        return false;
    };
    let first = first
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    if GREETINGS.contains(&first.as_str()) {
        return false;
    }
    message.text.split_whitespace().count() >= MIN_DOCUMENTABLE_TOKENS
}

impl Provider for MockProvider {
    fn embed(&self, text: &str) -> Result<Vector, ProviderError> {
        let mut v = Vector::zeros(self.dimension);
        for token in tokens(text) {
            let bucket = (fnv1a(token.as_bytes()) % self.dimension as u64) as usize;
            v.0[bucket] += 1.0;
        }
        Ok(v.normalized())
    }

    fn classify_intent(&self, message: &str) -> Result<Intent, ProviderError> {
        let lower = message.to_lowercase();
        if UPDATE_MARKERS.iter().any(|m| lower.contains(m)) {
            return Ok(Intent::UpdateRequest);
        }
        let first = tokens(message).next();
        if message.trim_end().ends_with('?')
            || first.is_some_and(|t| QUESTION_WORDS.contains(&t.as_str()))
        {
            return Ok(Intent::Question);
        }
        Ok(Intent::Chatter)
    }

    fn compose_answer(
        &self,
        _question: &str,
        chunks: &[DocChunk],
    ) -> Result<AnswerDraft, ProviderError> {
        let top = chunks.first().ok_or(ProviderError::NoChunks)?;
        Ok(AnswerDraft {
            text: format!("{ANSWER_PREFIX}{}", first_paragraph(&top.body)),
            chunk_ids: chunks.iter().map(|c| c.chunk_id.clone()).collect(),
        })
    }

    fn extract_knowledge(&self, window: &WindowPayload) -> Result<String, ProviderError> {
        let kept: Vec<&str> = window
            .messages
            .iter()
            .chain(std::iter::once(&window.mention))
            .filter(|m| is_documentable(m))
            .map(|m| strip_leading_mentions(&m.text))
            .collect();
        Ok(kept.join("\n\n"))
    }

    fn propose_edit(&self, section: &DocChunk, suggestion: &str) -> Result<String, ProviderError> {
        if suggestion.trim().is_empty() {
            return Err(ProviderError::NothingToPropose);
        }
        Ok(format!("{}\n\n{}", section.body, suggestion))
    }
}
