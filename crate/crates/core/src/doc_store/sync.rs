//! Outbound notification of commits to an external mirror.

use std::time::Duration;

use super::CommitRecord;

pub trait RemoteSync: Send + Sync {
    fn push(&self, commit: &CommitRecord) -> Result<(), String>;
}

/// Default sync: logs the commit and does nothing else.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoopSync;

impl RemoteSync for NoopSync {
    fn push(&self, commit: &CommitRecord) -> Result<(), String> {
        tracing::info!(
            commit = commit.commit_id,
            author = %commit.author,
            "commit recorded (remote sync disabled)"
        );
        Ok(())
    }
}

/// POSTs each commit record as JSON to `endpoint`.
#[derive(Debug, Clone)]
pub struct HttpSync {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpSync {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            agent,
        }
    }
}

impl RemoteSync for HttpSync {
    fn push(&self, commit: &CommitRecord) -> Result<(), String> {
        self.agent
            .post(&self.endpoint)
            .send_json(commit)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}
