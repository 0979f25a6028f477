use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ConversationId, UserId};
use crate::privacy::{Roster, RosterError};
use crate::provider::{ProviderProfile, DEFAULT_DIMENSION};
use crate::retrieval::{DEFAULT_THETA, REFERENCE_CAP};

pub const DEFAULT_MAX_CHARS: usize = 1200;
pub const DEFAULT_EDITOR_TEMPLATE: &str = "file://{root}/{path}";
pub const AUDIT_FILE: &str = ".om-audit.jsonl";
pub const STATE_FILE: &str = ".om-state.json";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error(transparent)]
    Roster(#[from] RosterError),
    #[error("theta must lie in (0, 1), got {0}")]
    Theta(f64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("bot id {0} collides with a roster id")]
    BotInRoster(UserId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotIdentity {
    pub id: UserId,
    #[serde(default = "default_bot_name")]
    pub name: String,
}

fn default_bot_name() -> String {
    "OrgBot".into()
}

/// Workspace configuration, read from one TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceConfig {
    /// Repository directory; relative paths resolve against the config file.
    pub repo_root: PathBuf,
    pub bot: BotIdentity,
    /// Designated Q&A channel; required for channel sharing.
    #[serde(default)]
    pub qa_channel: Option<ConversationId>,
    /// Channels shown to clients; every active roster member belongs to each.
    #[serde(default)]
    pub channels: Vec<ConversationId>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Retrieval depth and reference cap.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_max_chars")]
    pub max_chars: usize,
    /// How many of a file's best chunks are averaged by automatic file
    /// selection.
    #[serde(default = "default_autoselect_top")]
    pub autoselect_top: usize,
    #[serde(default = "default_editor_template")]
    pub editor_url_template: String,
    #[serde(default)]
    pub provider: ProviderProfile,
    /// Optional endpoint receiving every commit record.
    #[serde(default)]
    pub sync_endpoint: Option<String>,
    #[serde(default)]
    pub audit_path: Option<PathBuf>,
    #[serde(default)]
    pub state_path: Option<PathBuf>,
    pub roster: Roster,
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}
fn default_k() -> usize {
    REFERENCE_CAP
}
fn default_dimension() -> usize {
    DEFAULT_DIMENSION
}
fn default_max_chars() -> usize {
    DEFAULT_MAX_CHARS
}
fn default_autoselect_top() -> usize {
    2
}
fn default_editor_template() -> String {
    DEFAULT_EDITOR_TEMPLATE.into()
}

impl WorkspaceConfig {
    pub fn new(repo_root: impl Into<PathBuf>, bot: BotIdentity, roster: Roster) -> Self {
        Self {
            repo_root: repo_root.into(),
            bot,
            qa_channel: None,
            channels: Vec::new(),
            theta: DEFAULT_THETA,
            k: REFERENCE_CAP,
            dimension: DEFAULT_DIMENSION,
            max_chars: DEFAULT_MAX_CHARS,
            autoselect_top: 2,
            editor_url_template: DEFAULT_EDITOR_TEMPLATE.into(),
            provider: ProviderProfile::Mock,
            sync_endpoint: None,
            audit_path: None,
            state_path: None,
            roster,
        }
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads, validates and resolves relative paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.repo_root);
        if let Some(p) = &mut self.audit_path {
            resolve(p);
        }
        if let Some(p) = &mut self.state_path {
            resolve(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.roster.validate()?;
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(ConfigError::Theta(self.theta));
        }
        if self.k == 0 {
            return Err(ConfigError::ZeroK);
        }
        if self.roster.get(&self.bot.id).is_some() {
            return Err(ConfigError::BotInRoster(self.bot.id.clone()));
        }
        Ok(())
    }

    pub fn managers(&self) -> Vec<UserId> {
        self.roster.managers()
    }

    pub fn audit_path(&self) -> PathBuf {
        self.audit_path
            .clone()
            .unwrap_or_else(|| self.repo_root.join(AUDIT_FILE))
    }

    pub fn state_path(&self) -> PathBuf {
        self.state_path
            .clone()
            .unwrap_or_else(|| self.repo_root.join(STATE_FILE))
    }

    /// All channels clients should list, Q&A channel included.
    pub fn all_channels(&self) -> Vec<ConversationId> {
        let mut out = self.channels.clone();
        if let Some(qa) = &self.qa_channel {
            if !out.contains(qa) {
                out.insert(0, qa.clone());
            }
        }
        out
    }

    pub fn editor_url(&self, path: &str) -> String {
        self.editor_url_template
            .replace("{root}", &self.repo_root.display().to_string())
            .replace("{path}", path)
    }

    /// Display name for a user, or the bot's name, or the raw id.
    pub fn name_of(&self, id: &UserId) -> String {
        if *id == self.bot.id {
            return self.bot.name.clone();
        }
        self.roster
            .display_name(id)
            .map(str::to_string)
            .unwrap_or_else(|| id.to_string())
    }
}
