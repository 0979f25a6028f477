//! String newtypes for the identifiers that cross module boundaries.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// A chat-platform user id.
    UserId
);
string_id!(
    /// `path::ordinal` identifier of a chunk within a snapshot.
    ChunkId
);
string_id!(ExchangeId);
string_id!(DraftId);
string_id!(SessionId);
string_id!(
    /// A channel, DM, or group conversation id.
    ConversationId
);

impl ConversationId {
    /// The bot's DM conversation with `user`.
    pub fn dm(user: &UserId) -> Self {
        Self(format!("dm:{}", user.0))
    }

    pub fn is_dm(&self) -> bool {
        self.0.starts_with("dm:")
    }
}
