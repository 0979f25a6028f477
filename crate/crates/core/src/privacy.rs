//! Reversible pseudonymization of roster identities.
//!
//! Every roster display name (whole word, case-insensitive, longest name
//! first) and every `<@user-id>` mention token for a roster id is replaced
//! by a `Member-NN` pseudonym. Pseudonyms are numbered from `Member-01` in
//! order of first appearance, and one [`PseudonymMap`] covers one provider
//! call: pass the same map to [`Pseudonymizer::apply`] for every field of a
//! payload so a person keeps one pseudonym throughout it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::UserId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Manager,
    Member,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub display_name: String,
    pub role: Role,
    #[serde(default = "default_true")]
    pub active: bool,
    /// Profile image reference shown next to attributed posts.
    #[serde(default)]
    pub avatar: Option<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RosterError {
    #[error("display name {0:?} is used by more than one roster entry")]
    DuplicateName(String),
    #[error("roster has no manager")]
    NoManager,
    #[error("empty display name for {0}")]
    EmptyName(UserId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Roster {
    pub entries: BTreeMap<UserId, RosterEntry>,
}

impl Roster {
    pub fn new(
        entries: impl IntoIterator<Item = (UserId, RosterEntry)>,
    ) -> Result<Self, RosterError> {
        let roster = Self {
            entries: entries.into_iter().collect(),
        };
        roster.validate()?;
        Ok(roster)
    }

    pub fn validate(&self) -> Result<(), RosterError> {
        let mut seen = BTreeMap::new();
        for (id, entry) in &self.entries {
            let name = entry.display_name.trim();
            if name.is_empty() {
                return Err(RosterError::EmptyName(id.clone()));
            }
            if seen.insert(name.to_lowercase(), id).is_some() {
                return Err(RosterError::DuplicateName(entry.display_name.clone()));
            }
        }
        if !self.entries.values().any(|e| e.role == Role::Manager) {
            return Err(RosterError::NoManager);
        }
        Ok(())
    }

    pub fn get(&self, id: &UserId) -> Option<&RosterEntry> {
        self.entries.get(id)
    }

    pub fn display_name(&self, id: &UserId) -> Option<&str> {
        self.entries.get(id).map(|e| e.display_name.as_str())
    }

    pub fn role(&self, id: &UserId) -> Option<Role> {
        self.entries.get(id).map(|e| e.role)
    }

    pub fn is_manager(&self, id: &UserId) -> bool {
        self.role(id) == Some(Role::Manager)
    }

    /// Active managers in id order.
    pub fn managers(&self) -> Vec<UserId> {
        self.entries
            .iter()
            .filter(|(_, e)| e.role == Role::Manager && e.active)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.values().map(|e| e.display_name.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudonymMap {
    /// (user id, display name, pseudonym) in assignment order.
    assigned: Vec<(UserId, String, String)>,
}

impl PseudonymMap {
    pub fn is_empty(&self) -> bool {
        self.assigned.is_empty()
    }

    pub fn len(&self) -> usize {
        self.assigned.len()
    }

    pub fn forward(&self, display_name: &str) -> Option<&str> {
        self.assigned
            .iter()
            .find(|(_, name, _)| name == display_name)
            .map(|(_, _, p)| p.as_str())
    }

    pub fn reverse(&self, pseudonym: &str) -> Option<&str> {
        self.lookup(pseudonym).map(|(_, name, _)| name.as_str())
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.assigned
            .iter()
            .map(|(_, n, p)| (n.as_str(), p.as_str()))
    }

    fn lookup(&self, pseudonym: &str) -> Option<&(UserId, String, String)> {
        self.assigned.iter().find(|(_, _, p)| p == pseudonym)
    }

    fn pseudonym_for(&mut self, id: &UserId, name: &str) -> String {
        if let Some((_, _, p)) = self.assigned.iter().find(|(uid, _, _)| uid == id) {
            return p.clone();
        }
        let p = format!("Member-{:02}", self.assigned.len() + 1);
        self.assigned
            .push((id.clone(), name.to_string(), p.clone()));
        p
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Length in bytes of `name` matched case-insensitively at the start of
/// `text`, if it matches.
fn match_ignore_case(text: &str, name: &str) -> Option<usize> {
    let mut text_chars = text.char_indices();
    for n in name.chars() {
        let (_, t) = text_chars.next()?;
        if t != n && !t.to_lowercase().eq(n.to_lowercase()) {
            return None;
        }
    }
    Some(text_chars.next().map_or(text.len(), |(i, _)| i))
}

/// Roster names prepared for matching.
#[derive(Debug, Clone)]
pub struct Pseudonymizer {
    /// (id, display name) sorted by descending name length.
    names: Vec<(UserId, String)>,
}

impl Pseudonymizer {
    pub fn new(roster: &Roster) -> Self {
        let mut names: Vec<(UserId, String)> = roster
            .entries
            .iter()
            .map(|(id, e)| (id.clone(), e.display_name.trim().to_string()))
            .collect();
        names.sort_by(|a, b| {
            b.1.chars()
                .count()
                .cmp(&a.1.chars().count())
                .then(a.1.cmp(&b.1))
        });
        Self { names }
    }

    /// Pseudonymizes `text`, extending `map` with newly seen identities.
    pub fn apply(&self, map: &mut PseudonymMap, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        let mut prev: Option<char> = None;
        while i < text.len() {
            let rest = &text[i..];
            if let Some((len, id)) = self.mention_at(rest) {
                let name = &self.names.iter().find(|(uid, _)| uid == id).unwrap().1;
                out.push_str("<@");
                out.push_str(&map.pseudonym_for(id, name));
                out.push('>');
                i += len;
                prev = Some('>');
                continue;
            }
            if !prev.is_some_and(is_word_char) {
                if let Some((len, id, name)) = self.name_at(rest) {
                    out.push_str(&map.pseudonym_for(id, name));
                    i += len;
                    prev = rest[..len].chars().next_back();
                    continue;
                }
            }
            let c = rest.chars().next().expect("i is a char boundary");
            out.push(c);
            i += c.len_utf8();
            prev = Some(c);
        }
        out
    }

    fn mention_at<'a>(&'a self, rest: &str) -> Option<(usize, &'a UserId)> {
        let inner = rest.strip_prefix("<@")?;
        let close = inner.find('>')?;
        let id = &inner[..close];
        self.names
            .iter()
            .find(|(uid, _)| uid.as_str() == id)
            .map(|(uid, _)| (close + 3, uid))
    }

    fn name_at<'a>(&'a self, rest: &str) -> Option<(usize, &'a UserId, &'a str)> {
        self.names.iter().find_map(|(id, name)| {
            let len = match_ignore_case(rest, name)?;
            let next = rest[len..].chars().next();
            (!next.is_some_and(is_word_char)).then_some((len, id, name.as_str()))
        })
    }
}

/// Pseudonymizes one text with a fresh per-call map.
pub fn pseudonymize(text: &str, roster: &Roster) -> (String, PseudonymMap) {
    let mut map = PseudonymMap::default();
    let out = Pseudonymizer::new(roster).apply(&mut map, text);
    (out, map)
}

/// Replaces every pseudonym known to `map`: `<@Member-NN>` becomes the
/// original mention token and a bare `Member-NN` becomes the display name.
pub fn deanonymize(text: &str, map: &PseudonymMap) -> String {
    if map.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut prev: Option<char> = None;
    while i < text.len() {
        let rest = &text[i..];
        if let Some(inner) = rest.strip_prefix("<@") {
            if let Some((len, entry)) = pseudonym_at(inner, map) {
                if inner[len..].starts_with('>') {
                    out.push_str("<@");
                    out.push_str(entry.0.as_str());
                    out.push('>');
                    i += len + 3;
                    prev = Some('>');
                    continue;
                }
            }
        }
        if !prev.is_some_and(is_word_char) {
            if let Some((len, entry)) = pseudonym_at(rest, map) {
                out.push_str(&entry.1);
                i += len;
                prev = entry.1.chars().next_back();
                continue;
            }
        }
        let c = rest.chars().next().expect("i is a char boundary");
        out.push(c);
        i += c.len_utf8();
        prev = Some(c);
    }
    out
}

fn pseudonym_at<'m>(
    rest: &str,
    map: &'m PseudonymMap,
) -> Option<(usize, &'m (UserId, String, String))> {
    let digits = rest.strip_prefix("Member-")?;
    let n = digits.chars().take_while(char::is_ascii_digit).count();
    if n < 2 || digits[n..].chars().next().is_some_and(is_word_char) {
        return None;
    }
    let len = "Member-".len() + n;
    map.lookup(&rest[..len]).map(|entry| (len, entry))
}

/// Whole-word, case-insensitive occurrences of `name` in `text`.
pub fn contains_name(text: &str, name: &str) -> bool {
    let name = name.trim();
    if name.is_empty() {
        return false;
    }
    let mut prev: Option<char> = None;
    for (i, c) in text.char_indices() {
        if !prev.is_some_and(is_word_char) {
            if let Some(len) = match_ignore_case(&text[i..], name) {
                if !text[i + len..].chars().next().is_some_and(is_word_char) {
                    return true;
                }
            }
        }
        prev = Some(c);
    }
    false
}

/// Replaces every occurrence of one person's name and mention token with
/// `replacement`.
pub fn scrub_person(text: &str, id: &UserId, name: &str, replacement: &str) -> String {
    let single = Roster {
        entries: [(
            id.clone(),
            RosterEntry {
                display_name: name.to_string(),
                role: Role::Member,
                active: true,
                avatar: None,
            },
        )]
        .into(),
    };
    let mut map = PseudonymMap::default();
    let pseudo = Pseudonymizer::new(&single).apply(&mut map, text);
    if map.is_empty() {
        return text.to_string();
    }
    let (_, _, p) = &map.assigned[0];
    pseudo
        .replace(&format!("<@{p}>"), replacement)
        .replace(p.as_str(), replacement)
}
