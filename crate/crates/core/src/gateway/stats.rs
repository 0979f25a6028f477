//! Usage statistics, computed from the audit log alone.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::audit::{AuditEntry, AuditRecord, CommitMethod, OriginKind};
use crate::privacy::Role;
use crate::share::ShareMode;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByRole {
    pub member: u64,
    pub manager: u64,
}

impl ByRole {
    fn bump(&mut self, role: Role) {
        match role {
            Role::Member => self.member += 1,
            Role::Manager => self.manager += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.member + self.manager
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionStats {
    pub channel: ByRole,
    pub dm: ByRole,
    pub total: u64,
    pub answered: u64,
    /// `answered / total`, 0 when there were no questions.
    pub answered_rate: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByAnonymity {
    pub named: u64,
    pub anonymous: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareStats {
    pub to_channel: ByAnonymity,
    pub to_private: ByAnonymity,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitStats {
    pub commits: u64,
    /// Distinct files touched by these commits.
    pub files_touched: u64,
    pub words_added: u64,
    pub words_deleted: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitsByMethod {
    pub assisted: CommitStats,
    pub direct: CommitStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub questions: QuestionStats,
    pub shares: ShareStats,
    pub commits: CommitsByMethod,
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("stats serialize");
        out.push('\n');
        out
    }

    pub fn to_table(&self) -> String {
        let q = &self.questions;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<28}{:>8}{:>8}{:>8}",
            "questions", "member", "manager", "total"
        );
        let _ = writeln!(
            out,
            "{:<28}{:>8}{:>8}{:>8}",
            "  channel",
            q.channel.member,
            q.channel.manager,
            q.channel.total()
        );
        let _ = writeln!(
            out,
            "{:<28}{:>8}{:>8}{:>8}",
            "  dm",
            q.dm.member,
            q.dm.manager,
            q.dm.total()
        );
        let _ = writeln!(
            out,
            "{:<28}{:>24}",
            "  answered",
            format!(
                "{} of {} ({:.1}%)",
                q.answered,
                q.total,
                q.answered_rate * 100.0
            )
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<28}{:>8}{:>10}", "shares", "named", "anonymous");
        let s = &self.shares;
        let _ = writeln!(
            out,
            "{:<28}{:>8}{:>10}",
            "  to_channel", s.to_channel.named, s.to_channel.anonymous
        );
        let _ = writeln!(
            out,
            "{:<28}{:>8}{:>10}",
            "  to_private", s.to_private.named, s.to_private.anonymous
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<28}{:>8}{:>8}{:>8}{:>8}",
            "commits", "count", "files", "+words", "-words"
        );
        for (label, c) in [
            ("  assisted", &self.commits.assisted),
            ("  direct", &self.commits.direct),
        ] {
            let _ = writeln!(
                out,
                "{label:<28}{:>8}{:>8}{:>8}{:>8}",
                c.commits, c.files_touched, c.words_added, c.words_deleted
            );
        }
        out
    }
}

/// Pure function of the log.
pub fn stats(log: &[AuditEntry]) -> StatsReport {
    let mut report = StatsReport::default();
    let mut files: [BTreeSet<&str>; 2] = [BTreeSet::new(), BTreeSet::new()];
    for entry in log {
        match &entry.record {
            AuditRecord::Question {
                role,
                origin,
                answered,
                ..
            } => {
                match origin {
                    OriginKind::Channel => report.questions.channel.bump(*role),
                    OriginKind::Dm => report.questions.dm.bump(*role),
                }
                report.questions.total += 1;
                if *answered {
                    report.questions.answered += 1;
                }
            }
            AuditRecord::Share {
                mode, anonymous, ..
            } => {
                let bucket = match mode {
                    ShareMode::ToChannel => &mut report.shares.to_channel,
                    ShareMode::ToPrivate => &mut report.shares.to_private,
                };
                if *anonymous {
                    bucket.anonymous += 1;
                } else {
                    bucket.named += 1;
                }
            }
            AuditRecord::Commit {
                method,
                files: touched,
                words_added,
                words_deleted,
                ..
            } => {
                let (bucket, seen) = match method {
                    CommitMethod::Assisted => (&mut report.commits.assisted, &mut files[0]),
                    CommitMethod::Direct => (&mut report.commits.direct, &mut files[1]),
                };
                bucket.commits += 1;
                bucket.words_added += *words_added as u64;
                bucket.words_deleted += *words_deleted as u64;
                seen.extend(touched.iter().map(String::as_str));
                bucket.files_touched = seen.len() as u64;
            }
            _ => {}
        }
    }
    if report.questions.total > 0 {
        report.questions.answered_rate =
            report.questions.answered as f64 / report.questions.total as f64;
    }
    report
}
