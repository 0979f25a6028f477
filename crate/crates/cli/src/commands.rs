use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::Utc;
use orgmem_core::doc_store::{DocStore, JOURNAL_FILE};
use orgmem_core::gateway::adapter::{read_transcript, SimulatedAdapter};
use orgmem_core::gateway::audit::{read_log, AuditLog};
use orgmem_core::gateway::stats::stats as summarize;
use orgmem_core::gateway::{ChatEvent, EventKind, Gateway, Payload, WorkspaceConfig};
use orgmem_core::ids::{ConversationId, UserId};

use crate::{Common, Format};

const SAMPLE_HANDBOOK: &str = "# Handbook\n\n## Getting started\n\nWrite down what newcomers need to know here. The bot answers questions from these files and proposes updates for managers to approve.\n";

const SAMPLE_CONFIG: &str = r#"repo_root = "repo"
qa_channel = "qa"
channels = ["general"]
theta = 0.25
k = 3

[bot]
id = "u-bot"
name = "OrgBot"

[provider]
kind = "mock"

[roster.u-manager]
display_name = "Morgan Manager"
role = "manager"

[roster.u-member]
display_name = "Casey Member"
role = "member"
"#;

pub fn load_config(common: &Common) -> Result<WorkspaceConfig> {
    if !common.config.exists() {
        bail!("config file {} not found", common.config.display());
    }
    let mut config = WorkspaceConfig::load(&common.config)
        .with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(k) = common.k {
        config.k = k;
    }
    if let Some(theta) = common.theta {
        config.theta = theta;
    }
    config.validate().context("invalid configuration")?;
    Ok(config)
}

pub fn init(root: &Path) -> Result<()> {
    if root.exists() {
        let non_empty = fs::read_dir(root)
            .with_context(|| format!("reading {}", root.display()))?
            .next()
            .is_some();
        if non_empty {
            bail!(
                "{} already exists and is not empty; refusing to overwrite it",
                root.display()
            );
        }
    }
    let repo = root.join("repo");
    fs::create_dir_all(&repo).with_context(|| format!("creating {}", repo.display()))?;
    fs::write(repo.join("handbook.md"), SAMPLE_HANDBOOK)?;
    fs::write(repo.join(JOURNAL_FILE), "")?;
    fs::write(root.join("config.toml"), SAMPLE_CONFIG)?;
    // later direct edits are measured against the scaffold as written now
    DocStore::open(&repo)?.pin_baseline()?;
    println!("initialized workspace in {}", root.display());
    println!(
        "next: orgmem serve --config {}",
        root.join("config.toml").display()
    );
    Ok(())
}

pub fn reindex(common: &Common, author: Option<String>) -> Result<()> {
    let config = load_config(common)?;
    let author = author
        .map(UserId::new)
        .unwrap_or_else(|| config.bot.id.clone());
    let mut gateway = Gateway::open(config)?;
    match gateway.reindex(&author, Utc::now())? {
        Some(record) => println!(
            "adopted direct edits as commit {} ({}; +{} -{} words)",
            record.commit_id,
            record.files().join(", "),
            record.words_added,
            record.words_deleted
        ),
        None => println!("no direct edits to adopt"),
    }
    println!(
        "index holds {} chunks at revision {}",
        gateway.index().len(),
        gateway.index().indexed_revision()
    );
    Ok(())
}

pub fn ask(common: &Common, user: Option<String>, question: &str) -> Result<()> {
    let config = load_config(common)?;
    let user = user
        .map(UserId::new)
        .unwrap_or_else(|| UserId::new("operator"));
    let provider = config.provider.build(config.dimension)?;
    let store = DocStore::open(&config.repo_root)?.detached();
    let mut gateway = Gateway::with_audit(config, store, provider, AuditLog::in_memory())?;
    let event = ChatEvent::message(
        "ask-1",
        EventKind::DmMessage,
        ConversationId::dm(&user),
        user,
        question,
        Utc::now(),
    );
    let actions = gateway.ingest_question(&event)?;
    for action in &actions {
        match &action.payload {
            Payload::Answer { text, anchors, .. } => {
                println!("{text}");
                if !anchors.is_empty() {
                    println!();
                    println!("References:");
                    for anchor in anchors {
                        println!("- {anchor}");
                    }
                }
            }
            Payload::Error { message, .. } => bail!("{message}"),
            _ => {}
        }
    }
    Ok(())
}

pub fn replay(common: &Common, transcript: &Path, audit: Option<PathBuf>) -> Result<()> {
    let config = load_config(common)?;
    let events = read_transcript(transcript)?;
    let audit_path = audit.unwrap_or_else(|| config.audit_path());
    let log = AuditLog::create(&audit_path)?;
    let provider = config.provider.build(config.dimension)?;
    // commits made during replay stay in memory; the repository is untouched
    let store = DocStore::open(&config.repo_root)?.detached();
    let mut adapter = SimulatedAdapter::new(Gateway::with_audit(config, store, provider, log)?);
    let mut deliveries = 0;
    for event in &events {
        deliveries += adapter.send(event)?.len();
    }
    let gateway = adapter.gateway();
    println!(
        "replayed {} events ({} deliveries, {} commits); audit log written to {}",
        events.len(),
        deliveries,
        gateway.store().revision(),
        audit_path.display()
    );
    Ok(())
}

pub fn stats(
    common: &Common,
    log: Option<PathBuf>,
    output: Option<PathBuf>,
    format: Format,
) -> Result<()> {
    let log = match log {
        Some(path) => path,
        None => load_config(common)?.audit_path(),
    };
    let entries = read_log(&log).with_context(|| format!("reading audit log {}", log.display()))?;
    let report = summarize(&entries);
    let text = match format {
        Format::Json => report.to_json(),
        Format::Table => report.to_table(),
    };
    match output {
        Some(path) => {
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}
